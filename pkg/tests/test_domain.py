import numpy as np
import pytest

from fraplace.domain import boundary_power, build_grid, build_rect_grid


class TestBuildGrid:
    def test_unit_interval_three_nodes(self):
        g = build_grid(0, 1, 3)
        assert g.h == 0.25
        np.testing.assert_allclose(g.nodes, [0.25, 0.5, 0.75])
        np.testing.assert_allclose(g.dist, [0.25, 0.5, 0.25])

    def test_symmetric_interval(self):
        g = build_grid(-1, 1, 3)
        np.testing.assert_allclose(g.nodes, [-0.5, 0.0, 0.5], atol=1e-15)
        np.testing.assert_allclose(g.dist, [0.5, 1.0, 0.5])

    def test_single_node_rejected(self):
        with pytest.raises(ValueError, match="domain.n"):
            build_grid(0, 1, 1)

    def test_empty_interval_rejected(self):
        with pytest.raises(ValueError, match="hi > lo"):
            build_grid(1, 1, 5)

    @pytest.mark.parametrize("n", [2, 7, 64, 129])
    def test_invariants(self, n):
        g = build_grid(-0.3, 2.1, n)
        assert np.all(np.diff(g.nodes) > 0)
        assert g.nodes[0] > g.lo and g.nodes[-1] < g.hi
        assert np.all(g.dist > 0)
        np.testing.assert_array_equal(g.dist, g.dist[::-1])
        assert g.cell == g.h and g.dim == 1
        assert g.points.shape == (n, 1)


class TestRectGrid:
    def test_square(self):
        g = build_rect_grid((0, 0), (1, 1), (3, 3))
        assert g.n == 9 and g.dim == 2
        assert g.cell == pytest.approx(0.0625)
        assert g.dist[4] == pytest.approx(0.5)
        assert g.dist.min() == pytest.approx(0.25)

    def test_unequal_spacing_rejected(self):
        with pytest.raises(ValueError, match="spacings"):
            build_rect_grid((0, 0), (1, 2), (3, 3))


class TestBoundaryPower:
    def test_half_power(self):
        out = boundary_power(build_grid(0, 1, 3), 0.5)
        np.testing.assert_allclose(out, [0.5, np.sqrt(0.5), 0.5])

    def test_s_one_rejected(self):
        with pytest.raises(ValueError):
            boundary_power(build_grid(0, 1, 3), 1.0)

    def test_unit_distance(self):
        np.testing.assert_array_equal(boundary_power(np.array([1.0]), 0.3), [1.0])
