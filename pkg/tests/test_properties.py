"""Hypothesis-driven checks of structural identities and inequalities."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fraplace.domain import build_grid
from fraplace.nonlocal_core import (apply_operator, assemble_kernel, energy_and_operator,
                                    gagliardo_energy, picone_gap)
from fraplace.reactions import eval_F, eval_f, exponential_paper, logistic, truncate
from fraplace.spectral import rayleigh_quotient

N = 12
GRID = build_grid(0, 1, N)
KERNELS = {p: assemble_kernel(GRID, 0.4, p) for p in (1.5, 2.0, 2.5, 3.0)}

ps = st.sampled_from(sorted(KERNELS))
fields = arrays(np.float64, N, elements=st.floats(-5, 5, allow_nan=False))
positive = arrays(np.float64, N, elements=st.floats(0.05, 5))
SETTINGS = settings(max_examples=60, deadline=None)


def close(a, b, rel=1e-10):
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


@SETTINGS
@given(p=ps, u=fields, c=st.floats(-4, 4).filter(lambda c: abs(c) > 1e-3))
def test_homogeneity(p, u, c):
    k = KERNELS[p]
    assert close(gagliardo_energy(k, c * u), abs(c) ** p * gagliardo_energy(k, u))


@SETTINGS
@given(p=ps, u=fields)
def test_duality(p, u):
    e, g = energy_and_operator(KERNELS[p], u)
    assert close(float(g @ u), e)


@SETTINGS
@given(p=ps, u=fields)
def test_sign_parts(p, u):
    k = KERNELS[p]
    g = apply_operator(k, u)
    up, um = np.maximum(u, 0), np.maximum(-u, 0)
    scale = 1e-10 * max(1.0, gagliardo_energy(k, u))
    assert gagliardo_energy(k, up) <= g @ up + scale
    assert gagliardo_energy(k, um) <= -(g @ um) + scale


@SETTINGS
@given(p=ps, u=fields)
def test_contraction(p, u):
    k = KERNELS[p]
    assert gagliardo_energy(k, np.abs(u)) <= gagliardo_energy(k, u) * (1 + 1e-12) + 1e-300


@SETTINGS
@given(p=ps, u=fields, v=fields)
def test_submodularity(p, u, v):
    k = KERNELS[p]
    lhs = gagliardo_energy(k, np.maximum(u, v)) + gagliardo_energy(k, np.minimum(u, v))
    rhs = gagliardo_energy(k, u) + gagliardo_energy(k, v)
    assert lhs <= rhs + 1e-10 * max(1.0, rhs)


@SETTINGS
@given(p=st.sampled_from([1.5, 2.0, 3.0]), a=st.floats(1e-3, 10), b=st.floats(1e-3, 10),
       c=st.floats(0, 10), d=st.floats(0, 10))
def test_picone(p, a, b, c, d):
    assert picone_gap(p, a, b, c, d) >= -1e-12 * max(1.0, c, d) ** p


@SETTINGS
@given(p=ps, u=positive, t=st.floats(0.1, 10))
def test_rayleigh_scale_invariance(p, u, t):
    a = np.linspace(-1, 1, N)
    assert close(rayleigh_quotient(KERNELS[p], GRID, a, t * u), rayleigh_quotient(KERNELS[p], GRID, a, u))


REACTIONS = [logistic(3.0, 2.0, 4.0, 2.0), logistic(1.0, 1.5, 3.0, 2.0),
             exponential_paper(1.0, 3.0, 2.0), exponential_paper(2.0, 3.5, 2.5)]


@SETTINGS
@given(r=st.sampled_from(REACTIONS), k=st.one_of(st.none(), st.integers(1, 16)), t=st.floats(-3, 4))
def test_primitive_derivative(r, k, t):
    rk = r if k is None else truncate(r, k)
    e = 1e-6
    fd = (eval_F(rk, 0.5, t + e) - eval_F(rk, 0.5, t - e)) / (2 * e)
    # skip points within one step of a kink of f_k or of t = 0
    f_lo, f_hi = eval_f(rk, 0.5, t - e), eval_f(rk, 0.5, t + e)
    if abs(t) < 2 * e or abs(f_hi - f_lo) > 1e-3:
        return
    assert abs(fd - eval_f(rk, 0.5, t)) <= 1e-5 * max(1.0, abs(fd))


@SETTINGS
@given(r=st.sampled_from(REACTIONS), t=st.floats(-3, 8), k=st.integers(1, 30))
def test_truncation_chain(r, t, k):
    assert eval_f(truncate(r, k), 0.5, t) >= eval_f(truncate(r, k + 1), 0.5, t) >= eval_f(r, 0.5, t)


@SETTINGS
@given(r=st.sampled_from(REACTIONS), t=st.floats(-5, -1e-9))
def test_extension_below_zero(r, t):
    assert eval_f(r, 0.5, t) == eval_f(r, 0.5, 0.0)


@SETTINGS
@given(r=st.sampled_from(REACTIONS), t=st.floats(0.05, 20))
def test_quotient_nonincreasing(r, t):
    p = r.p
    q1 = eval_f(r, 0.5, t) / t ** (p - 1)
    q2 = eval_f(r, 0.5, 1.01 * t) / (1.01 * t) ** (p - 1)
    assert q2 <= q1 + 1e-12 * max(1.0, abs(q1))


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_operator_positive_part_decreases_energy(p):
    """Replacing a field by its positive part never increases the energy."""
    rng = np.random.default_rng(0)
    k = KERNELS[p]
    for _ in range(50):
        u = rng.normal(size=N)
        assert gagliardo_energy(k, np.maximum(u, 0)) <= gagliardo_energy(k, u) + 1e-12
