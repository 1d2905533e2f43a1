import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roughheat.grid import HALF_PLANE, TORUS, Field, GridSpec, offset_distance, spectral_derivative, trivial_extension
from roughheat.kernel import convolve, psi_hat
from roughheat.norms import (NormConfig, NormReport, commutator_norm, default_ladder, holder_norm_1d,
                             holder_seminorm, least_squares_objective, local_holder_seminorm, modelling_constant,
                             neg_norm_conv, neg_norm_triplet, tail_decay_report, triplet_solution, witness_ratio)
from roughheat.products import ProductHandle
from roughheat.refsol import ParamGrid, periodic_v_family

EXH = NormConfig(method="exhaustive")
G16 = GridSpec(16, 16)


def _brute_force_holder(values, grid, alpha):
    """Every ordered pair of grid points, no offset tricks."""
    n1, rows = values.shape
    I, J = np.meshgrid(np.arange(n1), np.arange(rows), indexing="ij")
    I, J, V = I.ravel(), J.ravel(), values.ravel()
    best = 0.0
    for p in range(V.size):
        d = offset_distance(grid, I - I[p], J - J[p])
        ok = d > 0
        best = max(best, float(np.max(np.abs(V[ok] - V[p]) / d[ok] ** alpha)))
    return best


def _random_field(grid, seed, smooth=None):
    f = Field(grid, np.random.default_rng(seed).standard_normal(grid.shape))
    return convolve(f, smooth) if smooth else f


def test_norm_config_validation():
    with pytest.raises(ValueError):
        NormConfig(alpha=1.2)
    with pytest.raises(ValueError):
        NormConfig(dyadic_T=default_ladder(4))
    with pytest.raises(ValueError):
        NormConfig(method="guess")


def test_holder_constant_is_zero():
    assert holder_seminorm(Field(G16, np.full(G16.shape, 4.0)), 0.75).value == 0.0


@pytest.mark.parametrize("kind", [TORUS, HALF_PLANE])
def test_holder_exhaustive_matches_brute_force(kind):
    g = GridSpec(8, 8, kind, 1.0)
    f = _random_field(g, 7)
    assert holder_seminorm(f, 0.6, EXH).value == pytest.approx(_brute_force_holder(f.values, g, 0.6), rel=1e-14)


def test_holder_of_single_mode_sampled_matches_exhaustive():
    g = GridSpec(64, 64)
    f = Field.from_function(g, lambda x1, x2: np.cos(2 * np.pi * x1))
    exact = holder_seminorm(f, 0.75, EXH)
    sampled = holder_seminorm(f, 0.75, NormConfig(method="sampled", pair_budget=100_000))
    assert exact.method == "exhaustive" and sampled.method == "sampled"
    assert sampled.value == pytest.approx(exact.value, rel=0.05)
    assert sampled.value <= exact.value + 1e-12


@given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3), st.integers(0, 100))
@settings(max_examples=15, deadline=None)
def test_holder_homogeneity(c, seed):
    f = _random_field(GridSpec(8, 8), seed)
    assert holder_seminorm(f * c, 0.5, EXH).value == pytest.approx(abs(c) * holder_seminorm(f, 0.5, EXH).value,
                                                                     rel=1e-13)


@given(st.integers(0, 1000), st.integers(0, 1000))
@settings(max_examples=15, deadline=None)
def test_norms_are_subadditive(s1, s2):
    g = GridSpec(8, 8)
    f, h = _random_field(g, s1), _random_field(g, s2)
    for fn in (lambda x: holder_seminorm(x, 0.5, EXH).value, lambda x: neg_norm_conv(x, 1.25).value,
               lambda x: neg_norm_triplet(x, 0.75, EXH).value):
        assert fn(f + h) <= fn(f) + fn(h) + 1e-9


@given(st.integers(0, 1000))
@settings(max_examples=10, deadline=None)
def test_witness_reproduces_value(seed):
    for g in (GridSpec(8, 8), GridSpec(8, 8, HALF_PLANE, 1.0), GridSpec(64, 64)):
        f = _random_field(g, seed)
        rep = holder_seminorm(f, 0.7)
        assert abs(witness_ratio(f, rep.witness, 0.7) - rep.value) <= 1e-12 * rep.value


def test_local_seminorm_properties():
    g = GridSpec(16, 16, HALF_PLANE, 4.0)
    f = _random_field(g, 11)
    loc = local_holder_seminorm(f, 0.5, EXH).value
    assert loc <= holder_seminorm(f, 0.5, EXH).value
    assert local_holder_seminorm(Field(g, np.ones(g.shape)), 0.5, EXH).value == 0.0
    # large-scale Lipschitz bound for pairs at distance >= 1
    X1, X2 = g.mesh()
    x1, x2, v = X1.ravel(), X2.ravel(), f.values.ravel()
    for p in range(0, v.size, 7):
        dx = np.abs(x1 - x1[p])
        d = np.minimum(dx, 1 - dx) + np.sqrt(np.abs(x2 - x2[p]))
        far = d >= 1
        assert np.all(np.abs(v[far] - v[p]) <= 2 * loc * d[far] + 1e-12)


def test_holder_higher_orders_use_derivatives():
    f = Field.from_function(G16, lambda x1, x2: np.sin(2 * np.pi * x1) + np.cos(2 * np.pi * x2))
    r = holder_seminorm(f, 1.5, EXH)
    assert r.value == pytest.approx(holder_seminorm(spectral_derivative(f, 1), 0.5, EXH).value, rel=1e-14)
    with pytest.raises(ValueError):
        holder_seminorm(f, 1.0)


def test_holder_norm_1d_matches_brute_force():
    v = np.random.default_rng(2).standard_normal(32)
    x = np.arange(32) / 32
    best = 0.0
    for i in range(32):
        for j in range(32):
            if i != j:
                d = abs(x[i] - x[j])
                d = min(d, 1 - d)
                best = max(best, abs(v[i] - v[j]) / d**0.75)
    assert holder_norm_1d(v, 0.75) == pytest.approx(np.max(np.abs(v)) + best, rel=1e-14)


def test_neg_norm_conv_examples():
    cfg = NormConfig()
    assert neg_norm_conv(Field.zeros(G16), 1.25, cfg).value == 0.0
    f = Field.from_function(G16, lambda x1, x2: np.cos(2 * np.pi * x1))
    beta = 2 - 0.75
    expect = max(T ** (beta / 4) * np.exp(-T * (2 * np.pi) ** 4) for T in cfg.dyadic_T)
    rep = neg_norm_conv(f, beta, cfg)
    assert rep.value == pytest.approx(expect, rel=1e-12)
    assert neg_norm_conv(f * -3.0, beta, cfg).value == pytest.approx(3 * rep.value, rel=1e-14)
    d = json.loads(rep.to_json())
    assert set(d) == {"value", "witness", "method", "alpha", "ladder"}


@given(st.integers(0, 1000))
@settings(max_examples=10, deadline=None)
def test_neg_norm_contracts_under_smoothing(seed):
    cfg = NormConfig()
    f = _random_field(G16, seed)
    t = min(cfg.dyadic_T)
    assert neg_norm_conv(convolve(f, t), 1.25, cfg).value <= (1 + 1e-9) * neg_norm_conv(f, 1.25, cfg).value


def test_triplet_single_mode():
    f = Field.from_function(G16, lambda x1, x2: np.cos(2 * np.pi * x1))
    u = triplet_solution(f)
    np.testing.assert_allclose(u.values, f.values / ((2 * np.pi) ** 4 + 1), atol=1e-15)
    assert neg_norm_triplet(Field.zeros(G16), 0.75).value == 0.0
    rep = neg_norm_triplet(f, 0.75, NormConfig(method="exhaustive"))
    parts = (holder_seminorm(spectral_derivative(u, 1, 2), 0.75, EXH).value
             + holder_seminorm(spectral_derivative(u, 2), 0.75, EXH).value
             + holder_seminorm(u, 0.75, EXH).value + u.sup())
    assert rep.value == pytest.approx(parts, rel=1e-14)


# --- modelling --------------------------------------------------------------------------------

def _v_family(grid, seed=0):
    f = _random_field(grid, seed, smooth=1e-4)
    return f, periodic_v_family(f, ParamGrid().values[4:8], max_order=0)


def test_exact_model_of_itself():
    g = GridSpec(16, 16)
    _, fam = _v_family(g)
    a0 = float(fam.a_values[1])
    U = fam.entry(a0)
    rep = modelling_constant(U, fam, a0, 1.0, EXH)
    assert rep.M <= 1e-8
    assert np.max(np.abs(rep.nu.values)) <= 1e-8


def _brute_force_trivial_model(U, nu, alpha2):
    g = U.grid
    n1, rows = g.shape
    best = 0.0
    for i in range(n1):
        for j in range(rows):
            for s1 in range(-(n1 // 2) + 1, n1 // 2 + 1):
                for s2 in range(-(rows // 2) + 1, rows // 2 + 1):
                    d = float(offset_distance(g, s1, s2))
                    if d == 0:
                        continue
                    r = U.values[(i + s1) % n1, (j + s2) % rows] - U.values[i, j] - nu.values[i, j] * s1 / n1
                    best = max(best, abs(r) / d**alpha2)
    return best


def test_trivially_modelled_smooth_function():
    g = GridSpec(8, 8)
    _, fam = _v_family(g)
    U = Field.from_function(g, lambda x1, x2: np.sin(2 * np.pi * x1) * np.cos(2 * np.pi * x2))
    nu = spectral_derivative(U, 1)
    rep = modelling_constant(U, fam, 0.5, 0.0, EXH, nu=nu)
    assert rep.M == pytest.approx(_brute_force_trivial_model(U, nu, 1.5), rel=1e-13)


@given(st.floats(0.1, 4.0))
@settings(max_examples=8, deadline=None)
def test_modelling_constant_homogeneity(c):
    g = GridSpec(16, 16)
    f, fam = _v_family(g, 3)
    a = Field(g, 0.51 + 0.05 * np.cos(2 * np.pi * g.mesh()[0]))
    U = fam.evaluate(a) + Field.from_function(g, lambda x1, x2: 1e-3 * np.sin(2 * np.pi * x1))
    base = modelling_constant(U, fam, a, 1.0, EXH)
    scaled = modelling_constant(U * c, fam, a, c, EXH, nu=base.nu * c)
    assert scaled.M == pytest.approx(c * base.M, rel=1e-10)


def test_fitted_nu_minimises_least_squares_objective():
    g = GridSpec(16, 16)
    f, fam = _v_family(g, 5)
    a = Field(g, 0.51 + 0.05 * np.sin(2 * np.pi * g.mesh()[1]))
    U = fam.evaluate(a) + Field.from_function(g, lambda x1, x2: 0.01 * np.cos(2 * np.pi * (x1 + x2)))
    rep = modelling_constant(U, fam, a, 1.0, EXH)
    best = least_squares_objective(U, fam, a, 1.0, rep.nu, EXH)
    rng = np.random.default_rng(0)
    for _ in range(5):
        pert = rep.nu * Field(g, 1 + rng.choice([-0.1, 0.1], size=g.shape))
        assert least_squares_objective(U, fam, a, 1.0, pert, EXH) >= best * (1 - 1e-12)


# --- commutators ------------------------------------------------------------------------------

def _classical(F, h):
    return ProductHandle("classical"), F * h


def test_commutator_of_constant_is_zero():
    h = _random_field(G16, 1)
    F = Field(G16, np.full(G16.shape, 2.0))
    _, P = _classical(F, h)
    assert commutator_norm(F, h, P).value <= 1e-13


def _dense_convolution(values, T):
    """Direct periodic convolution with psi_T sampled from its Fourier series."""
    n1, n2 = values.shape
    m1 = np.fft.fftfreq(n1, 1 / n1)
    m2 = np.fft.fftfreq(n2, 1 / n2)
    kern = np.real(np.fft.ifft2(psi_hat(2 * np.pi * m1[:, None], 2 * np.pi * m2[None, :], T)))
    out = np.zeros_like(values)
    for i in range(n1):
        for j in range(n2):
            out += values[i, j] * np.roll(np.roll(kern, i, axis=0), j, axis=1)
    return out


def test_commutator_matches_dense_convolution_oracle():
    g = GridSpec(64, 64)
    F = Field.from_function(g, lambda x1, x2: np.cos(2 * np.pi * x1))
    h = Field.from_function(g, lambda x1, x2: np.sin(2 * np.pi * (2 * x1 + x2)))
    _, P = _classical(F, h)
    cfg = NormConfig(dyadic_T=default_ladder(12))
    beta = 2 - 2 * cfg.alpha
    oracle = max(np.max(np.abs(F.values * _dense_convolution(h.values, T) - _dense_convolution(P.values, T)))
                 * T ** (beta / 4) for T in cfg.dyadic_T)
    assert commutator_norm(F, h, P, cfg).value == pytest.approx(oracle, abs=1e-8)


def test_commutator_homogeneous_in_F():
    F = _random_field(G16, 4, smooth=1e-3)
    h = _random_field(G16, 5, smooth=1e-3)
    one = commutator_norm(F, h, F * h).value
    two = commutator_norm(F * 2.0, h, (F * 2.0) * h).value
    assert two == pytest.approx(2 * one, rel=1e-12)


def test_commutator_parameter_quotients_need_step():
    F = _random_field(G16, 4)
    stack = np.stack([F.values, 2 * F.values, 3 * F.values])
    with pytest.raises(ValueError):
        commutator_norm(F, stack, stack[None] * 0, order=1, grid=G16)


# --- tails --------------------------------------------------------------------------------------

def test_tail_report_zero_field():
    g = GridSpec(16, 64, HALF_PLANE, 1.0)
    rep = tail_decay_report(trivial_extension(Field.zeros(g)), 0.75, 0.0, [0.25, 0.5])
    assert all(r[2] == 0.0 for r in rep["rows"])


def test_tail_report_profile_exponent_and_monotone_decay():
    g = GridSpec(16, 512, HALF_PLANE, 1.0)
    alpha = 0.75
    x2 = np.where(g.x2 == 0, g.dx2 / 2, g.x2)
    prof = Field(g, np.broadcast_to(x2 ** ((2 * alpha - 2) / 2), g.shape))
    Ts = [2.0**-j for j in range(6, 12)]
    rep = tail_decay_report(trivial_extension(prof), alpha, 0.0, [0.0, 0.05, 0.1, 0.2], Ts)
    # at the support edge the layer behaves like (T^(1/4))^(2 alpha - 2)
    assert rep["T_exponent"][0.0] == pytest.approx(rep["reference_exponent"], abs=0.1)
    for T in Ts:
        vals = [v for L, t, v in rep["rows"] if t == T]
        assert all(vals[k + 1] <= vals[k] for k in range(len(vals) - 1))


def test_norm_report_serialises():
    rep = NormReport(1.5, ((0, 1), (2, 3)), "exhaustive", 0.5)
    assert json.loads(rep.to_json())["witness"] == [[0, 1], [2, 3]]
