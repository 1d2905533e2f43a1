import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roughheat.grid import HALF_PLANE, Field, GridSpec, spectral_derivative
from roughheat.kernel import convolve, psi_hat
from roughheat.noise import CovarianceSpec, ForcingSample, mollified_forcing, sample_forcing
from roughheat.norms import ModellingReport, NormConfig, commutator_norm, default_ladder, neg_norm_conv
from roughheat.products import (ProductHandle, classical_singular_product, combined_product, ladder_limit,
                                leibniz_product, leibniz_product_spectral, raw_product, reconstruct_F_d2U,
                                reconstruct_U_product, renorm_constant, renorm_table, renormalized_product,
                                renormalized_product_stack, singular_weight)
from roughheat.refsol import heat_layer_derivatives, heat_layer_V, periodic_v_family, solve_periodic_v, weierstrass_data

G16 = GridSpec(16, 16)
SPEC1 = CovarianceSpec.white_in_time(alpha_prime=0.85, amplitude=1.0, cutoff=1)


def _hand_g2(spec, eps, a, b):
    """Explicit sum over the 3 x 3 mode block of a cutoff-1 spectrum."""
    total = 0.0
    for m1 in (-1, 0, 1):
        for m2 in (-1, 0, 1):
            k1, k2 = 2 * math.pi * m1, 2 * math.pi * m2
            C = spec.density(k1, k2)
            mult = math.exp(-eps * (k1**4 + k2**2))
            La = complex(a * k1**2 + 1, k2)
            Lb = complex(b * k1**2 + 1, -k2)
            total += (C * mult**2 * -(k1**2) / (La * Lb)).real
    return total


def test_g2_hand_evaluation():
    for eps, a, b in [(1e-3, 0.5, 0.5), (1e-2, 0.3, 0.9), (2.0**-9, 1.0, 0.25)]:
        assert renorm_constant(SPEC1, eps, a, b) == pytest.approx(_hand_g2(SPEC1, eps, a, b), rel=1e-13)


@given(st.floats(0.25, 1.0), st.floats(0.25, 1.0), st.integers(4, 12))
@settings(max_examples=20)
def test_g2_is_symmetric(a, b, j):
    spec = CovarianceSpec.white_in_time(cutoff=5)
    assert renorm_constant(spec, 2.0**-j, a, b) == pytest.approx(renorm_constant(spec, 2.0**-j, b, a), rel=1e-12)


def test_g2_table_shape():
    t = renorm_table(SPEC1, 1e-3, [0.3, 0.5, 0.7], [0.4, 0.6])
    assert t.shape == (3, 2)
    assert t[1, 0] == pytest.approx(renorm_constant(SPEC1, 1e-3, 0.5, 0.4), rel=1e-14)


def test_g2_matches_monte_carlo():
    spec = CovarianceSpec.white_in_time(alpha_prime=0.85, amplitude=1.0, cutoff=3)
    eps, a, b = 2.0**-8, 0.5, 0.7
    vals = []
    for s in range(10_000):
        fe = mollified_forcing(sample_forcing(spec, G16, s), eps)
        va = solve_periodic_v(fe, a).values
        vb = spectral_derivative(solve_periodic_v(fe, b), 1, 2).values
        vals.append(va[3, 5] * vb[3, 5])
    vals = np.array(vals)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - renorm_constant(spec, eps, a, b)) <= 3 * se


def test_zero_spectrum_gives_zero_product():
    spec0 = CovarianceSpec.white_in_time(cutoff=0)
    f = ForcingSample(Field.zeros(G16), 0, spec0)
    h, P = renormalized_product(f, 1e-3, 0.5, 0.5)
    assert renorm_constant(spec0, 1e-3, 0.5, 0.5) == 0.0
    assert np.all(P.values == 0)
    assert h.kind == "renormalized" and h.counterterm == {(0.5, 0.5): 0.0}


def test_renormalized_product_has_small_mean():
    spec = CovarianceSpec.white_in_time(amplitude=1.0, cutoff=3)
    means = np.array([np.mean(renormalized_product(sample_forcing(spec, G16, s), 2.0**-8, 0.5, 0.6)[1].values)
                      for s in range(400)])
    assert abs(means.mean()) <= 3 * means.std(ddof=1) / math.sqrt(means.size)
    raw = np.array([np.mean(raw_product(sample_forcing(spec, G16, s), 2.0**-8, 0.5, 0.6).values)
                    for s in range(400)])
    assert raw.mean() == pytest.approx(renorm_constant(spec, 2.0**-8, 0.5, 0.6), rel=0.1)


def test_renormalized_cauchy_increments_decrease_on_resolved_ladder():
    spec = CovarianceSpec.white_in_time(amplitude=1.0, cutoff=7)
    f = sample_forcing(spec, GridSpec(32, 32), 3)
    # every mode resolved: eps * k_max^4 << 1 along the whole ladder
    ladder = [2.0**-j for j in range(26, 32)]
    prods = [renormalized_product(f, e, 0.5, 0.5)[1] for e in ladder]
    inc = [neg_norm_conv(prods[k + 1] - prods[k], 2 - 0.75).value for k in range(len(prods) - 1)]
    assert all(inc[k + 1] < inc[k] for k in range(len(inc) - 1))


def test_parameter_derivative_stack_matches_finite_differences():
    spec = CovarianceSpec.white_in_time(amplitude=1.0, cutoff=3)
    f = sample_forcing(spec, G16, 1)
    h = 1e-4
    _, P1 = renormalized_product_stack(f, 2.0**-8, [0.5], [0.6], order=(1, 0))
    _, Pp = renormalized_product_stack(f, 2.0**-8, [0.5 + h], [0.6])
    _, Pm = renormalized_product_stack(f, 2.0**-8, [0.5 - h], [0.6])
    fd = (Pp - Pm) / (2 * h)
    assert np.max(np.abs(fd - P1)) <= 1e-6 * np.max(np.abs(P1))


def test_product_handle_validation():
    with pytest.raises(ValueError):
        ProductHandle("magic")
    with pytest.raises(ValueError):
        ProductHandle("renormalized")
    with pytest.raises(ValueError):
        ProductHandle("combined", ("a",))
    h = ProductHandle("renormalized", ("v", "d11v"), 1e-3, {(0.5, 0.6): -1.0})
    assert json.loads(h.to_json())["counterterm"] == [[0.5, 0.6, -1.0]]


# --- Leibniz and classical boundary products ----------------------------------------------------

def _modes(grid):
    G = Field.from_function(grid, lambda x1, x2: np.cos(2 * np.pi * x1) * (1 + np.sin(2 * np.pi * x2)))
    F = Field.from_function(grid, lambda x1, x2: np.sin(2 * np.pi * 2 * x1) + np.cos(2 * np.pi * x2))
    return G, F


def test_leibniz_examples():
    G, F = _modes(G16)
    c = Field(G16, np.full(G16.shape, 1.7))
    assert np.max(np.abs(leibniz_product_spectral(G, c).values)) <= 1e-10
    expect = G * spectral_derivative(F, 1, 2)
    assert np.max(np.abs(leibniz_product_spectral(G, F).values - expect.values)) <= 1e-8


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=15)
def test_leibniz_is_bilinear(s, t):
    G, F = _modes(G16)
    G2, F2 = F, G
    lhs = leibniz_product_spectral(G * s + G2 * t, F).values
    rhs = s * leibniz_product_spectral(G, F).values + t * leibniz_product_spectral(G2, F).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-9
    lhs = leibniz_product_spectral(G, F * s + F2 * t).values
    rhs = s * leibniz_product_spectral(G, F).values + t * leibniz_product_spectral(G, F2).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_leibniz_requires_derivatives():
    G, F = _modes(G16)
    with pytest.raises(ValueError):
        leibniz_product(G, F)


def test_leibniz_with_heat_layer_derivatives():
    g = weierstrass_data(32, 0.75, seed=0)
    H = GridSpec(32, 32, HALF_PLANE, 1.0)
    V = heat_layer_V(g, 0.5, H)
    dV = heat_layer_derivatives(g, 0.5, 0, H, x1_order=1)
    d2V = heat_layer_derivatives(g, 0.5, 0, H, x1_order=2)
    F = Field.from_function(H, lambda x1, x2: np.cos(2 * np.pi * x1) + x2)
    out = leibniz_product(V, F, dV, d2V)
    expect = V * spectral_derivative(F, 1, 2)
    assert np.max(np.abs(out.values - expect.values)) <= 1e-9 * max(1.0, np.max(np.abs(expect.values)))


def test_classical_singular_product_examples():
    H = GridSpec(32, 32, HALF_PLANE, 1.0)
    g = weierstrass_data(32, 0.75, seed=0)
    d2V = heat_layer_derivatives(g, 0.5, 0, H, x1_order=2)
    zero, _ = classical_singular_product(Field.zeros(H), d2V)
    assert np.all(zero.values == 0)
    one, CG = classical_singular_product(Field(H, np.ones(H.shape)), d2V)
    np.testing.assert_array_equal(one.values, d2V.values)
    w = singular_weight(H, 0.75)
    assert CG == pytest.approx(np.max(np.abs(d2V.values) / w[None, :]), rel=1e-15)
    assert w[0] == (H.dx2 / 2) ** ((0.75 - 2) / 2) + (H.dx2 / 2) ** ((1.5 - 2) / 2)
    with pytest.raises(ValueError):
        classical_singular_product(Field(H, np.ones(H.shape)), d2V, weight_cap=1e-6)


def test_classical_commutator_scales_with_F_seminorm_stably():
    consts = []
    for n in (32, 64):
        H = GridSpec(n, n, HALF_PLANE, 1.0)
        g = weierstrass_data(n, 0.75, seed=0)
        d2V = heat_layer_derivatives(g, 0.5, 0, H, x1_order=2)
        F = Field.from_function(H, lambda x1, x2: 0.1 * np.cos(2 * np.pi * x1) * np.exp(-x2))
        P, CG = classical_singular_product(F, d2V)
        from roughheat.norms import holder_seminorm
        c = commutator_norm(F, d2V, P, NormConfig(dyadic_T=default_ladder(16))).value
        consts.append(c / (CG * holder_seminorm(F, 0.75).value))
    assert max(consts) / min(consts) < 3


def test_combined_product_examples():
    G, F = _modes(G16)
    h1 = ProductHandle("classical")
    zero = (ProductHandle("classical"), Field.zeros(G16))
    part = (h1, G * F)
    handle, out = combined_product([part, zero])
    np.testing.assert_array_equal(out.values, (G * F).values)
    assert handle.kind == "combined"
    with pytest.raises(ValueError):
        combined_product([part, zero], mode="half")


def test_commutator_norm_is_subadditive_over_parts():
    G, F = _modes(G16)
    h = convolve(Field(G16, np.random.default_rng(0).standard_normal(G16.shape)), 1e-3)
    p1, p2 = G * h, F * h
    _, both = combined_product([(ProductHandle("classical"), p1), (ProductHandle("classical"), p2)])
    lhs = commutator_norm(G + F, h, both).value
    assert lhs <= commutator_norm(G, h, p1).value + commutator_norm(F, h, p2).value + 1e-9


# --- reconstruction ---------------------------------------------------------------------------

def _family(grid):
    f = convolve(Field(grid, np.random.default_rng(9).standard_normal(grid.shape)), 1e-3)
    return periodic_v_family(f, np.array([0.4, 0.5, 0.6, 0.7]), max_order=0)


def test_reconstruction_of_trivially_modelled_function():
    fam = _family(G16)
    U = Field.from_function(G16, lambda x1, x2: np.sin(2 * np.pi * x1) * np.cos(2 * np.pi * x2))
    h = Field.from_function(G16, lambda x1, x2: np.cos(2 * np.pi * (x1 + x2)))
    model = ModellingReport(0.0, [0.0], [0.5], spectral_derivative(U, 1), ["v"])
    base = np.zeros(fam.values.shape)
    errs = [np.max(np.abs(reconstruct_U_product(U, model, fam, base, h, T).values - (U * h).values))
            for T in (1e-6, 1e-7, 1e-8)]
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-3


def test_reconstruction_of_exact_model_is_the_offline_product():
    fam = _family(G16)
    a0, sigma = 0.5, 1.7
    U = fam.entry(a0) * sigma
    h = Field.from_function(G16, lambda x1, x2: np.sin(2 * np.pi * 3 * x1))
    base = np.stack([fam.values[j] * h.values + 0.1 * j for j in range(4)])
    model = ModellingReport(0.0, [sigma], [a0], Field.zeros(G16), ["v"])
    T = 1e-3
    out = reconstruct_U_product(U, model, fam, base, h, T)
    expect = sigma * convolve(Field(G16, base[1]), T).values
    assert np.max(np.abs(out.values - expect)) <= 1e-12


def test_reconstruct_F_d2U_examples():
    fam = _family(G16)
    U = Field.from_function(G16, lambda x1, x2: np.sin(2 * np.pi * x1) * np.cos(2 * np.pi * x2))
    F = Field.from_function(G16, lambda x1, x2: 1 + 0.5 * np.cos(2 * np.pi * x2))
    model = ModellingReport(0.0, [0.0], [0.5], spectral_derivative(U, 1), ["v"])
    base = np.zeros(fam.values.shape)
    classical = F * spectral_derivative(U, 1, 2)
    errs = [np.max(np.abs(reconstruct_F_d2U(F, U, model, fam, base, T).values - classical.values))
            for T in (1e-4, 1e-5, 1e-6)]
    assert errs[0] > errs[1] > errs[2]
    c = Field(G16, np.full(G16.shape, 2.0))
    out = reconstruct_F_d2U(c, U, model, fam, base, 1e-4)
    P = spectral_derivative(U, 1, 2) * 2.0
    assert commutator_norm(c, spectral_derivative(U, 1, 2), P).value <= 1e-12
    np.testing.assert_allclose(out.values, 2 * spectral_derivative(convolve(U, 1e-4), 1, 2).values, atol=1e-12)


def test_ladder_limit_extrapolates_geometric_sequences():
    grid = GridSpec(4, 4)
    target = np.arange(16.0).reshape(4, 4)
    build = lambda T: Field(grid, target + T)  # noqa: E731
    rep = ladder_limit(build, [2.0**-j for j in range(1, 7)])
    assert all(r == pytest.approx(0.5) for r in rep.ratios)
    np.testing.assert_allclose(rep.extrapolated.values, target, atol=1e-14)
    flat = ladder_limit(lambda T: Field(grid, target + (1 if T > 0.1 else 0)), [1.0, 0.5, 0.01, 0.001])
    assert flat.extrapolated is None
    assert rep.summary()["extrapolated"] is True
