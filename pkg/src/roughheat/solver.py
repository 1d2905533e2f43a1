"""Linear and quasilinear solvers built from the decomposition U = u + q + w.

* ``u``: time-periodic solution of the regularized equation on the torus,
  by Picard iteration around a frozen coefficient.
* ``q``: boundary layer, the massive heat layer started from ``U_int - u``
  and evaluated at the smoothed coefficient ``a_bar``.
* ``w``: correction with explicit forcing, by semi-implicit time stepping
  from ``w = 0`` at the initial line.

Half-plane objects require ``t_max = 1`` and the torus ``n2`` so that the
periodic ``u`` restricts to half-plane rows without interpolation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import HALF_PLANE, TORUS, Field, GridSpec, restrict_to_half_plane, spectral_derivative, trivial_extension
from .kernel import convolve
from .noise import ForcingSample, mollified_forcing
from .norms import NormConfig, holder_norm, holder_seminorm, holder_norm_1d, modelling_constant, neg_norm_conv
from .products import ProductHandle, _d11, _interp_param, reconstruct_U_product, renormalized_product_stack
from .refsol import (BoundaryData, ParamFamily, ParamGrid, coefficient_layer, heat_layer_at,
                     heat_layer_family, periodic_v_family)

log = logging.getLogger(__name__)


class ContractionError(RuntimeError):
    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history or []


@dataclass(frozen=True)
class LinearSolveConfig:
    tau: float | None = None  # None: grid scale dx1^4
    picard_tol: float = 1e-10
    picard_max: int = 200
    frozen_a0: str = "mean"
    lam: float = 0.25
    a_cap: float = 0.1
    outer_tol: float = 1e-9
    outer_max: int = 30
    T_eval: float | None = None  # reconstruction scale; None: tau / 16
    enforce_cap: bool = False

    def __post_init__(self):
        if self.frozen_a0 not in ("mean", "midpoint"):
            raise ValueError("frozen_a0 must be 'mean' or 'midpoint'")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")

    def tau_for(self, grid: GridSpec) -> float:
        return self.tau if self.tau is not None else grid.dx1**4

    def T_eval_for(self, grid: GridSpec) -> float:
        return self.T_eval if self.T_eval is not None else self.tau_for(grid) / 16


@dataclass(eq=False)
class CoefficientProduct:
    """Offline products ``a <> d1^2 v(., a_j)`` on the nodes of ``family``."""

    a: Field
    family: ParamFamily
    stack: np.ndarray
    handle: ProductHandle

    def E_commutator(self, tau: float) -> Field:
        """``E[a, (.)_tau] <> d1^2 v = a d1^2 v_tau(a0) - (a <> d1^2 v(a0))_tau``
        at ``a0 = a(x)``."""
        grid = self.a.grid
        d2v = _d11(self.family.values, grid)
        C = np.empty(self.stack.shape)
        for j in range(C.shape[0]):
            C[j] = (self.a.values * convolve(Field(grid, d2v[j]), tau).values
                    - convolve(Field(grid, self.stack[j]), tau).values)
        return Field(grid, _interp_param(C, self.family.a_values, self.a.values))


def classical_coefficient_product(a: Field, family: ParamFamily) -> CoefficientProduct:
    """``a <> d1^2 v := a d1^2 v`` (deterministic, regular coefficient)."""
    stack = a.values[None] * _d11(family.values, a.grid)
    return CoefficientProduct(a, family, stack, ProductHandle("classical", ("a", "d11v")))


@dataclass(eq=False)
class SolutionBundle:
    u: Field
    q: Field
    w: Field
    U: Field
    reports: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    def identity_defect(self) -> float:
        u_half = restrict_to_half_plane(self.u, self.U.grid)
        return float(np.max(np.abs(self.U.values - (u_half.values + self.q.values + self.w.values))))


# --- helpers ----------------------------------------------------------------------------

def active_nodes(pgrid: ParamGrid, lo: float, hi: float) -> np.ndarray:
    """The uniform sub-grid of parameter nodes that covers ``[lo, hi]`` with
    full four-point stencils."""
    nodes = pgrid.values
    if nodes.size < 4:
        return nodes
    if lo < nodes[0] - 1e-12 or hi > nodes[-1] + 1e-12:
        raise ValueError(f"coefficient range [{lo:.4g}, {hi:.4g}] leaves [{nodes[0]}, {nodes[-1]}]")
    h = pgrid.spacing
    i0 = max(0, int(np.floor((lo - nodes[0]) / h)) - 1)
    i1 = min(nodes.size, int(np.ceil((hi - nodes[0]) / h)) + 2)
    if i1 - i0 < 4:
        i1 = min(nodes.size, i0 + 4)
        i0 = i1 - 4
    return nodes[i0:i1]


def _subgrid(pgrid: ParamGrid, a: Field) -> np.ndarray:
    return active_nodes(pgrid, float(a.values.min()), float(a.values.max()))


def _family(f: Field, nodes: np.ndarray, max_order: int = 2) -> ParamFamily:
    return periodic_v_family(f, nodes, max_order)


def torus_coefficient(a: Field, torus: GridSpec) -> Field:
    """Torus version of a coefficient: half-plane rows ``0..n2-1`` (one
    period) or the field itself."""
    if a.kind == TORUS:
        return a
    if a.grid.t_max != 1.0 or a.grid.n2 != torus.n2:
        raise ValueError("half-plane coefficient must cover exactly one period")
    return Field(torus, a.values[:, : torus.n2])


def half_coefficient(a: Field, half: GridSpec) -> Field:
    return a if a.kind == HALF_PLANE else restrict_to_half_plane(a, half)


def frozen_constant(a: Field, cfg: LinearSolveConfig) -> float:
    v = a.values
    a0 = float(v.mean()) if cfg.frozen_a0 == "mean" else 0.5 * float(v.min() + v.max())
    return min(max(a0, cfg.lam), 1.0)


# --- u ----------------------------------------------------------------------------------

def solve_linear_periodic_u(f: Field, a: Field, products: CoefficientProduct | None,
                            cfg: LinearSolveConfig, norm_cfg: NormConfig | None = None,
                            pgrid: ParamGrid | None = None, with_model: bool = True):
    """Fixed point of ``u = L_{a*}^{-1}(f_tau - E + (a - a*) d1^2 u)`` with
    ``L_{a*} = d2 - a* d1^2 + 1``.  Returns ``(u, info)`` where ``info``
    holds the Picard residuals, the measured contraction factor and (if
    requested) the modelling report of ``u`` after ``v`` according to ``a``."""
    if f.kind != TORUS or a.kind != TORUS:
        raise ValueError("the periodic solve needs torus forcing and coefficient")
    grid = f.grid
    pgrid = pgrid or ParamGrid(cfg.lam)
    if a.values.min() < cfg.lam - 1e-12 or a.values.max() > 1 + 1e-12:
        raise ValueError("coefficient leaves [lambda, 1]")
    norm_cfg = norm_cfg or NormConfig()
    a_semi = holder_seminorm(a, norm_cfg.alpha, norm_cfg).value
    if cfg.enforce_cap and a_semi > cfg.a_cap:
        raise ValueError(f"[a]_alpha = {a_semi:.3g} exceeds the cap {cfg.a_cap}")
    tau = cfg.tau_for(grid)
    if products is None:
        products = classical_coefficient_product(a, _family(f, _subgrid(pgrid, a)))
    rhs = convolve(f, tau) - products.E_commutator(tau)

    a_star = frozen_constant(a, cfg)
    k1 = grid.k1[:, None]
    L = 1j * grid.k2_odd[None, :] + a_star * k1**2 + 1
    rhs_hat = np.fft.fft2(rhs.values)
    da = a.values - a_star
    u = np.fft.ifft2(rhs_hat / L).real
    residuals = []
    for it in range(cfg.picard_max):
        d2u = np.fft.ifft2(np.fft.fft2(u) * (-(k1**2))).real
        new = np.fft.ifft2((rhs_hat + np.fft.fft2(da * d2u)) / L).real
        r = float(np.max(np.abs(new - u)))
        u = new
        residuals.append(r)
        if r <= cfg.picard_tol * max(1.0, float(np.max(np.abs(u)))):
            break
        if len(residuals) >= 3 and residuals[-1] >= residuals[-2] >= residuals[-3] and r > 0:
            raise ContractionError(f"Picard iteration does not contract (ratio {residuals[-1] / residuals[-2]:.3f})",
                                   residuals)
    else:
        log.warning("Picard iteration hit picard_max=%d with residual %.3g", cfg.picard_max, residuals[-1])
    ratios = [residuals[k + 1] / residuals[k] for k in range(len(residuals) - 1) if residuals[k] > 0]
    ufield = Field(grid, u)
    info = {
        "residuals": residuals,
        "contraction": float(np.median(ratios)) if ratios else 0.0,
        "a_star": a_star,
        "a_holder": a_semi,
        "rhs": rhs,
        "products": products,
    }
    if with_model:
        # the regularized solution is modelled after v_tau
        fam_tau = periodic_v_family(convolve(f, tau), products.family.a_values, 0, name="v_tau")
        info["model"] = modelling_constant(ufield, fam_tau, a, 1.0, norm_cfg)
    return ufield, info


# --- q and g ----------------------------------------------------------------------------

def _boundary_mismatch(U_int: BoundaryData, u: Field) -> BoundaryData:
    if U_int.values.size != u.grid.n1:
        raise ValueError("boundary data length does not match n1")
    return BoundaryData(U_int.values - u.values[:, 0])


def boundary_ansatz_q(U_int: BoundaryData, u: Field, a_boundary: BoundaryData, grid: GridSpec,
                      lam: float = 0.25, method: str = "modes", pgrid: ParamGrid | None = None) -> Field:
    """``q(x) = V(x, a_bar(x), U_int - u(., 0))``."""
    a_bar = coefficient_layer(a_boundary, grid)
    if a_bar.values.min() < lam - 1e-12 or a_bar.values.max() > 1 + 1e-12:
        raise ValueError("a_bar leaves [lambda, 1]")
    g = _boundary_mismatch(U_int, u)
    if method == "modes":
        return heat_layer_at(g, a_bar)
    fam = heat_layer_family(g, pgrid or ParamGrid(lam), grid, max_order=0)
    return fam.evaluate(a_bar)


def w_forcing_g(U_int: BoundaryData, u: Field, a_boundary: BoundaryData, a: Field, grid: GridSpec) -> Field:
    """``(d2 - a d1^2 + 1) q`` in closed form, trivially extended below the
    initial line:

    ``(a_bar - a) d1^2 V' + d_a0 V' (1 - a) d1^2 a_bar
    - 2 a d1 d_a0 V' d1 a_bar - a d_a0^2 V' (d1 a_bar)^2``
    with every ``V'`` term evaluated at ``a0 = a_bar(x)``.
    """
    a = half_coefficient(a, grid)
    a_bar = coefficient_layer(a_boundary, grid)
    g = _boundary_mismatch(U_int, u)
    d11V = heat_layer_at(g, a_bar, 0, 2).values
    dV = heat_layer_at(g, a_bar, 1, 0).values
    d1dV = heat_layer_at(g, a_bar, 1, 1).values
    ddV = heat_layer_at(g, a_bar, 2, 0).values
    if np.ptp(a_boundary.values) == 0:
        d1ab = d11ab = np.zeros(grid.shape)
    else:
        d1ab = spectral_derivative(a_bar, 1, 1).values
        d11ab = spectral_derivative(a_bar, 1, 2).values
    av, abv = a.values, a_bar.values
    out = (abv - av) * d11V + dV * (1 - av) * d11ab - 2 * av * d1dV * d1ab - av * ddV * d1ab**2
    return trivial_extension(Field(grid, out))


# --- w ------------------------------------------------------------------------------------

def _implicit_step(guess, base_hat, da, k, dt, denom, cfg: LinearSolveConfig):
    """Fixed point of ``w = IFFT[(base_hat + dt FFT[da d1^2 w]) / denom]``."""
    cur = guess
    prev = np.inf
    for _ in range(cfg.picard_max):
        d2 = np.fft.ifft(np.fft.fft(cur) * (-(k**2))).real
        new = np.fft.ifft((base_hat + dt * np.fft.fft(da * d2)) / denom).real
        r = float(np.max(np.abs(new - cur)))
        cur = new
        if r <= cfg.picard_tol * max(1.0, float(np.max(np.abs(cur)))):
            return cur
        if r > prev and r > 1e-300:
            raise ContractionError("implicit w step does not contract", [prev, r])
        prev = r
    log.warning("implicit w step hit picard_max=%d", cfg.picard_max)
    return cur


def solve_correction_w(g: Field, a: Field, cfg: LinearSolveConfig, retries: int = 4) -> Field:
    """Implicit Euler for ``(d2 - a d1^2 + 1) w = -g`` from ``w(., 0) = 0``.

    Each step solves ``(1 + dt (1 - a d1^2)) w^{n+1} = w^n - dt g^{n+1/2}``
    by the frozen-coefficient iteration

    ``(1 + dt (a* k^2 + 1)) w_hat <- w_hat^n + dt FFT[(a - a*) d1^2 w - g^{n+1/2}]``

    run to ``cfg.picard_tol``, so the result does not depend on ``a*``.
    Instability (step ratio growing) halves the step, up to ``retries`` times.
    """
    if g.kind != "two_sided":
        raise ValueError("forcing must be trivially extended")
    half = g.grid.half_plane()
    a = half_coefficient(a, half)
    n2 = half.n2
    if np.any(g.values[:, :n2] != 0):
        raise ValueError("forcing must vanish below the initial line")
    gh = g.values[:, n2:]
    a_star = frozen_constant(a, cfg)
    k = half.k1
    for attempt in range(retries + 1):
        sub = 2**attempt
        dt = half.dx2 / sub
        denom = 1 + dt * (a_star * k**2 + 1)
        w = np.zeros(half.shape)
        cur = np.zeros(half.n1)
        unstable = False
        prev_norm = 0.0
        growth = 0
        for j in range(n2):
            for s in range(sub):
                t1 = (s + 1) / sub
                tm = (s + 0.5) / sub
                g_mid = (1 - tm) * gh[:, j] + tm * gh[:, j + 1]
                da = (1 - t1) * a.values[:, j] + t1 * a.values[:, j + 1] - a_star
                base = np.fft.fft(cur) - dt * np.fft.fft(g_mid)
                cur = _implicit_step(cur, base, da, k, dt, denom, cfg)
            w[:, j + 1] = cur
            nrm = float(np.max(np.abs(cur)))
            if not np.isfinite(nrm):
                unstable = True
                break
            # a forced solution grows at most like the forcing; flag blow-up of high modes
            hi = np.abs(np.fft.fft(cur))[half.n1 // 4: 3 * half.n1 // 4].max() if half.n1 >= 8 else 0.0
            if prev_norm > 0 and hi > 10 * prev_norm and hi > 1e-8:
                growth += 1
            else:
                growth = 0
            prev_norm = max(hi, 1e-300)
            if growth >= 3:
                unstable = True
                break
        if not unstable:
            return Field(half, w)
        log.warning("w stepping unstable with %d substeps; refining", sub)
    raise ContractionError("w time stepping unstable after step halving")


# --- assembly ------------------------------------------------------------------------------

def _alpha_norm(fld: Field, cfg: NormConfig) -> float:
    return holder_norm(fld, cfg.alpha, cfg)


def assemble_linear(f: Field, U_int: BoundaryData, a: Field, products: CoefficientProduct | None = None,
                    cfg: LinearSolveConfig | None = None, norm_cfg: NormConfig | None = None,
                    pgrid: ParamGrid | None = None, reports: bool = True) -> SolutionBundle:
    """``U = u + q + w`` for ``(d2 - a <> d1^2 + 1) U = f`` with ``U = U_int``
    on the initial line."""
    cfg = cfg or LinearSolveConfig()
    norm_cfg = norm_cfg or NormConfig()
    torus = f.grid
    half = GridSpec(torus.n1, torus.n2, HALF_PLANE, 1.0)
    a_t = torus_coefficient(a, torus)
    a_h = half_coefficient(a, half)
    u, info = solve_linear_periodic_u(f, a_t, products, cfg, norm_cfg, pgrid, with_model=reports)
    a_boundary = BoundaryData(a_h.values[:, 0])
    q = boundary_ansatz_q(U_int, u, a_boundary, half, cfg.lam)
    g = w_forcing_g(U_int, u, a_boundary, a_h, half)
    w = solve_correction_w(g, a_h, cfg)
    u_half = restrict_to_half_plane(u, half)
    U = Field(half, u_half.values + q.values + w.values)
    bundle = SolutionBundle(u, q, w, U, {"picard": info["residuals"], "contraction": info["contraction"],
                                         "a_star": info["a_star"], "a_holder": info["a_holder"]})
    bundle.reports["_info"] = info
    bundle.reports["g"] = g
    if reports:
        _fill_reports(bundle, f, U_int, a_t, a_boundary, half, norm_cfg, info)
    return bundle


def _fill_reports(bundle: SolutionBundle, f, U_int, a_t, a_boundary, half, norm_cfg, info) -> None:
    alpha = norm_cfg.alpha
    u, q, w = bundle.u, bundle.q, bundle.w
    a_bar = coefficient_layer(a_boundary, half)
    Vp = heat_layer_family(_boundary_mismatch(U_int, u), ParamGrid(min(0.25, float(a_bar.values.min()))),
                           half, max_order=0, name="Vprime")
    M_q = modelling_constant(q, Vp, a_bar, 1.0, norm_cfg).M
    r = bundle.reports
    r["M_u"] = info["model"].M
    r["M_q"] = M_q
    r["w_2alpha"] = holder_seminorm(w, 2 * alpha, norm_cfg).value
    r["u_alpha"] = _alpha_norm(u, norm_cfg)
    r["q_alpha"] = _alpha_norm(q, norm_cfg)
    r["w_alpha"] = _alpha_norm(w, norm_cfg)
    r["N0"] = neg_norm_conv(f, 2 - alpha, norm_cfg).value
    r["N0_int"] = holder_norm_1d(U_int.values, alpha)
    r["N"] = info["a_holder"]
    r["ratio"] = (r["M_u"] + r["M_q"] + r["w_2alpha"]) / max(r["N0"] + r["N0_int"], 1e-300)
    r["residual_ladder"] = equation_residual_ladder(u, a_t, info, norm_cfg)


def equation_residual_ladder(u: Field, a: Field, info: dict, norm_cfg: NormConfig) -> list:
    """``(T^(1/4))^(2-alpha) ||((d2 - a d1^2 + 1) u - f_tau + E)_T||`` per scale."""
    grid = u.grid
    k1, k2 = grid.wavenumbers()
    hat = np.fft.fft2(u.values)
    d2 = np.fft.ifft2(hat * 1j * grid.k2_odd[None, :]).real
    d11 = np.fft.ifft2(hat * -(k1**2)).real
    R = Field(grid, d2 - a.values * d11 + u.values - info["rhs"].values)
    beta = 2 - norm_cfg.alpha
    return [(T, convolve(R, T).sup() * T ** (beta / 4)) for T in norm_cfg.dyadic_T]


# --- quasilinear ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientMap:
    """``a(U)`` with its first three derivatives."""

    fn: Callable
    d1: Callable
    d2: Callable
    d3: Callable

    @classmethod
    def affine_tanh(cls, center: float = 0.6, width: float = 0.3, slope: float = 1.0):
        """``center + width tanh(slope U / width)``: values in
        ``center +- width``, derivatives bounded by ``slope``."""
        s = slope / width

        def fn(U):
            return center + width * np.tanh(s * U)

        def d1(U):
            return slope / np.cosh(s * U) ** 2

        def d2(U):
            t = np.tanh(s * U)
            return -2 * slope * s * t / np.cosh(s * U) ** 2

        def d3(U):
            t = np.tanh(s * U)
            sech2 = 1 / np.cosh(s * U) ** 2
            return -2 * slope * s * s * (sech2**2 - 2 * t * t * sech2)

        return cls(fn, d1, d2, d3)

    @classmethod
    def constant(cls, c: float):
        z = lambda U: np.zeros_like(np.asarray(U, dtype=float))  # noqa: E731
        return cls(lambda U: np.full_like(np.asarray(U, dtype=float), c), z, z, z)


def reconstructed_coefficient_product(a_t: Field, sigma: Field, fam: ParamFamily, base: np.ndarray,
                                      T_eval: float, norm_cfg: NormConfig, handle: ProductHandle):
    """``a <> d1^2 v(., a_j)`` for every node ``a_j`` by finite-scale
    reconstruction, with ``a`` modelled after ``v`` according to itself."""
    model = modelling_constant(a_t, fam, a_t, sigma, norm_cfg)
    d2v = _d11(fam.values, a_t.grid)
    stack = np.empty(fam.values.shape)
    for j in range(fam.values.shape[0]):
        stack[j] = reconstruct_U_product(a_t, model, fam, base[:, j], Field(a_t.grid, d2v[j]), T_eval).values
    h = ProductHandle("reconstructed", ("a", "d11v"), handle.epsilon, handle.counterterm,
                      {"T_eval": T_eval, "M": model.M})
    return CoefficientProduct(a_t, fam, stack, h), model


def _diff_model(u1, u0, fam, a1, a0, norm_cfg):
    return modelling_constant(u1 - u0, [fam, fam], [a1, a0], [1.0, -1.0], norm_cfg).M


def quasilinear_fixed_point(f: ForcingSample | Field, U_int: BoundaryData, a_map: CoefficientMap,
                            cfg: LinearSolveConfig | None = None, norm_cfg: NormConfig | None = None,
                            pgrid: ParamGrid | None = None, eps: float | None = None,
                            base: str = "psi", renormalize: bool = True,
                            reports: bool = False) -> SolutionBundle:
    """Outer iteration ``(u*, w*, a*) -> q* -> a = a_map(u* + q* + w*) ->
    products -> assemble_linear`` until the distance between iterates

    ``d = M_du + [dw]_2alpha + ||du||_alpha + ||dw||_alpha + (N0 + N0_int) ||da||_alpha``

    drops below ``cfg.outer_tol``.  With ``reports`` every history entry
    also carries ``M_u``, ``M_q`` and ``w_2alpha`` of the current iterate.
    """
    cfg = cfg or LinearSolveConfig()
    norm_cfg = norm_cfg or NormConfig()
    pgrid = pgrid or ParamGrid(cfg.lam)
    alpha = norm_cfg.alpha
    sample = f if isinstance(f, ForcingSample) else None
    fld = sample.field if sample else f
    if eps is not None:
        fld = mollified_forcing(fld, eps, base)
    torus = fld.grid
    half = GridSpec(torus.n1, torus.n2, HALF_PLANE, 1.0)
    T_eval = cfg.T_eval_for(torus)

    N0 = neg_norm_conv(fld, 2 - alpha, norm_cfg).value
    N0_int = holder_norm_1d(U_int.values, alpha)
    U = Field.zeros(half)
    prev = None
    history = []
    stalls = 0
    bundle = None
    for it in range(cfg.outer_max):
        a_h = Field(half, a_map.fn(U.values))
        a_t = torus_coefficient(a_h, torus)
        nodes = active_nodes(pgrid, float(a_t.values.min()), float(a_t.values.max()))
        fam = _family(fld, nodes)
        sig = Field(torus, a_map.d1(U.values[:, : torus.n2]))
        if sample is not None and float(np.max(np.abs(sig.values))) > 0:
            e = eps if eps is not None else 1e-30
            handle, P = renormalized_product_stack(sample, e, nodes, nodes, base, renormalize=renormalize)
            products, _ = reconstructed_coefficient_product(a_t, sig, fam, P, T_eval, norm_cfg, handle)
        else:
            products = classical_coefficient_product(a_t, fam)
        bundle = assemble_linear(fld, U_int, a_h, products, cfg, norm_cfg, pgrid, reports=reports)
        cur = (bundle.u, bundle.w, a_h, fam)
        if prev is not None:
            du = bundle.u - prev[0]
            dw = bundle.w - prev[1]
            da = a_h - prev[2]
            M_du = _diff_model(bundle.u, prev[0], fam, a_t, torus_coefficient(prev[2], torus), norm_cfg) \
                if np.array_equal(fam.a_values, prev[3].a_values) else _diff_model_families(
                    bundle.u, prev[0], fam, prev[3], a_t, torus_coefficient(prev[2], torus), norm_cfg)
            d = (M_du + holder_seminorm(dw, 2 * alpha, norm_cfg).value + holder_norm(du, alpha, norm_cfg)
                 + holder_norm(dw, alpha, norm_cfg) + (N0 + N0_int) * holder_norm(da, alpha, norm_cfg))
            entry = {"iter": it, "d_metric": float(d), "residual": float(bundle.reports["picard"][-1]),
                     "contraction": bundle.reports["contraction"]}
            if reports:
                entry.update({k: float(bundle.reports[k]) for k in ("M_u", "M_q", "w_2alpha")})
            history.append(entry)
            log.info("outer iteration %d: d = %.3e", it, d)
            if len(history) >= 2 and d >= history[-2]["d_metric"]:
                stalls += 1
            else:
                stalls = 0
            if stalls >= 3:
                raise ContractionError("outer iteration stopped contracting", history)
            if d < cfg.outer_tol:
                break
        prev = cur
        U = bundle.U
    bundle.history = history
    bundle.reports.update({"N0": N0, "N0_int": N0_int})
    return bundle


def _diff_model_families(u1, u0, fam1, fam0, a1, a0, norm_cfg):
    return modelling_constant(u1 - u0, [fam1, fam0], [a1, a0], [1.0, -1.0], norm_cfg).M


def outer_ratios(history: list) -> list:
    d = [h["d_metric"] for h in history]
    return [d[k + 1] / d[k] for k in range(len(d) - 1) if d[k] > 0]


# --- diagnostics ---------------------------------------------------------------------------

def stability_experiment(b0: SolutionBundle, b1: SolutionBundle, norm_cfg: NormConfig | None = None,
                         meta: dict | None = None) -> dict:
    """Difference norms between two converged bundles."""
    norm_cfg = norm_cfg or NormConfig()
    du = b1.u - b0.u
    dq = b1.q - b0.q
    dw = b1.w - b0.w
    out = {
        "du_alpha": holder_norm(du, norm_cfg.alpha, norm_cfg),
        "dq_alpha": holder_norm(dq, norm_cfg.alpha, norm_cfg),
        "dw_alpha": holder_norm(dw, norm_cfg.alpha, norm_cfg),
        "dU_sup": float(np.max(np.abs(b1.U.values - b0.U.values))),
    }
    out["total"] = out["du_alpha"] + out["dq_alpha"] + out["dw_alpha"]
    if meta:
        out.update(meta)
        denom = meta.get("dN0", 0.0) + meta.get("dN0_int", 0.0)
        if denom > 0:
            out["ratio"] = out["total"] / denom
    return out


def safonov_ratio(bundle: SolutionBundle, norm_cfg: NormConfig | None = None) -> dict:
    """``(M + ||u||_alpha) / (K + ||sigma||_alpha N)`` with ``K`` the forcing
    size, ``sigma = 1`` and ``N = [a]_alpha``."""
    r = bundle.reports
    num = r["M_u"] + r["u_alpha"]
    den = r["N0"] + 1.0 * r["N"]
    return {"numerator": num, "denominator": den, "ratio": num / den if den > 0 else float("inf")}
