"""Singular products: renormalized offline products, Leibniz and classical
products against heat layers, and finite-scale reconstruction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .grid import TORUS, Field, spectral_derivative
from .kernel import MollifierSpec, convolve, x1_commutator
from .noise import CovarianceSpec, ForcingSample, mollified_forcing
from .refsol import ParamFamily, cubic_weights, periodic_v_derivatives

KINDS = ("renormalized", "leibniz", "classical", "combined", "reconstructed", "raw")


@dataclass
class ProductHandle:
    kind: str
    inputs: tuple = ()
    epsilon: float | None = None
    counterterm: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown product kind {self.kind!r}")
        if self.kind == "renormalized" and (self.epsilon is None or not self.counterterm):
            raise ValueError("renormalized products carry epsilon and a counterterm table")
        if self.kind == "combined" and len(self.inputs) != 2:
            raise ValueError("combined products reference exactly two parts")

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.kind,
            "inputs": [str(i) for i in self.inputs],
            "epsilon": self.epsilon,
            "counterterm": [[a, b, c] for (a, b), c in sorted(self.counterterm.items())],
            "meta": self.meta,
        })


# --- renormalization ----------------------------------------------------------------

def _mode_set(spec: CovarianceSpec):
    m = np.arange(-spec.cutoff, spec.cutoff + 1)
    M1, M2 = np.meshgrid(m, m, indexing="ij")
    return 2 * np.pi * M1.ravel(), 2 * np.pi * M2.ravel()


def renorm_table(spec: CovarianceSpec, eps: float, a0s, a0ps, base: str = "psi") -> np.ndarray:
    """``g2(eps, a0, a0')`` for all pairs of the given parameter lists.

    With ``v_hat = f_hat psi'_hat / L_a0`` and ``E f_hat(k) f_hat(l) =
    C_hat(k) [k + l = 0]``, the expectation of ``v(a0) d1^2 v(a0')`` is
    ``sum_k C_hat |psi'_hat|^2 (-k1^2) / (L_a0(k) L_a0'(-k))``, which is real.
    """
    k1, k2 = _mode_set(spec)
    w = spec.density(k1, k2) * MollifierSpec(eps, base).multiplier(k1, k2) ** 2 * (-(k1**2))
    a0s = np.atleast_1d(np.asarray(a0s, dtype=float))
    a0ps = np.atleast_1d(np.asarray(a0ps, dtype=float))
    La = 1j * k2[None, :] + a0s[:, None] * k1[None, :] ** 2 + 1
    Lb = -1j * k2[None, :] + a0ps[:, None] * k1[None, :] ** 2 + 1
    return np.real(np.einsum("k,ik,jk->ij", w, 1 / La, 1 / Lb))


def renorm_constant(spec: CovarianceSpec, eps: float, a0: float, a0p: float,
                    base: str = "psi") -> float:
    return float(renorm_table(spec, eps, [a0], [a0p], base)[0, 0])


def _v_stack(f: Field, a_list, order: int = 0) -> np.ndarray:
    return np.stack([periodic_v_derivatives(f, a, order).values for a in a_list])


def _d11(stack: np.ndarray, grid) -> np.ndarray:
    k1 = grid.k1
    return np.fft.ifft(np.fft.fft(stack, axis=-2) * (-(k1**2))[:, None], axis=-2).real


def renormalized_product(f: ForcingSample, eps: float, a0: float, a0p: float,
                         base: str = "psi") -> tuple[ProductHandle, Field]:
    """``v_eps(a0) d1^2 v_eps(a0') - g2(eps, a0, a0')``."""
    h, P = renormalized_product_stack(f, eps, [a0], [a0p], base)
    return h, Field(f.field.grid, P[0, 0])


def renormalized_product_stack(f: ForcingSample, eps: float, a_list, ap_list,
                               base: str = "psi", order: tuple = (0, 0),
                               renormalize: bool = True):
    """Products ``d^i v_eps(a0) d1^2 d^j v_eps(a0')`` (``order = (i, j)`` in
    the parameters) for every pair, minus the matching derivative of the
    counterterm.  Returns ``(handle, array[len(a_list), len(ap_list), n1, n2])``."""
    fe = mollified_forcing(f, eps, base)
    grid = fe.grid
    i, j = order
    A = _v_stack(fe, a_list, i)
    B = _d11(_v_stack(fe, ap_list, j), grid)
    P = A[:, None] * B[None, :]
    table = {}
    if renormalize:
        g2 = _renorm_derivative(f.spec, eps, a_list, ap_list, base, i, j)
        P -= g2[:, :, None, None]
        table = {(float(a), float(b)): float(g2[p, q])
                 for p, a in enumerate(a_list) for q, b in enumerate(ap_list)}
    handle = ProductHandle("renormalized" if renormalize else "raw", ("v", "d11v"), eps, table,
                           {"base": base, "seed": f.seed, "order": list(order)})
    return handle, P


def _renorm_derivative(spec, eps, a_list, ap_list, base, i, j):
    """Parameter derivatives of ``g2`` from the same mode sum."""
    k1, k2 = _mode_set(spec)
    w = spec.density(k1, k2) * MollifierSpec(eps, base).multiplier(k1, k2) ** 2 * (-(k1**2))
    a = np.asarray(a_list, dtype=float)
    b = np.asarray(ap_list, dtype=float)
    La = 1j * k2[None, :] + a[:, None] * k1[None, :] ** 2 + 1
    Lb = -1j * k2[None, :] + b[:, None] * k1[None, :] ** 2 + 1
    fi = float(np.prod(range(1, i + 1)))
    fj = float(np.prod(range(1, j + 1)))
    da = fi * (-(k1**2))[None, :] ** i / La ** (i + 1)
    db = fj * (-(k1**2))[None, :] ** j / Lb ** (j + 1)
    return np.real(np.einsum("k,ik,jk->ij", w, da, db))


def raw_product(f: ForcingSample, eps: float, a0: float, a0p: float, base: str = "psi") -> Field:
    """The un-renormalized ``v_eps(a0) d1^2 v_eps(a0')``."""
    _, P = renormalized_product_stack(f, eps, [a0], [a0p], base, renormalize=False)
    return Field(f.field.grid, P[0, 0])


# --- boundary products ------------------------------------------------------------------

def leibniz_product(G: Field, F: Field, dG: Field | None = None, d2G: Field | None = None) -> Field:
    """``G <> d1^2 F := d1^2(F G) - 2 d1(F d1 G) + F d1^2 G``.

    ``dG`` and ``d2G`` are the x1-derivatives of ``G`` (supplied
    analytically for heat layers); outer derivatives are spectral in x1.
    """
    if dG is None or d2G is None:
        raise ValueError("Leibniz product needs d1 G and d1^2 G")
    if not (G.grid == F.grid == dG.grid == d2G.grid):
        raise ValueError("factors live on different grids")
    FG = F * G
    t1 = spectral_derivative(FG, 1, 2)
    t2 = spectral_derivative(F * dG, 1, 1)
    return t1 - t2 * 2.0 + F * d2G


def leibniz_product_spectral(G: Field, F: Field) -> Field:
    return leibniz_product(G, F, spectral_derivative(G, 1, 1), spectral_derivative(G, 1, 2))


def singular_weight(grid, alpha: float) -> np.ndarray:
    """``|x2|^((alpha-2)/2) + |x2|^((2 alpha-2)/2)`` per row; the row on the
    initial line is evaluated at half a step."""
    x2 = np.abs(grid.x2).astype(float)
    x2 = np.where(x2 == 0, grid.dx2 / 2, x2)
    return x2 ** ((alpha - 2) / 2) + x2 ** ((2 * alpha - 2) / 2)


def classical_singular_product(F: Field, d2G: Field, alpha: float = 0.75,
                               weight_cap: float = 1e6) -> tuple[Field, float]:
    """``F d1^2 G`` pointwise, with the measured weight constant
    ``C(G) = max |d1^2 G| / weight``."""
    if F.grid != d2G.grid:
        raise ValueError("factors live on different grids")
    w = singular_weight(d2G.grid, alpha)
    CG = float(np.max(np.abs(d2G.values) / w[None, :]))
    if CG > weight_cap:
        raise ValueError(f"weight constant {CG:.3g} exceeds cap {weight_cap:.3g}")
    return F * d2G, CG


def combined_product(parts, mode: str = "full") -> tuple[ProductHandle, Field]:
    """Sum of the two constituent products (``mode`` in
    {"V_plus_v_on_v", "full"})."""
    if mode not in ("V_plus_v_on_v", "full"):
        raise ValueError(f"unknown mode {mode!r}")
    (h1, f1), (h2, f2) = parts
    if f1.grid != f2.grid:
        raise ValueError("parts live on different grids")
    if h1.epsilon is not None and h2.epsilon is not None and h1.epsilon != h2.epsilon:
        raise ValueError("parts use different mollification scales")
    handle = ProductHandle("combined", (h1.kind, h2.kind), h1.epsilon or h2.epsilon,
                           meta={"mode": mode})
    return handle, f1 + f2


# --- reconstruction -------------------------------------------------------------------

def _interp_param(stack: np.ndarray, nodes, a_vals: np.ndarray) -> np.ndarray:
    idx, w = cubic_weights(nodes, a_vals)
    out = np.zeros(stack.shape[1:])
    for c in range(4):
        out += w[..., c] * np.take_along_axis(stack, idx[None, ..., c], axis=0)[0]
    return out


def _as_values(x, grid):
    return x.values if isinstance(x, Field) else np.full(grid.shape, float(x))


def commutator_stack(F, h: Field, products: np.ndarray, T: float) -> np.ndarray:
    """``F_j h_T - (P_j)_T`` for a parameter stack ``F_j`` (or one Field)."""
    grid = h.grid
    hT = convolve(h, T).values
    Fv = F.values[None] if isinstance(F, Field) else np.asarray(F)
    out = np.empty(products.shape)
    for j in range(products.shape[0]):
        out[j] = Fv[j if Fv.shape[0] > 1 else 0] * hT - convolve(Field(grid, products[j]), T).values
    return out


def reconstruct_U_product(U: Field, model, families, base_products, h: Field, T_eval: float) -> Field:
    """Finite-scale surrogate of ``U <> h``:

    ``U h_T - sum_i sigma_i E[V_i, (.)_T] <> h - nu [x1, (.)_T] h``

    where ``E`` evaluates the parameter at ``a_i(x)``.  ``families`` and
    ``base_products`` (stacks of ``V_i(., a0) <> h`` over the family nodes)
    run parallel to ``model.sigma``.
    """
    if not isinstance(families, (list, tuple)):
        families, base_products = [families], [base_products]
    grid = U.grid
    out = U.values * convolve(h, T_eval).values
    for fam, P, sig, a in zip(families, base_products, model.sigma, model.a):
        if fam.grid != grid:
            raise ValueError("family and U live on different grids")
        C = commutator_stack(fam.values, h, np.asarray(P), T_eval)
        out -= _as_values(sig, grid) * _interp_param(C, fam.a_values, _as_values(a, grid))
    out -= model.nu.values * x1_commutator(h, T_eval).values
    return Field(grid, out)


def reconstruct_F_d2U(F: Field, U: Field, model, families, base_products, T_eval: float) -> Field:
    """Finite-scale surrogate of ``F <> d1^2 U``:

    ``F d1^2 U_T - sum_i sigma_i E[F, (.)_T] <> d1^2 V_i``

    with ``base_products`` the stacks ``F <> d1^2 V_i(., a0)``.
    """
    if not isinstance(families, (list, tuple)):
        families, base_products = [families], [base_products]
    grid = U.grid
    out = F.values * spectral_derivative(convolve(U, T_eval), 1, 2).values
    for fam, P, sig, a in zip(families, base_products, model.sigma, model.a):
        d2V = _d11(fam.values, grid)
        P = np.asarray(P)
        C = np.empty(P.shape)
        for j in range(P.shape[0]):
            C[j] = (F.values * convolve(Field(grid, d2V[j]), T_eval).values
                    - convolve(Field(grid, P[j]), T_eval).values)
        out -= _as_values(sig, grid) * _interp_param(C, fam.a_values, _as_values(a, grid))
    return Field(grid, out)


@dataclass
class LadderReport:
    scales: list
    values: list
    increments: list
    ratios: list
    extrapolated: Field | None

    def summary(self) -> dict:
        return {"scales": self.scales, "increments": self.increments, "ratios": self.ratios,
                "extrapolated": self.extrapolated is not None}


def ladder_limit(build, scales, norm=None, ratio_cap: float = 0.95) -> LadderReport:
    """Evaluate ``build(T)`` along decreasing scales and report Cauchy
    increments.  An extrapolated limit (geometric tail correction) is given
    only when successive increment ratios all stay below ``ratio_cap``."""
    norm = norm or (lambda fld: fld.sup())
    vals = [build(T) for T in scales]
    inc = [norm(vals[k + 1] - vals[k]) for k in range(len(vals) - 1)]
    ratios = [inc[k + 1] / inc[k] if inc[k] > 0 else (0.0 if inc[k + 1] == 0 else float("inf"))
              for k in range(len(inc) - 1)]
    extra = None
    if ratios and all(r < ratio_cap for r in ratios):
        q = ratios[-1]
        extra = vals[-1] + (vals[-1] - vals[-2]) * (q / (1 - q))
    return LadderReport(list(scales), vals, inc, ratios, extra)
