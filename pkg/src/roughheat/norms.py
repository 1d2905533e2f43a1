"""Estimators for parabolic Hoelder norms, negative norms, modelling
constants and commutator norms.

Suprema over continuum pairs are approximated on the grid.  Torus fields
depend only on the pair offset, so a sweep over one offset covers every
base point at once.  Small grids sweep every offset ("exhaustive"); larger
grids sweep all offsets in a parabolic ball and add seeded random pairs
("sampled").
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .grid import TORUS, Field, GridSpec, offset_distance, spectral_derivative
from .kernel import convolve, psi_hat

EXHAUSTIVE_MAX = 64 * 64
LOCAL_OFFSETS = 320


def default_ladder(J: int = 32) -> tuple[float, ...]:
    return tuple(2.0 ** (-j) for j in range(J + 1))


@dataclass(frozen=True)
class NormConfig:
    alpha: float = 0.75
    dyadic_T: tuple = field(default_factory=default_ladder)
    pair_budget: int = 200_000
    seed: int = 0
    method: str = "auto"  # auto | exhaustive | sampled

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if len(self.dyadic_T) < 9:
            raise ValueError("the dyadic ladder needs at least 9 scales (J >= 8)")
        if self.method not in ("auto", "exhaustive", "sampled"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class NormReport:
    value: float
    witness: object
    method: str
    alpha: float | None = None
    ladder: tuple | None = None

    def to_json(self) -> str:
        d = asdict(self)
        d["ladder"] = list(self.ladder) if self.ladder is not None else None
        return json.dumps(d, default=_jsonable)


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(type(o))


@dataclass
class ModellingReport:
    M: float
    sigma: list
    a: list
    nu: Field
    references: list
    witness: object = None
    method: str = ""

    def scaled(self, c: float) -> "ModellingReport":
        return ModellingReport(abs(c) * self.M, [s * c for s in self.sigma], self.a,
                               self.nu * c, self.references, self.witness, self.method)


# --- offset machinery ---------------------------------------------------------

def _shift(arr: np.ndarray, s1: int, s2: int, periodic2: bool):
    """``(arr(x + s), arr(x), row_slice)`` restricted to base points whose
    partner stays inside the window."""
    a = np.roll(arr, -s1, axis=-2)
    if periodic2:
        return np.roll(a, -s2, axis=-1), arr, slice(None)
    rows = arr.shape[-1]
    if s2 >= 0:
        sl = slice(0, rows - s2)
        return a[..., s2:], arr[..., sl], sl
    sl = slice(-s2, rows)
    return a[..., : rows + s2], arr[..., sl], sl


def _all_offsets(grid: GridSpec):
    n1, rows = grid.shape
    s1 = np.arange(-(n1 // 2) + 1, n1 // 2 + 1)
    if grid.domain_kind == TORUS:
        s2 = np.arange(0, grid.n2 // 2 + 1)
    else:
        s2 = np.arange(0, rows)
    S1, S2 = np.meshgrid(s1, s2, indexing="ij")
    S1, S2 = S1.ravel(), S2.ravel()
    keep = (S2 > 0) | (S1 > 0)
    return S1[keep], S2[keep]


def _local_offsets(grid: GridSpec, budget: int = LOCAL_OFFSETS):
    """All half-space offsets in the smallest parabolic ball holding about
    ``budget`` offsets."""
    S1, S2 = _all_offsets(grid)
    d = offset_distance(grid, S1, S2)
    order = np.lexsort((S2, S1, d))
    if len(order) <= budget:
        return S1[order], S2[order]
    r = d[order[budget - 1]]
    sel = order[d[order] <= r]
    return S1[sel], S2[sel]


def _offsets_for(grid: GridSpec, method: str):
    n = grid.n1 * grid.rows
    if method == "exhaustive" or (method == "auto" and n <= EXHAUSTIVE_MAX):
        return _all_offsets(grid), "exhaustive"
    return _local_offsets(grid), "sampled"


def _random_pairs(grid: GridSpec, count: int, seed: int):
    rng = np.random.default_rng(seed)
    n1, rows = grid.shape
    x = rng.integers(0, n1 * rows, size=count)
    y = rng.integers(0, n1 * rows, size=count)
    keep = x != y
    return x[keep], y[keep]


def _pair_distance(grid: GridSpec, x, y):
    n1, rows = grid.shape
    i1, j1 = np.divmod(x, rows)
    i2, j2 = np.divmod(y, rows)
    return offset_distance(grid, i2 - i1, j2 - j1)


def _witness(grid: GridSpec, flat_idx: int, s1: int, s2: int, rows_sl) -> tuple:
    n1, rows = grid.shape
    sub_rows = len(range(*rows_sl.indices(rows)))
    i, j = divmod(int(flat_idx), sub_rows)
    j = j + (rows_sl.start or 0)
    return ((i, j), ((i + s1) % n1, (j + s2) % rows if grid.domain_kind == TORUS else j + s2))


# --- Hoelder seminorms ---------------------------------------------------------

def _holder_sup(values: np.ndarray, grid: GridSpec, alpha: float, cfg: NormConfig,
                dmax: float | None = None):
    periodic2 = grid.domain_kind == TORUS
    (S1, S2), method = _offsets_for(grid, cfg.method)
    best, wit = 0.0, None
    for s1, s2 in zip(S1, S2):
        d = float(offset_distance(grid, s1, s2))
        if d == 0 or (dmax is not None and d > dmax):
            continue
        a, b, sl = _shift(values, int(s1), int(s2), periodic2)
        if a.size == 0:
            continue
        diff = np.abs(a - b)
        k = int(np.argmax(diff))
        r = diff.flat[k] / d**alpha
        if r > best:
            best, wit = float(r), _witness(grid, k, int(s1), int(s2), sl)
    if method == "sampled" and cfg.pair_budget > 0:
        x, y = _random_pairs(grid, cfg.pair_budget, cfg.seed)
        d = _pair_distance(grid, x, y)
        ok = d > 0 if dmax is None else (d > 0) & (d <= dmax)
        x, y, d = x[ok], y[ok], d[ok]
        flat = values.ravel()
        r = np.abs(flat[y] - flat[x]) / d**alpha
        if r.size:
            k = int(np.argmax(r))
            if r[k] > best:
                rows = grid.rows
                best = float(r[k])
                wit = (divmod(int(x[k]), rows), divmod(int(y[k]), rows))
    return best, wit, method


def witness_ratio(f: Field, witness, alpha: float) -> float:
    """Re-evaluate a pair witness ``((i1, j1), (i2, j2))`` in isolation."""
    (i1, j1), (i2, j2) = witness
    d = float(offset_distance(f.grid, i2 - i1, j2 - j1))
    return abs(f.values[i2, j2] - f.values[i1, j1]) / d**alpha


def holder_seminorm(f: Field, alpha: float, cfg: NormConfig | None = None) -> NormReport:
    """Parabolic Hoelder seminorm ``[f]_alpha``.

    For alpha in (1, 2) this is ``[d1 f]_(alpha-1)``; for alpha in (2, 3)
    ``[d1^2 f]_(alpha-2) + [d2 f]_(alpha-2)``.
    """
    cfg = cfg or NormConfig()
    if alpha in (1, 2) or not (0 < alpha < 3):
        raise ValueError("alpha must lie in (0,1) U (1,2) U (2,3)")
    if alpha < 1:
        v, w, m = _holder_sup(f.values, f.grid, alpha, cfg)
        return NormReport(v, w, m, alpha)
    if alpha < 2:
        rep = holder_seminorm(spectral_derivative(f, 1, 1), alpha - 1, cfg)
        return NormReport(rep.value, ("d1", rep.witness), rep.method, alpha)
    r1 = holder_seminorm(spectral_derivative(f, 1, 2), alpha - 2, cfg)
    d2 = spectral_derivative(f, 2, 1, one_sided=f.kind != TORUS)
    r2 = holder_seminorm(d2, alpha - 2, cfg)
    return NormReport(r1.value + r2.value, (("d11", r1.witness), ("d2", r2.witness)), r1.method, alpha)


def local_holder_seminorm(f: Field, alpha: float, cfg: NormConfig | None = None) -> NormReport:
    """Supremum restricted to pairs with ``d(x, y) <= 1``."""
    cfg = cfg or NormConfig()
    if not 0 < alpha < 1:
        raise ValueError("local seminorm needs alpha in (0, 1)")
    v, w, m = _holder_sup(f.values, f.grid, alpha, cfg, dmax=1.0)
    return NormReport(v, w, m, alpha)


def holder_norm(f: Field, alpha: float, cfg: NormConfig | None = None) -> float:
    """``||f|| + [f]_alpha``."""
    return f.sup() + holder_seminorm(f, alpha, cfg).value


def holder_norm_1d(values, alpha: float) -> float:
    """Elliptic ``C^alpha`` norm of period-1 data on a uniform grid
    (every offset, exhaustive)."""
    v = np.asarray(values, dtype=float)
    n = v.size
    best = 0.0
    for s in range(1, n // 2 + 1):
        best = max(best, np.max(np.abs(np.roll(v, -s) - v)) / (s / n) ** alpha)
    return float(np.max(np.abs(v)) + best)


# --- negative norms ---------------------------------------------------------------

def neg_norm_conv(f: Field, beta: float, cfg: NormConfig | None = None) -> NormReport:
    """``max_T (T^(1/4))^beta ||f_T||`` over the dyadic ladder."""
    cfg = cfg or NormConfig()
    if not beta > 0:
        raise ValueError("beta must be positive")
    best, wit = 0.0, None
    if f.kind == TORUS:
        hat = np.fft.fft2(f.values)
        k1, k2 = f.grid.wavenumbers()
        for T in cfg.dyadic_T:
            v = np.max(np.abs(np.fft.ifft2(hat * psi_hat(k1, k2, T)).real)) * T ** (beta / 4)
            if v > best or wit is None:
                best, wit = float(v), T
    else:
        for T in cfg.dyadic_T:
            v = convolve(f, T).sup() * T ** (beta / 4)
            if v > best or wit is None:
                best, wit = float(v), T
    return NormReport(best, wit, "ladder", beta, tuple(cfg.dyadic_T))


def ladder_profile(f: Field, beta: float, cfg: NormConfig | None = None) -> np.ndarray:
    """``(T^(1/4))^beta ||f_T||`` at every ladder scale."""
    cfg = cfg or NormConfig()
    hat = np.fft.fft2(f.values)
    k1, k2 = f.grid.wavenumbers()
    return np.array([np.max(np.abs(np.fft.ifft2(hat * psi_hat(k1, k2, T)).real)) * T ** (beta / 4)
                     for T in cfg.dyadic_T])


def triplet_solution(f: Field) -> Field:
    """Solve ``(d1^4 - d2^2 + 1) u = f`` on the torus."""
    if f.kind != TORUS:
        raise ValueError("triplet construction needs a torus field")
    k1, k2 = f.grid.wavenumbers()
    return Field(f.grid, np.fft.ifft2(np.fft.fft2(f.values) / (k1**4 + k2**2 + 1)).real)


def neg_norm_triplet(f: Field, alpha: float, cfg: NormConfig | None = None) -> NormReport:
    """Upper proxy for the ``C^(alpha-2)`` norm from the decomposition
    ``f = d1^2 (d1^2 u) + d2 (-d2 u) + u``."""
    cfg = cfg or NormConfig(alpha=alpha)
    u = triplet_solution(f)
    parts = {
        "d11u": holder_seminorm(spectral_derivative(u, 1, 2), alpha, cfg),
        "d2u": holder_seminorm(spectral_derivative(u, 2, 1), alpha, cfg),
        "u": holder_seminorm(u, alpha, cfg),
    }
    value = sum(p.value for p in parts.values()) + u.sup()
    return NormReport(value, {k: p.witness for k, p in parts.items()}, parts["u"].method, alpha)


# --- modelling ----------------------------------------------------------------------

def _stack(family) -> np.ndarray:
    return np.asarray(family.values)


def modelling_constant(U: Field, families, a_fields, sigmas, cfg: NormConfig | None = None,
                       nu: Field | None = None, references=None) -> ModellingReport:
    """Measured modelling constant of ``U`` after the given families.

    ``families``, ``a_fields`` and ``sigmas`` are parallel lists (a single
    family may be passed bare).  The residual for a pair ``(x, y)`` is
    ``U(y) - U(x) - sum_i sigma_i(x) (V_i(y, a_i(x)) - V_i(x, a_i(x)))
    - nu(x) (y - x)_1``.  Unless supplied, ``nu`` is fitted per base point
    by least squares over the local offsets with weights ``d^(-4 alpha)``;
    ``M`` is the supremum of ``|residual| / d^(2 alpha)`` over all sampled
    pairs.
    """
    cfg = cfg or NormConfig()
    if not isinstance(families, (list, tuple)):
        families, a_fields, sigmas = [families], [a_fields], [sigmas]
    grid = U.grid
    alpha2 = 2 * cfg.alpha
    periodic2 = grid.domain_kind == TORUS
    n1, rows = grid.shape
    from .refsol import cubic_weights

    prepared = []
    for fam, a, sig in zip(families, a_fields, sigmas):
        if fam.grid != grid:
            raise ValueError("family and modelled function live on different grids")
        a_vals = a.values if isinstance(a, Field) else np.full(grid.shape, float(a))
        sig_vals = sig.values if isinstance(sig, Field) else np.full(grid.shape, float(sig))
        idx, w = cubic_weights(fam.a_values, a_vals)
        V = _stack(fam)
        # the evaluation V(x, a(x)) and the stencil used for V(y, a(x))
        E = np.zeros(grid.shape)
        for c in range(4):
            E += w[..., c] * np.take_along_axis(V, idx[None, ..., c], axis=0)[0]
        prepared.append((V, idx, w, sig_vals, E))

    def residual_offset(s1, s2):
        a_sh, b, sl = _shift(U.values, s1, s2, periodic2)
        R = a_sh - b
        for V, idx, w, sig, E in prepared:
            Vs, _, _ = _shift(V, s1, s2, periodic2)
            acc = np.zeros_like(R)
            for c in range(4):
                acc += w[:, sl, c] * np.take_along_axis(Vs, idx[None, :, sl, c], axis=0)[0]
            R -= sig[:, sl] * (acc - E[:, sl])
        return R, sl

    (S1, S2), method = _offsets_for(grid, cfg.method)
    if method == "exhaustive":
        L1, L2 = _local_offsets(grid)
    else:
        L1, L2 = S1, S2

    if nu is None:
        num = np.zeros(grid.shape)
        den = np.zeros(grid.shape)
        for s1, s2 in zip(L1, L2):
            s1, s2 = int(s1), int(s2)
            d = float(offset_distance(grid, s1, s2))
            if d == 0:
                continue
            h1 = (s1 - n1 * round(s1 / n1)) * grid.dx1
            if h1 == 0:
                continue
            wgt = d ** (-2 * alpha2)
            R, sl = residual_offset(s1, s2)
            num[:, sl] += wgt * h1 * R
            den[:, sl] += wgt * h1 * h1
            # the mirrored pair (x + s, x) seen from the other base point
            Rm, slm = residual_offset(-s1, -s2)
            num[:, slm] += wgt * (-h1) * Rm
            den[:, slm] += wgt * h1 * h1
        nu_vals = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
        nu = Field(grid, nu_vals)
    nu_vals = nu.values

    best, wit = 0.0, None
    for s1, s2 in zip(S1, S2):
        for t1, t2 in ((int(s1), int(s2)), (-int(s1), -int(s2))):
            d = float(offset_distance(grid, t1, t2))
            if d == 0:
                continue
            h1 = (t1 - n1 * round(t1 / n1)) * grid.dx1
            R, sl = residual_offset(t1, t2)
            if R.size == 0:
                continue
            r = np.abs(R - nu_vals[:, sl] * h1) / d**alpha2
            k = int(np.argmax(r))
            if r.flat[k] > best:
                best, wit = float(r.flat[k]), _witness(grid, k, t1, t2, sl)
    if method == "sampled" and cfg.pair_budget > 0:
        x, y = _random_pairs(grid, cfg.pair_budget, cfg.seed)
        d = _pair_distance(grid, x, y)
        ok = d > 0
        x, y, d = x[ok], y[ok], d[ok]
        Uf = U.values.ravel()
        R = Uf[y] - Uf[x]
        for V, idx, w, sig, E in prepared:
            Vf = V.reshape(V.shape[0], -1)
            idf = idx.reshape(-1, 4)[x]
            wf = w.reshape(-1, 4)[x]
            Vy = sum(wf[:, c] * Vf[idf[:, c], y] for c in range(4))
            R -= sig.ravel()[x] * (Vy - E.ravel()[x])
        i1, _ = np.divmod(x, rows)
        i2, _ = np.divmod(y, rows)
        h1 = ((i2 - i1) - n1 * np.round((i2 - i1) / n1)) * grid.dx1
        r = np.abs(R - nu_vals.ravel()[x] * h1) / d**alpha2
        if r.size:
            k = int(np.argmax(r))
            if r[k] > best:
                best = float(r[k])
                wit = (divmod(int(x[k]), rows), divmod(int(y[k]), rows))
    return ModellingReport(best, list(sigmas), list(a_fields), nu,
                           references or [getattr(f, "name", "family") for f in families],
                           wit, method)


def least_squares_objective(U: Field, families, a_fields, sigmas, nu: Field,
                            cfg: NormConfig | None = None) -> float:
    """Weighted least-squares functional minimised by the fitted ``nu``."""
    cfg = cfg or NormConfig()
    rep = _ls_terms(U, families, a_fields, sigmas, nu, cfg)
    return rep


def _ls_terms(U, families, a_fields, sigmas, nu, cfg):
    grid = U.grid
    alpha2 = 2 * cfg.alpha
    periodic2 = grid.domain_kind == TORUS
    n1 = grid.n1
    if not isinstance(families, (list, tuple)):
        families, a_fields, sigmas = [families], [a_fields], [sigmas]
    from .refsol import cubic_weights
    L1, L2 = _local_offsets(grid)
    total = 0.0
    for s1, s2 in zip(L1, L2):
        for t1, t2 in ((int(s1), int(s2)), (-int(s1), -int(s2))):
            d = float(offset_distance(grid, t1, t2))
            h1 = (t1 - n1 * round(t1 / n1)) * grid.dx1
            if d == 0 or h1 == 0:
                continue
            a_sh, b, sl = _shift(U.values, t1, t2, periodic2)
            R = a_sh - b
            for fam, a, sig in zip(families, a_fields, sigmas):
                a_vals = a.values if isinstance(a, Field) else np.full(grid.shape, float(a))
                s_vals = sig.values if isinstance(sig, Field) else np.full(grid.shape, float(sig))
                idx, w = cubic_weights(fam.a_values, a_vals)
                V = _stack(fam)
                Vs, Vb, _ = _shift(V, t1, t2, periodic2)
                acc = np.zeros_like(R)
                for c in range(4):
                    ic = idx[None, :, sl, c]
                    acc += w[:, sl, c] * (np.take_along_axis(Vs, ic, axis=0)[0]
                                          - np.take_along_axis(Vb, ic, axis=0)[0])
                R -= s_vals[:, sl] * acc
            total += float(np.sum(((R - nu.values[:, sl] * h1) / d**alpha2) ** 2))
    return total


# --- commutators -----------------------------------------------------------------------

def _as_stack(x):
    if isinstance(x, Field):
        return x.values[None], x.grid, False
    vals = getattr(x, "values", x)
    grid = getattr(x, "grid", None)
    return np.asarray(vals), grid, True


def _conv_stack(stack: np.ndarray, grid: GridSpec, T: float) -> np.ndarray:
    lead = stack.shape[:-2]
    flat = stack.reshape((-1,) + stack.shape[-2:])
    out = np.empty_like(flat)
    for k in range(flat.shape[0]):
        out[k] = convolve(Field(grid, flat[k]), T).values
    return out.reshape(lead + stack.shape[-2:])


def _difference_quotients(C: np.ndarray, axes, step: float, order: int):
    """Central difference quotients of orders ``0..order`` along each
    parameter axis (mixed orders included)."""
    outs = [C]
    for ax in axes:
        new = []
        for arr in outs:
            new.append(arr)
            n = arr.shape[ax]
            if order >= 1 and n >= 3:
                a = np.take(arr, range(2, n), axis=ax)
                b = np.take(arr, range(0, n - 2), axis=ax)
                new.append((a - b) / (2 * step))
            if order >= 2 and n >= 3:
                a = np.take(arr, range(2, n), axis=ax)
                m = np.take(arr, range(1, n - 1), axis=ax)
                b = np.take(arr, range(0, n - 2), axis=ax)
                new.append((a - 2 * m + b) / step**2)
        outs = new
    return outs


def commutator_norm(F, h, product, cfg: NormConfig | None = None, *, beta: float | None = None,
                    order: int = 0, step: float | None = None, grid: GridSpec | None = None) -> NormReport:
    """Ladder norm of ``F h_T - (F <> h)_T``.

    ``F`` and ``h`` are Fields or parameter stacks (arrays whose leading axis
    is a parameter).  ``product`` holds ``F <> h`` with the matching leading
    axes ``(F-axis, h-axis)``.  With ``order >= 1`` central difference
    quotients in the parameters (spacing ``step``) are included.  The weight
    is ``(T^(1/4))^beta`` with ``beta = 2 - 2 alpha`` by default.
    """
    cfg = cfg or NormConfig()
    if not cfg.dyadic_T:
        raise ValueError("empty ladder")
    beta = 2 - 2 * cfg.alpha if beta is None else beta
    Fs, gF, F_param = _as_stack(F)
    Hs, gH, H_param = _as_stack(h)
    Ps, gP, _ = _as_stack(product)
    grid = grid or gP or gH or gF
    # broadcast to (nF, nH, n1, rows)
    Fb = Fs[:, None]
    P = Ps.reshape((Fs.shape[0] if F_param else 1, Hs.shape[0] if H_param else 1) + Ps.shape[-2:])
    axes = [ax for ax, flag in ((0, F_param), (1, H_param)) if flag]
    if order and step is None:
        raise ValueError("parameter difference quotients need a step")
    best, wit = 0.0, None
    for T in cfg.dyadic_T:
        hT = _conv_stack(Hs, grid, T)[None]
        PT = _conv_stack(P, grid, T)
        C = Fb * hT - PT
        pieces = _difference_quotients(C, axes, step, order) if order else [C]
        v = max(float(np.max(np.abs(p))) for p in pieces) * T ** (beta / 4)
        if v > best or wit is None:
            best, wit = v, T
    return NormReport(best, wit, "ladder", cfg.alpha, tuple(cfg.dyadic_T))


# --- tails ----------------------------------------------------------------------------------

def tail_decay_report(f: Field, alpha: float, delta: float, L_ladder, T_ladder=None):
    """Sup of ``|f_T|`` over ``x2 <= -L`` for a trivially extended ``f``.

    Returns ``{"rows": [(L, T, sup)], "T_exponent": {L: slope},
    "L_exponent": {T: slope}}``; slopes are least-squares fits of
    ``log sup`` against ``log T^(1/4)`` (resp. ``log L``) over positive
    entries.  ``alpha`` and ``delta`` are echoed with the reference exponent
    ``2 alpha - 2 + 2 delta`` for comparison.
    """
    if f.kind != "two_sided":
        raise ValueError("tail report expects a two-sided field")
    T_ladder = tuple(T_ladder) if T_ladder is not None else tuple(2.0 ** -j for j in range(4, 13))
    x2 = f.grid.x2
    table = {}
    for T in T_ladder:
        fT = np.abs(convolve(f, T).values)
        for L in L_ladder:
            mask = x2 <= -L
            table[(L, T)] = float(fT[:, mask].max()) if mask.any() else 0.0
    rows = [(L, T, table[(L, T)]) for L in L_ladder for T in T_ladder]

    def fit(xs, ys):
        xs, ys = np.asarray(xs), np.asarray(ys)
        ok = (ys > 1e-300) & (xs > 0)
        if ok.sum() < 2:
            return float("nan")
        return float(np.polyfit(np.log(xs[ok]), np.log(ys[ok]), 1)[0])

    T_exp = {L: fit([T**0.25 for T in T_ladder], [table[(L, T)] for T in T_ladder]) for L in L_ladder}
    L_exp = {T: fit(list(L_ladder), [table[(L, T)] for L in L_ladder]) for T in T_ladder}
    return {"rows": rows, "T_exponent": T_exp, "L_exponent": L_exp,
            "reference_exponent": 2 * alpha - 2 + 2 * delta}
