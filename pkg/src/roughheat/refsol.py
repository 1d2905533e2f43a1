"""Constant-coefficient reference solutions and their parameter derivatives.

Everything here is an exact Fourier multiplier: the periodic solve
``(d2 - a0 d1^2 + 1) v = f`` on the torus, and the heat layer
``V(x, a0, g) = sum_m g_hat(m) exp(i k x1 - (a0 k^2 + 1) x2)`` on the half
plane.  Parameter families are tabulated on a ``ParamGrid`` and evaluated
at ``a0 = a(x)`` through four-point Lagrange weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .grid import HALF_PLANE, TORUS, Field, GridSpec


@dataclass(frozen=True)
class ParamGrid:
    lam: float = 0.25
    n: int = 17

    def __post_init__(self):
        if not 0 < self.lam <= 1:
            raise ValueError("lambda must lie in (0, 1]")
        if self.n < 4 and self.lam < 1:
            raise ValueError("cubic interpolation needs at least 4 parameter points")

    @property
    def values(self) -> np.ndarray:
        if self.lam == 1:
            return np.array([1.0])
        return np.linspace(self.lam, 1.0, self.n)

    @property
    def spacing(self) -> float:
        return (1.0 - self.lam) / (self.n - 1) if self.n > 1 else 0.0


def cubic_weights(nodes, a, tol: float = 1e-12):
    """Four-point Lagrange stencil on uniform ``nodes`` for every entry of ``a``.

    Returns ``(idx, w)`` with trailing axis 4.  Values outside the node range
    by more than ``tol`` are rejected.
    """
    nodes = np.asarray(nodes, dtype=float)
    a = np.asarray(a, dtype=float)
    lo, hi = nodes[0], nodes[-1]
    if np.any(a < lo - tol) or np.any(a > hi + tol):
        raise ValueError(f"parameter values outside [{lo}, {hi}]: "
                         f"range [{a.min():.6g}, {a.max():.6g}]")
    n = nodes.size
    if n == 1:
        idx = np.zeros(a.shape + (4,), dtype=np.intp)
        w = np.zeros(a.shape + (4,))
        w[..., 0] = 1.0
        return idx, w
    if n < 4:
        raise ValueError("need at least 4 nodes")
    h = nodes[1] - nodes[0]
    t = (np.clip(a, lo, hi) - lo) / h
    start = np.clip(np.floor(t).astype(np.intp) - 1, 0, n - 4)
    idx = start[..., None] + np.arange(4)
    r = t - start  # position inside the stencil, in units of h
    w = np.ones(a.shape + (4,))
    for c in range(4):
        for d in range(4):
            if d != c:
                w[..., c] *= (r - d) / (c - d)
    return idx, w


@dataclass(eq=False)
class ParamFamily:
    """Fields ``a0 -> F(., a0)`` tabulated on a parameter grid, with the
    analytic ``a0``-derivatives stored per order."""

    grid: GridSpec
    a_values: np.ndarray
    values: np.ndarray
    derivs: dict = field(default_factory=dict)
    name: str = "family"

    def __post_init__(self):
        self.a_values = np.asarray(self.a_values, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.a_values.size,) + self.grid.shape:
            raise ValueError("family stack does not match grid and parameter count")

    def stack(self, order: int = 0) -> np.ndarray:
        if order == 0:
            return self.values
        if order not in self.derivs:
            raise KeyError(f"family {self.name!r} has no order-{order} derivative")
        return self.derivs[order]

    def entry(self, a0: float, order: int = 0) -> Field:
        k = int(np.argmin(np.abs(self.a_values - a0)))
        if abs(self.a_values[k] - a0) > 1e-12:
            raise KeyError(f"a0={a0} is not a grid value")
        return Field(self.grid, self.stack(order)[k])

    def evaluate(self, a: Field | np.ndarray, order: int = 0) -> Field:
        """``F(x, a(x))`` by cubic interpolation in the parameter."""
        a_vals = a.values if isinstance(a, Field) else np.asarray(a)
        idx, w = cubic_weights(self.a_values, a_vals)
        S = self.stack(order)
        out = np.zeros(self.grid.shape)
        for c in range(4):
            out += w[..., c] * np.take_along_axis(S, idx[None, ..., c], axis=0)[0]
        return Field(self.grid, out)

    def __add__(self, other: "ParamFamily") -> "ParamFamily":
        if other.grid != self.grid or not np.array_equal(other.a_values, self.a_values):
            raise ValueError("families differ in grid or parameters")
        common = set(self.derivs) & set(other.derivs)
        return ParamFamily(self.grid, self.a_values, self.values + other.values,
                           {k: self.derivs[k] + other.derivs[k] for k in common},
                           f"{self.name}+{other.name}")


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Periodic data on the initial line.  ``a0_derivs`` lists
    ``d^j g / d a0^j`` for ``j = 1, 2, ...`` when the data depend on a0."""

    values: np.ndarray
    a0_derivs: tuple = ()
    depends_on_a0: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ValueError("boundary data must be a finite 1-d array")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, n1: int, fn) -> "BoundaryData":
        return cls(fn(np.arange(n1) / n1))


def _torus_hat(f: Field) -> np.ndarray:
    if f.kind != TORUS:
        raise ValueError("periodic solves need a torus field")
    return np.fft.fft2(f.values)


def _symbol(grid: GridSpec, a0: float, massive: bool) -> np.ndarray:
    k1 = grid.k1[:, None]
    return 1j * grid.k2_odd[None, :] + a0 * k1**2 + (1.0 if massive else 0.0)


def _check_a0(a0: float) -> None:
    if not 0 < a0 <= 1:
        raise ValueError("a0 must lie in (0, 1]")


def solve_periodic_v(f: Field, a0: float, massive: bool = True) -> Field:
    """``(d2 - a0 d1^2 + 1) v = f`` on the torus (drop the mass with
    ``massive=False``; then ``f`` must have zero mean)."""
    return periodic_v_derivatives(f, a0, 0, massive)


def periodic_v_derivatives(f: Field, a0: float, order: int = 1, massive: bool = True) -> Field:
    """``d^order v / d a0^order``; the symbol ``L = i k2 + a0 k1^2 + 1``
    gives ``(-k1^2)^n n! f_hat / L^(n+1)``."""
    _check_a0(a0)
    if order < 0 or order > 3:
        raise ValueError("order must be in 0..3")
    hat = _torus_hat(f)
    L = _symbol(f.grid, a0, massive)
    if not massive:
        if abs(hat[0, 0]) > 1e-9 * max(1.0, np.abs(hat).max()):
            raise ValueError("massless solve needs a mean-free forcing")
        L = L.copy()
        L[0, 0] = 1.0
        hat = hat.copy()
        hat[0, 0] = 0.0
    k1, _ = f.grid.wavenumbers()
    mult = (-(k1**2)) ** order * float(np.prod(range(1, order + 1))) / L ** (order + 1)
    return Field(f.grid, np.fft.ifft2(hat * mult).real)


def _nodes(pgrid) -> np.ndarray:
    return pgrid.values if isinstance(pgrid, ParamGrid) else np.asarray(pgrid, dtype=float)


def periodic_v_family(f: Field, pgrid, max_order: int = 2, massive: bool = True,
                      name: str = "v") -> ParamFamily:
    """``v(., a0)`` and its a0-derivatives on a ParamGrid (or explicit nodes)."""
    a = _nodes(pgrid)
    vals = np.stack([solve_periodic_v(f, x, massive).values for x in a])
    derivs = {n: np.stack([periodic_v_derivatives(f, x, n, massive).values for x in a])
              for n in range(1, max_order + 1)}
    return ParamFamily(f.grid, a, vals, derivs, name)


# --- heat layers --------------------------------------------------------------------

def _require_half(grid: GridSpec) -> None:
    if grid.domain_kind != HALF_PLANE:
        raise ValueError("heat layers live on the half plane")


def _boundary_hats(g: BoundaryData, grid: GridSpec, order: int):
    if g.values.size != grid.n1:
        raise ValueError("boundary data length does not match n1")
    hats = [np.fft.fft(g.values)]
    if g.depends_on_a0 and order > 0:
        if len(g.a0_derivs) < order:
            raise ValueError("parameter-dependent boundary data need d/da0 arrays up to the requested order")
        hats += [np.fft.fft(np.asarray(d, dtype=float)) for d in g.a0_derivs[:order]]
    return hats


def heat_layer_derivatives(g: BoundaryData, a0: float, order: int, grid: GridSpec,
                           massive: bool = True, x1_order: int = 0) -> Field:
    """``d1^x1_order d^order/d a0^order V(., a0, g)`` on the half plane.

    Each a0-derivative of the row multiplier ``exp(-(a0 k^2 + m) x2)``
    multiplies it by ``-k^2 x2``; parameter-dependent data add the Leibniz
    terms with the supplied derivative arrays.
    """
    _require_half(grid)
    _check_a0(a0)
    if not 0 <= order <= 3:
        raise ValueError("order must be in 0..3")
    hats = _boundary_hats(g, grid, order)
    k = grid.k1[:, None]
    x2 = grid.x2[None, :]
    row = np.exp(-(a0 * k**2 + (1.0 if massive else 0.0)) * x2)
    out = np.zeros((grid.n1, grid.rows), dtype=complex)
    for j, gh in enumerate(hats):
        if j > order:
            break
        out += comb(order, j) * (-(k**2) * x2) ** (order - j) * gh[:, None]
    mult = (1j * k) ** x1_order
    if x1_order % 2 == 1:
        mult[grid.n1 // 2] = 0.0
    return Field(grid, np.fft.ifft(out * row * mult, axis=0).real)


def heat_layer_V(g: BoundaryData, a0: float, grid: GridSpec, massive: bool = True) -> Field:
    """Heat semigroup with mass started from ``g``; row ``x2 = 0`` is ``g``."""
    return heat_layer_derivatives(g, a0, 0, grid, massive)


def heat_layer_family(g: BoundaryData, pgrid, grid: GridSpec, max_order: int = 3,
                      massive: bool = True, name: str = "V") -> ParamFamily:
    a = _nodes(pgrid)
    vals = np.stack([heat_layer_V(g, x, grid, massive).values for x in a])
    derivs = {n: np.stack([heat_layer_derivatives(g, x, n, grid, massive).values for x in a])
              for n in range(1, max_order + 1)}
    return ParamFamily(grid, a, vals, derivs, name)


def heat_layer_at(g: BoundaryData, a_field: Field, order: int = 0, x1_order: int = 0,
                  massive: bool = True) -> Field:
    """``d1^x1_order d_a0^order V(x, a0, g)`` evaluated at ``a0 = a(x)`` by a
    pointwise mode sum (no parameter interpolation).  ``g`` must not depend
    on a0."""
    grid = a_field.grid
    _require_half(grid)
    if g.depends_on_a0:
        raise ValueError("pointwise evaluation supports a0-independent data only")
    a = a_field.values
    if np.any(a <= 0):
        raise ValueError("coefficient must be positive")
    gh = np.fft.fft(g.values) / grid.n1
    k = grid.k1
    ik = (1j * k) ** x1_order
    if x1_order % 2 == 1:
        ik[grid.n1 // 2] = 0.0
    x1 = grid.x1
    x2 = grid.x2
    m = 1.0 if massive else 0.0
    out = np.empty(grid.shape)
    coef = gh * ik
    a_min = float(a.min())
    for j in range(grid.rows):
        t = x2[j]
        # drop modes already damped below double precision everywhere
        keep = np.flatnonzero((a_min * k**2 * t < 42.0) & (coef != 0))
        if keep.size == 0:
            out[:, j] = 0.0
            continue
        kk = k[keep]
        phase = np.exp(1j * np.outer(x1, kk))
        damp = np.exp(-(a[:, j, None] * kk[None, :] ** 2 + m) * t)
        fac = (-(kk[None, :] ** 2) * t) ** order
        out[:, j] = np.sum(phase * coef[None, keep] * damp * fac, axis=1).real
    return Field(grid, out)


def coefficient_layer(a_boundary: BoundaryData, grid: GridSpec) -> Field:
    """Solution of ``(d2 - d1^2) a_bar = 0`` with ``a_bar(., 0) = a_boundary``."""
    if np.ptp(a_boundary.values) == 0:
        _require_half(grid)
        return Field(grid, np.full(grid.shape, a_boundary.values[0]))
    return heat_layer_V(a_boundary, 1.0, grid, massive=False)


def _periodic_gaussian(z, var):
    """Period-1 heat kernel with variance ``var`` (``var > 0``) at offsets ``z``."""
    std = float(np.sqrt(var.max()))
    if std < 0.25:
        J = int(np.ceil(8 * std)) + 1
        j = np.arange(-J, J + 1)
        zz = z[..., None] + j
        return np.exp(-zz**2 / (2 * var[..., None])).sum(-1) / np.sqrt(2 * np.pi * var)
    M = int(np.ceil(np.sqrt(40.0 / (2 * np.pi**2 * var.min())))) + 1
    m = np.arange(1, M + 1)
    return 1 + 2 * np.sum(np.exp(-2 * np.pi**2 * m**2 * var[..., None])
                          * np.cos(2 * np.pi * m * z[..., None]), axis=-1)


def nu_int(nu_boundary, a_tr: Field, grid: GridSpec | None = None) -> Field:
    """``e^(-y2) int G(a_tr(y), y1 - s, y2) nu(s) ds`` on the half plane,
    where ``G(a, ., t)`` is the periodic Gaussian of variance ``2 a t``.

    The integral is a rectangle-rule quadrature over the boundary samples,
    upsampled spectrally when the narrowest Gaussian is under two samples
    wide.  Row ``y2 = 0`` returns ``nu`` itself.
    """
    grid = grid or a_tr.grid
    _require_half(grid)
    nu = np.asarray(nu_boundary, dtype=float)
    if nu.size != grid.n1:
        raise ValueError("boundary array length does not match n1")
    a = a_tr.values
    if np.any(a <= 0):
        raise ValueError("a_tr must be positive")
    x2 = grid.x2
    std_min = np.sqrt(2 * a[:, 1:].min() * x2[1]) if grid.rows > 1 else 1.0
    up = 1
    while grid.dx1 / up > std_min / 2:
        up *= 2
    n = grid.n1 * up
    if up > 1:
        hat = np.fft.fft(nu)
        big = np.zeros(n, dtype=complex)
        h = grid.n1 // 2
        big[:h] = hat[:h]
        big[-h + 1:] = hat[-h + 1:]
        big[h] = hat[h] / 2
        big[-h] = hat[h] / 2
        nu_s = np.fft.ifft(big).real * up
    else:
        nu_s = nu
    s = np.arange(n) / n
    y1 = grid.x1
    z = y1[:, None] - s[None, :]
    z = z - np.round(z)
    out = np.empty(grid.shape)
    out[:, 0] = nu
    for j in range(1, grid.rows):
        var = np.broadcast_to((2 * a[:, j] * x2[j])[:, None], z.shape)
        K = _periodic_gaussian(z, var)
        out[:, j] = np.exp(-x2[j]) * (K @ nu_s) / n
    return Field(grid, out)


def heat_layer_rows(g: BoundaryData, a0: float, x2, order: int = 0, x1_order: int = 0,
                    massive: bool = True) -> np.ndarray:
    """``d1^x1_order d_a0^order V(., a0, g)`` at arbitrary times ``x2``;
    returns shape ``(n1, len(x2))``."""
    _check_a0(a0)
    x2 = np.asarray(x2, dtype=float)[None, :]
    n1 = g.values.size
    k = 2 * np.pi * np.fft.fftfreq(n1, d=1.0 / n1)[:, None]
    hats = _boundary_hats(g, GridSpec(n1, 1, HALF_PLANE), order)
    out = np.zeros((n1, x2.shape[1]), dtype=complex)
    for j, gh in enumerate(hats[: order + 1]):
        out += comb(order, j) * (-(k**2) * x2) ** (order - j) * gh[:, None]
    mult = (1j * k) ** x1_order
    if x1_order % 2 == 1:
        mult[n1 // 2] = 0.0
    row = np.exp(-(a0 * k**2 + (1.0 if massive else 0.0)) * x2)
    return np.fft.ifft(out * row * mult, axis=0).real


def weierstrass_data(n1: int, alpha: float, amplitude: float = 1.0, seed: int = 0) -> BoundaryData:
    """Lacunary series ``sum_j 2^(-alpha j) cos(2 pi 2^j x + phase_j)`` up to
    the Nyquist scale: periodic data of exact Hoelder class ``alpha``."""
    rng = np.random.default_rng(seed)
    x = np.arange(n1) / n1
    out = np.zeros(n1)
    j = 0
    while 2**j < n1 // 2:
        out += 2.0 ** (-alpha * j) * np.cos(2 * np.pi * 2**j * x + rng.uniform(0, 2 * np.pi))
        j += 1
    return BoundaryData(amplitude * out)


def cusp_data(n1: int, alpha: float, amplitude: float = 1.0, center: float = 0.5) -> BoundaryData:
    """``amplitude |sin(pi (x - center))|^alpha``: smooth except for one
    self-similar cusp, so heat-layer derivatives follow their scaling law
    without the logarithmic corrections of random or lacunary data."""
    x = np.arange(n1) / n1
    return BoundaryData(amplitude * np.abs(np.sin(np.pi * (x - center))) ** alpha)
