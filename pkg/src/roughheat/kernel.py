"""The smoothing family psi_T and the mollifiers psi'_eps as Fourier multipliers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import TORUS, Field, GridSpec

_BASES = ("psi", "gaussian")


@dataclass(frozen=True)
class KernelSpec:
    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")


@dataclass(frozen=True)
class MollifierSpec:
    epsilon: float
    base: str = "psi"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.base not in _BASES:
            raise ValueError(f"base must be one of {_BASES}")

    def multiplier(self, k1, k2):
        """Fourier transform of the rescaled base kernel,
        ``psi'_1_hat(eps**0.25 * k1, eps**0.5 * k2)``."""
        e = self.epsilon
        if self.base == "psi":
            return psi_hat(k1, k2, e)
        return np.exp(-0.5 * (np.sqrt(e) * np.asarray(k1) ** 2 + e * np.asarray(k2) ** 2))


def psi_hat(k1, k2, T: float):
    """``exp(-T (k1^4 + k2^2))``; unit mass, so ``psi_hat(0, 0, T) == 1``."""
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    return np.exp(-T * (k1**4 + k2**2))


def _gaussian_rows(grid: GridSpec, T: float) -> np.ndarray:
    """Row-mixing matrix for the x2 factor of psi_T on a non-periodic window.

    The x2 factor is the heat kernel ``(4 pi T)^(-1/2) exp(-z^2 / 4T)``;
    weights are normalised by their full-line lattice sum so constants are
    preserved away from the window edges.  Outside the window the field is
    taken to be zero.
    """
    x2 = grid.x2
    dz = x2[:, None] - x2[None, :]
    h = grid.dx2
    g = np.exp(-(dz**2) / (4 * T))
    zmax = int(np.ceil(12 * np.sqrt(2 * T) / h)) + 1
    lattice = np.arange(-zmax, zmax + 1) * h
    norm = np.exp(-(lattice**2) / (4 * T)).sum()
    return g / norm


def _apply_x1_x2(f: Field, mult1: np.ndarray, T: float) -> Field:
    hat = np.fft.fft(f.values, axis=0) * mult1[:, None]
    v = np.fft.ifft(hat, axis=0).real
    return Field(f.grid, v @ _gaussian_rows(f.grid, T).T)


def convolve(f: Field, T: float) -> Field:
    """``f * psi_T``.

    Exact Fourier multiplication on the torus.  On half-plane and two-sided
    windows x1 is still handled spectrally while the x2 factor is applied as
    a discrete heat-kernel convolution with zero continuation.
    """
    KernelSpec(T)
    if f.kind == TORUS:
        k1, k2 = f.grid.wavenumbers()
        return Field(f.grid, np.fft.ifft2(np.fft.fft2(f.values) * psi_hat(k1, k2, T)).real)
    k1 = f.grid.k1
    return _apply_x1_x2(f, np.exp(-T * k1**4), T)


def x1_commutator(h: Field, T: float) -> Field:
    """``x1 * h_T - (x1 * h)_T``, i.e. ``h`` convolved with ``z1 psi_T(z)``.

    The transform of ``z1 psi_T(z)`` is ``i d/dk1 psi_hat = -4 i T k1^3 psi_hat``.
    """
    KernelSpec(T)
    k1 = h.grid.k1
    m1 = -4j * T * k1**3 * np.exp(-T * k1**4)
    m1[h.grid.n1 // 2] = 0.0
    if h.kind == TORUS:
        k2 = h.grid.k2
        mult = m1[:, None] * np.exp(-T * k2**2)[None, :]
        return Field(h.grid, np.fft.ifft2(np.fft.fft2(h.values) * mult).real)
    return _apply_x1_x2(h, m1, T)


def mollify(f: Field, spec: MollifierSpec) -> Field:
    if f.kind != TORUS:
        raise ValueError("mollification is defined for torus fields")
    k1, k2 = f.grid.wavenumbers()
    return Field(f.grid, np.fft.ifft2(np.fft.fft2(f.values) * spec.multiplier(k1, k2)).real)


def _kernel_factor_1d(n: int, L: float, deriv: int, weight) -> tuple[np.ndarray, np.ndarray]:
    """Samples of a 1-d kernel on ``[-L, L)`` from its transform ``weight(kappa)``."""
    h = 2 * L / n
    x = -L + h * np.arange(n)
    kappa = 2 * np.pi * np.fft.fftfreq(n, d=h)
    spec = weight(kappa) * (1j * kappa) ** deriv
    if deriv % 2 == 1:
        spec[n // 2] = 0.0
    # ifft samples x = 0, h, ...; fftshift moves sample 0 to x = -L
    vals = np.fft.fftshift(np.fft.ifft(spec)) * n / (2 * L)
    return x, vals.real


def kernel_profile(T: float, i: int = 0, j: int = 0, n: int = 4096, L: float = 8.0):
    """Separable samples ``(x, d^i phi_T, d^j gamma_T)`` with
    ``psi_T(x1, x2) = phi_T(x1) gamma_T(x2)``."""
    x, phi = _kernel_factor_1d(n, L, i, lambda k: np.exp(-T * k**4))
    _, gam = _kernel_factor_1d(n, L, j, lambda k: np.exp(-T * k**2))
    return x, phi, gam


def kernel_min(T: float = 1.0, n: int = 4096, L: float = 8.0) -> tuple[float, float]:
    """``(min psi_T, max psi_T)`` on the quadrature grid."""
    _, phi, gam = kernel_profile(T, 0, 0, n, L)
    vals = (phi.min() * gam.max(), phi.max() * gam.max())
    return float(min(vals)), float(max(vals))


@dataclass(frozen=True)
class MomentResult:
    value: float
    truncation: float


def moment_integral(alpha: float, i: int, j: int, T: float, n: int = 4096, L: float = 8.0,
                    chunk: int = 256) -> MomentResult:
    """Quadrature of ``int d^alpha(x, 0) |d1^i d2^j psi_T(x)| dx`` over
    ``[-L, L]^2``.

    ``truncation`` is the part of the integral carried by the outer band
    ``max(|x1|, |x2|) > 0.9 L``, an estimate of what the cut-off box misses.
    """
    if alpha < 0 or i < 0 or j < 0:
        raise ValueError("alpha, i, j must be non-negative")
    x, phi, gam = kernel_profile(T, i, j, n, L)
    h = x[1] - x[0]
    aphi = np.abs(phi)
    agam = np.abs(gam)
    sq2 = np.sqrt(np.abs(x))
    band2 = np.abs(x) > 0.9 * L
    if alpha == 0:
        # separable: product of the two 1-d L1 norms
        inner = ~band2
        total = aphi.sum() * agam.sum()
        outer = total - aphi[inner].sum() * agam[inner].sum()
        return MomentResult(float(total * h * h), float(outer * h * h))
    total = 0.0
    outer = 0.0
    for s in range(0, n, chunk):
        x1 = np.abs(x[s:s + chunk])[:, None]
        w = (x1 + sq2[None, :]) ** alpha
        integrand = w * aphi[s:s + chunk, None] * agam[None, :]
        total += integrand.sum()
        mask = (x1 > 0.9 * L) | band2[None, :]
        outer += integrand[np.broadcast_to(mask, integrand.shape)].sum()
    return MomentResult(float(total * h * h), float(outer * h * h))


def moment_slope(alpha: float, i: int, j: int, Ts, **kw) -> float:
    """Least-squares slope of ``log moment`` against ``log T^(1/4)``."""
    Ts = np.asarray(Ts, dtype=float)
    vals = np.array([moment_integral(alpha, i, j, T, **kw).value for T in Ts])
    return float(np.polyfit(np.log(Ts**0.25), np.log(vals), 1)[0])
