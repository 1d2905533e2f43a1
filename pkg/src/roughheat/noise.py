"""Stationary periodic Gaussian forcings with a prescribed spectral density."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .grid import TORUS, Field, GridSpec
from .kernel import MollifierSpec, mollify


@dataclass(frozen=True)
class CovarianceSpec:
    """``C_hat(k) = amplitude * (1 + |k1|)^(-lambda1) * (1 + |k2|)^(-lambda2 / 2)``
    on modes with ``|m1|, |m2| <= cutoff``, zero elsewhere."""

    lambda1: float
    lambda2: float
    alpha_prime: float
    amplitude: float = 1e-2
    cutoff: int = 32

    def __post_init__(self):
        if not 0.25 < self.alpha_prime < 1:
            raise ValueError("alpha_prime must lie in (1/4, 1)")
        if abs(self.lambda1 + self.lambda2 - (2 * self.alpha_prime - 1)) > 1e-12:
            raise ValueError("lambda1 + lambda2 must equal 2 alpha' - 1")
        if not self.lambda1 < 1 or not self.lambda2 / 2 < 1:
            raise ValueError("need lambda1 < 1 and lambda2 / 2 < 1")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")
        if self.cutoff < 0:
            raise ValueError("cutoff must be non-negative")

    @classmethod
    def white_in_time(cls, alpha_prime: float = 0.85, amplitude: float = 1e-2, cutoff: int = 32):
        return cls(2 * alpha_prime - 1, 0.0, alpha_prime, amplitude, cutoff)

    def density(self, k1, k2):
        k1 = np.abs(np.asarray(k1, dtype=float))
        k2 = np.abs(np.asarray(k2, dtype=float))
        return self.amplitude * (1 + k1) ** (-self.lambda1) * (1 + k2) ** (-self.lambda2 / 2)

    def on_grid(self, grid: GridSpec) -> np.ndarray:
        """``C_hat`` in FFT layout with modes beyond the cutoff zeroed."""
        m1 = np.fft.fftfreq(grid.n1, d=1.0 / grid.n1)[:, None]
        m2 = np.fft.fftfreq(grid.n2, d=1.0 / grid.n2)[None, :]
        k1, k2 = grid.wavenumbers()
        keep = (np.abs(m1) <= self.cutoff) & (np.abs(m2) <= self.cutoff)
        return np.where(keep, self.density(k1, k2), 0.0)

    def to_json(self) -> str:
        return json.dumps(asdict(self))


@dataclass(frozen=True, eq=False)
class ForcingSample:
    field: Field
    seed: int
    spec: CovarianceSpec

    def sidecar(self) -> str:
        return json.dumps({"seed": self.seed, "spec": asdict(self.spec)})


def mode_index(m1, m2):
    """Position of integer mode ``(m1, m2)`` in a square spiral enumeration.

    The index depends only on the mode, so draws for a mode do not move when
    the grid or the cutoff changes.
    """
    m1 = np.asarray(m1, dtype=np.int64)
    m2 = np.asarray(m2, dtype=np.int64)
    s = np.maximum(np.abs(m1), np.abs(m2))
    base = (2 * s - 1) ** 2
    top = m2 == s
    right = (m1 == s) & ~top
    bottom = (m2 == -s) & ~top & ~right
    off = np.where(top, m1 + s,
          np.where(right, 2 * s + (s - m2),
          np.where(bottom, 4 * s + (s - m1), 6 * s + (m2 + s))))
    return np.where(s == 0, 0, base + off)


def _uniform_pairs(seed: int, idx: np.ndarray):
    """Two uniforms in (0, 1] per mode index from a counter-based stream."""
    # Philox is counter based: the block for index i is fixed by (seed, i)
    bg = np.random.Philox(key=seed)
    top = int(idx.max()) + 1 if idx.size else 0
    raw = bg.random_raw(top) if top else np.zeros(0, dtype=np.uint64)
    words = raw[idx]
    u1 = ((words >> np.uint64(32)).astype(np.float64) + 1.0) / 2.0**32
    u2 = ((words & np.uint64(0xFFFFFFFF)).astype(np.float64) + 1.0) / 2.0**32
    return u1, u2


def sample_forcing(spec: CovarianceSpec, grid: GridSpec, seed: int) -> ForcingSample:
    """Draw a real field with independent complex Gaussian modes,
    ``E|f_hat(k)|^2 = C_hat(k)``, Hermitian symmetry and a real zero mode."""
    if grid.domain_kind != TORUS:
        raise ValueError("forcings live on the torus")
    if 2 * spec.cutoff >= min(grid.n1, grid.n2):
        raise ValueError("cutoff must stay below the Nyquist mode")
    c = spec.cutoff
    m = np.arange(-c, c + 1)
    M1, M2 = np.meshgrid(m, m, indexing="ij")
    canon = (M2 > 0) | ((M2 == 0) & (M1 > 0))
    m1, m2 = M1[canon], M2[canon]
    u1, u2 = _uniform_pairs(seed, mode_index(np.append(m1, 0), np.append(m2, 0)))
    r = np.sqrt(-2.0 * np.log(u1))
    z1, z2 = r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)

    dens = spec.density(2 * np.pi * m1, 2 * np.pi * m2)
    coef = np.sqrt(dens / 2) * (z1[:-1] + 1j * z2[:-1])
    hat = np.zeros((grid.n1, grid.n2), dtype=complex)
    hat[m1 % grid.n1, m2 % grid.n2] = coef
    hat[(-m1) % grid.n1, (-m2) % grid.n2] = np.conj(coef)
    hat[0, 0] = np.sqrt(spec.density(0.0, 0.0)) * z1[-1]
    # hat holds Fourier coefficients; ifft2 divides by the point count
    values = np.fft.ifft2(hat).real * grid.n1 * grid.n2
    return ForcingSample(Field(grid, values), int(seed), spec)


def mollified_forcing(f: ForcingSample | Field, eps: float, base: str = "psi") -> Field:
    fld = f.field if isinstance(f, ForcingSample) else f
    return mollify(fld, MollifierSpec(eps, base))
