"""Grids, sampled fields, spectral calculus and the parabolic metric.

Array layout: ``Field.values[i1, j]`` is the sample at ``x1 = i1 / n1`` and
``x2 = grid.x2[j]``.  Three domain kinds are used:

* ``torus``: doubly periodic, ``n2`` rows at ``x2 = j / n2``.
* ``half_plane``: periodic in x1, ``n2 + 1`` rows at ``x2 = j * t_max / n2``
  (row 0 is the initial line).
* ``two_sided``: output of the extension operators, ``2 * n2 + 1`` rows at
  ``x2 = -t_max + j * t_max / n2``.

Frequencies are ``k = 2 * pi * m`` with integer ``m``.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TORUS = "torus"
HALF_PLANE = "half_plane"
TWO_SIDED = "two_sided"
_KINDS = (TORUS, HALF_PLANE, TWO_SIDED)


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    n1: int = 256
    n2: int = 256
    domain_kind: str = TORUS
    t_max: float = 1.0

    def __post_init__(self):
        if self.domain_kind not in _KINDS:
            raise ValueError(f"unknown domain kind {self.domain_kind!r}")
        if not (_is_pow2(self.n1) and _is_pow2(self.n2)):
            raise ValueError(f"n1, n2 must be powers of two, got {self.n1}, {self.n2}")
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")

    @property
    def rows(self) -> int:
        if self.domain_kind == TORUS:
            return self.n2
        if self.domain_kind == HALF_PLANE:
            return self.n2 + 1
        return 2 * self.n2 + 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n1, self.rows)

    @property
    def dx1(self) -> float:
        return 1.0 / self.n1

    @property
    def dx2(self) -> float:
        if self.domain_kind == TORUS:
            return 1.0 / self.n2
        return self.t_max / self.n2

    @property
    def x1(self) -> np.ndarray:
        return np.arange(self.n1) / self.n1

    @property
    def x2(self) -> np.ndarray:
        j = np.arange(self.rows)
        if self.domain_kind == TORUS:
            return j / self.n2
        if self.domain_kind == HALF_PLANE:
            return j * self.dx2
        return -self.t_max + j * self.dx2

    @property
    def k1(self) -> np.ndarray:
        """Angular wavenumbers along x1 in FFT order."""
        return 2 * np.pi * np.fft.fftfreq(self.n1, d=1.0 / self.n1)

    @property
    def k2(self) -> np.ndarray:
        if self.domain_kind != TORUS:
            raise ValueError("x2 wavenumbers exist only on the torus")
        return 2 * np.pi * np.fft.fftfreq(self.n2, d=1.0 / self.n2)

    @property
    def k2_odd(self) -> np.ndarray:
        """``k2`` for odd-order symbols: the Nyquist entry is zeroed, since
        its sign is ambiguous and a real field must stay real."""
        k = self.k2.copy()
        if self.n2 % 2 == 0:
            k[self.n2 // 2] = 0.0
        return k

    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        """Broadcastable ``(k1[:, None], k2[None, :])`` on the torus."""
        return self.k1[:, None], self.k2[None, :]

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def half_plane(self) -> "GridSpec":
        return GridSpec(self.n1, self.n2, HALF_PLANE, self.t_max)

    def torus(self) -> "GridSpec":
        return GridSpec(self.n1, self.n2, TORUS, 1.0)

    def two_sided(self) -> "GridSpec":
        return GridSpec(self.n1, self.n2, TWO_SIDED, self.t_max)


@dataclass(frozen=True, eq=False)
class Field:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "Field":
        X1, X2 = grid.mesh()
        return cls(grid, np.broadcast_to(fn(X1, X2), grid.shape))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @property
    def kind(self) -> str:
        return self.grid.domain_kind

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def _combine(self, other, op):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            other = other.values
        return Field(self.grid, op(self.values, other))

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __rsub__(self, other):
        return self._combine(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)

    def spectrum(self) -> np.ndarray:
        """Fourier coefficients ``f_hat[m1, m2]`` normalised so that
        ``f(x) = sum f_hat exp(i k.x)`` (torus only)."""
        if self.kind != TORUS:
            raise ValueError("2-d spectrum requires a torus field")
        return np.fft.fft2(self.values) / self.values.size

    # --- I/O -------------------------------------------------------------
    def to_csv(self, path) -> None:
        """One CSV row per x2 slice, columns run over x1."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in self.values.T:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, grid: GridSpec) -> "Field":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [[float(v) for v in r] for r in csv.reader(fh) if r]
        return cls(grid, np.asarray(rows).T)

    def to_binary(self, path) -> None:
        """8-byte header ``(n1, rows)`` as little-endian int32, then float64
        samples in column-major order (x1 fastest)."""
        n1, rows = self.values.shape
        with open(path, "wb") as fh:
            fh.write(struct.pack("<ii", n1, rows))
            fh.write(np.asfortranarray(self.values).astype("<f8").tobytes(order="F"))

    @classmethod
    def from_binary(cls, path, grid: GridSpec | None = None) -> "Field":
        raw = Path(path).read_bytes()
        n1, rows = struct.unpack("<ii", raw[:8])
        vals = np.frombuffer(raw[8:], dtype="<f8").reshape((n1, rows), order="F")
        if grid is None:
            grid = GridSpec(n1, rows, TORUS)
        return cls(grid, vals)


@dataclass(frozen=True)
class Point:
    x1: float
    x2: float


def parabolic_distance(x, y, period1: float | None = None, period2: float | None = None):
    """``|x1 - y1| + |x2 - y2|**0.5``.

    Accepts ``Point`` objects or ``(x1, x2)`` pairs of scalars/arrays.  With a
    period given, the corresponding difference is reduced to its
    representative of minimal absolute value.
    """
    x1, x2 = (x.x1, x.x2) if isinstance(x, Point) else x
    y1, y2 = (y.x1, y.x2) if isinstance(y, Point) else y
    d1 = np.asarray(x1, dtype=float) - np.asarray(y1, dtype=float)
    d2 = np.asarray(x2, dtype=float) - np.asarray(y2, dtype=float)
    if period1 is not None:
        d1 = d1 - period1 * np.round(d1 / period1)
    if period2 is not None:
        d2 = d2 - period2 * np.round(d2 / period2)
    out = np.abs(d1) + np.sqrt(np.abs(d2))
    return float(out) if out.ndim == 0 else out


def offset_distance(grid: GridSpec, s1, s2):
    """Parabolic length of integer grid offsets ``(s1, s2)``; on the torus both
    offsets are reduced, elsewhere only the x1 offset."""
    s1 = np.asarray(s1)
    s2 = np.asarray(s2)
    d1 = np.abs(s1 - grid.n1 * np.round(s1 / grid.n1)) * grid.dx1
    if grid.domain_kind == TORUS:
        s2 = s2 - grid.n2 * np.round(s2 / grid.n2)
    return d1 + np.sqrt(np.abs(s2) * grid.dx2)


def _require_half_plane(f: Field) -> None:
    if f.kind != HALF_PLANE:
        raise ValueError(f"expected a half-plane field, got {f.kind}")


def even_reflection(f: Field) -> Field:
    """``f(x1, |x2|)`` on the doubled window ``[-t_max, t_max]``."""
    _require_half_plane(f)
    v = f.values
    out = np.concatenate([v[:, :0:-1], v], axis=1)
    return Field(f.grid.two_sided(), out)


def trivial_extension(f: Field) -> Field:
    """``f`` for ``x2 >= 0`` and zero below the axis."""
    _require_half_plane(f)
    v = f.values
    out = np.concatenate([np.zeros((v.shape[0], v.shape[1] - 1)), v], axis=1)
    return Field(f.grid.two_sided(), out)


def restrict_two_sided(f: Field) -> Field:
    """Inverse of the extensions: keep the rows with ``x2 >= 0``."""
    if f.kind != TWO_SIDED:
        raise ValueError("expected a two-sided field")
    return Field(f.grid.half_plane(), f.values[:, f.grid.n2:])


def spectral_derivative(f: Field, i: int, order: int = 1, one_sided: bool = False) -> Field:
    """Derivative ``d^order / dx_i^order``.

    x1 is periodic on every domain and is always differentiated with the
    exact Fourier multiplier ``(i k1)**order``.  Along x2 the multiplier is
    only available on the torus; other domains must request one-sided finite
    differences explicitly with ``one_sided=True``.
    """
    if i not in (1, 2):
        raise ValueError("direction must be 1 or 2")
    if order < 1:
        raise ValueError("order must be positive")
    if one_sided and f.kind == TORUS:
        raise ValueError("one-sided differences are not used on torus fields")
    if i == 1:
        if one_sided:
            raise ValueError("x1 is periodic; use the spectral derivative")
        mult = (1j * f.grid.k1) ** order
        if order % 2 == 1:
            mult[f.grid.n1 // 2] = 0.0
        hat = np.fft.fft(f.values, axis=0) * mult[:, None]
        return Field(f.grid, np.fft.ifft(hat, axis=0).real)
    if f.kind == TORUS:
        mult = (1j * f.grid.k2) ** order
        if order % 2 == 1:
            mult[f.grid.n2 // 2] = 0.0
        hat = np.fft.fft(f.values, axis=1) * mult[None, :]
        return Field(f.grid, np.fft.ifft(hat, axis=1).real)
    if not one_sided:
        raise ValueError("x2 derivative on a non-periodic field needs one_sided=True")
    v = f.values
    for _ in range(order):
        v = np.gradient(v, f.grid.dx2, axis=1, edge_order=2)
    return Field(f.grid, v)


def torus_multiplier(f: Field, mult: np.ndarray) -> Field:
    """Apply a Fourier multiplier ``mult[m1, m2]`` to a torus field."""
    if f.kind != TORUS:
        raise ValueError("Fourier multipliers act on torus fields")
    return Field(f.grid, np.fft.ifft2(np.fft.fft2(f.values) * mult).real)


def evaluate_in_time(f: Field, times) -> np.ndarray:
    """Trigonometric interpolation of a torus field at arbitrary ``x2``.

    Returns an array of shape ``(n1, len(times))``.  Used to restrict
    time-periodic fields to half-plane rows.
    """
    if f.kind != TORUS:
        raise ValueError("time interpolation needs a torus field")
    n2 = f.grid.n2
    hat = np.fft.fft(f.values, axis=1) / n2
    m = np.fft.fftfreq(n2, d=1.0 / n2)
    times = np.asarray(times, dtype=float)
    phase = np.exp(2j * np.pi * np.outer(m, times))
    if n2 % 2 == 0:
        # split the Nyquist coefficient symmetrically so the interpolant is real
        phase[n2 // 2] = np.cos(np.pi * n2 * times)
    return (hat @ phase).real


def restrict_to_half_plane(f: Field, grid: GridSpec) -> Field:
    """Values of a torus field on the rows of a half-plane grid."""
    if grid.domain_kind != HALF_PLANE:
        raise ValueError("target grid must be a half plane")
    if grid.n1 != f.grid.n1:
        raise ValueError("x1 resolutions differ")
    x2 = grid.x2
    if grid.t_max == 1.0 and grid.n2 == f.grid.n2:
        idx = np.arange(grid.rows) % f.grid.n2
        return Field(grid, f.values[:, idx])
    return Field(grid, evaluate_in_time(f, x2))
