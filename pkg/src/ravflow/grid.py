"""Periodic rectangular grid, Fourier transforms, and per-mode operators.

All spatial discretization lives here. Fields are sampled on a uniform
nx-by-ny grid over [0, Lx) x [0, Ly) with periodic identification; every
differential operator is diagonal in Fourier space.

Conventions (fixed, relied on throughout the package):

* forward transform divides by nx*ny, so the (0, 0) coefficient is the
  field mean; the inverse multiplies back.
* real fields use the half-spectrum layout of ``numpy.fft.rfft2`` with
  shape (nx, ny//2 + 1); axis 0 carries the full set of x-modes.
* first-derivative operators zero the Nyquist modes (the collocation
  derivative of the cosine interpolant vanishes at the nodes there);
  composed operators built from them inherit that convention.
* ``inner`` is the rectangle-rule L2 product hx*hy*sum(f*g), which is
  spectrally accurate for smooth periodic integrands.

Transforms and symbol applications are pure functions of their inputs and
safe to call concurrently on distinct fields; a Field is never mutated
while shared.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np

from .errors import GridMismatchError, InvalidFieldError, SnapshotFormatError

__all__ = [
    "Grid2D",
    "Field",
    "Spectrum",
    "Symbol",
    "forward",
    "inverse",
    "apply_symbol",
    "gradient",
    "divergence",
    "inner",
    "mean",
    "dealias",
    "save_field",
    "load_field",
]


@dataclass(frozen=True, eq=True)
class Grid2D:
    """Uniform periodic grid on [0, Lx) x [0, Ly).

    Two grids constructed with the same parameters compare equal, and
    fields on equal grids are conformable.
    """

    nx: int
    ny: int
    Lx: float
    Ly: float

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4 or self.nx % 2 or self.ny % 2:
            raise ValueError(f"grid size must be even and >= 4, got {self.nx}x{self.ny}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError("domain lengths must be positive")

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def spectral_shape(self) -> tuple[int, int]:
        return (self.nx, self.ny // 2 + 1)

    @cached_property
    def xy(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays X[i, j] = i*hx, Y[i, j] = j*hy."""
        x = np.arange(self.nx) * self.hx
        y = np.arange(self.ny) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    @cached_property
    def kx(self) -> np.ndarray:
        return (2 * np.pi * np.fft.fftfreq(self.nx, d=self.hx))[:, None]

    @cached_property
    def ky(self) -> np.ndarray:
        return (2 * np.pi * np.fft.rfftfreq(self.ny, d=self.hy))[None, :]

    @cached_property
    def k2(self) -> np.ndarray:
        """Squared wavenumber per mode, shape (nx, ny//2+1)."""
        return self.kx**2 + self.ky**2

    @cached_property
    def _ddx(self) -> np.ndarray:
        m = 1j * self.kx * np.ones_like(self.ky)
        m[self.nx // 2, :] = 0.0
        return m

    @cached_property
    def _ddy(self) -> np.ndarray:
        m = 1j * self.ky * np.ones_like(self.kx)
        m[:, -1] = 0.0
        return m

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True on modes kept by the two-thirds rule."""
        m = np.fft.fftfreq(self.nx) * self.nx
        n = np.fft.rfftfreq(self.ny) * self.ny
        return (np.abs(m)[:, None] <= self.nx / 3) & (np.abs(n)[None, :] <= self.ny / 3)

    def field(self, values: np.ndarray) -> "Field":
        return Field(self, values)

    def field_from_function(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "Field":
        X, Y = self.xy
        return Field(self, np.asarray(fn(X, Y), dtype=float))

    def constant(self, value: float) -> "Field":
        return Field(self, np.full(self.shape, float(value)))


@dataclass
class Field:
    """Real grid function; values[i, j] = f(i*hx, j*hy), C-ordered."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise InvalidFieldError(f"expected shape {self.grid.shape}, got {v.shape}")
        self.values = v

    def check_finite(self) -> "Field":
        if not np.all(np.isfinite(self.values)):
            raise InvalidFieldError("field contains non-finite values")
        return self

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def _conformable(self, other: "Field") -> None:
        if self.grid != other.grid:
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, Field):
            self._conformable(other)
            return Field(self.grid, self.values + other.values)
        return Field(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Field):
            self._conformable(other)
            return Field(self.grid, self.values - other.values)
        return Field(self.grid, self.values - other)

    def __rsub__(self, other):
        return Field(self.grid, other - self.values)

    def __mul__(self, other):
        if isinstance(other, Field):
            self._conformable(other)
            return Field(self.grid, self.values * other.values)
        return Field(self.grid, self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)


@dataclass
class Spectrum:
    """Half-spectrum Fourier coefficients of a real field."""

    grid: Grid2D
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != self.grid.spectral_shape:
            raise InvalidFieldError(
                f"expected spectral shape {self.grid.spectral_shape}, got {self.coeffs.shape}"
            )

    def copy(self) -> "Spectrum":
        return Spectrum(self.grid, self.coeffs.copy())


@dataclass(frozen=True)
class Symbol:
    """Real per-mode multiplier s(k^2) for a diagonal operator.

    ``fn`` maps the squared-wavenumber array to the symbol values. The
    optional ``mode0`` adds an extra contribution at the (0, 0) mode only
    (used for penalty springs that act on the field mean).
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    mode0: float = 0.0

    def on(self, grid: Grid2D) -> np.ndarray:
        """Evaluate per mode; cached per (symbol, grid), treat as read-only."""
        return _eval_symbol(self, grid)


@lru_cache(maxsize=256)
def _eval_symbol(sym: Symbol, grid: Grid2D) -> np.ndarray:
    vals = np.broadcast_to(np.asarray(sym.fn(grid.k2), dtype=float),
                           grid.spectral_shape)
    if sym.mode0:
        vals = vals.copy()
        vals[0, 0] += sym.mode0
    return vals


def forward(f: Field) -> Spectrum:
    """FFT of a real field, normalized so coeffs[0, 0] is the mean."""
    f.check_finite()
    n = f.grid.nx * f.grid.ny
    return Spectrum(f.grid, np.fft.rfft2(f.values) / n)


def inverse(spec: Spectrum) -> Field:
    g = spec.grid
    return Field(g, np.fft.irfft2(spec.coeffs * (g.nx * g.ny), s=g.shape))


def apply_symbol(spec: Spectrum, s: Symbol) -> Spectrum:
    return Spectrum(spec.grid, spec.coeffs * s.on(spec.grid))


def gradient(f: Field) -> tuple[Field, Field]:
    """Spectral gradient; exact for band-limited fields, Nyquist-free."""
    g = f.grid
    c = forward(f).coeffs
    fx = np.fft.irfft2(g._ddx * c * (g.nx * g.ny), s=g.shape)
    fy = np.fft.irfft2(g._ddy * c * (g.nx * g.ny), s=g.shape)
    return Field(g, fx), Field(g, fy)


def divergence(fx: Field, fy: Field) -> Field:
    """Spectral divergence, adjoint-consistent with :func:`gradient`."""
    fx._conformable(fy)
    g = fx.grid
    c = g._ddx * forward(fx).coeffs + g._ddy * forward(fy).coeffs
    return Field(g, np.fft.irfft2(c * (g.nx * g.ny), s=g.shape))


def inner(f: Field, g: Field) -> float:
    """Discrete L2 product hx*hy*sum(f*g)."""
    f._conformable(g)
    return float(f.grid.hx * f.grid.hy * np.sum(f.values * g.values))


def integral(f: Field) -> float:
    return float(f.grid.hx * f.grid.hy * np.sum(f.values))


def mean(f: Field) -> float:
    return integral(f) / f.grid.area


def norm_l2(f: Field) -> float:
    return float(np.sqrt(inner(f, f)))


def dealias(spec: Spectrum, enabled: bool = True) -> Spectrum:
    """Two-thirds rule: zero modes with |m| > nx/3 or |n| > ny/3.

    With ``enabled`` False the input is returned unchanged (same object),
    so a disabled filter is bitwise the identity.
    """
    if not enabled:
        return spec
    return Spectrum(spec.grid, spec.coeffs * spec.grid.dealias_mask)


# --- field snapshot files ------------------------------------------------
#
# Layout: magic b"RAVF", u32 version=1, u32 nx, u32 ny, f64 Lx, f64 Ly,
# f64 t, then nx*ny little-endian f64 values, row-major.

_MAGIC = b"RAVF"
_HEADER = struct.Struct("<4sIIIddd")
_VERSION = 1


def save_field(f: Field, t: float, path) -> None:
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, g.nx, g.ny, g.Lx, g.Ly, float(t)))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_field(path) -> tuple[Field, float]:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise SnapshotFormatError(f"{path}: truncated header")
        magic, version, nx, ny, Lx, Ly, t = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise SnapshotFormatError(f"{path}: bad magic {magic!r}")
        if version != _VERSION:
            raise SnapshotFormatError(f"{path}: unsupported version {version}")
        raw = fh.read(8 * nx * ny)
        if len(raw) != 8 * nx * ny:
            raise SnapshotFormatError(f"{path}: truncated payload")
    values = np.frombuffer(raw, dtype="<f8").reshape(nx, ny)
    return Field(Grid2D(nx, ny, Lx, Ly), values.copy()), t
