"""Brute-force oracles: direct-summation DFT and double-loop quadrature.

Everything here is deliberately slow and independent of the package's FFT
path; it exists to cross-check spectral results on small grids.
"""

from __future__ import annotations

import numpy as np

from ravflow.grid import Field, Grid2D


def _dft_matrix(n: int) -> np.ndarray:
    # explicit exponential-sum matrix: the transform below is plain direct
    # summation organized as a matrix product, not an FFT algorithm
    m = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(m, m) / n)


def naive_dft2(values: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Full-spectrum DFT by direct summation, normalized like the package."""
    wx = _dft_matrix(grid.nx)
    wy = _dft_matrix(grid.ny)
    return wx @ values @ wy.T / (grid.nx * grid.ny)


def naive_idft2(coeffs: np.ndarray, grid: Grid2D) -> np.ndarray:
    wx = _dft_matrix(grid.nx).conj()
    wy = _dft_matrix(grid.ny).conj()
    return (wx @ coeffs @ wy.T).real


def _mode_numbers(n: int) -> np.ndarray:
    return np.array([m if m <= n // 2 else m - n for m in range(n)])


def naive_apply_symbol(values: np.ndarray, grid: Grid2D, sym_fn) -> np.ndarray:
    """Apply a k^2-symbol through the direct-summation transform pair."""
    mx = _mode_numbers(grid.nx) * 2 * np.pi / grid.Lx
    my = _mode_numbers(grid.ny) * 2 * np.pi / grid.Ly
    k2 = mx[:, None] ** 2 + my[None, :] ** 2
    return naive_idft2(naive_dft2(values, grid) * sym_fn(k2), grid)


def naive_gradient(values: np.ndarray, grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    """Spectral derivative with zeroed Nyquist rows, via the naive DFT."""
    mx = _mode_numbers(grid.nx) * 2 * np.pi / grid.Lx
    my = _mode_numbers(grid.ny) * 2 * np.pi / grid.Ly
    mx[grid.nx // 2] = 0.0
    my[grid.ny // 2] = 0.0
    c = naive_dft2(values, grid)
    fx = naive_idft2(1j * mx[:, None] * c, grid)
    fy = naive_idft2(1j * my[None, :] * c, grid)
    return fx, fy


def naive_divergence(vx: np.ndarray, vy: np.ndarray, grid: Grid2D) -> np.ndarray:
    mx = _mode_numbers(grid.nx) * 2 * np.pi / grid.Lx
    my = _mode_numbers(grid.ny) * 2 * np.pi / grid.Ly
    mx[grid.nx // 2] = 0.0
    my[grid.ny // 2] = 0.0
    c = 1j * mx[:, None] * naive_dft2(vx, grid) + 1j * my[None, :] * naive_dft2(vy, grid)
    return naive_idft2(c, grid)


def loop_inner(u: np.ndarray, v: np.ndarray, grid: Grid2D) -> float:
    acc = 0.0
    for i in range(grid.nx):
        for j in range(grid.ny):
            acc += u[i, j] * v[i, j]
    return grid.hx * grid.hy * acc


def dissipation_oracle(mu: np.ndarray, grid: Grid2D, flow: str, mobility: float,
                       dt: float) -> float:
    """-dt * (mu, G mu) by direct summation."""
    if flow == "l2":
        gmu = -mobility * mu
    else:
        gmu = naive_apply_symbol(mu, grid, lambda k2: -mobility * k2)
    return -dt * loop_inner(mu, gmu, grid)


def band_limited(rng: np.random.Generator, grid: Grid2D, k2_max: float,
                 amp: float = 1.0) -> Field:
    """Smooth random field: white noise low-passed below k2_max."""
    noise = rng.standard_normal(grid.shape)
    c = np.fft.rfft2(noise) / (grid.nx * grid.ny)
    c[grid.k2 >= k2_max] = 0.0
    v = np.fft.irfft2(c * (grid.nx * grid.ny), s=grid.shape)
    peak = np.max(np.abs(v))
    if peak > 0:
        v *= amp / peak
    return Field(grid, v)
