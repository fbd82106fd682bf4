"""Deterministic initial conditions.

Random fields come from a fixed 64-bit splitmix generator so any
implementation of the update formula reproduces the exact stream:

    state  <- (state + 0x9E3779B97F4A7C15) mod 2^64
    z      <- state
    z      <- (z xor (z >> 30)) * 0xBF58476D1CE4E5B9  mod 2^64
    z      <- (z xor (z >> 27)) * 0x94D049BB133111EB  mod 2^64
    output <- z xor (z >> 31)

A uniform draw in [0, 1) takes the top 53 bits: output >> 11, divided by
2^53. Symmetric draws map u to 2u - 1. Grid fields consume draws in
row-major point order; multi-field initial data consumes one stream,
first field first.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .grid import Field, Grid2D

__all__ = ["Splitmix64", "build_initial", "INIT_NAMES"]

_MASK = (1 << 64) - 1


class Splitmix64:
    """Counter-based 64-bit generator; see module docstring for the formula."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """One draw in [0, 1)."""
        return (self.next_u64() >> 11) / 9007199254740992.0  # 2**53

    def symmetric(self, n: int) -> np.ndarray:
        """n draws in [-1, 1)."""
        return np.array([2.0 * self.uniform() - 1.0 for _ in range(n)])


def _zero_mean_noise(rng: Splitmix64, grid: Grid2D) -> np.ndarray:
    """Symmetric draws with the sample mean subtracted exactly."""
    draws = rng.symmetric(grid.nx * grid.ny)
    draws -= draws.mean()
    return draws.reshape(grid.shape)


INIT_NAMES = ("sine_ch", "sine_pfc", "random_offset", "tanh_ellipse", "random_two_field")


def build_initial(init: str, grid: Grid2D, seed: int,
                  model_params: dict[str, float] | None = None) -> list[Field]:
    """Construct the named initial field(s) on ``grid``.

    Deterministic: the same name/grid/seed triple always produces
    bitwise-identical fields.
    """
    params = model_params or {}
    X, Y = grid.xy
    if init == "sine_ch":
        return [Field(grid, 0.05 * np.sin(X) * np.sin(Y))]
    if init == "sine_pfc":
        return [Field(grid, np.sin(np.pi * X / 4.0) * np.sin(np.pi * Y / 4.0))]
    if init == "random_offset":
        rng = Splitmix64(seed)
        return [Field(grid, 0.1 + 0.1 * _zero_mean_noise(rng, grid))]
    if init == "tanh_ellipse":
        eps = params.get("epsilon")
        if eps is None:
            raise ConfigError("tanh_ellipse needs model parameter 'epsilon'")
        d = np.sqrt((X - np.pi) ** 2 / 0.35 + (Y - np.pi) ** 2 / 1.5)
        return [Field(grid, np.tanh((0.35 * np.pi - d) / (np.sqrt(2.0) * eps)))]
    if init == "random_two_field":
        rng = Splitmix64(seed)
        phi = 0.01 * _zero_mean_noise(rng, grid)
        rho = 0.2 + 0.01 * _zero_mean_noise(rng, grid)
        return [Field(grid, phi), Field(grid, rho)]
    raise ConfigError(f"unknown initial condition {init!r}; known: {', '.join(INIT_NAMES)}")
