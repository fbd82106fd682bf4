"""Gradient-flow model catalog.

Every model exposes the same decomposition of its free energy

    E[phi] = 1/2 * sum_i (phi_i, L_i phi_i) + E1[phi],

where each ``L_i`` is a nonnegative diagonal (Fourier-symbol) operator that
the time steppers treat implicitly, and ``E1`` collects everything else:
the bulk potential, gradient couplings, penalty remainders, and the
negative quadratic correction ``-lambda_stab/2 * ||phi||^2`` that
compensates the stabilization shift inside ``L_i``. The explicit operator
``N_i = dE1/dphi_i`` is kept variationally consistent with ``E1`` under the
discrete (Nyquist-free) gradient, which is what makes the schemes' energy
identities exact on the grid.

The total energy is invariant under the stabilization split: moving
``lambda_stab`` between the quadratic part and E1 changes neither
:func:`energy` nor the dynamics.

ModelSpec instances are immutable after construction; all operations here
are pure and thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from enum import Enum
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from . import grid as g
from .errors import UnsupportedModelError
from .grid import Field, Symbol, divergence, gradient, inner, integral

__all__ = [
    "Flow",
    "ModelSpec",
    "VesicleTargets",
    "make_cahn_hilliard",
    "make_pfc",
    "make_vesicle",
    "make_surfactant",
    "energy",
    "chemical_potential",
    "vesicle_volume",
    "vesicle_area",
]


class Flow(Enum):
    """Dissipation mechanism of one field."""

    HMINUS1 = "hminus1"  # conserved dynamics, G = M * Laplacian
    L2 = "l2"            # non-conserved dynamics, G = -M * I


class VesicleTargets(NamedTuple):
    """Penalty targets frozen from the discrete initial field."""

    A0: float
    B0: float


@dataclass(frozen=True)
class ModelSpec:
    """A gradient-flow model in implicit/explicit split form.

    nonlinear_term maps the full field list to the per-field explicit
    operators N_i (stabilization already subtracted); nonlinear_energy is
    the matching functional E1. bulk_f/bulk_df expose the plain bulk
    potential of single-field models for the SAV baselines.
    """

    name: str
    n_fields: int
    flows: tuple[Flow, ...]
    mobilities: tuple[float, ...]
    implicit_symbols: tuple[Symbol, ...]
    lambda_stab: float
    C0: float
    nonlinear_energy: Callable[[Sequence[Field]], float]
    nonlinear_term: Callable[[Sequence[Field]], list[Field]]
    params: Mapping[str, float] = dc_field(default_factory=dict)
    bulk_f: Callable[[np.ndarray], np.ndarray] | None = None
    bulk_df: Callable[[np.ndarray], np.ndarray] | None = None
    vesicle_targets: VesicleTargets | None = None

    def dissipation_symbol(self, i: int) -> Symbol:
        """Per-mode symbol of the dissipation operator G_i (non-positive)."""
        m = self.mobilities[i]
        if self.flows[i] is Flow.HMINUS1:
            return Symbol(f"{self.name}.G[{i}]", lambda k2, m=m: -m * k2)
        return Symbol(f"{self.name}.G[{i}]", lambda k2, m=m: -m * np.ones_like(k2))


def energy(model: ModelSpec, fields: Sequence[Field]) -> float:
    """Free energy E = 1/2 sum (phi_i, L_i phi_i) + E1[phi]."""
    quad = 0.0
    for phi, sym in zip(fields, model.implicit_symbols):
        lphi = g.inverse(g.apply_symbol(g.forward(phi), sym))
        quad += 0.5 * inner(phi, lphi)
    return quad + model.nonlinear_energy(fields)


def chemical_potential(model: ModelSpec, fields: Sequence[Field]) -> list[Field]:
    """Variational derivatives mu_i = L_i phi_i + N_i(phi).

    Diagnostic quantity only; the steppers assemble their own mu from the
    solved spectra.
    """
    nl = model.nonlinear_term(fields)
    out = []
    for phi, sym, n in zip(fields, model.implicit_symbols, nl):
        out.append(g.inverse(g.apply_symbol(g.forward(phi), sym)) + n)
    return out


# --- Cahn-Hilliard --------------------------------------------------------


def make_cahn_hilliard(epsilon: float, lambda_stab: float = 2.0, C0: float = 1.0) -> ModelSpec:
    """Conserved phase separation with double-well bulk F = (phi^2-1)^2/4.

    Implicit part eps^2*k^2 + lambda_stab; explicit N(psi) = psi^3 - psi
    - lambda_stab*psi.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    eps2 = epsilon * epsilon
    lam = float(lambda_stab)

    def f_bulk(v):
        w = v * v - 1.0
        return 0.25 * w * w

    def df_bulk(v):
        return v * v * v - v

    def e1(fields):
        (phi,) = fields
        v = phi.values
        return float(phi.grid.hx * phi.grid.hy * np.sum(f_bulk(v) - 0.5 * lam * v * v))

    def nterm(fields):
        (phi,) = fields
        v = phi.values
        return [Field(phi.grid, v * v * v - v - lam * v)]

    return ModelSpec(
        name="ch",
        n_fields=1,
        flows=(Flow.HMINUS1,),
        mobilities=(1.0,),
        implicit_symbols=(Symbol("ch.L", lambda k2: eps2 * k2 + lam),),
        lambda_stab=lam,
        C0=float(C0),
        nonlinear_energy=e1,
        nonlinear_term=nterm,
        params={"epsilon": float(epsilon)},
        bulk_f=f_bulk,
        bulk_df=df_bulk,
    )


# --- phase-field crystal --------------------------------------------------


def make_pfc(epsilon: float, lambda_stab: float = 2.0, C0: float = 1.0) -> ModelSpec:
    """Conserved crystal-density dynamics with (1+Laplacian)^2 implicit part.

    The bulk remainder is phi^4/4 - phi^3/3 - eps*phi^2/2; the implicit
    symbol (1-k^2)^2 + lambda_stab vanishes on the unit-wavenumber ring
    when lambda_stab = 0.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    eps = float(epsilon)
    lam = float(lambda_stab)

    def f_bulk(v):
        v2 = v * v
        return 0.25 * v2 * v2 - v2 * v / 3.0 - 0.5 * eps * v2

    def df_bulk(v):
        return v * v * v - v * v - eps * v

    def e1(fields):
        (phi,) = fields
        v = phi.values
        return float(phi.grid.hx * phi.grid.hy * np.sum(f_bulk(v) - 0.5 * lam * v * v))

    def nterm(fields):
        (phi,) = fields
        v = phi.values
        return [Field(phi.grid, v * v * v - v * v - eps * v - lam * v)]

    return ModelSpec(
        name="pfc",
        n_fields=1,
        flows=(Flow.HMINUS1,),
        mobilities=(1.0,),
        implicit_symbols=(Symbol("pfc.L", lambda k2: (1.0 - k2) ** 2 + lam),),
        lambda_stab=lam,
        C0=float(C0),
        nonlinear_energy=e1,
        nonlinear_term=nterm,
        params={"epsilon": eps},
        bulk_f=f_bulk,
        bulk_df=df_bulk,
    )


# --- vesicle (bending energy with volume / area penalties) -----------------


def _vesicle_b(phi: Field, epsilon: float) -> float:
    gx, gy = gradient(phi)
    v = phi.values
    w = v * v - 1.0
    dens = 0.5 * epsilon * (gx.values * gx.values + gy.values * gy.values) \
        + 0.25 * w * w / epsilon
    return float(phi.grid.hx * phi.grid.hy * np.sum(dens))


def make_vesicle(
    lam: float,
    epsilon: float,
    M1: float,
    M2: float,
    lambda_stab: float = 2.0,
    C0: float = 1.0,
    phi0: Field | None = None,
    stab_grad: float = 0.5,
) -> ModelSpec:
    """Bending-energy membrane dynamics (non-conserved L2 flow).

    The energy is lam*eps/2 * integral of (Laplacian(phi) - F'(phi)/eps^2)^2
    in expanded form, plus quadratic penalties M1, M2 pinning the volume
    functional A(phi) = integral(phi+1) and area functional B(phi) to their
    values on ``phi0``.

    Split choices beyond the biharmonic leading term:

    * the volume penalty is affine in phi, so its spring constant
      lam*M1*|domain| is carried implicitly on the (0,0) mode (still a
      scalar per-mode solve); only the constant remainder stays explicit.
      Treated explicitly, the spring's relaxation rate (~2000 at the
      reference parameters) would force dt below 1e-3/2.
    * ``stab_grad`` adds a Laplacian-flavored stabilization (implicit
      +stab_grad*k^2, compensated in N), which dominates the explicitly
      treated negative-diffusion pieces, in particular the area-penalty
      force whose coefficient scales with the transient B(phi)-B0 drift.
    """
    if not (lam > 0 and epsilon > 0 and M1 > 0 and M2 > 0):
        raise ValueError("vesicle parameters must be positive")
    if phi0 is None:
        raise ValueError("vesicle model needs the initial field for its penalty targets")
    phi0.check_finite()
    eps = float(epsilon)
    lam = float(lam)
    lam_s = float(lambda_stab)
    s2 = float(stab_grad)
    area = phi0.grid.area

    A0 = integral(phi0) + area  # integral(phi + 1)
    B0 = _vesicle_b(phi0, eps)
    kappa = A0 - area  # A(phi) - A0 = integral(phi) - kappa

    def fp(v):
        return v * v * v - v

    def e1(fields):
        (phi,) = fields
        v = phi.values
        gx, gy = gradient(phi)
        g2 = gx.values * gx.values + gy.values * gy.values
        h = phi.grid.hx * phi.grid.hy
        fpv = fp(v)
        w = v * v - 1.0
        out = (-lam / eps - 0.5 * s2) * h * np.sum(g2)
        out += (3.0 * lam / eps) * h * np.sum(v * v * g2)
        out += lam / (2.0 * eps**3) * h * np.sum(fpv * fpv)
        out += -lam * M1 * kappa * h * np.sum(v) + 0.5 * lam * M1 * kappa**2
        bv = float(h * np.sum(0.5 * eps * g2 + 0.25 * w * w / eps))
        out += 0.5 * lam * M2 * (bv - B0) ** 2
        out -= 0.5 * lam_s * h * np.sum(v * v)
        return float(out)

    def nterm(fields):
        (phi,) = fields
        v = phi.values
        gx, gy = gradient(phi)
        g2 = gx.values * gx.values + gy.values * gy.values
        lap = divergence(gx, gy).values
        fpv = fp(v)
        w = v * v - 1.0
        h = phi.grid.hx * phi.grid.hy
        bv = float(h * np.sum(0.5 * eps * g2 + 0.25 * w * w / eps))
        div2 = divergence(
            Field(phi.grid, v * v * gx.values), Field(phi.grid, v * v * gy.values)
        ).values
        out = (2.0 * lam / eps + s2) * lap
        out += (6.0 * lam / eps) * (v * g2 - div2)
        out += (lam / eps**3) * fpv * (3.0 * v * v - 1.0)
        out += -lam * M1 * kappa
        out += lam * eps * M2 * (bv - B0) * (-lap + fpv / (eps * eps))
        out -= lam_s * v
        return [Field(phi.grid, out)]

    sym = Symbol(
        "vesicle.L",
        lambda k2: lam * eps * k2 * k2 + s2 * k2 + lam_s,
        mode0=lam * M1 * area,
    )
    return ModelSpec(
        name="vesicle",
        n_fields=1,
        flows=(Flow.L2,),
        mobilities=(1.0,),
        implicit_symbols=(sym,),
        lambda_stab=lam_s,
        C0=float(C0),
        nonlinear_energy=e1,
        nonlinear_term=nterm,
        params={
            "lambda_vesicle": lam,
            "epsilon": eps,
            "M1": float(M1),
            "M2": float(M2),
            "stab_grad": s2,
        },
        vesicle_targets=VesicleTargets(A0=A0, B0=B0),
    )


def vesicle_volume(model: ModelSpec, phi: Field) -> float:
    """A(phi) = integral(phi + 1); twice the enclosed volume."""
    if model.vesicle_targets is None:
        raise UnsupportedModelError(f"model {model.name!r} has no volume functional")
    return integral(phi) + phi.grid.area


def vesicle_area(model: ModelSpec, phi: Field) -> float:
    """B(phi) = integral(eps/2 |grad phi|^2 + F(phi)/eps)."""
    if model.vesicle_targets is None:
        raise UnsupportedModelError(f"model {model.name!r} has no area functional")
    return _vesicle_b(phi, model.params["epsilon"])


# --- two-field surfactant ---------------------------------------------------


def make_surfactant(
    M_phi: float,
    M_rho: float,
    epsilon: float,
    delta: float,
    gamma1: float,
    gamma2: float,
    lambda_stab: float = 2.0,
    C0: float = 1.0,
) -> ModelSpec:
    """Coupled interface/surfactant pair, both fields conserved.

    Energy: |grad phi|^2/2 + F(phi) + |grad rho|^2/2 + G(rho)
    - gamma1/2 * rho*|grad phi|^2 + gamma2/4 * |grad phi|^4 with
    F = (phi^2-1)^2/(4 eps^2) and G = rho^2 (rho-1)^2 / (4 delta^2).
    """
    if not (M_phi > 0 and M_rho > 0 and epsilon > 0 and delta > 0):
        raise ValueError("mobilities, epsilon and delta must be positive")
    eps2 = float(epsilon) ** 2
    del2 = float(delta) ** 2
    g1 = float(gamma1)
    g2c = float(gamma2)
    lam = float(lambda_stab)

    def e1(fields):
        phi, rho = fields
        p, q = phi.values, rho.values
        gx, gy = gradient(phi)
        grad2 = gx.values * gx.values + gy.values * gy.values
        h = phi.grid.hx * phi.grid.hy
        wp = p * p - 1.0
        wq = q - 1.0
        dens = wp * wp / (4.0 * eps2)
        dens = dens + q * q * wq * wq / (4.0 * del2)
        dens = dens - 0.5 * g1 * q * grad2 + 0.25 * g2c * grad2 * grad2
        dens = dens - 0.5 * lam * (p * p + q * q)
        return float(h * np.sum(dens))

    def nterm(fields):
        phi, rho = fields
        p, q = phi.values, rho.values
        gx, gy = gradient(phi)
        grad2 = gx.values * gx.values + gy.values * gy.values
        fprime = (p * p * p - p) / eps2
        gprime = q * (q - 1.0) * (2.0 * q - 1.0) / (2.0 * del2)
        flux_x = (g1 * q - g2c * grad2) * gx.values
        flux_y = (g1 * q - g2c * grad2) * gy.values
        n_phi = fprime + divergence(Field(phi.grid, flux_x), Field(phi.grid, flux_y)).values
        n_phi -= lam * p
        n_rho = gprime - 0.5 * g1 * grad2 - lam * q
        return [Field(phi.grid, n_phi), Field(rho.grid, n_rho)]

    sym_phi = Symbol("surf.Lphi", lambda k2: k2 + lam)
    sym_rho = Symbol("surf.Lrho", lambda k2: k2 + lam)
    return ModelSpec(
        name="surfactant",
        n_fields=2,
        flows=(Flow.HMINUS1, Flow.HMINUS1),
        mobilities=(float(M_phi), float(M_rho)),
        implicit_symbols=(sym_phi, sym_rho),
        lambda_stab=lam,
        C0=float(C0),
        nonlinear_energy=e1,
        nonlinear_term=nterm,
        params={
            "M_phi": float(M_phi),
            "M_rho": float(M_rho),
            "epsilon": float(epsilon),
            "delta": float(delta),
            "gamma1": g1,
            "gamma2": g2c,
        },
    )
