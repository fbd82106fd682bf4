"""Regularized auxiliary-variable (RAV) time integrators.

The auxiliary scalar r is identically zero for the continuous dynamics; a
step functional (Q for the midpoint scheme, U_k for BDF-k, V for several
coupled fields) measures how far one discrete step strays from the energy
balance, and the update keeps r at zero whenever the functional is
nonnegative, carrying the deficit otherwise:

    r_new = 0      if Q >= 0   ("zeroed" branch)
    r_new = Q      if Q <  0   ("carried" branch)

After every step the rescaled field phibar = xi * phi with
xi = (E + C0 + r) / (E + C0) in [0, 1] feeds the next step's explicit
terms, which is what turns the correction into an unconditional stability
mechanism: the modified energy E + r never increases, and on carried steps
it is exactly conserved.

Scheme structure per step (all solves are scalar per Fourier mode):

* midpoint/CN: implicit part at (phi_new + phi_old)/2, explicit term at
  the extrapolation 3/2*phibar_n - 1/2*phibar_{n-1};
* a backward-Euler first step primes the one-entry history;
* BDF-3/4: standard alpha_k / A_k combinations with the explicit term at
  the order-matched extrapolation B_k of the rescaled history.

Q is assembled from inner products on the grid (spectrally exact
quadrature, no lumping); because the per-mode solve is exact, the
discrete energy identity E_new - (E_old + r_old) + Q = 0 holds to
roundoff on every midpoint step, and the analogous alpha_k-weighted
identity holds for BDF-k.

Stepping is single-threaded and deterministic; independent runs (e.g. the
dt series of a convergence study) share no mutable state and may execute
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from . import grid as g
from .errors import DivergenceError, PositivityError, StartupHistoryError
from .grid import Field, dealias, forward, inner, inverse
from .models import ModelSpec, energy

__all__ = [
    "Branch",
    "HistoryEntry",
    "RavState",
    "StepReport",
    "initial_state",
    "correct_r",
    "first_step",
    "step_cn",
    "step_multi",
    "step_bdf",
    "startup_bdf",
    "BDF_ALPHA",
    "BDF_A_COEFFS",
    "BDF_B_COEFFS",
]


class Branch(Enum):
    ZEROED = "zeroed"   # Q >= 0, r reset to 0
    CARRIED = "carried"  # Q < 0, r carries the deficit


class HistoryEntry(NamedTuple):
    phi: tuple[Field, ...]
    phibar: tuple[Field, ...]
    r: float
    E: float


@dataclass
class RavState:
    """State after n steps: fields, rescaled fields, auxiliary scalar.

    ``history`` holds previous states, newest first (up to 4, enough for
    BDF-4). ``E`` and ``e1`` cache the energy and its non-quadratic part
    at ``phi``; they are the values computed when the state was produced
    and are reused verbatim by the step functionals.
    """

    t: float
    n: int
    phi: tuple[Field, ...]
    phibar: tuple[Field, ...]
    r: float
    xi: float
    E: float
    e1: float
    history: tuple[HistoryEntry, ...] = ()

    def as_history_entry(self) -> HistoryEntry:
        return HistoryEntry(self.phi, self.phibar, self.r, self.E)


@dataclass(frozen=True)
class StepReport:
    """Per-step diagnostics: the step functional and the branch taken."""

    Q: float
    r_new: float
    dissipation: float
    E_new: float
    branch: Branch


def correct_r(Q: float) -> float:
    """Auxiliary-variable correction: zero unless the functional is negative."""
    if not np.isfinite(Q):
        raise DivergenceError(-1, "step functional is not finite")
    return 0.0 if Q >= 0.0 else float(Q)


def initial_state(model: ModelSpec, fields: Sequence[Field]) -> RavState:
    """Wrap initial data with r = 0, xi = 1, phibar = phi."""
    if len(fields) != model.n_fields:
        raise ValueError(f"model {model.name!r} needs {model.n_fields} fields, got {len(fields)}")
    for f in fields:
        f.check_finite()
    e1 = model.nonlinear_energy(fields)
    E = energy(model, fields)
    if E + model.C0 <= 0:
        raise PositivityError(
            f"E[phi0] + C0 = {E + model.C0:g} is not positive; increase C0"
        )
    phi = tuple(f.copy() for f in fields)
    return RavState(
        t=0.0, n=0, phi=phi, phibar=tuple(f.copy() for f in phi),
        r=0.0, xi=1.0, E=E, e1=e1, history=(),
    )


def _explicit_term(model: ModelSpec, psi: Sequence[Field], use_dealias: bool):
    """Explicit operator at psi, returned as (spectra, grid fields)."""
    nl = model.nonlinear_term(list(psi))
    hats = []
    fields = []
    for f in nl:
        spec = dealias(forward(f), enabled=use_dealias)
        hats.append(spec.coeffs)
        fields.append(inverse(spec) if use_dealias else f)
    return hats, fields


def _finish_step(model, state, new_fields, new_hats, e1_new, Q, dissipation,
                 t_new, n_new) -> tuple[RavState, StepReport]:
    quad = 0.0
    for phi, hat, sym in zip(new_fields, new_hats, model.implicit_symbols):
        lphi = inverse(g.Spectrum(phi.grid, hat * sym.on(phi.grid)))
        quad += 0.5 * inner(phi, lphi)
    E_new = quad + e1_new
    if not (np.isfinite(E_new) and np.isfinite(Q)):
        raise DivergenceError(n_new)
    r_new = correct_r(Q)
    E_shift = E_new + model.C0
    if E_shift <= 0:
        raise PositivityError(
            f"E + C0 = {E_shift:g} <= 0 at step {n_new}; C0 is too small for this run"
        )
    xi_new = (E_shift + r_new) / E_shift
    phibar_new = tuple(Field(f.grid, xi_new * f.values) for f in new_fields)
    hist = (state.as_history_entry(),) + state.history[:3]
    new_state = RavState(
        t=t_new, n=n_new, phi=tuple(new_fields), phibar=phibar_new,
        r=r_new, xi=xi_new, E=E_new, e1=e1_new, history=hist,
    )
    report = StepReport(
        Q=float(Q), r_new=r_new, dissipation=float(dissipation), E_new=E_new,
        branch=Branch.ZEROED if Q >= 0 else Branch.CARRIED,
    )
    return new_state, report


def first_step(state0: RavState, model: ModelSpec, dt: float,
               use_dealias: bool = False) -> tuple[RavState, StepReport]:
    """Backward-Euler priming step from the initial state.

    Solves phi_hat_new = (phi_hat + dt*g*nl_hat) / (1 - dt*g*a) per field
    with the explicit term at phibar, then applies the same Q / r / xi
    bookkeeping as the midpoint step (mu evaluated at the new time level).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    nl_hats, nl_fields = _explicit_term(model, state0.phibar, use_dealias)
    new_fields = []
    new_hats = []
    dissipation = 0.0
    pairing = 0.0
    for i, phi in enumerate(state0.phi):
        a = model.implicit_symbols[i].on(phi.grid)
        gsym = model.dissipation_symbol(i).on(phi.grid)
        ph = forward(phi).coeffs
        new_hat = (ph + dt * gsym * nl_hats[i]) / (1.0 - dt * gsym * a)
        mu_hat = a * new_hat + nl_hats[i]
        new = inverse(g.Spectrum(phi.grid, new_hat))
        mu = inverse(g.Spectrum(phi.grid, mu_hat))
        gmu = inverse(g.Spectrum(phi.grid, gsym * mu_hat))
        dissipation += -dt * inner(mu, gmu)
        pairing += inner(nl_fields[i], new - phi)
        new_fields.append(new)
        new_hats.append(new_hat)
    e1_new = model.nonlinear_energy(new_fields)
    Q = state0.r + pairing - (e1_new - state0.e1) + dissipation
    return _finish_step(model, state0, new_fields, new_hats, e1_new, Q,
                        dissipation, state0.t + dt, state0.n + 1)


def _cn_step(state: RavState, model: ModelSpec, dt: float,
             use_dealias: bool, psi_override: Sequence[Field] | None = None
             ) -> tuple[RavState, StepReport]:
    """Shared midpoint engine for one or several fields."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if psi_override is not None:
        psi = psi_override
    else:
        if not state.history:
            raise StartupHistoryError(
                "midpoint step needs one previous state for the extrapolation; "
                "take a first (backward-Euler) step before stepping"
            )
        prev = state.history[0].phibar
        psi = [Field(f.grid, 1.5 * f.values - 0.5 * p.values)
               for f, p in zip(state.phibar, prev)]
    nl_hats, nl_fields = _explicit_term(model, psi, use_dealias)
    new_fields = []
    new_hats = []
    dissipation = 0.0
    pairing = 0.0
    for i, phi in enumerate(state.phi):
        a = model.implicit_symbols[i].on(phi.grid)
        gsym = model.dissipation_symbol(i).on(phi.grid)
        ph = forward(phi).coeffs
        # (1 - dt*g*a/2) phi_new = (1 + dt*g*a/2) phi_old + dt*g*nl; the
        # multiplied-through form keeps conserved modes (g = 0) bitwise.
        denom = 1.0 - 0.5 * dt * gsym * a
        new_hat = (ph * (1.0 + 0.5 * dt * gsym * a) + dt * gsym * nl_hats[i]) / denom
        mu_hat = 0.5 * a * (new_hat + ph) + nl_hats[i]
        new = inverse(g.Spectrum(phi.grid, new_hat))
        mu = inverse(g.Spectrum(phi.grid, mu_hat))
        gmu = inverse(g.Spectrum(phi.grid, gsym * mu_hat))
        dissipation += -dt * inner(mu, gmu)
        pairing += inner(nl_fields[i], new - phi)
        new_fields.append(new)
        new_hats.append(new_hat)
    e1_new = model.nonlinear_energy(new_fields)
    Q = state.r + pairing - (e1_new - state.e1) + dissipation
    return _finish_step(model, state, new_fields, new_hats, e1_new, Q,
                        dissipation, state.t + dt, state.n + 1)


def step_cn(state: RavState, model: ModelSpec, dt: float,
            use_dealias: bool = False) -> tuple[RavState, StepReport]:
    """Second-order midpoint step (single- or multi-field)."""
    return _cn_step(state, model, dt, use_dealias)


def step_multi(state: RavState, model: ModelSpec, dt: float,
               use_dealias: bool = False) -> tuple[RavState, StepReport]:
    """Midpoint step for coupled systems; fields solve sequentially and
    share one r, one xi (the report's Q carries the coupled functional V)."""
    if model.n_fields < 2:
        raise ValueError("step_multi needs a model with at least two fields")
    return _cn_step(state, model, dt, use_dealias)


# --- BDF-k ------------------------------------------------------------------

BDF_ALPHA = {3: 11.0 / 6.0, 4: 25.0 / 12.0}
# A_k weights on (phi_n, phi_{n-1}, ...): the history side of the BDF stencil.
BDF_A_COEFFS = {3: (3.0, -1.5, 1.0 / 3.0), 4: (4.0, -3.0, 4.0 / 3.0, -0.25)}
# B_k weights for the order-matched explicit extrapolation of phibar.
BDF_B_COEFFS = {3: (3.0, -3.0, 1.0), 4: (4.0, -6.0, 4.0, -1.0)}


def _combine(coeffs, fields_seq) -> Field:
    grid = fields_seq[0].grid
    acc = np.zeros(grid.shape)
    for c, f in zip(coeffs, fields_seq):
        acc += c * f.values
    return Field(grid, acc)


def step_bdf(k: int, state: RavState, model: ModelSpec, dt: float,
             use_dealias: bool = False) -> tuple[RavState, StepReport]:
    """One RAV/BDF-k step (k = 3 or 4), single-field models.

    The step functional U_k couples the A_k-weighted r and full-energy
    histories with the new-level mu pairing, so that
    alpha_k*(E+r)_new - A_k(E+r history) <= 0 holds unconditionally.
    """
    if k not in BDF_ALPHA:
        raise ValueError("BDF order must be 3 or 4")
    if model.n_fields != 1:
        raise ValueError("BDF stepping is implemented for single-field models")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if len(state.history) < k - 1:
        raise StartupHistoryError(
            f"BDF-{k} needs {k - 1} previous states; run the startup procedure first"
        )
    alpha = BDF_ALPHA[k]
    a_coeffs = BDF_A_COEFFS[k]
    b_coeffs = BDF_B_COEFFS[k]

    phis = [state.phi[0]] + [h.phi[0] for h in state.history[: k - 1]]
    bars = [state.phibar[0]] + [h.phibar[0] for h in state.history[: k - 1]]
    rs = [state.r] + [h.r for h in state.history[: k - 1]]
    Es = [state.E] + [h.E for h in state.history[: k - 1]]

    psi = _combine(b_coeffs, bars)
    nl_hats, _ = _explicit_term(model, [psi], use_dealias)
    grid = phis[0].grid
    a = model.implicit_symbols[0].on(grid)
    gsym = model.dissipation_symbol(0).on(grid)
    a_comb = _combine(a_coeffs, phis)
    rhs_hat = forward(a_comb).coeffs
    new_hat = (rhs_hat + dt * gsym * nl_hats[0]) / (alpha - dt * gsym * a)
    mu_hat = a * new_hat + nl_hats[0]
    new = inverse(g.Spectrum(grid, new_hat))
    mu = inverse(g.Spectrum(grid, mu_hat))
    gmu = inverse(g.Spectrum(grid, gsym * mu_hat))
    dissipation = -dt * inner(mu, gmu)

    e1_new = model.nonlinear_energy([new])
    quad = 0.5 * inner(new, inverse(g.Spectrum(grid, a * new_hat)))
    E_new = quad + e1_new
    if not np.isfinite(E_new):
        raise DivergenceError(state.n + 1)

    a_r = sum(c * r for c, r in zip(a_coeffs, rs))
    a_e = sum(c * e for c, e in zip(a_coeffs, Es))
    stencil = Field(grid, alpha * new.values - a_comb.values)
    U = (a_r + inner(mu, stencil) - (alpha * E_new - a_e) + dissipation) / alpha

    r_new = correct_r(U)
    E_shift = E_new + model.C0
    if E_shift <= 0:
        raise PositivityError(f"E + C0 = {E_shift:g} <= 0 at step {state.n + 1}")
    xi_new = (E_shift + r_new) / E_shift
    hist = (state.as_history_entry(),) + state.history[:3]
    new_state = RavState(
        t=state.t + dt, n=state.n + 1,
        phi=(new,), phibar=(Field(grid, xi_new * new.values),),
        r=r_new, xi=xi_new, E=E_new, e1=e1_new, history=hist,
    )
    report = StepReport(
        Q=float(U), r_new=r_new, dissipation=float(dissipation), E_new=E_new,
        branch=Branch.ZEROED if U >= 0 else Branch.CARRIED,
    )
    return new_state, report


def startup_bdf(k: int, state0: RavState, model: ModelSpec, dt: float,
                use_dealias: bool = False) -> RavState:
    """Prime a BDF-k run: produce the k-1 back values at t = dt, 2*dt, ...

    Each macro interval is covered by 4 midpoint substeps of size dt/4.
    The very first substep has no extrapolation history, so it uses a
    predictor-corrector bootstrap: a backward-Euler predictor supplies the
    midpoint value (phibar + predictor)/2 for one corrected midpoint step.
    That keeps every substep locally third-order accurate, so the recorded
    macro states carry only O(dt^3) startup error (a plain backward-Euler
    substep would cap the whole run at second order).

    Returns a state positioned at t = (k-1)*dt whose history holds the
    k-1 earlier macro states, ready for :func:`step_bdf`.
    """
    if k not in BDF_ALPHA:
        raise ValueError("BDF order must be 3 or 4")
    h = dt / 4.0
    state = state0
    macro_entries = [state0.as_history_entry()]
    for m in range(k - 1):
        for s in range(4):
            if m == 0 and s == 0:
                # backward-Euler predictor for the midpoint explicit value
                pred, _ = first_step(state, model, h, use_dealias)
                psi = [Field(b.grid, 0.5 * (b.values + p.values))
                       for b, p in zip(state.phibar, pred.phi)]
                state, _ = _cn_step(state, model, h, use_dealias, psi_override=psi)
            else:
                state, _ = _cn_step(state, model, h, use_dealias)
        macro_entries.append(state.as_history_entry())

    history = tuple(reversed(macro_entries[:-1]))[:4]
    return RavState(
        t=(k - 1) * dt + state0.t, n=state0.n + k - 1,
        phi=state.phi, phibar=state.phibar, r=state.r, xi=state.xi,
        E=state.E, e1=state.e1, history=history,
    )
