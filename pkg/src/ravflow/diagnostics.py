"""Per-step observables, error norms, convergence rates, CSV emission.

CSV layout (one row per step, full float64 precision, 17 significant
digits so values round-trip bitwise):

    n,t,E,E_mod,r,Q_minus_rn,xi,mass_0[,mass_1][,VD,SAD][,sav_drift]

Convergence tables use:

    dt,err_L2,order_L2,err_Linf,order_Linf,max_abs_r

Lines starting with '#' are header comments (the run's seed is recorded
there). Undefined entries (the step functional on the initial row, xi for
SAV runs) are written as nan.

Records are produced by the single stepping thread; each file has one
writer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import GridMismatchError
from .grid import Field, mean
from .models import ModelSpec, energy, vesicle_area, vesicle_volume
from .rav import RavState, StepReport
from .sav import SavState, sav_drift

__all__ = [
    "StepRecord",
    "ConvergenceRow",
    "error_norms",
    "convergence_rates",
    "record",
    "record_initial",
    "record_sav",
    "write_csv",
    "read_csv",
    "write_convergence_csv",
    "format_convergence_table",
]


@dataclass
class StepRecord:
    """One diagnostics row; ``extra`` holds model-specific columns in order."""

    n: int
    t: float
    E: float
    E_mod: float
    r: float
    Q_minus_rn: float
    xi: float
    mass: tuple[float, ...]
    extra: dict[str, float] = dc_field(default_factory=dict)

    def columns(self) -> list[str]:
        cols = ["n", "t", "E", "E_mod", "r", "Q_minus_rn", "xi"]
        cols += [f"mass_{i}" for i in range(len(self.mass))]
        cols += list(self.extra.keys())
        return cols

    def row(self) -> list[float]:
        vals = [float(self.n), self.t, self.E, self.E_mod, self.r,
                self.Q_minus_rn, self.xi, *self.mass]
        vals += list(self.extra.values())
        return vals


@dataclass
class ConvergenceRow:
    dt: float
    err_L2: float
    err_Linf: float
    order_L2: float | None = None
    order_Linf: float | None = None
    max_abs_r: float = 0.0


def error_norms(numeric: Field, reference: Field) -> tuple[float, float]:
    """(L2, Linf) norms of the difference, L2 in the hx*hy quadrature."""
    if numeric.grid != reference.grid:
        raise GridMismatchError("error norms need both fields on one grid")
    d = numeric.values - reference.values
    l2 = math.sqrt(numeric.grid.hx * numeric.grid.hy * float(np.sum(d * d)))
    return l2, float(np.max(np.abs(d)))


def convergence_rates(rows: list[tuple[float, float, float]],
                      max_abs_r: list[float] | None = None) -> list[ConvergenceRow]:
    """Orders log2(err_coarse/err_fine) for a strictly halving dt sequence.

    ``rows`` holds (dt, err_L2, err_Linf) from coarse to fine. Sequences
    that do not halve are rejected (the log2 ratio would not be an order).
    """
    out: list[ConvergenceRow] = []
    for i, (dt, e2, einf) in enumerate(rows):
        if i > 0:
            prev_dt = rows[i - 1][0]
            if not math.isclose(prev_dt, 2.0 * dt, rel_tol=1e-12):
                raise ValueError(
                    f"dt sequence must halve: {prev_dt} -> {dt} is not a factor of 2"
                )
        row = ConvergenceRow(
            dt=dt, err_L2=e2, err_Linf=einf,
            max_abs_r=0.0 if max_abs_r is None else max_abs_r[i],
        )
        if i > 0:
            row.order_L2 = math.log2(rows[i - 1][1] / e2)
            row.order_Linf = math.log2(rows[i - 1][2] / einf)
        out.append(row)
    return out


def _vesicle_extras(model: ModelSpec, phi: Field) -> dict[str, float]:
    tg = model.vesicle_targets
    return {"VD": vesicle_volume(model, phi) - tg.A0,
            "SAD": vesicle_area(model, phi) - tg.B0}


def record(state: RavState, report: StepReport, model: ModelSpec) -> StepRecord:
    """Assemble the diagnostics row for a freshly produced state."""
    r_prev = state.history[0].r if state.history else math.nan
    extra = {}
    if model.vesicle_targets is not None:
        extra = _vesicle_extras(model, state.phi[0])
    return StepRecord(
        n=state.n, t=state.t, E=state.E, E_mod=state.E + state.r, r=state.r,
        Q_minus_rn=report.Q - r_prev, xi=state.xi,
        mass=tuple(mean(f) for f in state.phi), extra=extra,
    )


def record_initial(state: RavState, model: ModelSpec) -> StepRecord:
    """Row for the initial condition; no step functional exists yet."""
    extra = {}
    if model.vesicle_targets is not None:
        extra = _vesicle_extras(model, state.phi[0])
    return StepRecord(
        n=state.n, t=state.t, E=state.E, E_mod=state.E + state.r, r=state.r,
        Q_minus_rn=math.nan, xi=state.xi,
        mass=tuple(mean(f) for f in state.phi), extra=extra,
    )


def record_sav(state: SavState, model: ModelSpec) -> StepRecord:
    """Row for a SAV iterate; xi and the step functional do not apply."""
    E = energy(model, [state.phi])
    return StepRecord(
        n=state.n, t=state.t, E=E, E_mod=E + state.r, r=state.r,
        Q_minus_rn=math.nan, xi=math.nan,
        mass=(mean(state.phi),),
        extra={"sav_drift": sav_drift(state, model)},
    )


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_csv(records: list[StepRecord], path, header_comment: str | None = None) -> None:
    """Emit records; all rows must share one column schema."""
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            if not records:
                fh.write("n,t,E,E_mod,r,Q_minus_rn,xi,mass_0\n")
                return
            cols = records[0].columns()
            fh.write(",".join(cols) + "\n")
            for rec in records:
                if rec.columns() != cols:
                    raise ValueError("records carry inconsistent column sets")
                fh.write(",".join(_fmt(v) for v in rec.row()) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write time series to {path}: {exc}") from exc


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Read back a CSV written by :func:`write_csv` (comments skipped)."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    cols = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    return cols, data


def write_convergence_csv(rows: list[ConvergenceRow], path,
                          header_comment: str | None = None) -> None:
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write("dt,err_L2,order_L2,err_Linf,order_Linf,max_abs_r\n")
            for r in rows:
                o2 = "" if r.order_L2 is None else _fmt(r.order_L2)
                oi = "" if r.order_Linf is None else _fmt(r.order_Linf)
                fh.write(f"{_fmt(r.dt)},{_fmt(r.err_L2)},{o2},"
                         f"{_fmt(r.err_Linf)},{oi},{_fmt(r.max_abs_r)}\n")
    except OSError as exc:
        raise OSError(f"cannot write convergence table to {path}: {exc}") from exc


def format_convergence_table(rows: list[ConvergenceRow]) -> str:
    """Console rendering with orders at two decimals."""
    lines = [f"{'dt':>10}  {'L2-error':>12} {'order':>6}  {'Linf-error':>12} {'order':>6}  {'max|r|':>9}"]
    for r in rows:
        o2 = "  -- " if r.order_L2 is None else f"{r.order_L2:5.2f}"
        oi = "  -- " if r.order_Linf is None else f"{r.order_Linf:5.2f}"
        lines.append(f"{r.dt:10.2e}  {r.err_L2:12.4e} {o2:>6}  "
                     f"{r.err_Linf:12.4e} {oi:>6}  {r.max_abs_r:9.2e}")
    return "\n".join(lines)
