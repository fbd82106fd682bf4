"""Experiment drivers behind the CLI: run, converge, compare.

Every driver is deterministic for a fixed config and seed: grids, initial
data, stepping, and file contents are reproduced bitwise across
invocations. The converge and compare drivers may execute their
independent runs concurrently; the RAVFLOW_THREADS environment variable
caps that parallelism (default 1, sequential).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import rav, sav
from .config import ConvergeConfig, RunConfig
from .diagnostics import (
    StepRecord,
    convergence_rates,
    error_norms,
    format_convergence_table,
    record,
    record_initial,
    record_sav,
    write_convergence_csv,
    write_csv,
)
from .errors import ConfigError
from .grid import Field, Grid2D, save_field
from .initial import build_initial
from .models import (
    ModelSpec,
    make_cahn_hilliard,
    make_pfc,
    make_surfactant,
    make_vesicle,
)
from .rav import Branch, StepReport

__all__ = ["build_model", "make_grid", "RunResult", "run_rav", "run_sav",
           "cmd_run", "cmd_converge", "cmd_compare", "simulate"]


def make_grid(cfg: RunConfig) -> Grid2D:
    return Grid2D(cfg.nx, cfg.ny, cfg.Lx, cfg.Ly)


def build_model(cfg: RunConfig, fields0: list[Field]) -> ModelSpec:
    """Instantiate the configured model (penalty targets need the IC)."""
    p = cfg.model_params

    def need(key: str) -> float:
        if key not in p:
            raise ConfigError(f"model {cfg.model!r} needs parameter {key!r} in [model]")
        return p[key]

    if cfg.model == "ch":
        return make_cahn_hilliard(need("epsilon"), cfg.lambda_stab, cfg.C0)
    if cfg.model == "pfc":
        return make_pfc(need("epsilon"), cfg.lambda_stab, cfg.C0)
    if cfg.model == "vesicle":
        return make_vesicle(
            need("lambda_vesicle"), need("epsilon"), need("M1"), need("M2"),
            cfg.lambda_stab, cfg.C0, phi0=fields0[0],
            stab_grad=p.get("stab_grad", 0.5),
        )
    if cfg.model == "surfactant":
        return make_surfactant(
            need("M_phi"), need("M_rho"), need("epsilon"), need("delta"),
            need("gamma1"), need("gamma2"), cfg.lambda_stab, cfg.C0,
        )
    raise ConfigError(f"unknown model {cfg.model!r}")


@dataclass
class RunResult:
    records: list[StepRecord]
    reports: list[StepReport]
    final_fields: list[Field]
    branch_counts: dict[str, int] = dc_field(default_factory=dict)
    max_abs_r: float = 0.0
    final_state: object = None


def _snapshot(out_dir: Path, tag: str, fields: list[Field], t: float) -> None:
    for i, f in enumerate(fields):
        save_field(f, t, out_dir / f"{tag}_f{i}.ravf")


def run_rav(cfg: RunConfig, model: ModelSpec | None = None,
            fields0: list[Field] | None = None,
            on_step: Callable[[int, list[Field], float], None] | None = None) -> RunResult:
    """Execute an RAV run per config; no files are written here.

    ``on_step(n, fields, t)`` fires after every produced state (snapshot
    hook for the drivers).
    """
    grid = make_grid(cfg)
    if fields0 is None:
        fields0 = build_initial(cfg.init, grid, cfg.seed, cfg.model_params)
    if model is None:
        model = build_model(cfg, fields0)
    state = rav.initial_state(model, fields0)
    records = [record_initial(state, model)]
    reports: list[StepReport] = []
    n_steps = cfg.n_steps
    dl = cfg.dealias

    def emit(st):
        if on_step is not None:
            on_step(st.n, list(st.phi), st.t)

    if cfg.scheme in ("rav_bdf3", "rav_bdf4"):
        k = 3 if cfg.scheme == "rav_bdf3" else 4
        if n_steps < k:
            raise ConfigError(f"BDF-{k} needs at least {k} steps; raise t_end or lower dt")
        state = rav.startup_bdf(k, state, model, cfg.dt, use_dealias=dl)
        # rows for the startup back-values (no macro step functional exists)
        back = list(reversed(state.history[: k - 2])) + [state.as_history_entry()]
        for j, entry in enumerate(back):
            E_shift = entry.E + model.C0
            records.append(StepRecord(
                n=j + 1, t=(j + 1) * cfg.dt + records[0].t, E=entry.E,
                E_mod=entry.E + entry.r, r=entry.r, Q_minus_rn=math.nan,
                xi=(E_shift + entry.r) / E_shift,
                mass=tuple(float(np.mean(f.values)) for f in entry.phi),
            ))
        emit(state)
        while state.n < n_steps:
            state, rep = rav.step_bdf(k, state, model, cfg.dt, use_dealias=dl)
            reports.append(rep)
            records.append(record(state, rep, model))
            emit(state)
    else:
        stepper = rav.step_multi if model.n_fields >= 2 else rav.step_cn
        state, rep = rav.first_step(state, model, cfg.dt, use_dealias=dl)
        reports.append(rep)
        records.append(record(state, rep, model))
        emit(state)
        while state.n < n_steps:
            state, rep = stepper(state, model, cfg.dt, use_dealias=dl)
            reports.append(rep)
            records.append(record(state, rep, model))
            emit(state)

    counts = {"zeroed": 0, "carried": 0}
    for rep in reports:
        counts["zeroed" if rep.branch is Branch.ZEROED else "carried"] += 1
    return RunResult(
        records=records, reports=reports, final_fields=list(state.phi),
        branch_counts=counts,
        max_abs_r=max((abs(rec.r) for rec in records), default=0.0),
        final_state=state,
    )


def run_sav(cfg: RunConfig, model: ModelSpec | None = None,
            fields0: list[Field] | None = None,
            on_step: Callable[[int, list[Field], float], None] | None = None) -> RunResult:
    grid = make_grid(cfg)
    if fields0 is None:
        fields0 = build_initial(cfg.init, grid, cfg.seed, cfg.model_params)
    if model is None:
        model = build_model(cfg, fields0)
    state = sav.initial_sav_state(model, fields0[0])
    records = [record_sav(state, model)]
    n_steps = cfg.n_steps

    def emit(st):
        if on_step is not None:
            on_step(st.n, [st.phi], st.t)

    state = sav.sav_step_first_order(state, model, cfg.dt)
    records.append(record_sav(state, model))
    emit(state)
    while state.n < n_steps:
        if cfg.scheme == "sav1":
            state = sav.sav_step_first_order(state, model, cfg.dt)
        else:
            state = sav.sav_step_cn(state, model, cfg.dt)
        records.append(record_sav(state, model))
        emit(state)
    return RunResult(
        records=records, reports=[], final_fields=[state.phi],
        max_abs_r=max(abs(rec.r) for rec in records), final_state=state,
    )


def simulate(cfg: RunConfig, **kw) -> RunResult:
    """Dispatch on the configured scheme family."""
    if cfg.scheme.startswith("sav"):
        return run_sav(cfg, **kw)
    return run_rav(cfg, **kw)


def _header(cfg: RunConfig) -> str:
    return (f"seed={cfg.seed} model={cfg.model} scheme={cfg.scheme} "
            f"dt={cfg.dt:.17g} t_end={cfg.t_end:.17g}")


def cmd_run(cfg: RunConfig) -> int:
    """Run one simulation; write time series, snapshots, and a summary."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = make_grid(cfg)
    fields0 = build_initial(cfg.init, grid, cfg.seed, cfg.model_params)
    model = build_model(cfg, fields0)
    _snapshot(out, "snap_00000000", fields0, 0.0)

    def on_step(n: int, fields: list[Field], t: float) -> None:
        if cfg.snapshot_every > 0 and n % cfg.snapshot_every == 0:
            _snapshot(out, f"snap_{n:08d}", fields, t)

    result = simulate(cfg, model=model, fields0=fields0, on_step=on_step)
    write_csv(result.records, out / "timeseries.csv", header_comment=_header(cfg))
    _snapshot(out, "final", result.final_fields, result.records[-1].t)

    summary = [
        f"model={cfg.model} scheme={cfg.scheme} dt={cfg.dt:g} t_end={cfg.t_end:g}",
        f"final_E={result.records[-1].E:.17g}",
        f"final_E_mod={result.records[-1].E_mod:.17g}",
        f"max_abs_r={result.max_abs_r:.17g}",
        f"branch_zeroed={result.branch_counts.get('zeroed', 0)}",
        f"branch_carried={result.branch_counts.get('carried', 0)}",
    ]
    (out / "summary.txt").write_text("\n".join(summary) + "\n", encoding="ascii")
    print("\n".join(summary))
    return 0


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("RAVFLOW_THREADS", "1")))
    except ValueError:
        return 1


def cmd_converge(ccfg: ConvergeConfig) -> int:
    """Reference run at dt_ref, then the dt series; emit the rate table."""
    base = ccfg.base
    out = Path(base.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = make_grid(base)
    fields0 = build_initial(base.init, grid, base.seed, base.model_params)
    model = build_model(base, fields0)

    def run_at(dt: float) -> RunResult:
        cfg = replace(base, dt=dt, model_params=dict(base.model_params))
        return simulate(cfg, model=model, fields0=fields0)

    ref = run_at(ccfg.dt_ref)

    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run_at, ccfg.dt_list))
    else:
        results = [run_at(dt) for dt in ccfg.dt_list]

    triples = []
    max_rs = []
    for dt, res in zip(ccfg.dt_list, results):
        l2 = linf = 0.0
        for a, b in zip(res.final_fields, ref.final_fields):
            e2, einf = error_norms(a, b)
            l2 = math.hypot(l2, e2)
            linf = max(linf, einf)
        triples.append((dt, l2, linf))
        max_rs.append(res.max_abs_r)
    rows = convergence_rates(triples, max_abs_r=max_rs)
    write_convergence_csv(rows, out / "convergence.csv", header_comment=_header(base))
    print(format_convergence_table(rows))
    return 0


def cmd_compare(cfg: RunConfig, dt_list: list[float]) -> int:
    """Paired RAV-CN / SAV-CN runs from identical initial data per dt."""
    if cfg.model not in ("ch", "pfc"):
        raise ConfigError("compare runs exist for the ch and pfc models only")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = make_grid(cfg)
    fields0 = build_initial(cfg.init, grid, cfg.seed, cfg.model_params)
    model = build_model(cfg, fields0)

    def one(dt: float):
        rav_cfg = replace(cfg, dt=dt, scheme="rav_cn", model_params=dict(cfg.model_params))
        sav_cfg = replace(cfg, dt=dt, scheme="sav_cn", model_params=dict(cfg.model_params))
        r_res = run_rav(rav_cfg, model=model, fields0=fields0)
        s_res = run_sav(sav_cfg, model=model, fields0=fields0)
        tag = f"dt{dt:g}"
        write_csv(r_res.records, out / f"rav_{tag}.csv", header_comment=_header(rav_cfg))
        write_csv(s_res.records, out / f"sav_{tag}.csv", header_comment=_header(sav_cfg))
        with open(out / f"compare_{tag}.csv", "w", encoding="ascii", newline="\n") as fh:
            fh.write(f"# {_header(rav_cfg)}\n")
            fh.write("t,rav_abs_r,sav_drift\n")
            for rr, sr in zip(r_res.records, s_res.records):
                fh.write(f"{rr.t:.17g},{abs(rr.r):.17g},{sr.extra['sav_drift']:.17g}\n")
        _snapshot(out, f"rav_final_{tag}", r_res.final_fields, cfg.t_end)
        _snapshot(out, f"sav_final_{tag}", s_res.final_fields, cfg.t_end)

    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(one, dt_list))
    else:
        for dt in dt_list:
            one(dt)
    return 0
