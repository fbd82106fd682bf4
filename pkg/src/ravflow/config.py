"""Run configuration: TOML parsing, validation, and shipped presets.

Config files carry four sections; every key maps onto a RunConfig field
and unknown keys are hard errors (a silently ignored typo corrupts an
experiment):

    [grid]    nx, ny, Lx, Ly, dealias
    [time]    scheme, dt, t_end, dt_list (converge/compare), dt_ref (converge)
    [model]   name, init, seed, lambda_stab, C0, model parameters
              (epsilon, delta, gamma1, gamma2, M1, M2, M_phi, M_rho,
              lambda_vesicle, stab_grad)
    [output]  dir, snapshot_every

The scheme/model compatibility table is enforced at parse time: the SAV
baselines exist for the single-field bulk models only, and the BDF
integrators for single-field models.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field as dc_field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import ConfigError

__all__ = ["RunConfig", "ConvergeConfig", "load_config", "load_converge_config",
           "load_compare_config", "preset_path", "list_presets", "MODELS", "SCHEMES"]

MODELS = ("ch", "pfc", "vesicle", "surfactant")
SCHEMES = ("rav_cn", "rav_bdf3", "rav_bdf4", "sav1", "sav_cn")

_MODEL_PARAM_KEYS = ("epsilon", "delta", "gamma1", "gamma2", "M1", "M2",
                     "M_phi", "M_rho", "lambda_vesicle", "stab_grad")

# scheme -> models it may drive
_COMPAT = {
    "rav_cn": {"ch", "pfc", "vesicle", "surfactant"},
    "rav_bdf3": {"ch", "pfc", "vesicle"},
    "rav_bdf4": {"ch", "pfc", "vesicle"},
    "sav1": {"ch", "pfc"},
    "sav_cn": {"ch", "pfc"},
}

_INITS_FOR_MODEL = {
    "ch": {"sine_ch", "random_offset"},
    "pfc": {"sine_pfc", "random_offset"},
    "vesicle": {"tanh_ellipse"},
    "surfactant": {"random_two_field"},
}


@dataclass
class RunConfig:
    model: str
    scheme: str
    nx: int
    ny: int
    Lx: float
    Ly: float
    dt: float
    t_end: float
    lambda_stab: float
    C0: float
    seed: int
    init: str
    dealias: bool
    snapshot_every: int
    output_dir: Path
    model_params: dict[str, float] = dc_field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; known: {', '.join(MODELS)}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; known: {', '.join(SCHEMES)}")
        if self.model not in _COMPAT[self.scheme]:
            raise ConfigError(
                f"scheme {self.scheme!r} does not support model {self.model!r} "
                f"(allowed: {', '.join(sorted(_COMPAT[self.scheme]))})"
            )
        if self.init not in _INITS_FOR_MODEL[self.model]:
            raise ConfigError(
                f"init {self.init!r} does not fit model {self.model!r} "
                f"(allowed: {', '.join(sorted(_INITS_FOR_MODEL[self.model]))})"
            )
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.t_end < self.dt:
            raise ConfigError("t_end must be at least dt")
        if self.nx < 4 or self.ny < 4 or self.nx % 2 or self.ny % 2:
            raise ConfigError("nx, ny must be even and at least 4")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ConfigError("Lx, Ly must be positive")
        if self.lambda_stab < 0:
            raise ConfigError("lambda_stab must be nonnegative")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 bits")
        return self

    @property
    def n_steps(self) -> int:
        n = round(self.t_end / self.dt)
        return max(n, 1)


@dataclass
class ConvergeConfig:
    base: RunConfig
    dt_list: list[float]
    dt_ref: float

    def validate(self) -> "ConvergeConfig":
        self.base.validate()
        if len(self.dt_list) < 1:
            raise ConfigError("dt_list must not be empty")
        if any(d <= 0 for d in self.dt_list):
            raise ConfigError("dt_list entries must be positive")
        if sorted(self.dt_list, reverse=True) != self.dt_list:
            raise ConfigError("dt_list must decrease")
        if not self.dt_ref < min(self.dt_list) / 4:
            raise ConfigError("dt_ref must be smaller than min(dt_list)/4")
        return self


def _take(section: dict, table_name: str, key: str, default=None, required=False):
    if key in section:
        return section.pop(key)
    if required:
        raise ConfigError(f"[{table_name}] is missing required key {key!r}")
    return default


def _reject_leftovers(section: dict, table_name: str) -> None:
    if section:
        raise ConfigError(f"unknown keys in [{table_name}]: {', '.join(sorted(section))}")


def _parse(doc: dict, path: Path) -> tuple[RunConfig, list[float] | None, float | None]:
    doc = dict(doc)
    grid = dict(doc.pop("grid", {}))
    time = dict(doc.pop("time", {}))
    model = dict(doc.pop("model", {}))
    output = dict(doc.pop("output", {}))
    if doc:
        raise ConfigError(f"unknown sections: {', '.join(sorted(doc))}")

    nx = int(_take(grid, "grid", "nx", required=True))
    ny = int(_take(grid, "grid", "ny", required=True))
    Lx = float(_take(grid, "grid", "Lx", required=True))
    Ly = float(_take(grid, "grid", "Ly", required=True))
    dealias = bool(_take(grid, "grid", "dealias", default=False))
    _reject_leftovers(grid, "grid")

    scheme = str(_take(time, "time", "scheme", required=True))
    dt = float(_take(time, "time", "dt", required=True))
    t_end = float(_take(time, "time", "t_end", required=True))
    dt_list = _take(time, "time", "dt_list")
    dt_ref = _take(time, "time", "dt_ref")
    _reject_leftovers(time, "time")

    name = str(_take(model, "model", "name", required=True))
    init = str(_take(model, "model", "init", required=True))
    seed = int(_take(model, "model", "seed", default=0))
    lambda_stab = float(_take(model, "model", "lambda_stab", default=2.0))
    C0 = float(_take(model, "model", "C0", default=1.0))
    model_params = {}
    for key in _MODEL_PARAM_KEYS:
        if key in model:
            model_params[key] = float(model.pop(key))
    _reject_leftovers(model, "model")

    out_dir = Path(str(_take(output, "output", "dir", default="out")))
    snapshot_every = int(_take(output, "output", "snapshot_every", default=0))
    _reject_leftovers(output, "output")

    cfg = RunConfig(
        model=name, scheme=scheme, nx=nx, ny=ny, Lx=Lx, Ly=Ly, dt=dt,
        t_end=t_end, lambda_stab=lambda_stab, C0=C0, seed=seed, init=init,
        dealias=dealias, snapshot_every=snapshot_every, output_dir=out_dir,
        model_params=model_params,
    ).validate()
    if dt_list is not None:
        dt_list = [float(x) for x in dt_list]
    if dt_ref is not None:
        dt_ref = float(dt_ref)
    return cfg, dt_list, dt_ref


def _read_toml(path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}")


def load_config(path) -> RunConfig:
    cfg, _, _ = _parse(_read_toml(path), Path(path))
    return cfg


def load_converge_config(path) -> ConvergeConfig:
    cfg, dt_list, dt_ref = _parse(_read_toml(path), Path(path))
    if dt_list is None or dt_ref is None:
        raise ConfigError(f"{path}: convergence runs need dt_list and dt_ref in [time]")
    return ConvergeConfig(base=cfg, dt_list=dt_list, dt_ref=dt_ref).validate()


def load_compare_config(path) -> tuple[RunConfig, list[float]]:
    cfg, dt_list, _ = _parse(_read_toml(path), Path(path))
    if dt_list is None:
        dt_list = [cfg.dt]
    return cfg, dt_list


def list_presets() -> list[str]:
    root = importlib.resources.files("ravflow") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def preset_path(name: str) -> Path:
    root = importlib.resources.files("ravflow") / "presets"
    p = root / f"{name}.toml"
    if not p.is_file():
        raise ConfigError(f"unknown preset {name!r}; shipped: {', '.join(list_presets())}")
    return Path(str(p))
