"""Energy-stable auxiliary-variable integrators for gradient flows.

Pseudospectral discretization on periodic grids, regularized
auxiliary-variable (RAV) midpoint and BDF integrators with per-step
energy-law verification, SAV baselines, and a config-driven experiment
harness.
"""

from .grid import (
    Field,
    Grid2D,
    Spectrum,
    Symbol,
    apply_symbol,
    dealias,
    divergence,
    forward,
    gradient,
    inner,
    inverse,
    load_field,
    mean,
    save_field,
)
from .models import (
    Flow,
    ModelSpec,
    chemical_potential,
    energy,
    make_cahn_hilliard,
    make_pfc,
    make_surfactant,
    make_vesicle,
    vesicle_area,
    vesicle_volume,
)
from .rav import (
    Branch,
    RavState,
    StepReport,
    correct_r,
    first_step,
    initial_state,
    startup_bdf,
    step_bdf,
    step_cn,
    step_multi,
)
from .sav import (
    SavState,
    initial_sav_state,
    sav_drift,
    sav_step_cn,
    sav_step_first_order,
)
from .diagnostics import (
    ConvergenceRow,
    StepRecord,
    convergence_rates,
    error_norms,
    record,
    write_csv,
    write_convergence_csv,
)
from .config import ConvergeConfig, RunConfig, list_presets, load_config, preset_path
from .runner import build_model, cmd_compare, cmd_converge, cmd_run, run_rav, run_sav, simulate

__version__ = "0.1.0"
