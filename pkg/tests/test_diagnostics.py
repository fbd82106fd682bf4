import math

import numpy as np
import pytest

from ravflow.diagnostics import (
    ConvergenceRow,
    StepRecord,
    convergence_rates,
    error_norms,
    read_csv,
    record,
    record_initial,
    write_convergence_csv,
    write_csv,
)
from ravflow.errors import GridMismatchError
from ravflow.grid import Field
from ravflow.models import make_cahn_hilliard
from ravflow.rav import first_step, initial_state, step_cn

from conftest import sine_ic
from oracles import loop_inner


def test_error_norms_identical(grid_16):
    f = sine_ic(grid_16)
    assert error_norms(f, f) == (0.0, 0.0)


def test_error_norms_constant_difference(grid_2pi):
    a = grid_2pi.constant(1.0)
    b = grid_2pi.constant(1.0 - 0.25)
    l2, linf = error_norms(a, b)
    assert l2 == pytest.approx(0.25 * 2 * np.pi, rel=1e-13)
    assert linf == pytest.approx(0.25, rel=1e-13)


def test_error_norms_vs_double_loop(grid_small):
    rng = np.random.default_rng(30)
    a = Field(grid_small, rng.standard_normal(grid_small.shape))
    b = Field(grid_small, rng.standard_normal(grid_small.shape))
    d = a.values - b.values
    l2, linf = error_norms(a, b)
    assert l2 == pytest.approx(math.sqrt(loop_inner(d, d, grid_small)), rel=1e-13)
    assert linf == np.max(np.abs(d))


def test_error_norms_grid_mismatch(grid_small, grid_16):
    with pytest.raises(GridMismatchError):
        error_norms(grid_small.constant(0.0), grid_16.constant(0.0))


def test_convergence_rates_exact_quadratic():
    rows = convergence_rates([(1e-2, 1e-2, 1e-2), (5e-3, 2.5e-3, 2.5e-3)])
    assert rows[0].order_L2 is None
    assert rows[1].order_L2 == pytest.approx(2.0)


def test_convergence_rates_published_pairs():
    # order values as printed in the reference tables
    rows = convergence_rates([(1.6e-3, 1.057e-5, 1.0), (8e-4, 2.726e-6, 1.0)])
    assert rows[1].order_L2 == pytest.approx(1.955, abs=5e-3)
    rows = convergence_rates([(1.6e-3, 2.031e-4, 1.0), (8e-4, 5.573e-5, 1.0)])
    assert rows[1].order_L2 == pytest.approx(1.87, abs=5e-3)


def test_convergence_rates_reject_non_halving():
    with pytest.raises(ValueError):
        convergence_rates([(1e-2, 1.0, 1.0), (3e-3, 0.1, 0.1)])


def test_single_row_has_no_order():
    rows = convergence_rates([(1e-3, 1e-4, 1e-4)])
    assert len(rows) == 1 and rows[0].order_L2 is None


def test_record_steady_run(grid_16):
    model = make_cahn_hilliard(0.1, 2.0)
    st = initial_state(model, [grid_16.constant(1.0)])
    recs = [record_initial(st, model)]
    st, rep = first_step(st, model, 0.05)
    recs.append(record(st, rep, model))
    for _ in range(5):
        st, rep = step_cn(st, model, 0.05)
        recs.append(record(st, rep, model))
    es = [r.E for r in recs]
    assert all(e == pytest.approx(es[0], abs=1e-12) for e in es)
    assert all(r.r == 0.0 for r in recs)
    assert all(r.Q_minus_rn == pytest.approx(0.0, abs=1e-12) for r in recs[1:])
    assert all(r.mass[0] == pytest.approx(1.0, rel=1e-14) for r in recs)
    assert all(recs[i].n < recs[i + 1].n for i in range(len(recs) - 1))
    assert all(r.E_mod == r.E + r.r for r in recs)


def test_record_emod_nonincreasing(grid_16):
    model = make_cahn_hilliard(0.1, 2.0)
    st = initial_state(model, [sine_ic(grid_16)])
    recs = [record_initial(st, model)]
    st, rep = first_step(st, model, 0.01)
    recs.append(record(st, rep, model))
    for _ in range(30):
        st, rep = step_cn(st, model, 0.01)
        recs.append(record(st, rep, model))
    for a, b in zip(recs, recs[1:]):
        assert b.E_mod <= a.E_mod + 1e-9 * (1 + abs(a.E_mod))


def test_csv_empty_and_single(tmp_path):
    p = tmp_path / "empty.csv"
    write_csv([], p)
    assert p.read_text().strip().startswith("n,t,E")

    rec = StepRecord(n=0, t=0.0, E=1.5, E_mod=1.5, r=0.0, Q_minus_rn=0.25,
                     xi=1.0, mass=(0.1,))
    p2 = tmp_path / "one.csv"
    write_csv([rec], p2)
    lines = p2.read_text().strip().splitlines()
    assert len(lines) == 2
    cols, data = read_csv(p2)
    assert cols == ["n", "t", "E", "E_mod", "r", "Q_minus_rn", "xi", "mass_0"]
    assert data[0][2] == 1.5


def test_csv_roundtrip_bitwise(tmp_path):
    rng = np.random.default_rng(31)
    recs = []
    for n in range(1000):
        vals = rng.standard_normal(7) * 10.0 ** rng.integers(-12, 12)
        recs.append(StepRecord(n=n, t=float(n) * 1e-3, E=vals[0], E_mod=vals[1],
                               r=vals[2], Q_minus_rn=vals[3], xi=vals[4],
                               mass=(vals[5], vals[6])))
    p = tmp_path / "big.csv"
    write_csv(recs, p, header_comment="seed=31")
    cols, data = read_csv(p)
    assert data.shape == (1000, 9)
    for i, rec in enumerate(recs):
        assert data[i].tolist() == rec.row()  # bitwise equality after parse


def test_convergence_csv_roundtrip(tmp_path):
    rows = [
        ConvergenceRow(dt=1.6e-3, err_L2=1.05e-5, err_Linf=4.4e-5, max_abs_r=0.0),
        ConvergenceRow(dt=8e-4, err_L2=2.7e-6, err_Linf=1.1e-5,
                       order_L2=1.96, order_Linf=1.96, max_abs_r=0.0),
    ]
    p = tmp_path / "conv.csv"
    write_convergence_csv(rows, p, header_comment="seed=1")
    text = p.read_text()
    assert text.splitlines()[1] == "dt,err_L2,order_L2,err_Linf,order_Linf,max_abs_r"
    # the coarsest row has empty order cells
    assert text.splitlines()[2].split(",")[2] == ""
