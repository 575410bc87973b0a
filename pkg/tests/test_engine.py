import math
from dataclasses import replace

import numpy as np
import pytest

from ccfunnel import (Constant, InitialState, PlannerConfig, PointMass, Scenario, SimConfig,
                      Sinusoid, read_csv, run_batch, simulate, with_sim)
from ccfunnel.engine import ClosedLoop
from ccfunnel.errors import ScenarioError
from ccfunnel.scenario import OutputSpec, VelocityFunnelSpec


def probe(k_v=3.0, h=1e-3, t_end=2.0, variant="nonsmooth", masses=(1.0,), dampings=None,
          disturbances=None, position=(1.0,), velocity=(0.0,), hard=5.0, tolerance=0.5):
    """Point-mass scenario whose soft band stays well inside the hard band."""
    n = len(masses)
    outputs = [OutputSpec(Constant(-hard), Constant(hard), 0.1, 0.1,
                          reference=Sinusoid(1.0, 0.5), tolerance=Constant(tolerance))
               for _ in range(n)]
    return Scenario("probe", outputs, PlannerConfig(mu=0.01, k_c=3.0, variant=variant), 1.0, k_v,
                    [VelocityFunnelSpec(1.0, 0.5)] * n, PointMass(masses, dampings, disturbances),
                    InitialState(position, velocity), SimConfig(t_end, h))


# -- configuration ---------------------------------------------------------

@pytest.mark.parametrize("kwargs", [dict(h=0.0), dict(h=0.02), dict(t_end=-1.0),
                                    dict(t_end=float("inf")), dict(scheme="rk45"),
                                    dict(record_stride=0), dict(record_stride=1.5)])
def test_sim_config_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)


def test_row_count():
    assert SimConfig().n_rows == 30001
    assert SimConfig(record_stride=7).n_rows == 30000 // 7 + 1
    tr = simulate(probe(t_end=1.0, h=1e-2))
    assert len(tr) == 101 and not tr.faults
    assert np.all(np.diff(tr.t) > 0)
    tr = simulate(with_sim(probe(t_end=1.0, h=1e-3), record_stride=30))
    assert len(tr) == 1000 // 30 + 1


def test_invalid_scenario_raises_before_integrating():
    with pytest.raises(ScenarioError):
        simulate(probe(position=(3.0,)))


# -- closed-form probes ----------------------------------------------------

def test_compatible_constraints_keep_phi_zero():
    tr = simulate(probe(t_end=10.0, h=2e-3))
    assert not tr.faults
    assert np.all(tr.phi_lower == 0.0) and np.all(tr.phi_upper == 0.0)
    # the funnel is then exactly the soft band
    assert np.array_equal(tr.rho_lower, tr.soft_lower)
    assert np.array_equal(tr.rho_upper, tr.soft_upper)


def test_double_integrator_follows_quadratic():
    sc = probe(masses=(1.0, 1.0), position=(1.0, 0.8), velocity=(0.3, -0.2), hard=50.0,
               tolerance=20.0, t_end=3.0, h=1e-2)
    u = (1.0, -0.5)
    tr = simulate(sc, control=lambda t, x, v: u)
    assert not tr.faults
    t = tr.t[:, None]
    x0, v0 = np.array([1.0, 0.8]), np.array([0.3, -0.2])
    assert np.max(np.abs(tr.x - (x0 + v0 * t + 0.5 * np.array(u) * t * t))) <= 1e-6
    assert np.max(np.abs(tr.v - (v0 + np.array(u) * t))) <= 1e-6


def test_cancelling_all_forces_keeps_x_constant():
    dist = (Sinusoid(0.7, 2.0, 0.3),)
    sc = probe(dampings=(0.4,), disturbances=dist, position=(1.2,), t_end=5.0, h=1e-2)
    d = dist[0].compile()
    tr = simulate(sc, control=lambda t, x, v: [0.4 * v[0] - d(t)])
    assert not tr.faults
    assert np.all(tr.x == 1.2) and np.all(tr.v == 0.0)


# -- numerics --------------------------------------------------------------

def test_step_halving(run_kc3, paper_kc3):
    coarse = simulate(with_sim(paper_kc3, h=2e-3))
    fine = run_kc3.trace
    assert np.array_equal(fine.t[::2], coarse.t)
    assert np.max(np.abs(fine.x[::2] - coarse.x)) <= 1e-4


def test_rk4_convergence_order(paper_kc3):
    # fine-step rk4 as reference; see the oracle test for the independent check
    t_end, dt = 5.0, 4e-3
    reference = simulate(with_sim(paper_kc3, t_end=t_end, h=2.5e-4, record_stride=16))
    errors = []
    for h in (4e-3, 2e-3, 1e-3):
        tr = simulate(with_sim(paper_kc3, t_end=t_end, h=h, record_stride=int(round(dt / h))))
        assert len(tr) == len(reference)
        errors.append(np.max(np.abs(tr.x - reference.x)))
    slopes = [math.log2(errors[i] / errors[i + 1]) for i in range(2)]
    print("rk4 sup errors", errors, "slopes", slopes)
    assert all(abs(s - 4.0) <= 0.5 for s in slopes)


def test_runs_are_bit_identical(paper_kc3):
    sc = with_sim(paper_kc3, t_end=2.0)
    assert simulate(sc).to_csv() == simulate(sc).to_csv()


def test_recorded_derivative_matches_integrated_one(paper_kc3):
    loop = ClosedLoop(paper_kc3)
    y = loop.initial_state()
    y[-4:] = [0.01, 0.0, 0.02, 0.01]
    dy, row = loop.evaluate(0.0, y, record=True)
    assert dy == loop.derivative(0.0, y)
    assert list(row["phi_upper"]) == [0.02, 0.01]
    assert tuple(row["u"]) == tuple(loop._law(row["x"], row["v"], row["rho_lower"],
                                              row["rho_upper"], row["gamma_v"]))


# -- faults ----------------------------------------------------------------

def test_non_finite_input_is_named():
    tr = simulate(probe(t_end=1.0), control=lambda t, x, v: [math.nan if t > 0.5 else 0.0])
    assert len(tr.faults) == 1
    f = tr.faults[0]
    assert f.kind == "non_finite" and "u[0]" in f.message
    assert 0.499 <= f.time <= 0.501
    assert np.all(np.isfinite(tr.x))


def test_fault_ends_run_and_keeps_rows():
    # a stiff gain at a coarse step throws the velocity error out of its funnel
    sc = probe(k_v=1e3, h=1e-2)
    tr = simulate(sc)
    assert len(tr.faults) == 1
    assert tr.faults[0].kind == "velocity_funnel_violation" and tr.faults[0].index == 0
    assert 1 <= len(tr) < sc.sim.n_rows
    back = read_csv(tr.to_csv())
    assert back.faults == tr.faults


def test_trace_csv_round_trip(paper_kc3):
    tr = simulate(with_sim(paper_kc3, t_end=1.0, record_stride=10))
    back = read_csv(tr.to_csv(), n_outputs=2)
    assert np.array_equal(back.t, tr.t)
    for key, values in tr.series.items():
        assert np.array_equal(back.series[key], values), key


# -- batch -----------------------------------------------------------------

def test_parallel_batch_matches_sequential(paper_kc3):
    scenarios = [with_sim(paper_kc3, t_end=1.0),
                 replace(with_sim(paper_kc3, t_end=1.0), planner=replace(paper_kc3.planner, k_c=0.3))]
    sequential = run_batch(scenarios)
    parallel = run_batch(scenarios, workers=2)
    assert [t.to_csv() for t in sequential] == [t.to_csv() for t in parallel]
    assert sequential[0].to_csv() != sequential[1].to_csv()
