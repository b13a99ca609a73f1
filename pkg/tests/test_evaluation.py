import math

import numpy as np
import pytest

from svdrestart.bound import MonitorState, loss_update_delta
from svdrestart.engine import LWI2, FirstOrderPerturb, HeuFL, HeuFT, Hold, Timers
from svdrestart.evaluation import (
    ErrorSeries,
    ExperimentReport,
    Setup,
    error_accumulation_profile,
    error_series,
    eigen_tracking,
    fit_restart_budget,
    link_prediction,
    loglog_slope,
    min_restarts_for_error,
    relative_error,
    reports_to_csv,
    scalability_probe,
    sweep_fixed_max_error,
    sweep_fixed_restarts,
)
from svdrestart.spectral import (
    DeltaMatrix,
    SpectralFactors,
    dense_min_loss,
    reconstruction_loss,
    topk_eigs,
)
from svdrestart.stream import SliceStream, SyntheticSpec

ALL = [Timers(), LWI2(), HeuFL(), HeuFT()]


def setup_for(variant="random", n=60, T=10, k=5, seed=0, **kw):
    spec = SyntheticSpec(variant=variant, n=n, m_static=3 * n, m_evolve=2 * n, seed=seed, **kw)
    return Setup.synthetic(spec, T, k)


def nonzero_slices(setup):
    return sum(not d.is_empty() for d in setup.stream.slices)


# --- relative error ------------------------------------------------------------------

def test_relative_error_examples():
    assert relative_error(1.2, 1.0) == pytest.approx(0.2)
    assert relative_error(1.0, 1.0) == 0.0
    assert relative_error(1.0 + 1e-12, 1.0) == 0.0


def test_relative_error_degenerate():
    assert relative_error(0.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        relative_error(1.0, 0.0)


def test_error_series_summary():
    e = ErrorSeries([0.1, 0.3, 0.2])
    assert e.max_r == 0.3
    assert e.avg_r == pytest.approx(0.2)


def test_error_series_matches_independent_recompute():
    setup = setup_for(seed=1)
    res = setup.run(Timers(0.1))
    r = error_series(setup, res).r
    s = setup.a0.copy()
    for t, (d, f) in enumerate(zip(setup.stream.slices, res.factors[1:])):
        s.apply(d)
        J, L = reconstruction_loss(s, f), dense_min_loss(s, setup.k)
        assert r[t] == pytest.approx((J - L) / L, abs=1e-8)


def test_report_round_trip():
    setup = setup_for()
    rep = sweep_fixed_restarts(setup, [Timers()], 2)[0]
    again = ExperimentReport.from_json(rep.to_json())
    assert again.to_json() == rep.to_json()
    assert again.errors.r == rep.errors.r


def test_csv_header():
    setup = setup_for()
    text = reports_to_csv(sweep_fixed_restarts(setup, [Timers(), HeuFT()], 2))
    lines = text.splitlines()
    assert lines[0] == "policy,knob_name,knob,restarts,max_r,avg_r,exact,seed"
    assert len(lines) == 3


# --- sweeps ---------------------------------------------------------------------------

def test_theta_anchors():
    setup = setup_for()
    assert setup.run(Timers(0.0)).record.restarts == nonzero_slices(setup)
    assert setup.run(Timers(math.inf)).record.restarts == 0


def test_fixed_restarts_all_exact():
    spec = SyntheticSpec(variant="random", n=200, m_static=800, m_evolve=400, seed=0)
    setup = Setup.synthetic(spec, 20, 10)
    reports = sweep_fixed_restarts(setup, ALL, 5)
    assert [r.restarts for r in reports] == [5, 5, 5, 5]
    assert all(r.exact for r in reports)


def test_fit_picks_smallest_knob():
    setup = setup_for()
    pol, res, exact = fit_restart_budget(setup, HeuFT(), 3)
    assert exact and pol.slices_per_restart == 3
    assert setup.run(HeuFT(2)).record.restarts != 3


def test_fit_flags_unreachable_target():
    setup = setup_for(T=6)
    _, res, exact = fit_restart_budget(setup, HeuFT(), 7)
    assert not exact


def test_max_error_infinite_target():
    setup = setup_for()
    assert [r.restarts for r in sweep_fixed_max_error(setup, ALL, math.inf)] == [0] * 4


def test_max_error_zero_target():
    setup = setup_for()
    counts = [r.restarts for r in sweep_fixed_max_error(setup, [Timers(), LWI2(), HeuFT()], 0.0)]
    assert counts == [nonzero_slices(setup)] * 3


def test_max_error_target_met():
    setup = setup_for(variant="celebrity", seed=2)
    for rep in sweep_fixed_max_error(setup, ALL, 0.05):
        assert rep.errors.max_r <= 0.05


def test_max_error_below_floor():
    setup = setup_for()
    with pytest.raises(ValueError):
        min_restarts_for_error(setup, Timers(), -1.0)


def test_nested_schedules_never_raise_max_error():
    # edge additions only, factors frozen: a schedule whose restarts contain
    # another's never has a worse slice
    setup = setup_for(variant="celebrity", seed=3, T=12)
    worst = {p: error_series(setup, setup.run(HeuFT(p))).max_r for p in range(1, 13)}
    for p in worst:
        for q in worst:
            if q % p == 0:
                assert worst[p] <= worst[q] + 1e-12


def test_max_error_sweep_trace_monotone():
    setup = setup_for(variant="celebrity", seed=3)
    _, _, trace = min_restarts_for_error(setup, Timers(), 0.03)
    pts = sorted((count, mr) for _, count, mr in trace)
    for (c1, r1), (c2, r2) in zip(pts, pts[1:]):
        if c2 > c1:
            assert r2 <= r1 + 1e-12


# --- error accumulation profile -----------------------------------------------------

def reference_profile(setup, intervals):
    """Straight-line version: dense ground truth and full loss recompute."""
    mats = [m.copy() for m in setup.matrices()]
    out = {}
    for d in intervals:
        vals = []
        for t0 in range(1, setup.T - d + 1):
            f = SpectralFactors.from_eigs(*topk_eigs(mats[t0], setup.k))
            J = reconstruction_loss(mats[t0 + d], f)
            L = dense_min_loss(mats[t0 + d], setup.k)
            vals.append(max((J - L) / L, 0.0))
        out[d] = (float(np.mean(vals)), float(np.std(vals)))
    return out


def test_profile_matches_reference():
    setup = setup_for(seed=4, T=12)
    got = error_accumulation_profile(setup, [1, 2, 4])
    ref = reference_profile(setup, [1, 2, 4])
    for d in ref:
        assert got[d][0] == pytest.approx(ref[d][0], rel=1e-7, abs=1e-12)
        assert got[d][1] == pytest.approx(ref[d][1], rel=1e-6, abs=1e-12)


def test_profile_mean_grows_with_gap():
    setup = setup_for(seed=5, T=15)
    prof = error_accumulation_profile(setup, range(1, 10))
    means = [prof[d][0] for d in sorted(prof)]
    assert all(a <= b for a, b in zip(means, means[1:]))


def test_profile_empty_slices_zero():
    setup = setup_for(T=6)
    setup.stream = SliceStream([DeltaMatrix(setup.a0.n) for _ in range(6)], "equal_edges", [0] * 6)
    prof = error_accumulation_profile(setup, [1, 3])
    assert prof[1] == (0.0, 0.0) and prof[3] == (0.0, 0.0)


def test_profile_needs_long_stream():
    with pytest.raises(ValueError):
        error_accumulation_profile(setup_for(T=4), [4])


# --- applications --------------------------------------------------------------------

def test_link_prediction_restart_every_slice_is_optimal():
    setup = setup_for(seed=6)
    out = link_prediction(setup, [Timers(0.0)], seeds=range(2))
    assert abs(out["TIMERS"]) <= 1e-8


def test_link_prediction_full_rank_zero():
    setup = setup_for(n=20, k=20, seed=7)
    setup.k = 20
    out = link_prediction(setup, [HeuFT(5)], seeds=range(2))
    assert abs(out["Heu-FT"]) <= 1e-8


def test_link_prediction_reproducible():
    setup = setup_for(seed=8)
    a = link_prediction(setup, [Timers(), HeuFL(50)], seeds=range(2))
    b = link_prediction(setup, [Timers(), HeuFL(50)], seeds=range(2))
    assert a == b


def test_link_prediction_bad_fraction():
    with pytest.raises(ValueError):
        link_prediction(setup_for(), [Timers()], hide_fraction=1.0)


def test_eigen_tracking_restart_every_slice():
    setup = setup_for(seed=9)
    out = eigen_tracking(setup, [HeuFT(1)], restarts=setup.T)
    assert out["Heu-FT"] <= 1e-8


def test_eigen_tracking_static_stream():
    setup = setup_for(T=5)
    setup.stream = SliceStream([DeltaMatrix(setup.a0.n) for _ in range(5)], "equal_edges", [0] * 5)
    out = eigen_tracking(setup, [HeuFT()], restarts=0)
    assert out["Heu-FT"] <= 1e-12 * setup.ground_truth().lambda1[0]


# --- scalability ----------------------------------------------------------------------

def test_loglog_slope_exact():
    x = [1.0, 2.0, 4.0, 8.0]
    assert loglog_slope(x, [3 * v ** 1.5 for v in x]) == pytest.approx(1.5)


def test_scalability_probe_shape():
    out = scalability_probe([100, 200], k=4, T=5)
    assert [r["n"] for r in out["rows"]] == [100, 200]
    assert set(out["slopes"]) == {"time_vs_nodes", "time_vs_edges", "cost_vs_delta_nnz", "cost_vs_support"}


def test_scalability_constant_size_counters_repeat():
    a = scalability_probe([150, 150], k=4, T=5)["rows"]
    keys = ["edges", "delta_nnz", "support_rows", "monitoring_cost", "restarts"]
    assert [a[0][k] for k in keys] == [a[1][k] for k in keys]


# --- directional experiments ------------------------------------------------------------

def test_eigen_tracking_timers_beats_fixed_interval():
    wins = 0
    for seed in range(10):
        spec = SyntheticSpec(variant="celebrity", n=200, m_static=800, m_evolve=400, seed=seed)
        setup = Setup.synthetic(spec, 20, 10)
        out = eigen_tracking(setup, [Timers(), HeuFT()], restarts=3)
        assert out["TIMERS/exact"] and out["Heu-FT/exact"]
        wins += out["TIMERS"] <= out["Heu-FT"]
    assert wins >= 8


@pytest.mark.xfail(strict=False, reason=(
    "hidden-entry MSE differences are within a fraction of a percent at 200 nodes; "
    "the ordering against Heu-FL flips between setups"))
def test_link_prediction_timers_not_worse_than_edge_count():
    n, m_evolve, events = 200, 400, 5
    burst = 0.3 / 0.7 * m_evolve / events
    spec = SyntheticSpec(variant="celebrity", n=n, m_static=800, m_evolve=m_evolve, seed=0,
                         num_events=events, attach_fraction=burst / n)
    setup = Setup.synthetic(spec, 20, 20)
    out = link_prediction(setup, [Timers(), HeuFL()], seeds=range(10), restarts=4)
    assert out["TIMERS"] <= out["Heu-FL"]
