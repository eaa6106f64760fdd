import math

import numpy as np
import pytest

from wavelab.convergence_lab import (
    CornerPerturbation,
    build_simulation,
    convergence_rate,
    predicted_rate,
    probe_slopes,
    run_corner_experiment,
    run_refinement_study,
    truncation_probe,
)
from wavelab.sat_semidisc import DIRICHLET, NEUMANN
from wavelab.wave_solver import SimulationConfig, rk4_integrate


def test_rate_formula_exact():
    assert convergence_rate(1e-2, 2.5e-3) == 2.0
    assert convergence_rate(8.0, 1.0) == 3.0


def test_predicted_rates_table():
    assert predicted_rate(4, DIRICHLET, "at_threshold") == 2.5
    assert predicted_rate(6, NEUMANN) == 5.5
    assert predicted_rate(2, DIRICHLET) == 2.0
    assert predicted_rate(2, DIRICHLET, "corner") == 2.0
    assert predicted_rate(4, DIRICHLET, "corner") == 3.0
    assert predicted_rate(6, DIRICHLET, "corner") == 4.0
    assert predicted_rate(2, NEUMANN, "corner") == 1.0
    assert predicted_rate(6, NEUMANN, "corner") == 3.0
    with pytest.raises(ValueError):
        predicted_rate(8, DIRICHLET)
    with pytest.raises(ValueError):
        predicted_rate(4, NEUMANN, "at_threshold")


def quick_cfg(**kw):
    base = dict(order=2, bc=NEUMANN, t_f=0.4, solution="wavenumber4")
    base.update(kw)
    return SimulationConfig(**base)


def test_refinement_study_basics():
    rep = run_refinement_study(quick_cfg(), [21, 41, 81])
    ns = [r[0] for r in rep.rows]
    assert ns == [21, 41, 81]
    assert math.isnan(rep.rows[0][3])
    assert rep.headline_rate == rep.rows[-1][3]
    assert 1.5 <= rep.headline_rate <= 2.5
    errs = [r[2] for r in rep.rows]
    assert errs[0] > errs[1] > errs[2]
    assert rep.metadata["regime"] == "above_threshold"


def test_refinement_needs_two_levels():
    with pytest.raises(ValueError):
        run_refinement_study(quick_cfg(), [41])


def test_zero_corner_amplitude_reduces_to_plain_study():
    cfg_plain = quick_cfg()
    cfg_zero = quick_cfg(corner={"c_p": 0.0})
    a = run_refinement_study(cfg_plain, [21, 41])
    b = run_refinement_study(cfg_zero, [21, 41])
    assert [r[2] for r in a.rows] == [r[2] for r in b.rows]


def test_corner_site_count_invariant():
    pert = CornerPerturbation(bc=DIRICHLET, order=2)
    for n in (41, 321):
        y = np.linspace(0.0, 1.0, n)
        base = lambda coords, t: np.cos(4 * coords + 2.0)
        wrapped = pert.wrap(base, 1.0 / (n - 1))
        diff = wrapped(y, 0.0) != base(y, 0.0)
        assert int(diff.sum()) == 10


def test_corner_linearity_in_amplitude():
    cfg0 = quick_cfg(order=2, bc=NEUMANN, corner={"c_p": 0.0}, t_f=0.4)
    cfg1 = quick_cfg(order=2, bc=NEUMANN, corner={"c_p": 0.3}, t_f=0.4)
    cfg2 = quick_cfg(order=2, bc=NEUMANN, corner={"c_p": 0.6}, t_f=0.4)
    outs = []
    for cfg in (cfg0, cfg1, cfg2):
        cfg = SimulationConfig(**{**cfg.__dict__, "n": 41})
        sd, ms, _ = build_simulation(cfg)
        outs.append(rk4_integrate(sd, ms, cfg).u)
    d1 = outs[1] - outs[0]
    d2 = outs[2] - outs[0]
    ratio = np.linalg.norm(d2) / np.linalg.norm(d1)
    assert abs(ratio - 2.0) <= 0.05 * 2.0


def test_corner_rates_small_ladder():
    # coarse sanity; the acceptance module runs the full ladder
    rep = run_corner_experiment(quick_cfg(order=2, bc=NEUMANN, t_f=2.0), [41, 81])
    assert abs(rep.headline_rate - 1.0) <= 0.3
    assert rep.predicted == 1.0
    assert rep.metadata["corner"]["sites"] == 10


def test_truncation_probe_bands():
    cfg = quick_cfg(order=4, bc=NEUMANN, n=41)
    probe = truncation_probe(cfg)
    assert probe["interior_max"] < probe["closure_max"]
    slopes = probe_slopes(cfg, (41, 81))
    assert abs(slopes["interior_slope"] - 4.0) <= 0.7
    assert abs(slopes["closure_slope"] - 2.0) <= 0.5


def test_truncation_probe_corner_band():
    cfg = quick_cfg(order=4, bc=DIRICHLET, corner={})
    slopes = probe_slopes(cfg, (41, 81))
    assert abs(slopes["corner_slope"] - 0.0) <= 0.5  # p - 2 = 0 for order 4
    assert abs(slopes["interior_slope"] - 4.0) <= 0.7


def test_report_csv_roundtrip_and_determinism():
    rep1 = run_refinement_study(quick_cfg(t_f=0.2), [17, 25])
    rep2 = run_refinement_study(quick_cfg(t_f=0.2), [17, 25])
    assert rep1.to_csv() == rep2.to_csv()
    lines = rep1.to_csv().strip().splitlines()
    assert lines[0] == "N,h,l2_error,rate"
    for row, line in zip(rep1.rows, lines[1:]):
        n, h, e, q = line.split(",")
        assert int(n) == row[0]
        assert float(h) == row[1]
        assert float(e) == row[2]
        assert float(q) == row[3] or (math.isnan(float(q)) and math.isnan(row[3]))


def test_report_json_fields():
    import json

    rep = run_refinement_study(quick_cfg(t_f=0.2), [17, 25])
    payload = json.loads(rep.to_json())
    assert payload["headline_rate"] == rep.headline_rate
    assert payload["rows"][0]["N"] == 17
    assert "predicted_rate" in payload
