"""Scenario validation, reference waveforms, metrics, and CSV export."""

import io

import numpy as np
import pytest

from derarm.errors import ScenarioError
from derarm.scenario import (
    MetricsReport,
    PlantPerturbation,
    Scenario,
    build_reference,
    export_trajectory,
    load_scenario,
    metrics_text,
    run_comparison,
    scenario_from_dict,
    schema_text,
    straight_state,
)

SHORT_CUSTOM = {
    "name": "short",
    "case": "custom",
    "custom_schedule": [[0.0, 0.0], [0.02, -0.01], [0.06, -0.03],
                        [0.08, -0.04], [0.08, -0.04]],
}


def test_defaults():
    s = Scenario()
    assert s.case == "asynchronous"
    assert s.control_dt == pytest.approx(0.05)
    assert s.sim_config().dt == 0.005


def test_unknown_keys_rejected():
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict({"amplitud": 0.5})
    assert exc.value.key == "amplitud"
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict({"plant": {"bogus": 1.0}})
    assert exc.value.key == "plant.bogus"
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict({"controller": {"kp": 1.0}})
    assert exc.value.key == "controller.kp"


def test_type_and_value_validation():
    with pytest.raises(ScenarioError):
        scenario_from_dict({"amplitude": "large"})
    with pytest.raises(ScenarioError):
        scenario_from_dict({"seed": 1.5})
    with pytest.raises(ScenarioError):
        scenario_from_dict({"seed": True})
    with pytest.raises(ScenarioError):
        scenario_from_dict({"case": "wiggle"})
    with pytest.raises(ScenarioError):
        scenario_from_dict({"period": -1.0})
    with pytest.raises(ScenarioError):
        scenario_from_dict({"plant": 3})
    with pytest.raises(ScenarioError):
        scenario_from_dict({"controller": {"natural_frequency": -5.0}})
    with pytest.raises(ScenarioError):
        scenario_from_dict([1, 2])


def test_custom_schedule_rules():
    with pytest.raises(ScenarioError):
        scenario_from_dict({"case": "custom"})
    with pytest.raises(ScenarioError):
        scenario_from_dict({"case": "custom",
                            "custom_schedule": [[0.0, 0.0]]})
    with pytest.raises(ScenarioError):
        scenario_from_dict({"custom_schedule": [[0.0, 0.0]] * 3})
    s = scenario_from_dict(SHORT_CUSTOM)
    assert s.case == "custom"
    _, sched = build_reference(s)
    assert sched.shape == (5, 2)


def test_load_scenario(tmp_path):
    path = tmp_path / "s.yaml"
    path.write_text("case: synchronous_same\namplitude: 0.4\n"
                    "plant:\n  bend_factor: 1.1\n")
    s = load_scenario(path)
    assert s.case == "synchronous_same"
    assert s.amplitude == 0.4
    assert s.plant.bend_factor == 1.1
    bad = tmp_path / "bad.yaml"
    bad.write_text("case: [unclosed\n")
    with pytest.raises(ScenarioError):
        load_scenario(bad)


def test_schema_text_lists_all_keys():
    text = schema_text()
    for key in ("amplitude", "period", "control_rate", "bend_factor",
                "natural_frequency", "custom_schedule"):
        assert key in text


@pytest.mark.parametrize("amplitude", [0.2, 0.6, 1.0])
def test_case_waveform_invariants(amplitude):
    period = 10.0
    quarter_samples = int(round(period / 4 * 20.0))
    for case in ("asynchronous", "synchronous_same", "synchronous_opposite"):
        s = Scenario(case=case, amplitude=amplitude, period=period)
        times, sched = build_reference(s)
        assert sched.shape == (201, 2)
        # Starts and ends at rest, at zero bend, with zero slope.
        np.testing.assert_allclose(sched[0], 0.0, atol=1e-15)
        np.testing.assert_allclose(sched[-1], 0.0, atol=1e-15)
        assert np.abs(sched[1] - sched[0]).max() < 1e-3 * amplitude
        assert np.abs(sched[-1] - sched[-2]).max() < 1e-3 * amplitude
        # Peak plateau reaches exactly the amplitude.
        assert np.abs(sched).max() == pytest.approx(amplitude)
        if case == "synchronous_same":
            np.testing.assert_array_equal(sched[:, 0], sched[:, 1])
        elif case == "synchronous_opposite":
            np.testing.assert_array_equal(sched[:, 0], -sched[:, 1])
        else:
            # Second segment lags the first by a quarter period, same sign.
            np.testing.assert_allclose(
                sched[quarter_samples:, 1],
                sched[:-quarter_samples, 0], atol=1e-12)
            assert sched[:, 1].max() == pytest.approx(amplitude)


def test_plant_perturbation_applies_factors(params):
    plant = PlantPerturbation(stretch_factor=0.9, bend_factor=1.1,
                              twist_factor=1.2, damping_factor=0.8)
    p = plant.apply(params)
    assert p.EA == pytest.approx(0.9 * params.EA)
    assert p.EI == pytest.approx(1.1 * params.EI)
    assert p.GJ == pytest.approx(1.2 * params.GJ)
    np.testing.assert_allclose(p.damping, 0.8 * params.damping)


def test_metrics_report_rows():
    times = np.array([0.0, 1.0, 2.0])
    tips = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    refs = np.zeros((3, 3))
    report = MetricsReport.from_tips(times, tips, refs, 0.25)
    np.testing.assert_allclose(report.errors, [0.0, 1.0, 2.0])
    assert report.integrated_error == pytest.approx(2.0)
    assert report.mean_error == pytest.approx(1.0)
    assert report.max_error == 2.0
    labels = [label for label, _ in report.summary_rows()]
    assert labels[:3] == ["mean_error_total", "mean_error_x", "mean_error_y"]
    text = metrics_text("elastic", report)
    assert text.startswith("[elastic]")
    assert "saturation_fraction" in text


@pytest.fixture(scope="module")
def short_comparison():
    return run_comparison(scenario_from_dict(SHORT_CUSTOM))


def test_run_comparison_deterministic(short_comparison):
    again = run_comparison(scenario_from_dict(SHORT_CUSTOM))
    assert short_comparison.elastic.mean_error == again.elastic.mean_error
    assert short_comparison.pcc.mean_error == again.pcc.mean_error
    np.testing.assert_array_equal(short_comparison.elastic_trajectory.tips,
                                  again.elastic_trajectory.tips)
    np.testing.assert_array_equal(
        short_comparison.elastic_trajectory.inputs,
        again.elastic_trajectory.inputs)


def test_csv_export_roundtrips_error_metric(short_comparison, tmp_path):
    result = short_comparison
    path = tmp_path / "traj.csv"
    text = export_trajectory(result.elastic_trajectory,
                             result.reference_tips, path=path)
    assert path.read_text() == text
    rows = np.genfromtxt(io.StringIO(text), delimiter=",", names=True)
    t = np.atleast_1d(rows["t"])
    err = np.atleast_1d(rows["tip_error"])
    recomputed = float(np.trapezoid(err, t)) / (t[-1] - t[0])
    assert abs(recomputed - result.elastic.mean_error) <= (
        1e-12 * max(result.elastic.mean_error, 1e-30))
    # Header covers every state DOF, input, and the tip columns.
    header = text.splitlines()[0].split(",")
    n = result.elastic_trajectory.states[0].n_nodes
    assert len(header) == 1 + 3 * n + (n - 1) + 2 + 4


def test_straight_state_matches_rest(params):
    s = straight_state(params)
    assert s.nodes[-1, 0] == pytest.approx(0.25)
    assert np.all(s.velocity == 0.0)
