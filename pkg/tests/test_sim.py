import json
from pathlib import Path

import numpy as np
import pytest

from vralign.errors import EmptyInput, NoViews, SchemaError
from vralign.manifold import RigidTransform, geodesic_distance, so3_exp, transform_mean
from vralign.sim import (
    ExperimentConfig,
    ExperimentReport,
    NoiseModel,
    bootstrap_difference_quantile,
    emit_report,
    format_table_csv,
    load_experiment,
    run_alignment_experiment,
    sample_user_alignment,
)

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "vralign" / "fixtures"
DATA = Path(__file__).resolve().parent / "data"


def fixture_setup():
    base, conditions, noise = load_experiment(FIXTURES / "experiment_default.json")
    return base, conditions, noise


def make_config(views=1, averaging=1, trials=50, seed=7, label="test"):
    base, _, _ = fixture_setup()
    return ExperimentConfig(trials=trials, seed=seed, views=views, averaging=averaging,
                            truth=base["truth"], observer_poses=base["observer_poses"],
                            label=label)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(sigma_lateral_mm=-1.0)
    with pytest.raises(ValueError):
        NoiseModel(depth_multiplier=0.5)


def test_config_validation():
    base, _, _ = fixture_setup()
    with pytest.raises(ValueError):
        ExperimentConfig(trials=0, seed=1, views=1, averaging=1,
                         truth=base["truth"], observer_poses=base["observer_poses"])
    with pytest.raises(ValueError):
        ExperimentConfig(trials=1, seed=1, views=9, averaging=1,
                         truth=base["truth"], observer_poses=base["observer_poses"])


def test_sample_zero_noise_returns_truth_exactly():
    base, _, _ = fixture_setup()
    noise = NoiseModel(sigma_lateral_mm=0.0, depth_multiplier=1.0, sigma_rotation_deg=0.0)
    rng = np.random.default_rng(0)
    sample = sample_user_alignment(base["truth"], base["observer_poses"][:1], noise, rng)
    assert np.array_equal(sample.translation, base["truth"].translation)
    assert np.array_equal(sample.rotation.matrix, base["truth"].rotation.matrix)


def test_sample_requires_views():
    base, _, noise = fixture_setup()
    with pytest.raises(NoViews):
        sample_user_alignment(base["truth"], [], noise, np.random.default_rng(0))


def test_sampler_depth_anisotropy():
    # single view along world +y (the front pose): depth errors ~ k times lateral
    base, _, _ = fixture_setup()
    noise = NoiseModel(sigma_lateral_mm=5.0, depth_multiplier=3.0, sigma_rotation_deg=0.0)
    rng = np.random.default_rng(123)
    errs = np.array([
        sample_user_alignment(base["truth"], base["observer_poses"][:1], noise, rng).translation
        - base["truth"].translation
        for _ in range(10000)
    ])
    std_lateral = errs[:, 0].std()   # world x is lateral for the front view
    std_depth = errs[:, 1].std()     # world y is along the viewing ray
    assert abs(std_depth / std_lateral - 3.0) < 0.3  # within 10%
    assert abs(std_lateral / 5.0 - 1.0) < 0.1


def test_two_views_shrink_depth_uncertainty():
    base, _, _ = fixture_setup()
    noise = NoiseModel(sigma_lateral_mm=5.0, depth_multiplier=3.0, sigma_rotation_deg=0.0)
    rng = np.random.default_rng(5)
    errs = np.array([
        sample_user_alignment(base["truth"], base["observer_poses"][:2], noise, rng).translation
        - base["truth"].translation
        for _ in range(5000)
    ])
    # fused stds approach the lateral level on every axis
    assert np.all(errs.std(axis=0) < 5.0)


def test_experiment_zero_noise_zero_errors():
    cfg = make_config(trials=5)
    report = run_alignment_experiment(cfg, NoiseModel(0.0, 1.0, 0.0))
    assert np.array_equal(report.rows, np.zeros((5, 5)))
    assert report.translation_table.l2_mean_mm == 0.0


def test_experiment_seed_determinism():
    cfg = make_config(trials=20)
    noise = NoiseModel()
    a = run_alignment_experiment(cfg, noise)
    b = run_alignment_experiment(cfg, noise)
    assert np.array_equal(a.rows, b.rows)
    assert json.dumps(a.to_doc(), sort_keys=True) == json.dumps(b.to_doc(), sort_keys=True)


def test_parallel_rows_match_serial():
    cfg = make_config(trials=30)
    noise = NoiseModel()
    serial = run_alignment_experiment(cfg, noise, workers=1)
    parallel = run_alignment_experiment(cfg, noise, workers=4)
    assert np.array_equal(serial.rows, parallel.rows)


def test_report_statistics_recompute_from_rows():
    cfg = make_config(trials=40)
    report = run_alignment_experiment(cfg, NoiseModel())
    doc = report.to_doc()
    rebuilt = ExperimentReport(label=report.label, trials=report.trials,
                               seed=report.seed, views=report.views,
                               averaging=report.averaging, noise=report.noise,
                               rows=np.array(doc["rows"]))
    assert json.dumps(rebuilt.to_doc(), sort_keys=True) == json.dumps(doc, sort_keys=True)
    l2 = np.linalg.norm(report.rows[:, :3], axis=1)
    assert np.max(np.abs(l2 - report.translation_l2)) < 1e-9


def test_multi_view_reduces_error_and_averaging_tightens():
    noise = NoiseModel()
    one = run_alignment_experiment(make_config(views=1, trials=300, seed=42), noise)
    two = run_alignment_experiment(make_config(views=2, trials=300, seed=42), noise)
    assert two.translation_l2.mean() < one.translation_l2.mean()
    median_reduction = 1.0 - np.median(two.translation_l2) / np.median(one.translation_l2)
    assert median_reduction > 0.30
    unavg = run_alignment_experiment(make_config(views=2, trials=300, seed=42), noise)
    avg = run_alignment_experiment(make_config(views=2, averaging=3, trials=300, seed=42), noise)
    assert avg.translation_l2.mean() < unavg.translation_l2.mean()
    assert avg.translation_l2.std() < unavg.translation_l2.std()


def test_view_monotonicity_with_bootstrap():
    noise = NoiseModel()
    reports = [run_alignment_experiment(make_config(views=m, trials=1000, seed=42), noise)
               for m in (1, 2, 3)]
    for lo, hi in zip(reports[1:], reports[:-1]):
        q95 = bootstrap_difference_quantile(lo.translation_l2, hi.translation_l2,
                                            np.mean, 0.95, seed=1)
        assert q95 < 0.0  # more views never hurt, at 95% bootstrap confidence


def test_averaging_monotonicity_in_n():
    noise = NoiseModel()
    means = []
    for n in (1, 2, 3, 5):
        report = run_alignment_experiment(
            make_config(views=2, averaging=n, trials=400, seed=42), noise)
        means.append(report.translation_l2.mean())
    assert all(b <= a for a, b in zip(means, means[1:]))


def test_averaging_beats_naive_single_picks():
    # three samples around the truth under the two-view condition: averaging
    # beats the expected error of naively keeping one sample in >=95% of
    # seeded trials, and beats even the best single pick in aggregate over
    # the ensemble (per-trial the best pick wins too often for that to hold
    # pointwise; see the decisions ledger)
    base, _, _ = fixture_setup()
    noise = NoiseModel()
    rng = np.random.default_rng(42)
    views = base["observer_poses"][:2]
    truth = base["truth"]

    def combined_error(t: RigidTransform) -> float:
        return geodesic_distance(truth.rotation, t.rotation) + float(
            np.linalg.norm(t.translation - truth.translation))

    wins = 0
    mean_errs = []
    best_errs = []
    for _ in range(1000):
        samples = [sample_user_alignment(truth, views, noise, rng) for _ in range(3)]
        errs = [combined_error(s) for s in samples]
        mean_err = combined_error(transform_mean(samples))
        mean_errs.append(mean_err)
        best_errs.append(min(errs))
        wins += mean_err <= np.mean(errs)
    assert wins >= 950
    assert np.mean(mean_errs) < np.mean(best_errs)


def test_emit_report_files(tmp_path):
    cfg = make_config(trials=10)
    report = run_alignment_experiment(cfg, NoiseModel())
    paths = emit_report(report, tmp_path)
    assert sorted(p.name for p in paths) == ["report.csv", "report.json"]
    text = (tmp_path / "report.csv").read_text()
    assert text.splitlines()[0].startswith("alignment_method")
    assert "[simulated]" in text
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["simulated"] is True
    # L2 column equals the norm of the per-axis mean columns
    per_axis = doc["reports"][0]["per_axis_mm"]
    assert abs(per_axis["l2_mean_mm"] - np.linalg.norm(per_axis["mean_mm"])) < 1e-9


def test_emit_report_rejects_empty():
    with pytest.raises(EmptyInput):
        emit_report([], "/tmp/nowhere")
    with pytest.raises(EmptyInput):
        format_table_csv([])


def test_report_golden_snapshot(tmp_path):
    base, _, noise = fixture_setup()
    cfg = ExperimentConfig(trials=5, seed=11, views=2, averaging=2,
                           truth=base["truth"], observer_poses=base["observer_poses"],
                           label="golden-fixture")
    report = run_alignment_experiment(cfg, noise)
    emit_report(report, tmp_path)
    for name in ("report.csv", "report.json"):
        got = (tmp_path / name).read_bytes()
        want = (DATA / f"golden_{name}").read_bytes()
        assert got == want, f"{name} drifted from its golden snapshot"


def test_experiment_doc_errors():
    with pytest.raises(SchemaError):
        load_experiment(FIXTURES / "two_link_planar.json")  # wrong schema tag
