import json

import numpy as np
import pytest

from hysterid.bifidelity import (
    FULL_SCALE_MEAN_ERRORS,
    FULL_SCALE_NOISE_MEANS,
    BiFidelityDeepOnet,
    StandardDeepOnet,
    UndefinedMetricError,
    _point_index_rows,
    _sample_rows,
    _time_omegas,
    _trunk_rows,
    estimator_from_model,
    histogram_overlap,
    passthrough_errors,
    predict_bifidelity,
    rel_rmse,
    run_experiment,
    sweep_noise,
    sweep_pinching,
    sweep_training_size,
    write_report,
)
from hysterid.neuralop import (OperatorArch, init_model, load_checkpoint,
                               save_checkpoint)
from hysterid.simulate import generate_dataset, get_example


@pytest.fixture(scope="module")
def tiny_dataset():
    ex = get_example("4dof_caseI")
    return generate_dataset(ex, n_train=3, n_val=2, seed=99, n_d=30)


def test_rel_rmse_known_values():
    assert rel_rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    # pred=(1,0) vs val=(0,1): ||(1,-1)|| / ||(0,1)|| = sqrt(2)
    assert rel_rmse([1.0, 0.0], [0.0, 1.0]) == pytest.approx(np.sqrt(2.0))
    val = np.array([3.0, -1.0, 2.0])
    assert rel_rmse(2.0 * val, val) == pytest.approx(1.0)


def test_rel_rmse_scale_invariance():
    rng = np.random.default_rng(4)
    pred = rng.standard_normal(50)
    val = rng.standard_normal(50)
    base = rel_rmse(pred, val)
    for c in (0.01, 3.0, 1e6):
        assert rel_rmse(c * pred, c * val) == pytest.approx(base, rel=1e-12)


def test_rel_rmse_rejects_zero_norm_and_mismatch():
    with pytest.raises(UndefinedMetricError):
        rel_rmse([1.0, 2.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        rel_rmse([1.0, 2.0], [1.0, 2.0, 3.0])


def test_point_index_rows_subsample():
    full = _point_index_rows(10, None, 3, seed=0)
    assert np.array_equal(full, np.tile(np.arange(10), (3, 1)))
    assert np.array_equal(_point_index_rows(10, 50, 2, seed=0), full[:2])
    rows = _point_index_rows(200, 20, 40, seed=5)
    assert rows.shape == (40, 20)
    assert np.all(np.diff(rows, axis=1) > 0)
    # per-trajectory draws differ and jointly the grid is covered densely
    assert not np.array_equal(rows[0], rows[1])
    assert np.unique(rows).size > 150
    assert np.array_equal(rows, _point_index_rows(200, 20, 40, seed=5))
    with pytest.raises(ValueError):
        _point_index_rows(10, 1, 3, seed=0)


def test_sample_rows_exact_on_linear():
    t = np.linspace(0.0, 2.0, 21)
    rows = np.stack([3.0 * t + 1.0, -t])
    times = np.array([0.05, 0.5, 1.95])
    out = _sample_rows(t, rows, times)
    assert np.allclose(out[0], 3.0 * times + 1.0, atol=1e-14)
    assert np.allclose(out[1], -times, atol=1e-14)


def test_trunk_rows_layout():
    rows = _trunk_rows(np.array([0.0, 1.0]), np.array([[5.0], [6.0]]))
    expected = np.array([[0.0, 5.0], [1.0, 5.0], [0.0, 6.0], [1.0, 6.0]])
    assert np.array_equal(rows, expected)


def test_time_feature_columns():
    t = np.linspace(0.0, 20.0, 101)
    assert _time_omegas(t, 0).size == 0
    omegas = _time_omegas(t, 4)
    # evenly spaced harmonics ending at the storage grid's Nyquist rate
    nyq = 100 / (2.0 * 20.0)
    assert np.allclose(omegas / (2.0 * np.pi), nyq * np.array(
        [0.25, 0.5, 0.75, 1.0]))

    times = np.array([0.0, 0.3, 1.7])
    xi = np.array([[2.0, -1.0]])
    plain = _trunk_rows(times, xi)
    rows = _trunk_rows(times, xi, omegas)
    assert rows.shape == (3, 3 + 8)
    assert np.array_equal(rows[:, :3], plain)
    assert np.allclose(rows[:, 3:7], np.sin(times[:, None] * omegas))
    assert np.allclose(rows[:, 7:], np.cos(times[:, None] * omegas))
    assert np.array_equal(_trunk_rows(times, xi, np.zeros(0)), plain)


def test_time_features_checkpoint_roundtrip(tiny_dataset, tmp_path):
    ds = tiny_dataset
    est = BiFidelityDeepOnet(epochs=40, train_points=None, m=15, seed=5,
                             branch_hidden=(12,), trunk_hidden=(12,), p=3,
                             time_features=4)
    est.fit(ds)
    assert est.model_.arch.trunk_input == 1 + ds.xi.shape[1] + 8
    preds = est.predict(ds, ds.val_indices)

    path = tmp_path / "model.ckpt"
    save_checkpoint(est.model_, path)
    loaded = estimator_from_model(load_checkpoint(path), ds)
    assert loaded.time_features == 4
    assert np.allclose(loaded.predict(ds, ds.val_indices), preds, atol=1e-12)
    direct = predict_bifidelity(load_checkpoint(path), ds.y_lf[ds.val_indices],
                                ds.t, ds.xi[ds.val_indices])
    assert np.allclose(direct, preds, atol=1e-12)


def test_estimator_params_roundtrip():
    est = BiFidelityDeepOnet(p=4, epochs=123, seed=9)
    params = est.get_params()
    assert params["p"] == 4 and params["epochs"] == 123
    est2 = StandardDeepOnet().set_params(**params)
    assert est2.get_params() == params
    assert est2.set_params(seed=1) is est2
    with pytest.raises(ValueError):
        est.set_params(bogus=1)


def test_zero_model_predicts_passthrough(tiny_dataset):
    ds = tiny_dataset
    arch = OperatorArch(branch_input=12, trunk_input=1 + ds.xi.shape[1], p=3,
                        branch_hidden=(8,), trunk_hidden=(8,))
    model = init_model(arch, seed=0)
    model.set_flat(np.zeros(model.n_params))
    pred = predict_bifidelity(model, ds.y_lf[:2], ds.t, ds.xi[:2])
    assert np.array_equal(pred, ds.y_lf[:2])


def test_zero_net_with_target_shift(tiny_dataset):
    ds = tiny_dataset
    arch = OperatorArch(branch_input=12, trunk_input=1 + ds.xi.shape[1], p=3,
                        branch_hidden=(8,), trunk_hidden=(8,))
    model = init_model(arch, seed=0)
    model.set_flat(np.zeros(model.n_params))
    targets = np.full(7, 0.25)
    model.set_normalization(np.zeros((7, 12)), np.zeros((7, 5)), targets)
    pred = predict_bifidelity(model, ds.y_lf[0], ds.t, ds.xi[0])
    assert pred.shape == (1, ds.t.size)
    assert np.allclose(pred, ds.y_lf[0] + 0.25, atol=1e-14)


def test_passthrough_errors_match_direct(tiny_dataset):
    ds = tiny_dataset
    eps = passthrough_errors(ds)
    assert len(eps) == 2
    for e, k in zip(eps, ds.val_indices):
        assert e == pytest.approx(rel_rmse(ds.y_lf[k], ds.y_hf[k]))


def test_fit_predict_smoke(tiny_dataset):
    ds = tiny_dataset
    for cls, branch_width in ((BiFidelityDeepOnet, 20),
                              (StandardDeepOnet, 20)):
        est = cls(epochs=60, train_points=10, m=20, seed=3,
                  branch_hidden=(16, 16), trunk_hidden=(16,), p=4)
        est.fit(ds)
        assert est.model_.arch.branch_input == branch_width
        assert np.array_equal(est.train_indices_, [0, 1, 2])
        assert est.history_[0][0] == 0 and est.history_[-1][0] == 60
        assert est.history_[-1][1] < est.history_[0][1]
        preds = est.predict(ds, ds.val_indices)
        assert preds.shape == (2, ds.t.size)
        eps = est.errors(ds)
        assert len(eps) == 2 and all(e >= 0.0 for e in eps)


def test_fit_is_deterministic(tiny_dataset):
    ds = tiny_dataset
    runs = []
    for _ in range(2):
        est = BiFidelityDeepOnet(epochs=40, train_points=8, m=15, seed=5,
                                 branch_hidden=(10,), trunk_hidden=(10,), p=3)
        est.fit(ds)
        runs.append(est.errors(ds))
    assert runs[0] == runs[1]


def test_standard_protocol_uses_equalized_budget():
    ex = get_example("car", duration=2.0)
    ds = generate_dataset(ex, n_train=4, n_val=2, seed=17, n_d=25)
    assert ds.manifest["sizes"]["n_train_standard"] == 6
    bf = BiFidelityDeepOnet(epochs=5, train_points=6, m=10,
                            branch_hidden=(8,), trunk_hidden=(8,), p=2)
    std = StandardDeepOnet(**bf.get_params())
    bf.fit(ds)
    std.fit(ds)
    assert bf.train_indices_.size == 4
    assert std.train_indices_.size == 6
    # half-car excitation has front and rear channels
    assert std.model_.arch.branch_input == 20


def test_histogram_overlap_frozen_cases():
    a = [0.5, 0.5, 0.5, 0.5]
    b = [0.5, 0.5, 10.0, 10.0]
    assert histogram_overlap(a, b) == pytest.approx(0.5)
    assert histogram_overlap(a, a) == pytest.approx(1.0)
    assert histogram_overlap([0.0] * 4, [1.0] * 4) == 0.0


def test_full_scale_reference_tables():
    for key, block in FULL_SCALE_MEAN_ERRORS.items():
        assert block["bifidelity"] < block["standard"], key
    noise_levels = sorted(FULL_SCALE_NOISE_MEANS)
    assert noise_levels == [0.0, 0.05, 0.10]
    for proto in ("standard", "bifidelity"):
        vals = [FULL_SCALE_NOISE_MEANS[n][proto] for n in noise_levels]
        assert vals == sorted(vals)


@pytest.fixture(scope="module")
def tiny_report():
    ex = get_example("4dof_caseI")
    params = {"epochs": 30, "train_points": 8, "m": 12,
              "branch_hidden": (10,), "trunk_hidden": (10,), "p": 3}
    return run_experiment(ex, n_train=3, n_val=2, seeds=[5],
                          estimator_params=params, n_d=30)


def test_run_experiment_report_contents(tiny_report):
    rep = tiny_report
    assert rep["example"] == "4dof_caseI"
    assert rep["qoi"] == "z"
    assert rep["seeds"] == [5]
    assert rep["noisy_single_seed"] is True
    assert rep["sizes"]["n_total"] == 5
    assert rep["val_trajectories"] == [3, 4]
    for name in ("bifidelity", "standard", "passthrough"):
        block = rep["protocols"][name]
        assert len(rep["errors"][name]) == 2
        assert block["mean"] == pytest.approx(np.mean(rep["errors"][name]))
        assert block["per_seed_means"] == [pytest.approx(block["mean"])]
    counts = rep["histogram"]["counts"]
    assert len(rep["histogram"]["edges"]) == 31
    assert sum(counts["bifidelity"]) == 2
    assert sum(counts["standard"]) == 2
    assert 0.0 <= rep["overlap"] <= 1.0
    assert rep["reference"] == FULL_SCALE_MEAN_ERRORS[("4dof_caseI", "z")]


def test_run_experiment_is_deterministic(tiny_report):
    ex = get_example("4dof_caseI")
    params = {"epochs": 30, "train_points": 8, "m": 12,
              "branch_hidden": (10,), "trunk_hidden": (10,), "p": 3}
    rep2 = run_experiment(ex, n_train=3, n_val=2, seeds=[5],
                          estimator_params=params, n_d=30)
    assert json.dumps(tiny_report, sort_keys=True) == json.dumps(
        rep2, sort_keys=True)


def test_write_report_files(tiny_report, tmp_path):
    out = write_report(tiny_report, tmp_path / "run")
    report_path = out / "report.json"
    first = report_path.read_bytes()
    slim = json.loads(first)
    assert "errors" not in slim and "val_trajectories" not in slim
    assert slim["protocols"]["bifidelity"]["mean"] == pytest.approx(
        tiny_report["protocols"]["bifidelity"]["mean"])
    for name in ("bifidelity", "standard"):
        hist_lines = (out / f"hist_{name}.csv").read_text().splitlines()
        assert hist_lines[0] == "bin_left,bin_right,count"
        assert len(hist_lines) == 31
        assert sum(int(row.split(",")[2]) for row in hist_lines[1:]) == 2
        err_lines = (out / f"errors_{name}.csv").read_text().splitlines()
        assert err_lines[0] == "trajectory,eps_val"
        assert [int(r.split(",")[0]) for r in err_lines[1:]] == [3, 4]
    write_report(tiny_report, tmp_path / "run")
    assert report_path.read_bytes() == first


def _canned_report(mean_std, mean_bf, overlap=0.3):
    return {"protocols": {"standard": {"mean": mean_std},
                          "bifidelity": {"mean": mean_bf}},
            "overlap": overlap, "overlap_seed_mean": overlap}


def test_sweep_training_size_rows(monkeypatch):
    calls = []

    def fake_run(example, n_train, n_val, seeds, **kwargs):
        calls.append(n_train)
        return _canned_report(0.4 / n_train, 0.1 / n_train)

    monkeypatch.setattr("hysterid.bifidelity.run_experiment", fake_run)
    rows = sweep_training_size("ex", [10, 40], 5, [0])
    assert calls == [10, 40]
    assert rows[0]["n_train"] == 10
    assert rows[1]["ratio"] == pytest.approx(4.0)


def test_sweep_pinching_rows(monkeypatch):
    seen = []

    def fake_run(example, n_train, n_val, seeds, **kwargs):
        return _canned_report(0.2, 0.1, overlap=example)

    monkeypatch.setattr("hysterid.bifidelity.run_experiment", fake_run)
    rows = sweep_pinching([0.25, 0.5], 4, 2, [0],
                          make_example=lambda z: z)
    assert [r["zeta_s"] for r in rows] == [0.25, 0.5]
    assert rows[0]["overlap"] == 0.25 and rows[1]["overlap"] == 0.5


def test_sweep_noise_rows(monkeypatch):
    levels = []

    def fake_run(example, n_train, n_val, seeds, noise_pct=0.0, **kwargs):
        levels.append(noise_pct)
        return _canned_report(0.2 + noise_pct, 0.05 + noise_pct)

    monkeypatch.setattr("hysterid.bifidelity.run_experiment", fake_run)
    rows = sweep_noise("ex", [0.0, 0.1], 4, 2, [0])
    assert levels == [0.0, 0.1]
    assert rows[1]["standard"] == pytest.approx(0.3)
