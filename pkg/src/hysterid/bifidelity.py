"""Comparison of two operator-training protocols on paired datasets.

The single-fidelity ("standard") protocol trains on high-fidelity responses
with the excitation as the branch input.  The paired ("bifidelity") protocol
trains on the discrepancy y_hf - y_lf with the low-fidelity response as the
branch input, and adds y_lf back at prediction time.  Both are exposed as
estimators with fit/predict/get_params so sweeps can clone and reconfigure
them uniformly.
"""

import json
from pathlib import Path

import numpy as np

from .neuralop import AdamConfig, OperatorArch, init_model, train
from .simulate import generate_dataset

# Seed-averaged mean validation errors observed for each example at its
# full-scale default configuration (10k+ epochs, default sizes).  Desk-scale
# runs reproduce the ordering, not these exact values.
FULL_SCALE_MEAN_ERRORS = {
    ("4dof_caseI", "z"): {"standard": 6.6642e-2, "bifidelity": 2.2397e-2},
    ("4dof_caseI", "u_b"): {"standard": 4.7907e-3, "bifidelity": 2.0235e-3},
    ("4dof_caseI", "u_3"): {"standard": 4.0933e-3, "bifidelity": 2.2730e-3},
    ("car", "acc_body"): {"standard": 1.4191e-1, "bifidelity": 1.8737e-2},
    ("building", "u_roof"): {"standard": 2.1717e-2, "bifidelity": 4.6541e-3},
}

# the building example with noisy training targets, keyed by noise fraction
FULL_SCALE_NOISE_MEANS = {
    0.0: {"standard": 2.1717e-2, "bifidelity": 4.6541e-3},
    0.05: {"standard": 2.4413e-2, "bifidelity": 6.4530e-3},
    0.10: {"standard": 2.5730e-2, "bifidelity": 8.8876e-3},
}

HISTOGRAM_BINS = 30


class UndefinedMetricError(ValueError):
    """The relative error is undefined for a zero-norm reference."""


def rel_rmse(pred, val):
    """Relative L2 error ||pred - val|| / ||val|| over one trajectory."""
    pred = np.asarray(pred, dtype=float)
    val = np.asarray(val, dtype=float)
    if pred.shape != val.shape:
        raise ValueError("prediction and validation series must have the "
                         "same shape")
    denom = np.linalg.norm(val)
    if denom == 0.0:
        raise UndefinedMetricError("validation series has zero norm")
    return float(np.linalg.norm(pred - val) / denom)


# ---------------------------------------------------------------------------
# batch construction
# ---------------------------------------------------------------------------

def _sample_rows(t_grid, rows, times):
    return np.stack([np.interp(times, t_grid, row) for row in rows])


def _excitation_rows(dataset, indices, times):
    """Excitation channels at the sensor times, concatenated per channel."""
    out = []
    for k in indices:
        sig = dataset.excitation_for(k)
        out.append(np.concatenate(
            [np.interp(times, sig.t, sig.channels[:, c])
             for c in range(sig.n_channels)]))
    return np.stack(out)


def _point_index_rows(n_d, train_points, n_rows, seed):
    """Grid indices supervising each trajectory, one row per trajectory.

    With train_points below the grid size each trajectory gets its own
    random draw so the supervised times cover the grid densely overall;
    a shared uniform subsample would alias any response oscillating faster
    than the subsample rate.
    """
    if train_points is None or train_points >= n_d:
        return np.tile(np.arange(n_d), (n_rows, 1))
    if train_points < 2:
        raise ValueError("train_points must be >= 2")
    rng = np.random.default_rng([int(seed), 0x7074])
    return np.sort(np.stack([rng.choice(n_d, train_points, replace=False)
                             for _ in range(n_rows)]), axis=1)


def _time_omegas(t_grid, count):
    """Angular frequencies of the trunk's fixed sinusoidal time features.

    `count` harmonics evenly spaced up to the storage grid's Nyquist rate.
    The raw t column always stays, so count = 0 recovers the plain (t, xi)
    trunk.  A narrow MLP fed scalar t struggles to synthesize the dozens of
    oscillation half-waves a structural response packs into a record; with
    sin/cos columns the oscillatory content becomes a near-linear read-out.
    """
    count = int(count or 0)
    if count <= 0:
        return np.zeros(0)
    span = float(t_grid[-1] - t_grid[0])
    nyquist = (t_grid.size - 1) / (2.0 * span)
    return 2.0 * np.pi * nyquist * np.arange(1, count + 1) / count


def _with_time_features(trunk, omegas):
    if omegas is None or omegas.size == 0:
        return trunk
    phases = trunk[:, :1] * omegas[None, :]
    return np.column_stack([trunk, np.sin(phases), np.cos(phases)])


def _trunk_rows(times, xi_rows, omegas=None):
    n_pts = times.size
    t_col = np.tile(times, xi_rows.shape[0])
    xi_rep = np.repeat(xi_rows, n_pts, axis=0)
    return _with_time_features(np.column_stack([t_col, xi_rep]), omegas)


def _flatten_batch(branch_rows, t_grid, idx_rows, xi_rows, series_rows,
                   omegas=None):
    """Indexed training batch: unique branch rows plus a row->function map."""
    n_pts = idx_rows.shape[1]
    t_col = t_grid[idx_rows].reshape(-1)
    xi_rep = np.repeat(xi_rows, n_pts, axis=0)
    trunk = _with_time_features(np.column_stack([t_col, xi_rep]), omegas)
    target = np.take_along_axis(series_rows, idx_rows, axis=1).reshape(-1)
    row_map = np.repeat(np.arange(branch_rows.shape[0]), n_pts)
    return branch_rows, trunk, target, row_map


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

class _OperatorEstimator:
    """Shared fit/predict machinery; subclasses fix the protocol."""

    _protocol = None
    _param_names = ("p", "branch_hidden", "trunk_hidden", "lr0", "epochs",
                    "halve_every", "m", "train_points", "time_features",
                    "seed", "log_every")

    def __init__(self, p=8, branch_hidden=(50, 50, 50), trunk_hidden=(50, 50),
                 lr0=1e-3, epochs=10000, halve_every=2500, m=100,
                 train_points=None, time_features=0, seed=0, log_every=100):
        self.p = p
        self.branch_hidden = branch_hidden
        self.trunk_hidden = trunk_hidden
        self.lr0 = lr0
        self.epochs = epochs
        self.halve_every = halve_every
        self.m = m
        self.train_points = train_points
        self.time_features = time_features
        self.seed = seed
        self.log_every = log_every

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names}

    def set_params(self, **params):
        for name, value in params.items():
            if name not in self._param_names:
                raise ValueError(f"unknown parameter '{name}'")
            setattr(self, name, value)
        return self

    # subclass hooks ------------------------------------------------------

    def _branch_rows(self, dataset, indices, sensor_t):
        raise NotImplementedError

    def _target_series(self, dataset, indices):
        raise NotImplementedError

    def _finalize(self, dataset, indices, raw):
        return raw

    # fitting -------------------------------------------------------------

    def fit(self, dataset, indices=None):
        if indices is None:
            indices = dataset.train_indices(self._protocol)
        indices = np.asarray(indices, dtype=int)
        sensor_t = np.linspace(dataset.t[0], dataset.t[-1], self.m)
        omegas = _time_omegas(dataset.t, self.time_features)
        idx_rows = _point_index_rows(dataset.t.size, self.train_points,
                                     indices.size, self.seed)
        branch_rows = self._branch_rows(dataset, indices, sensor_t)
        batch = _flatten_batch(branch_rows, dataset.t, idx_rows,
                               dataset.xi[indices],
                               self._target_series(dataset, indices),
                               omegas)
        arch = OperatorArch(branch_input=branch_rows.shape[1],
                            trunk_input=1 + dataset.xi.shape[1]
                            + 2 * omegas.size,
                            p=self.p,
                            branch_hidden=tuple(self.branch_hidden),
                            trunk_hidden=tuple(self.trunk_hidden))
        json_params = {k: list(v) if isinstance(v, tuple) else v
                       for k, v in self.get_params().items()}
        model = init_model(arch, self.seed,
                           meta={"protocol": self._protocol,
                                 "qoi": dataset.qoi_name,
                                 "example": dataset.example.name,
                                 "dataset_hash": dataset.manifest["hash"],
                                 "estimator_params": json_params})
        model.set_normalization(batch[0], batch[1], batch[2])
        config = AdamConfig(lr0=self.lr0, epochs=self.epochs,
                            halve_every=self.halve_every)
        self.history_ = train(model, batch, config, log_every=self.log_every)
        self.model_ = model
        self.sensor_times_ = sensor_t
        self.omegas_ = omegas
        self.train_indices_ = indices
        return self

    def predict(self, dataset, indices):
        """Predicted high-fidelity QoI rows on the dataset's storage grid."""
        indices = np.asarray(indices, dtype=int)
        branch_rows = self._branch_rows(dataset, indices, self.sensor_times_)
        n_pts = dataset.t.size
        trunk = _trunk_rows(dataset.t, dataset.xi[indices], self.omegas_)
        row_map = np.repeat(np.arange(len(indices)), n_pts)
        raw = self.model_.forward(branch_rows, trunk,
                                  row_map).reshape(len(indices), n_pts)
        return self._finalize(dataset, indices, raw)

    def errors(self, dataset, indices=None):
        """Per-trajectory relative errors against the stored y_hf."""
        if indices is None:
            indices = dataset.val_indices
        indices = np.asarray(indices, dtype=int)
        preds = self.predict(dataset, indices)
        return [rel_rmse(pred, dataset.y_hf[k])
                for pred, k in zip(preds, indices)]


class StandardDeepOnet(_OperatorEstimator):
    """Single-fidelity protocol: excitation in, high-fidelity response out."""

    _protocol = "standard"

    def _branch_rows(self, dataset, indices, sensor_t):
        return _excitation_rows(dataset, indices, sensor_t)

    def _target_series(self, dataset, indices):
        return dataset.y_hf[indices]


class BiFidelityDeepOnet(_OperatorEstimator):
    """Paired protocol: low-fidelity response in, discrepancy out, low-
    fidelity response added back on prediction."""

    _protocol = "bifidelity"

    def _branch_rows(self, dataset, indices, sensor_t):
        return _sample_rows(dataset.t, dataset.y_lf[indices], sensor_t)

    def _target_series(self, dataset, indices):
        return dataset.y_corr[indices]

    def _finalize(self, dataset, indices, raw):
        return dataset.y_lf[indices] + raw


def estimator_from_model(model, dataset):
    """Rebuild a fitted estimator from a checkpointed model and a dataset.

    The protocol and constructor parameters are read from the model's
    metadata; the sensor grid is re-derived from the dataset's time grid.
    """
    try:
        protocol = model.meta["protocol"]
        raw = dict(model.meta["estimator_params"])
    except KeyError as exc:
        raise ValueError("checkpoint metadata lacks estimator "
                         "information") from exc
    classes = {"standard": StandardDeepOnet, "bifidelity": BiFidelityDeepOnet}
    if protocol not in classes:
        raise ValueError(f"unknown protocol '{protocol}' in checkpoint")
    for key in ("branch_hidden", "trunk_hidden"):
        if key in raw:
            raw[key] = tuple(raw[key])
    est = classes[protocol](**raw)
    est.model_ = model
    est.sensor_times_ = np.linspace(dataset.t[0], dataset.t[-1], est.m)
    est.omegas_ = _time_omegas(dataset.t, est.time_features)
    est.train_indices_ = np.array([], dtype=int)
    return est


def predict_bifidelity(model, y_lf_rows, t_grid, xi_rows):
    """Corrected prediction y_lf + G for rows carrying a low-fidelity series.

    The sensor count is read off the model's branch width; the trunk's
    time-feature count comes from the checkpoint metadata.
    """
    y_lf_rows = np.atleast_2d(np.asarray(y_lf_rows, dtype=float))
    xi_rows = np.atleast_2d(np.asarray(xi_rows, dtype=float))
    t_grid = np.asarray(t_grid, dtype=float)
    sensor_t = np.linspace(t_grid[0], t_grid[-1], model.arch.branch_input)
    branch_rows = _sample_rows(t_grid, y_lf_rows, sensor_t)
    n_pts = len(t_grid)
    branch = np.repeat(branch_rows, n_pts, axis=0)
    count = (model.meta or {}).get("estimator_params", {}).get(
        "time_features", 0)
    trunk = _trunk_rows(t_grid, xi_rows, _time_omegas(t_grid, count))
    corr = model.forward(branch, trunk).reshape(y_lf_rows.shape[0], n_pts)
    return y_lf_rows + corr


def passthrough_errors(dataset, indices=None):
    """Zero-correction baseline: predict y_lf unchanged."""
    if indices is None:
        indices = dataset.val_indices
    return [rel_rmse(dataset.y_lf[k], dataset.y_hf[k]) for k in indices]


# ---------------------------------------------------------------------------
# experiment runner
# ---------------------------------------------------------------------------

def _spawn_seeds(seed, count):
    ss = np.random.SeedSequence(int(seed))
    return [int(np.random.default_rng(child).integers(0, 2 ** 63 - 1))
            for child in ss.spawn(count)]


def split_root_seed(seed):
    """Derive the per-stage seeds used by every run from one root seed.

    Generation, bi-fidelity training, and standard training each get their
    own stream so a stage can be re-run in isolation and still match a full
    pipeline run with the same root.
    """
    data_seed, bf_seed, std_seed = _spawn_seeds(seed, 3)
    return {"dataset": data_seed, "bifidelity": bf_seed,
            "standard": std_seed}


def _histogram(errors_by_protocol, bins=HISTOGRAM_BINS):
    pooled = np.concatenate([np.asarray(v, dtype=float)
                             for v in errors_by_protocol.values()])
    lo, hi = pooled.min(), pooled.max()
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    counts = {name: np.histogram(vals, bins=edges)[0]
              for name, vals in errors_by_protocol.items()}
    return edges, counts


def histogram_overlap(errors_a, errors_b, bins=HISTOGRAM_BINS):
    """Fraction of shared bin mass between two equally sized error samples."""
    _, counts = _histogram({"a": errors_a, "b": errors_b}, bins)
    overlap = np.minimum(counts["a"], counts["b"]).sum()
    return float(overlap) / len(errors_a)


def run_experiment(example, n_train, n_val, seeds, qoi=None, noise_pct=0.0,
                   estimator_params=None, n_d=None, integrator=None,
                   out_dir=None):
    """Train and validate both protocols on cost-equalized budgets.

    One dataset is generated per seed (the standard protocol reads its
    equalized share of training rows from the same dataset) and both
    protocols are scored on the shared validation rows.  Returns the report
    dict; out_dir additionally writes report.json plus histogram and error
    CSVs pooled over seeds.
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    params = dict(estimator_params or {})
    gen_kwargs = {}
    if n_d is not None:
        gen_kwargs["n_d"] = n_d
    if integrator is not None:
        gen_kwargs["integrator"] = integrator

    errors = {"bifidelity": [], "standard": [], "passthrough": []}
    per_seed = {"bifidelity": [], "standard": [], "passthrough": []}
    seed_overlaps = []
    dataset_hashes = []
    sizes = None
    for seed in seeds:
        split = split_root_seed(seed)
        ds = generate_dataset(example, n_train, n_val, split["dataset"],
                              noise_pct=noise_pct, qoi=qoi, **gen_kwargs)
        dataset_hashes.append(ds.manifest["hash"])
        sizes = ds.manifest["sizes"]
        bf = BiFidelityDeepOnet(**params).set_params(
            seed=split["bifidelity"])
        std = StandardDeepOnet(**params).set_params(seed=split["standard"])
        results = {"bifidelity": bf.fit(ds).errors(ds),
                   "standard": std.fit(ds).errors(ds),
                   "passthrough": passthrough_errors(ds)}
        for name, eps in results.items():
            errors[name].extend(eps)
            per_seed[name].append(float(np.mean(eps)))
        seed_overlaps.append(histogram_overlap(results["standard"],
                                               results["bifidelity"]))

    edges, counts = _histogram({k: errors[k]
                                for k in ("bifidelity", "standard")})
    overlap = float(np.minimum(counts["bifidelity"],
                               counts["standard"]).sum()) / len(
                                   errors["bifidelity"])
    report = {
        "example": example.name,
        "qoi": qoi or example.default_qoi,
        "seeds": seeds,
        "noisy_single_seed": len(seeds) < 3,
        "sizes": sizes,
        "noise_pct": noise_pct,
        "estimator_params": {k: list(v) if isinstance(v, tuple) else v
                             for k, v in params.items()},
        "dataset_hashes": dataset_hashes,
        "protocols": {
            name: {"mean": float(np.mean(errors[name])),
                   "per_seed_means": per_seed[name]}
            for name in ("bifidelity", "standard", "passthrough")
        },
        "histogram": {
            "edges": [float(e) for e in edges],
            "counts": {name: [int(c) for c in counts[name]]
                       for name in counts},
        },
        "overlap": overlap,
        "overlap_per_seed": seed_overlaps,
        "overlap_seed_mean": float(np.mean(seed_overlaps)),
        "reference": FULL_SCALE_MEAN_ERRORS.get(
            (example.name, qoi or example.default_qoi)),
        "errors": {name: [float(e) for e in errors[name]]
                   for name in errors},
        "val_trajectories": [int(k) for _ in seeds
                             for k in range(sizes["n_total"] - n_val,
                                            sizes["n_total"])],
    }
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def write_report(report, out_dir):
    """Write report.json plus histogram and per-trajectory error CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    slim = {k: v for k, v in report.items()
            if k not in ("errors", "val_trajectories")}
    (out / "report.json").write_text(
        json.dumps(slim, indent=2, sort_keys=True) + "\n")
    edges = report["histogram"]["edges"]
    for name in ("bifidelity", "standard"):
        lines = ["bin_left,bin_right,count"]
        for left, right, count in zip(edges[:-1], edges[1:],
                                      report["histogram"]["counts"][name]):
            lines.append(f"{left:.17g},{right:.17g},{count}")
        (out / f"hist_{name}.csv").write_text("\n".join(lines) + "\n")
        lines = ["trajectory,eps_val"]
        for traj, eps in zip(report["val_trajectories"],
                             report["errors"][name]):
            lines.append(f"{traj},{eps:.17g}")
        (out / f"errors_{name}.csv").write_text("\n".join(lines) + "\n")
    return out


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def sweep_training_size(example, sizes, n_val, seeds, **kwargs):
    """run_experiment at each training size; rows carry the error ratio."""
    rows = []
    for n_train in sizes:
        report = run_experiment(example, int(n_train), n_val, seeds, **kwargs)
        mean_bf = report["protocols"]["bifidelity"]["mean"]
        mean_std = report["protocols"]["standard"]["mean"]
        rows.append({"n_train": int(n_train), "standard": mean_std,
                     "bifidelity": mean_bf, "ratio": mean_std / mean_bf})
    return rows


def sweep_pinching(zeta_values, n_train, n_val, seeds, make_example,
                   **kwargs):
    """Experiment per pinching severity; rows carry the histogram overlap.

    make_example(zeta_s) must return the configured example object.
    """
    rows = []
    for zeta_s in zeta_values:
        report = run_experiment(make_example(float(zeta_s)), n_train, n_val,
                                seeds, **kwargs)
        rows.append({"zeta_s": float(zeta_s),
                     "standard": report["protocols"]["standard"]["mean"],
                     "bifidelity": report["protocols"]["bifidelity"]["mean"],
                     "overlap": report["overlap"],
                     "overlap_seed_mean": report["overlap_seed_mean"]})
    return rows


def sweep_noise(example, noise_values, n_train, n_val, seeds, **kwargs):
    """Experiment per training-noise level."""
    rows = []
    for noise_pct in noise_values:
        report = run_experiment(example, n_train, n_val, seeds,
                                noise_pct=float(noise_pct), **kwargs)
        rows.append({"noise_pct": float(noise_pct),
                     "standard": report["protocols"]["standard"]["mean"],
                     "bifidelity": report["protocols"]["bifidelity"]["mean"]})
    return rows
