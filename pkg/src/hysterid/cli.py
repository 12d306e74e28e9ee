"""Command-line interface: dataset generation, training, evaluation, and
one-shot experiment reproduction driven by schema-validated JSON configs."""

import argparse
import hashlib
import json
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .bifidelity import (BiFidelityDeepOnet, StandardDeepOnet,
                         estimator_from_model, passthrough_errors,
                         run_experiment, split_root_seed, write_report)
from .excitation import ParseError
from .neuralop import TrainingDivergence, load_checkpoint, save_checkpoint
from .simulate import (EXAMPLE_NAMES, DivergenceError, IntegratorSpec,
                       generate_dataset, get_example, load_dataset)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

REPRODUCE_IDS = {
    "ex1-caseI": "ex1_caseI.json",
    "ex1-caseII": "ex1_caseII.json",
    "ex2-car": "ex2_car.json",
    "ex3-building": "ex3_building.json",
}

SEED_ENV = "HYSTERID_SEED"


class ConfigError(ValueError):
    """Configuration rejected; message carries the schema path if known."""


def config_schema():
    text = resources.files("hysterid").joinpath(
        "configs/schema.json").read_text()
    return json.loads(text)


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    validate_config(config)
    return config


def validate_config(config):
    try:
        jsonschema.validate(config, config_schema())
    except jsonschema.ValidationError as exc:
        raise ConfigError(
            f"config violates schema at {exc.json_path}: {exc.message}"
        ) from exc
    return config


def bundled_config(name):
    text = resources.files("hysterid").joinpath(
        f"configs/{name}").read_text()
    return validate_config(json.loads(text))


def _root_seed(config, override=None):
    if override is not None:
        return int(override)
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got "
                              f"'{env}'") from exc
    return int(config.get("seed", 0))


def _seed_list(config, args):
    if getattr(args, "seeds", None):
        return [int(s) for s in args.seeds.split(",")]
    env = os.environ.get(SEED_ENV)
    base = config.get("seeds", [config.get("seed", 0)])
    if env is not None:
        root = _root_seed(config)
        return [root + i for i in range(len(base))]
    return [int(s) for s in base]


def _example_from_config(config):
    options = dict(config.get("example_options", {}))
    if "zeta_s" in config:
        options["zeta_s"] = config["zeta_s"]
    try:
        return get_example(config["example"], **options)
    except TypeError as exc:
        raise ConfigError(f"bad example options: {exc}") from exc


def _integrator_from_config(config):
    block = config.get("integrator")
    if block is None:
        return None
    return IntegratorSpec(method=block.get("method", "rk4"),
                          dt=block.get("dt"),
                          blow_up=block.get("blow_up", 1e6))


def _estimator_params(config, args=None):
    network = config.get("network", {})
    training = config.get("training", {})
    params = {
        "p": network.get("p", 8),
        "branch_hidden": tuple(network.get("branch_hidden", (50, 50, 50))),
        "trunk_hidden": tuple(network.get("trunk_hidden", (50, 50))),
        "m": network.get("m", 100),
        "train_points": network.get("train_points"),
        "time_features": network.get("time_features", 0),
        "lr0": training.get("lr0", 1e-3),
        "epochs": training.get("epochs", 10000),
        "halve_every": training.get("halve_every", 2500),
        "log_every": training.get("log_every", 100),
    }
    if args is not None:
        for attr, key in (("epochs", "epochs"), ("train_points",
                                                 "train_points"),
                          ("m", "m"), ("lr0", "lr0")):
            value = getattr(args, attr, None)
            if value is not None:
                params[key] = value
    return params


def _sizes(config, args):
    sizes = config["sizes"]
    n_train = getattr(args, "n_train", None) or sizes["n_train"]
    n_val = getattr(args, "n_val", None) or sizes["n_val"]
    return int(n_train), int(n_val)


def _check_jobs(args):
    jobs = getattr(args, "jobs", None)
    if jobs is not None and jobs > 1:
        print(f"note: --jobs {jobs} requested; running single-threaded",
              file=sys.stderr)


def _float_csv(text):
    return [float(x) for x in text.split(",")]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen(args):
    config = load_config(args.config)
    _check_jobs(args)
    example = _example_from_config(config)
    n_train, n_val = _sizes(config, args)
    root = _root_seed(config, args.seed)
    split = split_root_seed(root)
    out = Path(args.out) if args.out else Path(config["out_dir"]) / "dataset"
    kwargs = {}
    if config.get("n_d") is not None:
        kwargs["n_d"] = config["n_d"]
    integrator = _integrator_from_config(config)
    if integrator is not None:
        kwargs["integrator"] = integrator
    dataset = generate_dataset(example, n_train, n_val, split["dataset"],
                               noise_pct=config.get("noise_pct", 0.0),
                               qoi=config.get("qoi"), out_dir=out, **kwargs)
    print(f"dataset: {out}")
    print(f"trajectories: {dataset.n_total}")
    print(f"manifest hash: {dataset.manifest['hash']}")
    return EXIT_OK


def _require_columns(dataset_dir, protocol):
    manifest_path = Path(dataset_dir) / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json under {dataset_dir}")
    manifest = json.loads(manifest_path.read_text())
    files = manifest.get("files", [])
    if not files:
        raise ConfigError(f"dataset {dataset_dir} lists no trajectory files")
    header = (Path(dataset_dir) / files[0]).read_text().splitlines()[0]
    columns = header.split(",")
    needed = {"bifidelity": ("t", "y_lf", "y_hf", "y_corr"),
              "standard": ("t", "y_hf")}[protocol]
    missing = [c for c in needed if c not in columns]
    if missing:
        raise ConfigError(
            f"dataset {dataset_dir} lacks column(s) {missing} required by "
            f"the {protocol} protocol")


def cmd_train(args):
    config = load_config(args.config)
    _check_jobs(args)
    _require_columns(args.dataset, args.protocol)
    dataset = load_dataset(args.dataset)
    root = _root_seed(config, args.seed)
    split = split_root_seed(root)
    params = _estimator_params(config, args)
    params["seed"] = split[args.protocol]
    cls = {"standard": StandardDeepOnet,
           "bifidelity": BiFidelityDeepOnet}[args.protocol]
    est = cls(**params)
    est.fit(dataset)
    final_loss = est.history_[-1][1]
    est.model_.meta["final_loss"] = final_loss
    est.model_.meta["root_seed"] = root
    out = Path(args.out) if args.out else Path(config["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / f"model_{args.protocol}.ckpt"
    save_checkpoint(est.model_, ckpt)
    loss_csv = out / f"loss_{args.protocol}.csv"
    loss_csv.write_text("".join(f"{epoch},{loss:.17g}\n"
                                for epoch, loss in est.history_))
    print(f"checkpoint: {ckpt}")
    print(f"loss history: {loss_csv} ({len(est.history_)} rows)")
    print(f"final training loss: {final_loss:.6e}")
    return EXIT_OK


def cmd_eval(args):
    model = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.dataset)
    try:
        est = estimator_from_model(model, dataset)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    expected = model.meta.get("dataset_hash")
    actual = dataset.manifest["hash"]
    if expected is not None and expected != actual:
        print("note: checkpoint was trained on a different dataset "
              f"({expected[:12]}... vs {actual[:12]}...)", file=sys.stderr)
    errors = est.errors(dataset)
    baseline = passthrough_errors(dataset)
    checkpoint_sha = hashlib.sha256(
        Path(args.checkpoint).read_bytes()).hexdigest()
    report = {
        "protocol": est._protocol,
        "dataset_hash": actual,
        "trained_on_hash": expected,
        "checkpoint_sha256": checkpoint_sha,
        "n_val": len(errors),
        "mean_eps": float(np.mean(errors)),
        "passthrough_mean_eps": float(np.mean(baseline)),
        "errors": [float(e) for e in errors],
    }
    out = Path(args.out) if args.out else Path(args.checkpoint).parent
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"report: {out / 'report.json'}")
    print(f"mean eps ({est._protocol}): {report['mean_eps']:.6e}")
    return EXIT_OK


def _write_summary_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            cells.append(f"{cell:.17g}" if isinstance(cell, float)
                         else str(cell))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_reproduce(args):
    if args.config:
        config = load_config(args.config)
    elif args.target in REPRODUCE_IDS:
        config = bundled_config(REPRODUCE_IDS[args.target])
    else:
        raise ConfigError(
            f"unknown reproduce target '{args.target}' (choose from "
            f"{sorted(REPRODUCE_IDS)} or pass --config)")
    _check_jobs(args)
    example = _example_from_config(config)
    seeds = _seed_list(config, args)
    n_train, n_val = _sizes(config, args)
    params = _estimator_params(config, args)
    out = Path(args.out) if args.out else Path(config["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    common = {"n_val": n_val, "seeds": seeds, "estimator_params": params,
              "n_d": config.get("n_d"),
              "integrator": _integrator_from_config(config)}

    size_list = None
    if args.sizes:
        size_list = [int(x) for x in _float_csv(args.sizes)]
    elif config.get("sweep_sizes"):
        size_list = [int(x) for x in config["sweep_sizes"]]
    if size_list:
        rows = []
        for n in size_list:
            rep = run_experiment(example, n, qoi=config.get("qoi"),
                                 out_dir=out / f"size_{n}", **common)
            rows.append((n, rep["protocols"]["standard"]["mean"],
                         rep["protocols"]["bifidelity"]["mean"]))
        _write_summary_csv(out / "summary_sizes.csv",
                           ("n_train", "standard", "bifidelity"), rows)
        summary = {"sweep": "sizes", "rows": [
            {"n_train": r[0], "standard": r[1], "bifidelity": r[2]}
            for r in rows]}
    elif args.noise:
        rows = []
        for pct in _float_csv(args.noise):
            frac = pct / 100.0
            rep = run_experiment(example, n_train, qoi=config.get("qoi"),
                                 noise_pct=frac,
                                 out_dir=out / f"noise_{pct:g}", **common)
            rows.append((frac, rep["protocols"]["standard"]["mean"],
                         rep["protocols"]["bifidelity"]["mean"]))
        _write_summary_csv(out / "summary_noise.csv",
                           ("noise_pct", "standard", "bifidelity"), rows)
        summary = {"sweep": "noise", "rows": [
            {"noise_pct": r[0], "standard": r[1], "bifidelity": r[2]}
            for r in rows]}
    elif args.zetas:
        rows = []
        for zeta in _float_csv(args.zetas):
            sub = get_example(config["example"], zeta_s=zeta)
            rep = run_experiment(sub, n_train, qoi=config.get("qoi"),
                                 out_dir=out / f"zeta_{zeta:g}", **common)
            rows.append((zeta, rep["protocols"]["standard"]["mean"],
                         rep["protocols"]["bifidelity"]["mean"],
                         rep["overlap"]))
        _write_summary_csv(out / "summary_zeta.csv",
                           ("zeta_s", "standard", "bifidelity", "overlap"),
                           rows)
        summary = {"sweep": "zeta_s", "rows": [
            {"zeta_s": r[0], "standard": r[1], "bifidelity": r[2],
             "overlap": r[3]} for r in rows]}
    else:
        qois = (("z", "u_b", "u_3") if config["example"] == "4dof_caseI"
                else (config.get("qoi") or example.default_qoi,))
        rows = []
        qoi_blocks = {}
        for qoi in qois:
            rep = run_experiment(example, n_train, qoi=qoi,
                                 out_dir=out / qoi, **common)
            blocks = rep["protocols"]
            rows.append((qoi, blocks["standard"]["mean"],
                         blocks["bifidelity"]["mean"],
                         blocks["passthrough"]["mean"]))
            qoi_blocks[qoi] = {
                "standard": blocks["standard"]["mean"],
                "bifidelity": blocks["bifidelity"]["mean"],
                "passthrough": blocks["passthrough"]["mean"],
                "overlap": rep["overlap"],
                "dataset_hashes": rep["dataset_hashes"],
                "reference": rep["reference"],
            }
        _write_summary_csv(out / "summary.csv",
                           ("qoi", "standard", "bifidelity", "passthrough"),
                           rows)
        summary = {"qois": qoi_blocks}

    summary.update({
        "example": config["example"],
        "seeds": seeds,
        "sizes": {"n_train": n_train, "n_val": n_val},
        "estimator_params": {k: list(v) if isinstance(v, tuple) else v
                             for k, v in params.items()},
    })
    (out / "report.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"reproduce target: {args.target}")
    for row in rows:
        print("  " + "  ".join(f"{c:.5g}" if isinstance(c, float)
                               else str(c) for c in row))
    print(f"report: {out / 'report.json'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="hysterid",
        description="Hysteretic-response surrogate toolkit: simulate "
                    "degrading oscillator ensembles and train operator "
                    "surrogates on them.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--jobs", type=int, default=None,
                       help="worker cap (runs use a single process)")
        p.add_argument("--seed", type=int, default=None,
                       help="root seed override")

    gen = sub.add_parser("gen", help="generate a paired dataset")
    gen.add_argument("--config", required=True)
    gen.add_argument("--out", default=None, help="dataset directory")
    gen.add_argument("--n-train", type=int, dest="n_train", default=None)
    gen.add_argument("--n-val", type=int, dest="n_val", default=None)
    add_common(gen)
    gen.set_defaults(handler=cmd_gen)

    train = sub.add_parser("train", help="train one protocol on a dataset")
    train.add_argument("--config", required=True)
    train.add_argument("--dataset", required=True)
    train.add_argument("--protocol", required=True,
                       choices=("standard", "bifidelity"))
    train.add_argument("--out", default=None, help="output directory")
    train.add_argument("--epochs", type=int, default=None)
    train.add_argument("--train-points", type=int, dest="train_points",
                       default=None)
    train.add_argument("--m", type=int, default=None,
                       help="sensor count override")
    train.add_argument("--lr0", type=float, default=None)
    add_common(train)
    train.set_defaults(handler=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--out", default=None)
    add_common(ev)
    ev.set_defaults(handler=cmd_eval)

    rep = sub.add_parser("reproduce",
                         help="full generate/train/evaluate comparison")
    rep.add_argument("target", help="one of " + ", ".join(
        sorted(REPRODUCE_IDS)))
    rep.add_argument("--config", default=None,
                     help="config overriding the bundled one")
    rep.add_argument("--seeds", default=None, help="comma-separated seeds")
    rep.add_argument("--sizes", default=None,
                     help="comma-separated training sizes to sweep")
    rep.add_argument("--noise", default=None,
                     help="comma-separated noise percentages to sweep")
    rep.add_argument("--zetas", default=None,
                     help="comma-separated pinching severities to sweep")
    rep.add_argument("--out", default=None)
    rep.add_argument("--n-train", type=int, dest="n_train", default=None)
    rep.add_argument("--n-val", type=int, dest="n_val", default=None)
    rep.add_argument("--epochs", type=int, default=None)
    rep.add_argument("--train-points", type=int, dest="train_points",
                     default=None)
    rep.add_argument("--m", type=int, default=None)
    rep.add_argument("--lr0", type=float, default=None)
    add_common(rep)
    rep.set_defaults(handler=cmd_reproduce)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, TrainingDivergence) as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ParseError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
