"""Command-line entry point: ``graphdeeponet {gen-data,train,eval}``.

Every command writes into a run directory (under ``$GDON_RUN_ROOT``, default
``./runs``) holding a ``manifest.json`` with the resolved configuration.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .errors import InvalidArgumentError

log = logging.getLogger("graphdeeponet")

RUN_ROOT_ENV = "GDON_RUN_ROOT"
EQUATIONS = ("burgers", "advection1d", "advection2d", "shallow-water-ic")
PROTOCOLS = ("rollout", "extrapolation", "irregular-query", "transport-demo")
SPLITS = ("train", "val", "test")


class UsageError(Exception):
    pass


def run_root() -> Path:
    return Path(os.environ.get(RUN_ROOT_ENV, "runs"))


def _stamp() -> str:
    return time.strftime("%Y%m%d-%H%M%S")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items() if not str(k).startswith("_")}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_manifest(run_dir: Path, command: str, argv, resolved: dict, seed, artifacts,
                   config_path: Optional[str] = None) -> Path:
    manifest = {
        "command": command,
        "argv": list(argv),
        "config_path": config_path,
        "resolved_config": resolved,
        "seed": seed,
        "artifacts": sorted(str(Path(a).relative_to(run_dir)) if Path(a).is_relative_to(run_dir) else str(a)
                            for a in artifacts),
        "version": __version__,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    path = run_dir / "manifest.json"
    path.write_text(json.dumps(_jsonable(manifest), indent=2))
    return path


# -- gen-data ---------------------------------------------------------------------

ADVECTION_DEFAULTS = {"advection1d": (32, (0.25,)), "advection2d": (256, (0.25, 0.1))}


def _split_seeds(seed: int):
    children = np.random.SeedSequence(seed).spawn(len(SPLITS))
    return {name: int(c.generate_state(1)[0]) for name, c in zip(SPLITS, children)}


def _sensors_for(args, domain):
    from .geometry import regular_sensors, sample_irregular_sensors

    n, dim = args.n_sensors, domain.dim
    if args.grid == "regular":
        per_axis = round(n ** (1.0 / dim))
        if per_axis**dim != n:
            raise UsageError(f"--n-sensors {n} is not a perfect {dim}-th power for a regular grid")
        return regular_sensors(domain, per_axis)
    candidates = args.n_candidates
    if candidates is None:
        per_axis = math.ceil((2 * n) ** (1.0 / dim))
        candidates = per_axis**dim
    if candidates < n:
        raise UsageError("--n-candidates must be at least --n-sensors")
    return sample_irregular_sensors(domain, candidates, n, args.seed)


def cmd_gen_data(args) -> int:
    from .data import (
        BURGERS_DOMAIN,
        SHALLOW_WATER_DOMAIN,
        BurgersConfig,
        TrajectoryDataset,
        generate_advection_dataset,
        generate_burgers_dataset,
        sample_shallow_water_ic,
        save_dataset,
    )
    from .geometry import DomainSpec, parse_query_spec

    for name in ("n_train", "n_val", "n_test"):
        if getattr(args, name) < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be >= 1")
    eq = args.eq
    if args.n_sensors is None:
        args.n_sensors = {"burgers": 50, "shallow-water-ic": 1024}.get(eq) or ADVECTION_DEFAULTS[eq][0]

    if eq == "burgers":
        domain = BURGERS_DOMAIN
    elif eq == "shallow-water-ic":
        domain = SHALLOW_WATER_DOMAIN
    else:
        domain = DomainSpec.box(0.0, 1.0, 2 if eq == "advection2d" else 1)
    sensors = _sensors_for(args, domain)
    queries = parse_query_spec(args.queries, domain, seed=args.seed) if args.queries else None
    seeds = _split_seeds(args.seed)
    out = Path(args.out) if args.out else run_root() / "data" / f"{eq}-seed{args.seed}"
    out.mkdir(parents=True, exist_ok=True)
    counts = {"train": args.n_train, "val": args.n_val, "test": args.n_test}
    resolved = {"equation": eq, "grid": args.grid, "n_sensors": sensors.n, "split_seeds": seeds,
                "counts": counts, "queries": args.queries}

    if eq == "burgers":
        cfg = BurgersConfig(alpha=args.alpha, beta=args.beta, gamma=args.gamma, n_internal=args.n_internal,
                            n_times=args.n_times or 250, t_end=args.t_end or 4.0)
        resolved["burgers"] = cfg.__dict__
        make = lambda n, s, q: generate_burgers_dataset(n, s, sensors, cfg, q)
    elif eq.startswith("advection"):
        velocity = tuple(args.velocity) if args.velocity else ADVECTION_DEFAULTS[eq][1]
        if len(velocity) != domain.dim:
            raise UsageError(f"--velocity needs {domain.dim} components")
        n_times, dt = args.n_times or 25, args.dt or 0.08
        resolved["advection"] = {"velocity": velocity, "n_times": n_times, "dt": dt}
        make = lambda n, s, q: generate_advection_dataset(n, sensors, n_times, velocity, dt, s, q)
    else:
        if queries is not None:
            raise UsageError("--queries is not supported for shallow-water-ic")

        def make(n, s, q):
            children = np.random.SeedSequence(s).spawn(n)
            h = np.stack([sample_shallow_water_ic(c, sensors, invert=args.invert) for c in children])
            meta = {"equation": "shallow-water-ic", "seed": int(s), "params": {"invert": bool(args.invert)}}
            return TrajectoryDataset(h[:, None, :, None], sensors, [0.0], 1.0, meta)

    artifacts = []
    for split in SPLITS:
        with_queries = split == "test" and queries is not None
        result = make(counts[split], seeds[split], [queries] if with_queries else ())
        ds, extra = (result[0], result[1][0]) if with_queries else (result, None)
        artifacts.append(save_dataset(ds, out / f"{split}.npz"))
        if extra is not None:
            artifacts.append(save_dataset(extra, out / "test_queries.npz"))
        print(f"{split}: u {tuple(ds.u.shape)}  dt {ds.dt:g}  sensors {ds.sensors.n}")
    write_manifest(out, "gen-data", args.argv, resolved, args.seed, artifacts)
    print(f"wrote {out}")
    return 0


# -- train ------------------------------------------------------------------------


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{p} is not valid JSON: {exc}") from exc


def _load_split(data_dir: Path, split: str):
    from .data import load_dataset

    path = data_dir / f"{split}.npz"
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    return load_dataset(path)


def _model_config(kind: str, model_cfg: dict, train_ds) -> dict:
    cfg = {k: v for k, v in model_cfg.items() if k != "kind"}
    if kind == "graphdeeponet":
        cfg["domain"] = train_ds.sensors.domain.to_dict()
    else:
        cfg["sensor_positions"] = train_ds.sensors.positions.tolist()
    cfg.setdefault("channels", train_ds.n_channels)
    return cfg


def cmd_train(args) -> int:
    from .plotting import plot_training_curves
    from .training import TrainConfig, build_model, fit, load_checkpoint

    config = load_config(args.config)
    model_cfg = dict(config.get("model", {}))
    train_cfg = dict(config.get("train", {}))
    for flag, key in (("epochs", "epochs"), ("precision", "precision"), ("seed", "seed"), ("lr", "lr"),
                      ("batch_size", "batch_size")):
        value = getattr(args, flag)
        if value is not None:
            train_cfg[key] = value
    if args.model is not None:
        model_cfg["kind"] = args.model
    kind = model_cfg.get("kind", "graphdeeponet")
    data_dir = args.data or config.get("data")
    if data_dir is None:
        raise UsageError("no dataset directory: pass --data or set 'data' in the config")
    t_train_end = args.t_train_end if args.t_train_end is not None else config.get("t_train_end")
    time_budget = args.time_budget if args.time_budget is not None else config.get("time_budget")
    n_rollout = config.get("n_rollout")

    try:
        tc = TrainConfig(**train_cfg)
    except TypeError as exc:
        raise UsageError(f"bad train config: {exc}") from exc

    train_ds = _load_split(Path(data_dir), "train")
    val_ds = _load_split(Path(data_dir), "val")
    if t_train_end is not None:
        train_ds, val_ds = train_ds.until(t_train_end), val_ds.until(t_train_end)

    resume = None
    if args.resume:
        model, resume = load_checkpoint(args.resume)
        run_dir = Path(args.run_dir) if args.run_dir else Path(args.resume).resolve().parent.parent
    else:
        resolved_model = _model_config(kind, model_cfg, train_ds)
        model = build_model(kind, resolved_model, seed=tc.seed, dtype=tc.dtype)
        name = Path(args.config).stem if args.config else kind
        run_dir = Path(args.run_dir) if args.run_dir else run_root() / "train" / f"{name}-{_stamp()}"
    run_dir.mkdir(parents=True, exist_ok=True)

    resolved = {"data": str(data_dir), "model": {"kind": kind, **model.config.to_dict()}, "train": tc.to_dict(),
                "t_train_end": t_train_end, "n_rollout": n_rollout, "time_budget": time_budget}
    (run_dir / "config.json").write_text(json.dumps(_jsonable(resolved), indent=2))

    model, history = fit(model, train_ds, val_ds, tc, run_dir=run_dir, resume=resume, n_rollout=n_rollout,
                         time_budget=time_budget, progress=True)
    artifacts = [run_dir / "config.json", run_dir / "metrics.jsonl", run_dir / "checkpoints" / "last.pt"]
    if (run_dir / "checkpoints" / "best.pt").exists():
        artifacts.append(run_dir / "checkpoints" / "best.pt")
    if history:
        artifacts.append(plot_training_curves(history, run_dir / "figures" / "training_curves.png"))
        last = history[-1]
        print(f"epoch {last['epoch']}: train loss {last['train_loss']:.4e}  val rel-L2 {last['val_rel_l2']}")
    write_manifest(run_dir, "train", args.argv, resolved, tc.seed, artifacts, args.config)
    print(f"run directory: {run_dir}")
    return 0


# -- eval -------------------------------------------------------------------------


def _resolve_checkpoint(args):
    from .training import load_checkpoint

    data_dir = args.data
    if args.checkpoint:
        ckpt = Path(args.checkpoint)
    elif args.run_dir:
        ckpt = Path(args.run_dir) / "checkpoints" / "best.pt"
    else:
        raise UsageError("pass --checkpoint or --run-dir")
    if not ckpt.exists():
        raise FileNotFoundError(f"checkpoint not found: {ckpt}")
    if data_dir is None:
        cfg_path = ckpt.resolve().parent.parent / "config.json"
        if cfg_path.exists():
            data_dir = json.loads(cfg_path.read_text()).get("data")
    if data_dir is None:
        raise UsageError("no dataset directory: pass --data")
    model, payload = load_checkpoint(ckpt)
    return model, ckpt, Path(data_dir)


def _queries_for(args, ds, protocol):
    from .data import resample_dataset
    from .geometry import parse_query_spec

    spec = args.queries
    if spec is None and protocol == "irregular-query":
        spec = f"offset:{2 * ds.sensors.n}" if ds.sensors.domain.dim == 1 else f"offset:{ds.sensors.n}"
    if spec is None:
        return None, None
    queries = parse_query_spec(spec, ds.sensors.domain, seed=args.seed)
    return resample_dataset(ds, queries), spec


def _eval_figures(model, ds, query_ds, out_dir: Path, n_rollout=None):
    from .evaluation import rollout_predictions
    from .plotting import plot_profiles, plot_sensors, plot_spacetime

    files = []
    ref = query_ds if query_ds is not None else ds
    if ds.sensors.domain.dim != 1:
        return files
    pred, truth, times = rollout_predictions(model, ds.subset([0]), ref.subset([0]), n_rollout=n_rollout)
    x = ref.sensors.positions[:, 0]
    files.append(plot_profiles(x, truth[0, :, :, 0], pred[0, :, :, 0], times, out_dir / "profiles.png",
                               sensors=ds.sensors.positions[:, 0]))
    files.append(plot_spacetime(x, times, truth[0, :, :, 0], pred[0, :, :, 0], out_dir / "spacetime.png"))
    if query_ds is not None:
        files.append(plot_sensors(ds.sensors.positions, query_ds.sensors.positions, out_dir / "sensors.png"))
    return files


def cmd_eval(args) -> int:
    from .evaluation import (
        evaluate_rollout,
        extrapolation_eval,
        relative_l2_per_frame,
        rollout_predictions,
        transport_counterexample_demo,
    )
    from .plotting import plot_block_errors, plot_extrapolation, plot_transport_demo

    protocol = args.protocol
    out_dir = Path(args.out) if args.out else None
    artifacts = []
    resolved = {"protocol": protocol, "seed": args.seed}

    if protocol == "transport-demo":
        report = transport_counterexample_demo(dim=args.dim, seed=args.seed)
        out_dir = out_dir or run_root() / "eval" / f"transport-demo-{_stamp()}"
        out_dir.mkdir(parents=True, exist_ok=True)
        artifacts.append(plot_transport_demo(report, out_dir / "transport_demo.png"))
        (out_dir / "report.json").write_text(json.dumps(_jsonable(report), indent=2))
        artifacts.append(out_dir / "report.json")
        resolved["dim"] = args.dim
        print(f"fixed-grid MSE summed over the two cases: {report['best_mse_summed_over_cases']:.3f}"
              f"  (expected per case: {report['best_mse_expected']:.3f})")
        print(f"graph model defined at all {report['gdon_query_points']} query points: "
              f"{report['gdon_defined_everywhere']}")
        write_manifest(out_dir, "eval", args.argv, resolved, args.seed, artifacts)
        return 0

    model, ckpt, data_dir = _resolve_checkpoint(args)
    ds = _load_split(data_dir, args.split)
    out_dir = out_dir or ckpt.resolve().parent.parent / f"eval-{protocol}-{args.split}"
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved.update({"checkpoint": str(ckpt), "data": str(data_dir), "split": args.split})

    if protocol in ("rollout", "irregular-query"):
        query_ds, spec = _queries_for(args, ds, protocol)
        resolved["queries"] = spec
        report = evaluate_rollout(model, ds, query_ds, seed=args.seed, protocol=protocol)
        if query_ds is not None:
            on_sensor = np.isin(query_ds.sensors.positions, ds.sensors.positions).all(axis=1)
            report.extra["n_queries_on_sensors"] = int(on_sensor.sum())
        artifacts.append(plot_block_errors({protocol: report.rel_l2_per_block}, out_dir / "block_errors.png"))
        artifacts += _eval_figures(model, ds, query_ds, out_dir)
    else:
        if args.t_train_end is None or args.t_end is None:
            raise UsageError("extrapolation needs --t-train-end and --t-end")
        query_ds, spec = _queries_for(args, ds, protocol)
        resolved.update({"queries": spec, "t_train_end": args.t_train_end, "t_end": args.t_end})
        report = extrapolation_eval(model, ds, args.t_train_end, args.t_end, query_ds, seed=args.seed)
        curves = {}
        models = [("graph operator", model)]
        if args.baseline:
            from .training import load_checkpoint

            baseline, _ = load_checkpoint(args.baseline)
            base_report = extrapolation_eval(baseline, ds, args.t_train_end, args.t_end, query_ds)
            report.extra["baseline_checkpoint"] = str(args.baseline)
            report.extra["baseline_rel_l2_extrapolation"] = base_report.extra["rel_l2_extrapolation"]
            report.extra["baseline_rel_l2_train_window"] = base_report.extra["rel_l2_train_window"]
            models.append(("DeepONet", baseline))
        short = ds.until(args.t_end)
        q_short = query_ds.until(args.t_end) if query_ds is not None else None
        for label, m in models:
            pred, truth, times = rollout_predictions(m, short, q_short)
            curves[label] = np.mean([relative_l2_per_frame(p, t) for p, t in zip(pred, truth)], axis=0)
        artifacts.append(plot_extrapolation(times, curves, args.t_train_end, out_dir / "extrapolation.png"))
        artifacts += _eval_figures(model, short, q_short, out_dir)

    artifacts.append(report.save(out_dir / "report.json"))
    write_manifest(out_dir, "eval", args.argv, resolved, args.seed, artifacts)
    summary = f"{protocol}: mean relative L2 {report.rel_l2_mean:.4f} over {report.n_traj} trajectories"
    if "rel_l2_extrapolation" in report.extra:
        summary += f"; extrapolation window {report.extra['rel_l2_extrapolation']:.4f}"
    if "baseline_rel_l2_extrapolation" in report.extra:
        summary += f" (baseline {report.extra['baseline_rel_l2_extrapolation']:.4f})"
    print(summary)
    print(f"report: {out_dir / 'report.json'}")
    return 0


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphdeeponet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate train/val/test trajectory files")
    g.add_argument("--eq", required=True, choices=EQUATIONS)
    g.add_argument("--n-train", type=int, default=256)
    g.add_argument("--n-val", type=int, default=32)
    g.add_argument("--n-test", type=int, default=32)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--grid", choices=("regular", "irregular"), default="regular")
    g.add_argument("--n-sensors", type=int, help="sensor count (total, also in 2D)")
    g.add_argument("--n-candidates", type=int, help="candidate grid size for --grid irregular")
    g.add_argument("--queries", help="extra test-set sampling: regular:N, offset:N or random:N")
    g.add_argument("--n-times", type=int, help="frames per trajectory")
    g.add_argument("--dt", type=float, help="frame spacing (advection)")
    g.add_argument("--t-end", type=float, help="final time (burgers)")
    g.add_argument("--velocity", type=float, nargs="+", help="advection velocity components")
    g.add_argument("--alpha", type=float, default=0.5)
    g.add_argument("--beta", type=float, default=0.01)
    g.add_argument("--gamma", type=float, default=0.0)
    g.add_argument("--n-internal", type=int, default=256, help="spectral points of the burgers solver")
    g.add_argument("--invert", action="store_true", help="shallow water: high level inside the disc")
    g.add_argument("--out", help="output directory")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model from a JSON config")
    t.add_argument("--config", help="JSON file with data/model/train sections")
    t.add_argument("--data", help="dataset directory (overrides the config)")
    t.add_argument("--model", choices=("graphdeeponet", "deeponet"))
    t.add_argument("--epochs", type=int)
    t.add_argument("--precision", choices=("float32", "float64"))
    t.add_argument("--seed", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--t-train-end", type=float, help="train only on frames with t <= this")
    t.add_argument("--time-budget", type=float, help="stop after the epoch exceeding this many seconds")
    t.add_argument("--run-dir")
    t.add_argument("--resume", help="checkpoint to continue from")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="run an evaluation protocol and write report + figures")
    e.add_argument("--protocol", required=True, choices=PROTOCOLS)
    e.add_argument("--checkpoint")
    e.add_argument("--run-dir")
    e.add_argument("--data")
    e.add_argument("--split", choices=SPLITS, default="test")
    e.add_argument("--queries", help="regular:N, offset:N or random:N")
    e.add_argument("--t-train-end", type=float)
    e.add_argument("--t-end", type=float)
    e.add_argument("--baseline", help="DeepONet checkpoint to compare in the extrapolation protocol")
    e.add_argument("--dim", type=int, default=1, help="torus dimension for the transport demo")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, InvalidArgumentError) as exc:
        parser.print_usage(sys.stderr)
        print(f"graphdeeponet: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"graphdeeponet: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
