"""Command-line interface.

Commands: dataset, train, eval, ablate, baseline, predict, gradcheck, serve.
Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numerical failure.
A JSON config file (--config) may supply any flag; explicit flags win.  The
RPN_SEED environment variable is the fallback for --seed.  Every command
writes a manifest JSON next to its primary output.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from . import autodiff as ad
from .dataset import (generate_dataset, load_dataset, receiver_grid,
                      sample_transmitters)
from .errors import FormatError, NumericalError, ValidationError
from .geometry import load_scene, normalize_scene, sample_point_cloud
from .model import ModelConfig, forward_group, init_params
from .links import build_links
from .oracle import TraceConfig
from .training import (TrainConfig, evaluate_checkpoint, predictor_from_checkpoint,
                       prepare_pipeline, run_ablation, run_baseline_mlp,
                       save_trained, train)
from . import coverage

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4


def _sha256(path) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    except OSError:
        return "unavailable"
    return h.hexdigest()


def _write_manifest(command: str, out_path: str, config: dict, inputs: list,
                    outputs: list, seed, elapsed_s: float) -> None:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "config": config,
        "config_digest": hashlib.sha256(
            json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
        ).hexdigest(),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "seed": seed,
        "elapsed_s": elapsed_s,
    }
    with open(f"{out_path}.manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_seed(value):
    if value is not None:
        return int(value)
    env = os.environ.get("RPN_SEED")
    return int(env) if env else 0


def _apply_config_file(args: argparse.Namespace, parser_defaults: dict) -> None:
    """Fill flags left at their defaults from the JSON config file (explicitly
    typed flags override the file)."""
    if not getattr(args, "config", None):
        return
    with open(args.config) as fh:
        file_cfg = json.load(fh)
    for key, value in file_cfg.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ValidationError(f"config file key {key!r} is not a known flag")
        current = getattr(args, attr)
        if current is None or current == parser_defaults.get(attr):
            setattr(args, attr, value)


def _parse_triplet(text: str, name: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValidationError(f"{name} must be x,y,z, got {text!r}")
    return np.array([float(v) for v in parts])


def _parse_grid(text: str):
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise ValidationError(f"--rx-grid must be NXxNYxNZ, got {text!r}")
    return tuple(int(v) for v in parts)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_dataset(args) -> int:
    t0 = time.perf_counter()
    seed = _resolve_seed(args.seed)
    scene = load_scene(args.scene)
    sample_point_cloud(scene, args.density, args.sample_seed)
    normalize_scene(scene)
    nx, ny, nz = _parse_grid(args.rx_grid)
    heights = [float(v) for v in args.rx_heights.split(",")]
    if len(heights) != nz:
        raise ValidationError(
            f"--rx-heights lists {len(heights)} heights but the grid has nz={nz}"
        )
    cfg = TraceConfig(
        frequency_hz=args.freq,
        max_reflection_order=args.max_reflections,
        diffraction_enabled=bool(args.diffraction),
        p_min_db=args.p_min_db,
        p_max_db=args.p_max_db,
    )
    tx_seed = args.tx_seed if args.tx_seed is not None else seed
    tx = sample_transmitters(scene, args.tx_count, tx_seed,
                             args.tx_height_min, args.tx_height_max)
    rx, dims = receiver_grid(scene, nx, ny, heights)
    patterns = [int(v) for v in args.patterns.split(",")]
    prep = {"density": args.density, "sample_seed": args.sample_seed}
    if args.probe_spacing is not None:
        prep["probe_spacing"] = args.probe_spacing
    generate_dataset(scene, tx, patterns, rx, cfg, args.out, prep=prep, rx_dims=dims)
    config = {k: getattr(args, k) for k in (
        "scene", "out", "tx_count", "tx_height_min", "tx_height_max", "rx_grid",
        "rx_heights", "patterns", "freq", "max_reflections", "diffraction",
        "p_min_db", "p_max_db", "density", "sample_seed", "probe_spacing")}
    config["tx_seed"] = tx_seed
    _write_manifest("dataset", args.out, config, [args.scene], [args.out],
                    seed, time.perf_counter() - t0)
    print(f"wrote {args.out}: {len(tx)} tx x {len(patterns)} patterns x {len(rx)} rx")
    return EXIT_OK


def _model_config_from_args(args) -> ModelConfig:
    return ModelConfig(n=args.n, K=args.K)


def cmd_train(args) -> int:
    t0 = time.perf_counter()
    seed = _resolve_seed(args.seed)
    ds = load_dataset(args.data)
    mcfg = _model_config_from_args(args)
    tcfg = TrainConfig(batch_size=args.batch_size, learning_rate=args.lr,
                       epochs=args.epochs, seed=seed, patience=args.patience,
                       checkpoint_interval=args.checkpoint_interval)
    pipeline = prepare_pipeline(ds, mcfg, density=args.density,
                                sample_seed=args.sample_seed,
                                probe_spacing=args.probe_spacing)
    history_path = args.history or f"{args.out}.history.jsonl"
    log = (lambda s: print(s, flush=True)) if args.verbose else None

    def periodic(epoch, arrays):
        from .checkpoint import save_checkpoint
        save_checkpoint(f"{args.out}.epoch{epoch:04d}", arrays, mcfg,
                        train_config=asdict(tcfg),
                        p_min_db=ds.header["P_min_db"], p_max_db=ds.header["P_max_db"],
                        scene_hash=ds.header["scene_hash"], scene=ds.header["scene"],
                        prep=pipeline.prep, extra={"epoch": epoch})

    result = train(ds, mcfg, tcfg, pipeline=pipeline, history_path=history_path,
                   log=log, snapshot_callback=periodic if tcfg.checkpoint_interval else None)
    save_trained(args.out, result, ds)
    config = {"data": args.data, "out": args.out, "model_config": mcfg.to_dict(),
              "train_config": asdict(tcfg), "prep": pipeline.prep}
    _write_manifest("train", args.out, config, [args.data],
                    [args.out, history_path], seed, time.perf_counter() - t0)
    print(f"best epoch {result.best_epoch}: val_mse={result.best_val.mse:.6e} "
          f"val_psnr={result.best_val.psnr:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    ds = load_dataset(args.data)
    metrics = evaluate_checkpoint(args.model, ds)
    print(f"val_mse={metrics.mse:.12e} val_psnr={metrics.psnr:.8f}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    t0 = time.perf_counter()
    ds = load_dataset(args.data)
    seeds = [int(s) for s in args.seeds.split(",")]
    mcfg = _model_config_from_args(args)
    report = {"seeds": seeds, "runs": []}
    for seed in seeds:
        tcfg = TrainConfig(batch_size=args.batch_size, learning_rate=args.lr,
                           epochs=args.epochs, seed=seed, patience=args.patience)
        out = run_ablation(ds, mcfg, tcfg)
        report["runs"].append({
            "seed": seed,
            "full_val_mse": out["full"].best_val.mse,
            "full_val_psnr": out["full"].best_val.psnr,
            "ablated_val_mse": out["no_probes"].best_val.mse,
            "ablated_val_psnr": out["no_probes"].best_val.psnr,
            "full_param_count": out["full_param_count"],
            "ablated_param_count": out["ablated_param_count"],
        })
    full_med = float(np.median([r["full_val_mse"] for r in report["runs"]]))
    ab_med = float(np.median([r["ablated_val_mse"] for r in report["runs"]]))
    report["full_median_mse"] = full_med
    report["ablated_median_mse"] = ab_med
    with open(args.out, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    config = {"data": args.data, "out": args.out, "seeds": seeds,
              "epochs": args.epochs, "batch_size": args.batch_size, "lr": args.lr}
    _write_manifest("ablate", args.out, config, [args.data], [args.out],
                    seeds[0], time.perf_counter() - t0)
    print(f"median val_mse: full={full_med:.6e} ablated={ab_med:.6e}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    t0 = time.perf_counter()
    seed = _resolve_seed(args.seed)
    ds = load_dataset(args.data)
    tcfg = TrainConfig(batch_size=args.batch_size, learning_rate=args.lr,
                       epochs=args.epochs, seed=seed, patience=args.patience)
    metrics, history = run_baseline_mlp(ds, tcfg)
    print(f"baseline val_mse={metrics.mse:.6e} val_psnr={metrics.psnr:.4f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"val_mse": metrics.mse, "val_psnr": metrics.psnr,
                       "history": history}, fh, indent=2)
            fh.write("\n")
        config = {"data": args.data, "out": args.out, "train_config": asdict(tcfg)}
        _write_manifest("baseline", args.out, config, [args.data], [args.out],
                        seed, time.perf_counter() - t0)
    return EXIT_OK


def cmd_predict(args) -> int:
    t0 = time.perf_counter()
    predictor, header = predictor_from_checkpoint(args.model)
    tx = _parse_triplet(args.tx, "--tx")
    values = predictor.coverage_map(tx, args.pattern, args.height, args.res)
    coverage.save_map(args.out, values, predictor.scene.bounds_min,
                      predictor.scene.bounds_max, args.height,
                      predictor.p_min_db, predictor.p_max_db)
    if args.pgm:
        coverage.save_pgm(args.pgm, values)
    config = {"model": args.model, "tx": args.tx, "pattern": args.pattern,
              "height": args.height, "res": args.res, "out": args.out,
              "pgm": args.pgm}
    outputs = [args.out] + ([args.pgm] if args.pgm else [])
    _write_manifest("predict", args.out, config, [args.model], outputs,
                    None, time.perf_counter() - t0)
    print(f"wrote {args.out}: {args.res}x{args.res} map")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    seed = _resolve_seed(args.seed)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 3])))
    cfg = ModelConfig.micro()
    points = rng.uniform(-1, 1, size=(20, 3))
    probes = rng.uniform(-1, 1, size=(5, 3))
    tx = rng.uniform(-1, 1, size=(1, 3))
    rx = rng.uniform(-1, 1, size=(6, 3))
    graph = build_links(points, probes, tx, rx, cfg.n, cfg.K, with_rx_point_links=True)
    params = init_params(cfg, seed)
    targets = rng.uniform(0, 1, size=6)

    def loss_fn():
        out = forward_group(params, cfg, points, graph, 0, 1, np.arange(6))
        return ad.mse_loss(out, targets)

    worst, report = ad.finite_difference_check(loss_fn, params)
    for name in sorted(report):
        print(f"{name}: rel_err={report[name]:.3e}")
    print(f"worst: {worst:.3e}")
    if worst >= 1e-4:
        raise NumericalError(f"gradient check failed: worst relative error {worst:.3e}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .server import build_state, create_app

    state = build_state(args.model)
    app = create_app(state)
    print(f"serving {args.model} on {args.addr}:{args.port}")
    uvicorn.run(app, host=args.addr, port=args.port, log_level="warning")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radiofield",
                                     description="Neural point-field radio coverage toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file supplying any flag (flags override)")
        p.add_argument("--seed", type=int, default=None,
                       help="random seed (falls back to RPN_SEED, then 0)")

    p = sub.add_parser("dataset", help="generate a ground-truth dataset with the oracle")
    common(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tx-count", type=int, default=48)
    p.add_argument("--tx-seed", type=int, default=None)
    p.add_argument("--tx-height-min", type=float, default=4.0)
    p.add_argument("--tx-height-max", type=float, default=18.0)
    p.add_argument("--rx-grid", default="32x32x1")
    p.add_argument("--rx-heights", default="1.5")
    p.add_argument("--patterns", default="0,1")
    p.add_argument("--freq", type=float, default=2.14e9)
    p.add_argument("--max-reflections", type=int, default=2)
    p.add_argument("--diffraction", action="store_true")
    p.add_argument("--p-min-db", type=float, default=-160.0)
    p.add_argument("--p-max-db", type=float, default=-50.0)
    p.add_argument("--density", type=float, default=0.05)
    p.add_argument("--sample-seed", type=int, default=1)
    p.add_argument("--probe-spacing", type=float, default=None)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="train the coverage model")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=1000)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--K", type=int, default=8)
    p.add_argument("--density", type=float, default=None)
    p.add_argument("--sample-seed", type=int, default=None)
    p.add_argument("--probe-spacing", type=float, default=None)
    p.add_argument("--history", default=None)
    p.add_argument("--checkpoint-interval", type=int, default=0,
                   help="save a periodic checkpoint every k epochs")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset's validation split")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train full vs no-probe variants")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=1000)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--patience", type=int, default=0)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--K", type=int, default=8)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("baseline", help="train the comparison MLP")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=1000)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--patience", type=int, default=20)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("predict", help="emit a coverage map from a checkpoint")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--tx", required=True, help="transmitter position x,y,z (meters)")
    p.add_argument("--pattern", type=int, default=0)
    p.add_argument("--height", type=float, default=1.5)
    p.add_argument("--res", type=int, default=64)
    p.add_argument("--out", required=True)
    p.add_argument("--pgm", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gradcheck", help="finite-difference check of the model gradients")
    common(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("serve", help="start the prediction HTTP service")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--addr", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    return parser


def _subparser_defaults(parser: argparse.ArgumentParser, command: str) -> dict:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            sub = action.choices.get(command)
            if sub is not None:
                return {a.dest: a.default for a in sub._actions}
    return {}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args, _subparser_defaults(parser, args.command))
        return args.func(args)
    except (ValidationError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
