"""Command-line interface.

Subcommands: synth, eigen, train, eval, respond, oversmooth, waveform,
thm-check, search. Every artifact-producing command writes exactly one run
manifest next to its primary output recording the resolved configuration,
input hashes and output hashes. Exit codes: 0 success, 1 usage error,
2 validation or check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .approx import (WaveformSpec, filter_space_dim, graph_space_dim, run_fuzz,
                     waveform_experiment)
from .data import DatasetFormatError, load_dataset, save_dataset
from .filterbank import freq_response
from .graph import (apply_power, feature_variance_mean, pairwise_distance_mean,
                    sym_normalize, synth_csbm)
from .model import forward, loss as model_loss, predict
from .serialize import (format_float, load_checkpoint, make_manifest,
                        read_eigen_cache, save_checkpoint, sha256_file,
                        write_eigen_cache, write_json)
from .spectral import ConvergenceError, extreme_bands, lanczos_extreme
from .train import (TrainConfig, TrainingDiverged, random_search, train_loop)

EIGEN_TOL = 1e-10


class UsageError(Exception):
    pass


class CheckFailure(Exception):
    """A validation or verification step failed (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dataset_inputs(directory: Path) -> dict[str, str]:
    return {name: sha256_file(directory / name)
            for name in ("edges.tsv", "features.tsv", "labels.tsv", "splits.json")}


def _emit_manifest(primary_out: Path, command: str, config: dict,
                   inputs: dict, outputs: list[Path], seed, started: float,
                   manifest_path: Path | None = None) -> Path:
    out_hashes = {p.name: sha256_file(p) for p in outputs}
    manifest = make_manifest(command=command, config=config, inputs=inputs,
                             outputs=out_hashes, seed=seed, version=__version__,
                             started=started, finished=time.time())
    path = manifest_path or Path(str(primary_out) + ".manifest.json")
    write_json(path, manifest)
    return path


def _args_config(args) -> dict:
    return {k: v for k, v in vars(args).items()
            if k not in ("func", "command") and v is not None}


def _parse_eta(text: str) -> tuple[float, float, float]:
    """'0.4' couples the bands and complements the global term
    (eta_low = eta_high = 0.4, eta_gpr = 0.6); 'l,h,g' sets all three."""
    parts = text.split(",")
    if len(parts) == 1:
        v = float(parts[0])
        if not (0.0 <= v <= 1.0):
            raise UsageError("--eta single value must be in [0, 1]")
        return v, v, 1.0 - v
    if len(parts) == 3:
        l, h, g = (float(p) for p in parts)
        return l, h, g
    raise UsageError("--eta takes one value or a low,high,gpr triple")


def _resolve_eigen(ds_dir: Path, ds, ng, k_low: int, k_high: int, seed: int,
                   cache_path: Path | None, inputs: dict, outputs: list[Path],
                   force_exact: bool = False):
    """Load a valid eigen cache or compute (and optionally store) the bands.

    A cache is valid when its magic header parses, its manifest's edges
    hash matches the dataset and it holds at least the requested bands;
    anything else triggers recomputation so a stale cache can never poison
    a run.
    """
    edges_hash = sha256_file(ds_dir / "edges.tsv")
    if cache_path is not None and cache_path.is_file():
        manifest_path = Path(str(cache_path) + ".manifest.json")
        try:
            es = read_eigen_cache(cache_path)
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            cached_cfg = manifest.get("config", {})
            ok = (es.source_n == ds.n
                  and manifest.get("inputs", {}).get("edges.tsv") == edges_hash
                  and cached_cfg.get("tol") == EIGEN_TOL
                  and es.available_low >= k_low and es.available_high >= k_high)
            if ok and force_exact:
                ok = es.available_low == k_low and es.available_high == k_high
            if ok:
                inputs[cache_path.name] = sha256_file(cache_path)
                return es, False
        except (ValueError, OSError, json.JSONDecodeError):
            pass
    if k_low + k_high > ds.n:
        raise CheckFailure(f"requested {k_low}+{k_high} eigenpairs on {ds.n} nodes")
    es = lanczos_extreme(ng, k_low, k_high, tol=EIGEN_TOL, seed=seed)
    if cache_path is not None:
        write_eigen_cache(cache_path, es)
        outputs.append(cache_path)
    return es, True


# -- subcommands ---------------------------------------------------------


def cmd_synth(args) -> int:
    started = time.time()
    ds = synth_csbm(args.nodes, args.classes, args.p_in, args.p_out,
                    args.feat_dim, args.separation, args.seed)
    out_dir = Path(args.out)
    paths = save_dataset(ds, out_dir)
    config = {"nodes": args.nodes, "classes": args.classes, "p_in": args.p_in,
              "p_out": args.p_out, "feat_dim": args.feat_dim,
              "separation": args.separation}
    _emit_manifest(out_dir, "synth", config, {}, paths, args.seed, started,
                   manifest_path=out_dir / "manifest.json")
    print(f"wrote dataset with {ds.n} nodes, {ds.graph.num_edges} edges to {out_dir}")
    return 0


def cmd_eigen(args) -> int:
    started = time.time()
    ds_dir = Path(args.dataset)
    ds = load_dataset(ds_dir)
    ng = sym_normalize(ds.graph)
    inputs = _dataset_inputs(ds_dir)
    outputs: list[Path] = []
    cache = Path(args.out)
    es, computed = _resolve_eigen(ds_dir, ds, ng, args.k_low, args.k_high,
                                  args.seed, cache, inputs, outputs,
                                  force_exact=True)
    if not computed:
        outputs.append(cache)  # reused cache is still this run's output
    config = {"k_low": args.k_low, "k_high": args.k_high, "tol": EIGEN_TOL}
    _emit_manifest(cache, "eigen", config, inputs, outputs, args.seed, started)
    print(f"{'reused' if not computed else 'computed'} {len(es)} eigenpairs "
          f"(lambda in [{es.eigenvalues.min():.6f}, {es.eigenvalues.max():.6f}])")
    return 0


def _train_config(args) -> TrainConfig:
    eta_low, eta_high, eta_gpr = _parse_eta(args.eta)
    return TrainConfig(
        k_low=args.k_low, k_high=args.k_high, bins_low=args.bins_low,
        bins_high=args.bins_high, order=args.order, gpr_order=args.gpr_order,
        eta_low=eta_low, eta_high=eta_high, eta_gpr=eta_gpr,
        init_scheme=args.init, alpha=args.alpha, lr=args.lr,
        weight_decay=args.weight_decay, dropout=args.dropout,
        boundary_weight=args.boundary_weight, max_epochs=args.max_epochs,
        patience=args.patience, seed=args.seed)


def cmd_train(args) -> int:
    started = time.time()
    ds_dir = Path(args.dataset)
    ds = load_dataset(ds_dir)
    ng = sym_normalize(ds.graph)
    config = _train_config(args)
    inputs = _dataset_inputs(ds_dir)
    outputs: list[Path] = []
    cache = Path(args.eigen) if args.eigen else None
    es, _ = _resolve_eigen(ds_dir, ds, ng, config.k_low, config.k_high,
                           config.seed, cache, inputs, outputs)
    result = train_loop(ds, ng, es, config)

    ckpt = Path(args.checkpoint)
    save_checkpoint(ckpt, result.checkpoint, config.seed)
    outputs.append(ckpt)
    if args.out:
        log_path = Path(args.out)
        lines = [json.dumps(e) for e in result.epoch_log]
        lines.append(json.dumps({"summary": {
            "best_val_acc": result.best_val_acc,
            "test_acc_at_best_val": result.test_acc_at_best_val,
            "best_epoch": result.best_epoch,
            "epochs_run": len(result.loss_history)}}))
        log_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        outputs.append(log_path)
    _emit_manifest(ckpt, "train", _args_config(args) | {"resolved_etas": [
        config.eta_low, config.eta_high, config.eta_gpr]},
        inputs, outputs, config.seed, started)
    print(f"best_val_acc={result.best_val_acc:.6f} "
          f"test_acc={result.test_acc_at_best_val:.6f} "
          f"best_epoch={result.best_epoch}")
    return 0


def _restricted_es_for_checkpoint(params, ds_dir, ds, ng, seed, cache_path,
                                  inputs, outputs):
    part = params.filter.partition
    es, _ = _resolve_eigen(ds_dir, ds, ng, part.k_low, part.k_high, seed,
                           cache_path, inputs, outputs)
    return extreme_bands(es, part.k_low, part.k_high)


def cmd_eval(args) -> int:
    started = time.time()
    ds_dir = Path(args.dataset)
    ds = load_dataset(ds_dir)
    ng = sym_normalize(ds.graph)
    params, train_seed = load_checkpoint(args.checkpoint)
    inputs = _dataset_inputs(ds_dir)
    inputs[Path(args.checkpoint).name] = sha256_file(args.checkpoint)
    outputs: list[Path] = []
    cache = Path(args.eigen) if args.eigen else None
    es_r = _restricted_es_for_checkpoint(params, ds_dir, ds, ng, train_seed,
                                         cache, inputs, outputs)
    trace = forward(params, ds.features, ng, es_r, mode="eval")
    pred = predict(trace)
    metrics = {"n": ds.n, "classes": ds.num_classes}
    for name in ("train", "val", "test"):
        idx = ds.splits[name]
        metrics[f"{name}_acc"] = float(np.mean(pred[idx] == ds.labels[idx]))
        metrics[f"{name}_loss"] = model_loss(trace, ds.labels, idx)
    out = Path(args.out)
    write_json(out, metrics)
    outputs.append(out)
    _emit_manifest(out, "eval", {"checkpoint": str(args.checkpoint)},
                   inputs, outputs, train_seed, started)
    print(" ".join(f"{k}={v:.6f}" for k, v in metrics.items()
                   if k.endswith("_acc")))
    return 0


def cmd_respond(args) -> int:
    started = time.time()
    params, train_seed = load_checkpoint(args.checkpoint)
    es = read_eigen_cache(args.eigen)
    inputs = {Path(args.checkpoint).name: sha256_file(args.checkpoint),
              Path(args.eigen).name: sha256_file(args.eigen)}
    try:
        resp = freq_response(params.filter, es)
    except ValueError as exc:
        raise CheckFailure(
            f"eigen cache does not match the checkpoint partition: {exc}") from exc
    out = Path(args.out)
    lines = ["lambda,response"]
    for lam, r in zip(es.eigenvalues, resp):
        lines.append(f"{format_float(lam)},{format_float(r)}")
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _emit_manifest(out, "respond", {"checkpoint": str(args.checkpoint)},
                   inputs, [out], train_seed, started)
    print(f"wrote {len(es)} response rows to {out}")
    return 0


def cmd_oversmooth(args) -> int:
    started = time.time()
    ds_dir = Path(args.dataset)
    ds = load_dataset(ds_dir)
    ng = sym_normalize(ds.graph)
    powers = sorted({int(p) for p in args.powers.split(",")})
    if not powers or powers[0] < 0:
        raise UsageError("--powers must be nonnegative integers")
    rows = []
    Y = ds.features.copy()
    prev = 0
    for j in powers:
        Y = apply_power(ng, Y, j - prev)
        prev = j
        rows.append((j, pairwise_distance_mean(Y), feature_variance_mean(Y)))
    out = Path(args.out)
    lines = ["power,mean_pairwise_distance,mean_feature_variance"]
    for j, dist, var in rows:
        lines.append(f"{j},{format_float(dist)},{format_float(var)}")
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _emit_manifest(out, "oversmooth", {"powers": powers},
                   _dataset_inputs(ds_dir), [out], args.seed, started)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def cmd_waveform(args) -> int:
    started = time.time()
    rmse_single, rmse_multi = waveform_experiment(
        WaveformSpec(), args.grid, args.gpr_order, args.order, args.supports,
        args.seed)
    summary = {"grid_n": args.grid, "degree_single": args.gpr_order,
               "degree_adaptive": args.order, "supports": args.supports,
               "seed": args.seed, "rmse_single": rmse_single,
               "rmse_multi": rmse_multi}
    print(f"rmse_single={rmse_single:.6f} rmse_multi={rmse_multi:.6f} "
          f"ratio={rmse_single / max(rmse_multi, 1e-300):.2f}")
    if args.out:
        out = Path(args.out)
        write_json(out, summary)
        _emit_manifest(out, "waveform", summary, {}, [out], args.seed, started)
    if rmse_multi > rmse_single:
        raise CheckFailure("adaptive fit worse than the single fit")
    return 0


def cmd_thm_check(args) -> int:
    started = time.time()
    suites: dict[str, bool] = {}

    fuzz = run_fuzz(args.trials, args.seed)
    suites["thm41-fuzz"] = fuzz["violations"] == 0
    suites["case1-identity"] = fuzz["worst_case1_identity"] <= 1e-9

    dims_ok = True
    rng = np.random.default_rng(args.seed)
    for K, Kp, t, n in ((1, 1, 2, 10), (10, 5, 10, 50), (2, 2, 3, 12)):
        lam = np.sort(rng.uniform(-1.0, 1.0, n))
        fd = filter_space_dim(lam, K, Kp, t)
        gd = graph_space_dim(lam, K, Kp, t, seed=args.seed)
        masked = filter_space_dim(lam, K, Kp, t, include_global=False)
        dims_ok &= (fd == gd == K + 2 * Kp + 3) and masked == 2 * (Kp + 1)
        dims_ok &= fd == (K + 1) + masked
    suites["dimension-ranks"] = bool(dims_ok)

    wave_ok = True
    rs, rm = waveform_experiment(WaveformSpec(), 250, 10, 5, 10, seed=0)
    wave_ok &= rm <= 0.5 * rs
    for s in range(5):
        a, b = waveform_experiment(WaveformSpec(), 250, 10, 5, 10, seed=s)
        wave_ok &= b <= a
    suites["waveform-margin"] = bool(wave_ok)

    for name, ok in suites.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    summary = {"trials": fuzz["trials"], "violations": fuzz["violations"],
               "max_gap": fuzz["max_gap"],
               "worst_case1_identity": fuzz["worst_case1_identity"],
               "suites": {k: ("PASS" if v else "FAIL") for k, v in suites.items()}}
    print(json.dumps(summary))
    if args.out:
        out = Path(args.out)
        write_json(out, summary)
        _emit_manifest(out, "thm-check", {"trials": args.trials}, {}, [out],
                       args.seed, started)
    return 0 if all(suites.values()) else 2


def cmd_search(args) -> int:
    started = time.time()
    ds_dir = Path(args.dataset)
    ds = load_dataset(ds_dir)
    ng = sym_normalize(ds.graph)
    inputs = _dataset_inputs(ds_dir)
    outputs: list[Path] = []
    k_cap = min(1024, ds.n // 2)
    cache = Path(args.eigen) if args.eigen else None
    es, _ = _resolve_eigen(ds_dir, ds, ng, k_cap, k_cap, args.seed, cache,
                           inputs, outputs)
    # Clamp the eigenpair sweep to what this graph can support.
    from .train import DEFAULT_SEARCH_RANGES

    feasible_k = [k for k in DEFAULT_SEARCH_RANGES["k_extreme"] if k <= k_cap]
    ranges = {"k_extreme": feasible_k or [k_cap]}
    best, log = random_search(ds, ng, es, ranges=ranges, trials=args.trials,
                              seed=args.seed)
    out = Path(args.out)
    write_json(out, {"best_val_acc": best.best_val_acc,
                     "test_acc_at_best_val": best.test_acc_at_best_val,
                     "trials": log})
    outputs.append(out)
    _emit_manifest(out, "search", {"trials": args.trials}, inputs, outputs,
                   args.seed, started)
    print(f"best_val_acc={best.best_val_acc:.6f} "
          f"test_acc={best.test_acc_at_best_val:.6f}")
    return 0


# -- parser --------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="specfilt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=0)
        return p

    p = add("synth", cmd_synth, "write a synthetic block-model dataset directory")
    p.add_argument("--out", required=True)
    p.add_argument("--nodes", type=int, default=300)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--p-in", type=float, default=0.05)
    p.add_argument("--p-out", type=float, default=0.01)
    p.add_argument("--feat-dim", type=int, default=16)
    p.add_argument("--separation", type=float, default=1.0)

    p = add("eigen", cmd_eigen, "compute and cache extreme eigenpairs")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k-low", type=int, default=16)
    p.add_argument("--k-high", type=int, default=16)

    p = add("train", cmd_train, "train a model on a dataset directory")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--eigen")
    p.add_argument("--out", help="optional JSONL epoch log")
    p.add_argument("--k-low", type=int, default=16)
    p.add_argument("--k-high", type=int, default=16)
    p.add_argument("--bins-low", type=int, default=2)
    p.add_argument("--bins-high", type=int, default=2)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--gpr-order", type=int, default=10)
    p.add_argument("--eta", default="0.5")
    p.add_argument("--init", choices=("ppr", "nppr", "random"), default="ppr")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--weight-decay", type=float, default=5e-4)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--boundary-weight", type=float, default=0.0)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--patience", type=int, default=200)

    p = add("eval", cmd_eval, "evaluate a checkpoint on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--eigen")
    p.add_argument("--out", required=True)

    p = add("respond", cmd_respond, "dump the frequency response of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--eigen", required=True)
    p.add_argument("--out", required=True)

    p = add("oversmooth", cmd_oversmooth,
            "feature collapse statistics under repeated propagation")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--powers", default="1,2,4,8,16,32,64")

    p = add("waveform", cmd_waveform, "run the composite-waveform fitting experiment")
    p.add_argument("--out")
    p.add_argument("--grid", type=int, default=250)
    p.add_argument("--supports", type=int, default=10)
    p.add_argument("--gpr-order", type=int, default=10,
                   help="degree of the single global fit")
    p.add_argument("--order", type=int, default=5,
                   help="degree of the adaptive pieces")

    p = add("thm-check", cmd_thm_check, "run the approximation-theory check suites")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--out")

    p = add("search", cmd_search, "seeded random hyperparameter search")
    p.add_argument("--dataset", required=True)
    p.add_argument("--eigen")
    p.add_argument("--out", required=True)
    p.add_argument("--trials", type=int, default=10)

    return parser


def cmd_dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (CheckFailure, DatasetFormatError, ValueError, OSError,
            ConvergenceError, TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cmd_dispatch(sys.argv[1:]))
