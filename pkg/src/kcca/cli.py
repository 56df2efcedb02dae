"""Command-line front end: prepare datasets, train solvers, evaluate, benchmark."""

from __future__ import annotations

import argparse
from pathlib import Path

from . import experiment
from .data import (
    make_synthetic_pair,
    read_matrix,
    detect_format,
    split_image_views,
    subset_indices,
    write_matrix,
)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return args.func(args)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kcca", description="Exact and approximate kernel CCA toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    prep = sub.add_parser("prepare", help="build view files from raw matrices")
    prep_sub = prep.add_subparsers(dest="action", required=True)

    split = prep_sub.add_parser("split-image", help="split row-major images into left/right half views")
    split.add_argument("--input", required=True)
    split.add_argument("--width", type=int, required=True)
    split.add_argument("--height", type=int, required=True)
    split.add_argument("--out-x", required=True)
    split.add_argument("--out-y", required=True)
    split.add_argument("--format", choices=("csv", "binary"), default="binary")
    split.add_argument("--manifest", default=None)
    split.set_defaults(func=_cmd_split_image)

    synth = prep_sub.add_parser("synth", help="sample a synthetic shared-latent view pair")
    synth.add_argument("--n", type=int, required=True)
    synth.add_argument("--dx", type=int, required=True)
    synth.add_argument("--dy", type=int, required=True)
    synth.add_argument("--latent", type=int, required=True)
    synth.add_argument("--noise", type=float, required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out-x", required=True)
    synth.add_argument("--out-y", required=True)
    synth.add_argument("--truth", default=None, help="optional file for the population correlations")
    synth.add_argument("--format", choices=("csv", "binary"), default="binary")
    synth.add_argument("--manifest", default=None)
    synth.set_defaults(func=_cmd_synth)

    subset = prep_sub.add_parser("subset", help="seeded row sample shared across paired files")
    subset.add_argument("--inputs", nargs="+", required=True)
    subset.add_argument("--outputs", nargs="+", required=True)
    subset.add_argument("--n", type=int, required=True)
    subset.add_argument("--seed", type=int, default=0)
    subset.add_argument("--format", choices=("csv", "binary"), default="binary")
    subset.add_argument("--manifest", default=None)
    subset.set_defaults(func=_cmd_subset)

    train = sub.add_parser("train", help="fit the solver described by a config file")
    train.add_argument("--config", required=True)
    train.add_argument("--seed", type=int, default=None, help="override the config seed")
    train.add_argument("--out", default=None, help="override the output directory")
    train.set_defaults(func=_cmd_train)

    ev = sub.add_parser("eval", help="score a saved model on held-out view files")
    ev.add_argument("--model", required=True)
    ev.add_argument("--test-x", required=True)
    ev.add_argument("--test-y", required=True)
    ev.set_defaults(func=_cmd_eval)

    bench = sub.add_parser("bench", help="run a batch of configs and tabulate the results")
    bench.add_argument("--configs", nargs="+", required=True)
    bench.add_argument("--out", required=True)
    bench.add_argument("--seed", type=int, default=None, help="override every config's seed")
    bench.set_defaults(func=_cmd_bench)
    return p


def _cmd_split_image(args) -> int:
    images = read_matrix(args.input, detect_format(args.input))
    pair = split_image_views(images, args.width, args.height)
    write_matrix(pair.x, args.out_x, args.format)
    write_matrix(pair.y, args.out_y, args.format)
    _write_prepare_manifest(args.manifest, args.out_x, {
        "command": "prepare split-image",
        "input": args.input,
        "width": args.width,
        "height": args.height,
        "out_x": args.out_x,
        "out_y": args.out_y,
        "format": args.format,
    })
    print(f"wrote {args.out_x} and {args.out_y} ({pair.n} rows, {pair.x.shape[1]} columns per view)")
    return 0


def _cmd_synth(args) -> int:
    pair, truth = make_synthetic_pair(args.n, args.dx, args.dy, args.latent, args.noise, args.seed)
    write_matrix(pair.x, args.out_x, args.format)
    write_matrix(pair.y, args.out_y, args.format)
    if args.truth is not None:
        write_matrix(truth[None, :], args.truth, args.format)
    _write_prepare_manifest(args.manifest, args.out_x, {
        "command": "prepare synth",
        "n": args.n,
        "dx": args.dx,
        "dy": args.dy,
        "latent": args.latent,
        "noise": args.noise,
        "seed": args.seed,
        "out_x": args.out_x,
        "out_y": args.out_y,
        "format": args.format,
    })
    print(f"wrote {args.out_x} and {args.out_y} ({args.n} rows)")
    return 0


def _cmd_subset(args) -> int:
    if len(args.inputs) != len(args.outputs):
        raise ValueError(f"got {len(args.inputs)} inputs but {len(args.outputs)} outputs")
    mats = [read_matrix(p, detect_format(p)) for p in args.inputs]
    n_total = mats[0].shape[0]
    for p, m in zip(args.inputs, mats):
        if m.shape[0] != n_total:
            raise ValueError(f"{p}: has {m.shape[0]} rows, expected {n_total} (inputs must pair up)")
    idx = subset_indices(n_total, args.n, args.seed)
    for m, outp in zip(mats, args.outputs):
        write_matrix(m[idx], outp, args.format)
    _write_prepare_manifest(args.manifest, args.outputs[0], {
        "command": "prepare subset",
        "inputs": ",".join(args.inputs),
        "outputs": ",".join(args.outputs),
        "n": args.n,
        "seed": args.seed,
        "format": args.format,
    })
    print(f"wrote {len(args.outputs)} files with {args.n} rows each")
    return 0


def _cmd_train(args) -> int:
    cfg = experiment.load_config(args.config, seed_override=args.seed, out_override=args.out)
    metrics = experiment.run_train(cfg)
    test = "" if metrics["test_corr"] is None else f" test_corr={metrics['test_corr']:.6f}"
    print(
        f"{metrics['method']}: train_corr={metrics['train_corr']:.6f}{test} "
        f"({metrics['seconds']:.2f}s) -> {cfg.out}"
    )
    return 0


def _cmd_eval(args) -> int:
    report = experiment.run_eval(args.model, args.test_x, args.test_y)
    print(f"method={report['method']} L={report['l']}")
    print(f"total_canonical_correlation={report['total']:.17g}")
    for i, s in enumerate(report["per_component"], start=1):
        print(f"component_{i}={s:.17g}")
    return 0


def _cmd_bench(args) -> int:
    rows = experiment.run_bench(args.configs, args.out, seed_override=args.seed)
    print(experiment.format_bench_table(rows), end="")
    failures = [r for r in rows if r.error is not None]
    for r in failures:
        print(f"failed: {r.method}: {r.error}")
    print(f"table written to {Path(args.out) / 'table.txt'}")
    return 0


def _write_prepare_manifest(manifest_path, first_output, entries: dict) -> None:
    path = Path(manifest_path) if manifest_path else Path(str(first_output) + ".manifest.txt")
    path.write_text("".join(f"{k}={v}\n" for k, v in entries.items()))


if __name__ == "__main__":
    raise SystemExit(main())
