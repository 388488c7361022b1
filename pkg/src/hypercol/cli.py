"""Command-line entry points: validate, run, report, params, predict."""

from __future__ import annotations

import argparse
import sys

from . import harness
from .hcf import Sample, read_container_file, write_container_file
from .model_io import load_model_file


def _cmd_validate(args) -> int:
    manifest = harness.load_manifest(args.manifest)
    problems = harness.validate_manifest(manifest)
    for p in problems:
        print(p)
    if problems:
        print(f"{len(problems)} problem(s) found")
        return 1
    print(
        f"OK: {len(manifest.train_paths)} train / {len(manifest.test_paths)} test, "
        f"input {manifest.input_h}x{manifest.input_w}, "
        f"tap channels {list(manifest.tap_channels)}"
    )
    return 0


def _cmd_run(args) -> int:
    cfg = harness.ExperimentConfig(
        manifest_path=args.manifest,
        models=tuple(args.models.split(",")),
        n=args.n,
        rate=args.rate,
        runs=args.runs,
        base_seed=args.seed,
        threshold=args.threshold,
        out_dir=args.out,
        block_rows=args.block_rows,
        svc_row_cap=args.svc_cap,
        save_models=args.save_models,
    )
    result = harness.run_experiment(cfg)
    print(f"wrote {len(result.rows)} run file(s) and summary.tsv under {cfg.out_dir}")
    return 0


def _cmd_report(args) -> int:
    result = harness.load_results(args.dir)
    summary_path = harness.write_summary(result)
    with open(summary_path) as fh:
        sys.stdout.write(fh.read())
    if args.compare:
        pairs = []
        for spec in args.compare:
            cand, _, base = spec.partition(":")
            if not base:
                print(f"--compare expects CANDIDATE:BASELINE, got {spec!r}")
                return 2
            pairs.append((cand, base))
        cmp_path = harness.write_comparisons(result, pairs)
        with open(cmp_path) as fh:
            sys.stdout.write(fh.read())
    return 0


def _cmd_params(args) -> int:
    model = load_model_file(args.model_file)
    print(model.parameter_count())
    return 0


def _cmd_predict(args) -> int:
    model = load_model_file(args.model)
    sample = read_container_file(args.sample)
    manifest_like_cfg = harness.HypercolumnConfig(
        input_h=sample.mask.shape[0],
        input_w=sample.mask.shape[1],
        expected_taps=len(sample.taps),
        expected_channels=sum(t.shape[0] for t in sample.taps),
    )
    mask = harness.predict_image(model, sample, manifest_like_cfg,
                                 block_rows=args.block_rows,
                                 threshold=args.threshold)
    out = Sample(image_id=sample.image_id, taps=[], mask=mask)
    write_container_file(out, args.out)
    print(f"wrote predicted mask for {sample.image_id!r} to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypercol",
        description="Sparse-hypercolumn segmentation experiments over HCF datasets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a manifest and every file it lists")
    p.add_argument("manifest")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("run", help="train the roster and evaluate on the test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--models", default=",".join(harness.MODEL_NAMES),
                   help="comma list from: " + ",".join(harness.MODEL_NAMES))
    p.add_argument("--n", type=int, required=True, help="training images per run")
    p.add_argument("--rate", type=float, required=True, help="stratified subsample rate")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", default="results")
    p.add_argument("--block-rows", type=int, default=8192)
    p.add_argument("--svc-cap", type=int, default=20_000)
    p.add_argument("--save-models", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="rebuild summary (and comparisons) from run files")
    p.add_argument("dir")
    p.add_argument("--compare", action="append", metavar="CANDIDATE:BASELINE")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("params", help="print the learned-parameter count of a model file")
    p.add_argument("model_file")
    p.set_defaults(func=_cmd_params)

    p = sub.add_parser("predict", help="predict one image's mask with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--sample", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--block-rows", type=int, default=8192)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=_cmd_predict)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
