"""Command-line entry point: synth, split, train, eval, ablate, validate.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or invalid
inputs), 3 numerical divergence (non-finite loss during training).

Every subcommand is deterministic given its inputs and seeds; wall-clock
timestamps appear only in the ``run.log`` sidecar, never in artifacts or
on stdout, so repeated invocations produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from .ablation import render_markdown, run_ablation, save_reports_json
from .adam import save_adam_state
from .feature_store import (Dataset, DatasetSplit, IMAGE_DIM, MODALITIES,
                            TEXT_DIM, modality_dim, read_feature_file,
                            stratified_split, write_feature_file)
from .metrics import (MetricsReport, baseline_accuracy, max_accuracy,
                      pr_curve_and_ap, smoothed_max_accuracy, write_pr_csv)
from .mlp import load_checkpoint, save_checkpoint
from .synthetic import SyntheticSpec, generate
from .trainer import DivergenceError, TrainConfig, TrainResult, evaluate, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGENCE = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # Route argparse failures through our exit-code taxonomy.
    def error(self, message):
        raise _UsageError(f"{message}\n{self.format_usage().rstrip()}")


def _seed_list(text: str) -> list[int]:
    try:
        seeds = [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ValueError(f"expected comma-separated integers, got {text!r}")
    if not seeds:
        raise ValueError("empty seed list")
    if len(set(seeds)) != len(seeds):
        raise ValueError(f"repeated seeds in {text!r}")
    return seeds


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fusion-bench",
                     description="Multimodal fusion classification toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], prog="fusion-bench synth",
                       help="generate a synthetic feature file")
    p.add_argument("--spec", required=True, help="JSON generator spec")
    p.add_argument("--out", required=True, help="output FUSB path")

    p = sub.add_parser("split", prog="fusion-bench split",
                       help="stratified train/validation split")
    p.add_argument("--in", dest="inp", required=True, help="input FUSB path")
    p.add_argument("--fraction", type=_fraction, default=0.85,
                   help="train fraction in (0, 1), default 0.85")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output split JSON path")

    p = sub.add_parser("train", prog="fusion-bench train",
                       help="train one modality configuration")
    p.add_argument("--in", dest="inp", required=True, help="input FUSB path")
    p.add_argument("--split", required=True, help="split JSON path")
    p.add_argument("--modality", choices=MODALITIES)
    p.add_argument("--config", help="JSON file mirroring TrainConfig")
    p.add_argument("--epochs", type=int, help="override epoch budget")
    p.add_argument("--seed", type=int, help="override config seed")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("eval", prog="fusion-bench eval",
                       help="evaluate a checkpoint on one split side")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--in", dest="inp", required=True, help="input FUSB path")
    p.add_argument("--split", required=True, help="split JSON path")
    p.add_argument("--side", choices=("val", "train"), default="val")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out-dir", help="optionally write metrics.json + pr_curve.csv")

    p = sub.add_parser("ablate", prog="fusion-bench ablate",
                       help="three-way modality comparison")
    p.add_argument("--in", dest="inp", required=True, help="input FUSB path")
    p.add_argument("--split", required=True, help="split JSON path")
    p.add_argument("--config", help="JSON file mirroring TrainConfig")
    p.add_argument("--epochs", type=int, help="override epoch budget")
    p.add_argument("--seed", type=int, help="override config seed")
    p.add_argument("--seeds", type=_seed_list,
                   help="comma-separated seeds for multi-seed repetition")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("validate", prog="fusion-bench validate",
                       help="check feature file integrity")
    p.add_argument("--in", dest="inp", required=True, help="input FUSB path")

    return parser


def _log_line(out_dir: Path, message: str) -> None:
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    with (out_dir / "run.log").open("a", encoding="utf-8") as fh:
        fh.write(f"{stamp} {message}\n")


def _load_config(args) -> TrainConfig:
    base: dict = {}
    if args.config:
        obj = json.loads(Path(args.config).read_text(encoding="utf-8"))
        base = TrainConfig.from_json_dict(obj).to_json_dict()
    if getattr(args, "modality", None):
        base["modality"] = args.modality
    if args.epochs is not None:
        base["epochs"] = args.epochs
    if args.seed is not None:
        base["seed"] = args.seed
    return TrainConfig.from_json_dict(base)


def _run_report(ds: Dataset, split: DatasetSplit, cfg: TrainConfig,
                result: TrainResult) -> MetricsReport:
    _, _, scores = evaluate(result.best_params, ds, split.val_ids,
                            cfg.modality, cfg.threshold)
    labels = [ds.get(i).label for i in split.val_ids]
    pr_points, ap = pr_curve_and_ap(scores, labels)
    return MetricsReport(
        config_label=cfg.modality,
        max_accuracy=max_accuracy(result.curves),
        smoothed_max_accuracy=smoothed_max_accuracy(result.curves),
        baseline_accuracy=baseline_accuracy(ds, split.val_ids),
        ap=ap,
        pr_curve=tuple(pr_points),
    )


def _write_run_artifacts(out_dir: Path, ds: Dataset, split: DatasetSplit,
                         cfg: TrainConfig, result: TrainResult,
                         report: MetricsReport | None = None) -> MetricsReport:
    out_dir.mkdir(parents=True, exist_ok=True)
    result.curves.write_csv(out_dir)
    result.curves.save_json(out_dir / "curves.json")
    meta = {"modality": cfg.modality, "seed": cfg.seed}
    save_checkpoint(out_dir / "checkpoint_best.ckpt", result.best_params,
                    {**meta, "epoch": result.best_epoch})
    save_checkpoint(out_dir / "checkpoint_final.ckpt", result.params,
                    {**meta, "epoch": cfg.epochs})
    save_adam_state(out_dir / "optimizer_final.bin", result.final_adam_state)
    if report is None:
        report = _run_report(ds, split, cfg, result)
    report.save(out_dir / "metrics.json")
    write_pr_csv(out_dir / "pr_curve.csv", report.pr_curve)
    return report


def _cmd_synth(args) -> int:
    spec = SyntheticSpec.from_json_dict(
        json.loads(Path(args.spec).read_text(encoding="utf-8")))
    ds = generate(spec)
    write_feature_file(ds, args.out)
    n0, n1 = ds.class_counts()
    print(f"wrote {args.out}: {len(ds)} records ({n1} hate / {n0} non-hate)")
    return EXIT_OK


def _cmd_split(args) -> int:
    ds = read_feature_file(args.inp)
    split = stratified_split(ds, args.fraction, args.seed)
    split.save(args.out)
    print(f"wrote {args.out}: train {len(split.train_ids)} / "
          f"val {len(split.val_ids)}")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = _load_config(args)
    ds = read_feature_file(args.inp)
    split = DatasetSplit.load(args.split)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _log_line(out_dir, f"train start modality={cfg.modality} seed={cfg.seed} "
                       f"epochs={cfg.epochs}")
    try:
        result = train(ds, split, cfg)
    except DivergenceError as exc:
        _log_line(out_dir, f"train diverged: {exc}")
        raise
    report = _write_run_artifacts(out_dir, ds, split, cfg, result)
    _log_line(out_dir, f"train done best_epoch={result.best_epoch}")
    print(f"best val accuracy {result.best_accuracy!r} "
          f"at epoch {result.best_epoch}")
    print(f"max accuracy {report.max_accuracy!r}, "
          f"smoothed max {report.smoothed_max_accuracy!r}, ap {report.ap!r}")
    print(f"artifacts in {out_dir}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    params, meta = load_checkpoint(args.model)
    modality = meta.get("modality")
    if modality is None:
        # Widths are distinct per modality, so the checkpoint shape decides.
        by_dim = {modality_dim(m): m for m in MODALITIES}
        modality = by_dim.get(params.input_dim)
        if modality is None:
            raise ValueError(
                f"cannot infer modality from input_dim {params.input_dim}")
    elif modality_dim(modality) != params.input_dim:
        raise ValueError(
            f"checkpoint modality {modality!r} does not match "
            f"input_dim {params.input_dim}")
    ds = read_feature_file(args.inp)
    split = DatasetSplit.load(args.split)
    ids = split.val_ids if args.side == "val" else split.train_ids
    if not ids:
        raise ValueError(f"split has an empty {args.side} side")
    loss, accuracy, scores = evaluate(params, ds, ids, modality, args.threshold)
    labels = [ds.get(i).label for i in ids]
    pr_points, ap = pr_curve_and_ap(scores, labels)
    summary = {
        "accuracy": accuracy,
        "ap": ap,
        "baseline_accuracy": baseline_accuracy(ds, ids),
        "loss": loss,
        "modality": modality,
        "n": len(ids),
        "side": args.side,
        "threshold": args.threshold,
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "eval.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
        write_pr_csv(out_dir / "pr_curve.csv", pr_points)
        _log_line(out_dir, f"eval done model={args.model} side={args.side}")
    return EXIT_OK


def _cmd_ablate(args) -> int:
    if args.seeds is not None and args.seed is not None:
        raise _UsageError("--seed and --seeds are mutually exclusive")
    cfg = _load_config(args)
    ds = read_feature_file(args.inp)
    split = DatasetSplit.load(args.split)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def run_one(run_cfg: TrainConfig, run_dir: Path) -> None:
        run_dir.mkdir(parents=True, exist_ok=True)
        _log_line(out_dir, f"ablate start seed={run_cfg.seed}")
        outcome = run_ablation(ds, split, run_cfg)
        for report in outcome.reports:
            modality = report.config_label
            _write_run_artifacts(run_dir / modality, ds, split,
                                 replace(run_cfg, modality=modality),
                                 outcome.runs[modality], report)
        save_reports_json(run_dir / "ablation.json", outcome.reports)
        markdown = render_markdown(outcome.reports)
        (run_dir / "ablation.md").write_text(markdown, encoding="utf-8")
        _log_line(out_dir, f"ablate done seed={run_cfg.seed}")
        print(markdown, end="")

    if args.seeds is None:
        run_one(cfg, out_dir)
    else:
        for seed in args.seeds:
            print(f"## seed {seed}")
            run_one(replace(cfg, seed=seed), out_dir / f"seed-{seed}")
    print(f"artifacts in {out_dir}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    ds = read_feature_file(args.inp)
    n0, n1 = ds.class_counts()
    print(f"OK: {args.inp} holds {len(ds)} records "
          f"({n1} hate / {n0} non-hate), dims {TEXT_DIM}/{IMAGE_DIM}")
    return EXIT_OK


_HANDLERS = {
    "synth": _cmd_synth,
    "split": _cmd_split,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
