"""Command-line entry point.

Subcommands: ``synth`` (render a labeled corpus), ``train`` (fit the texture
ensemble and shape threshold, writing model files), ``score`` (run the fused
pipeline over a manifest, writing the audit CSV), and ``eval`` (train/test
experiment emitting reports, scatter CSV, and optional figures).

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error. All
outputs are byte-identical across runs for identical flags and seeds.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .bsif import default_filter_banks, load_filter_bank, save_filter_bank
from .classifier import LossKind, load_ensemble, save_ensemble
from .core import format_float, load_manifest, split_by_pattern, split_subject_disjoint
from .core import kfold_subject_splits
from .errors import DataError, NumericsError
from .evaluation import (
    ExperimentConfig,
    aggregate_reports,
    load_capture_pair,
    run_experiment,
    train_models,
)
from .fusion import FusionConfig, run_pipeline, write_audit_csv
from .photometric import (
    default_lights,
    load_threshold_model,
    save_threshold_model,
    write_scores_csv,
)
from .synthetic import CorpusConfig, make_corpus

_SETTINGS_FILE = "settings.txt"


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors, per the CLI contract."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _angle(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 90.0:
        raise argparse.ArgumentTypeError("light angle must lie strictly between 0 and 90")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError("fraction must lie strictly between 0 and 1")
    return value


def _box_fraction(text: str) -> float:
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError("box fraction must lie in (0, 1]")
    return value


def _add_training_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--banks", nargs="+", metavar="PATH",
                        help="filter-bank files (default: built-in random banks)")
    parser.add_argument("--light-angle", type=_angle, default=30.0, metavar="DEG",
                        help="illuminator angle from the optical axis (default 30)")
    parser.add_argument("--loss", choices=[k.value for k in LossKind], default="logistic",
                        help="training loss (default logistic)")
    parser.add_argument("--epochs", type=int, default=500, help="training epochs (default 500)")
    parser.add_argument("--learning-rate", type=float, default=0.1,
                        help="gradient-descent step size (default 0.1)")
    parser.add_argument("--l2", type=float, default=1e-3,
                        help="l2 penalty on classifier weights (default 1e-3)")
    parser.add_argument("--box-fraction", type=_box_fraction, default=0.5, metavar="F",
                        help="centered-box side fraction for texture pooling (default 0.5)")
    parser.add_argument("--mask-fraction", type=_box_fraction, default=0.5, metavar="F",
                        help="centered-box fraction for generated occlusion masks (default 0.5)")
    parser.add_argument("--seed", type=int, default=0, help="training seed (default 0)")


# The one environment variable honored: a directory of default bank files
# used when --banks is not given. All other behavior is flag-driven.
CONFIG_DIR_ENV = "IRISPAD_CONFIG_DIR"


def _load_banks(args) -> list:
    if args.banks:
        return [load_filter_bank(p) for p in args.banks]
    config_dir = os.environ.get(CONFIG_DIR_ENV)
    if config_dir:
        paths = sorted(Path(config_dir).glob("*.txt"))
        if not paths:
            raise DataError(f"{CONFIG_DIR_ENV}={config_dir} holds no .txt bank files")
        return [load_filter_bank(p) for p in paths]
    return default_filter_banks()


def _write_settings(path: Path, values: dict) -> None:
    lines = [f"{key} {format_float(value)}" for key, value in values.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


_REQUIRED_SETTINGS = ("light_angle_deg", "box_fraction", "mask_fraction")


def _read_settings(path: Path) -> dict:
    if not path.is_file():
        raise DataError(f"settings file not found: {path}")
    values = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, _, raw = line.partition(" ")
        try:
            values[key] = float(raw)
        except ValueError:
            raise DataError(f"{path}: non-numeric setting '{line}'") from None
    missing = [key for key in _REQUIRED_SETTINGS if key not in values]
    if missing:
        raise DataError(f"{path}: missing settings: {', '.join(missing)}")
    return values


def cmd_synth(args) -> int:
    config = CorpusConfig(
        n_flat=args.flat,
        n_bumpy=args.bumpy,
        n_opaque=args.opaque,
        width=args.width,
        height=args.height,
        amplitude=args.amplitude,
        coverage=args.coverage,
        noise_sd=args.noise_sd,
        light_angle_deg=args.light_angle,
        seed=args.seed,
    )
    manifest = make_corpus(config, args.out)
    print(
        f"wrote {len(manifest)} entries ({args.flat} flat, {args.bumpy} bumpy, "
        f"{args.opaque} opaque) to {Path(args.out) / 'manifest.csv'}"
    )
    return 0


def cmd_train(args) -> int:
    manifest = load_manifest(args.manifest)
    banks = _load_banks(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    model3d, ensemble, train_scores = train_models(
        manifest,
        banks,
        light_angle_deg=args.light_angle,
        box_fraction=args.box_fraction,
        mask_fraction=args.mask_fraction,
        loss_kind=LossKind(args.loss),
        l2_penalty=args.l2,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        seed=args.seed,
    )

    banks_dir = out / "banks"
    banks_dir.mkdir(exist_ok=True)
    for bank in banks:
        save_filter_bank(bank, banks_dir / f"{bank.name}.txt")
    save_ensemble(ensemble, out / "ensemble")
    save_threshold_model(model3d, out / "model3d.txt")
    write_scores_csv(train_scores, out / "train_scores_3d.csv")
    _write_settings(
        out / _SETTINGS_FILE,
        {
            "light_angle_deg": args.light_angle,
            "box_fraction": args.box_fraction,
            "mask_fraction": args.mask_fraction,
        },
    )
    print(
        f"trained {len(ensemble.members)}-member texture ensemble "
        f"(threshold {ensemble.decision_threshold:.6g}) and shape threshold "
        f"{model3d.threshold:.6g}; models in {out}"
    )
    return 0


def cmd_score(args) -> int:
    manifest = load_manifest(args.manifest)
    models = Path(args.models)
    settings = _read_settings(models / _SETTINGS_FILE)
    ensemble = load_ensemble(models / "ensemble" / "ensemble.txt")
    model3d = load_threshold_model(models / "model3d.txt")
    banks = [
        load_filter_bank(models / "banks" / f"{member.bank_name}.txt")
        for member in ensemble.members
    ]
    lights = default_lights(settings["light_angle_deg"])
    config = FusionConfig(ensemble=ensemble, model3d=model3d)

    records = []
    for entry in manifest.entries:
        pair = load_capture_pair(manifest, entry, lights, settings["mask_fraction"])
        result = run_pipeline(pair, config, banks, settings["box_fraction"])
        records.append((entry.sample_id, result, entry.label))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_audit_csv(records, out / "audit.csv")
    attacks = sum(1 for _, r, _ in records if r.fused.kind.value == "attack")
    unscorable = sum(1 for _, r, _ in records if r.d3 is None)
    print(
        f"scored {len(records)} pairs ({attacks} fused attack verdicts, "
        f"{unscorable} unscorable in 3d); audit in {out / 'audit.csv'}"
    )
    return 0


def _experiment_config(args, require_disjoint: bool) -> ExperimentConfig:
    return ExperimentConfig(
        banks=_load_banks(args),
        light_angle_deg=args.light_angle,
        box_fraction=args.box_fraction,
        mask_fraction=args.mask_fraction,
        loss_kind=LossKind(args.loss),
        l2_penalty=args.l2,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        seed=args.seed,
        require_subject_disjoint=require_disjoint,
        group_by=args.group_by,
    )


def _print_experiment(tag: str, result) -> None:
    report = result.report_fusion
    apcer = "n/a" if report.apcer is None else f"{report.apcer:.4f}"
    bpcer = "n/a" if report.bpcer is None else f"{report.bpcer:.4f}"
    print(
        f"{tag}: fusion accuracy {report.accuracy:.4f} "
        f"(apcer {apcer}, bpcer {bpcer}, {result.unscorable_count} unscorable)"
    )
    for warning in result.warnings:
        print(f"{tag}: warning: {warning}")


def cmd_eval(args) -> int:
    out = Path(args.out)
    require_disjoint = not args.allow_subject_overlap
    config = _experiment_config(args, require_disjoint)

    if args.train_manifest:
        train = load_manifest(args.train_manifest)
        test = load_manifest(args.test_manifest)
        result = run_experiment(train, test, config, out_dir=out, plot=args.plot)
        _print_experiment("eval", result)
        return 0

    manifest = load_manifest(args.manifest)
    if args.protocol == "pattern":
        regular, irregular = split_by_pattern(manifest)
        for tag, tr, te in (
            ("regular_to_irregular", regular, irregular),
            ("irregular_to_regular", irregular, regular),
        ):
            result = run_experiment(tr, te, config, out_dir=out / tag, plot=args.plot)
            _print_experiment(tag, result)
        return 0

    if args.folds > 1:
        splits = kfold_subject_splits(manifest, args.folds, args.seed)
        fold_reports = {"2d": [], "3d": [], "fusion": []}
        for index, (train, test) in enumerate(splits):
            result = run_experiment(
                train, test, config, out_dir=out / f"fold{index}", plot=args.plot
            )
            _print_experiment(f"fold{index}", result)
            fold_reports["2d"].append(result.report_2d)
            if result.report_3d is not None:
                fold_reports["3d"].append(result.report_3d)
            fold_reports["fusion"].append(result.report_fusion)
        out.mkdir(parents=True, exist_ok=True)
        import json

        summary = {
            kind: aggregate_reports(reports) if reports else None
            for kind, reports in fold_reports.items()
        }
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", "utf-8")
        print(f"wrote fold summary to {out / 'summary.json'}")
        return 0

    train, test = split_subject_disjoint(manifest, args.split_fraction, args.seed)
    result = run_experiment(train, test, config, out_dir=out, plot=args.plot)
    _print_experiment("eval", result)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="irispad", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", parents=[], help="render a labeled synthetic corpus")
    synth.add_argument("--out", required=True, metavar="DIR", help="corpus output directory")
    synth.add_argument("--flat", type=int, default=8, help="bona fide flat scenes (default 8)")
    synth.add_argument("--bumpy", type=int, default=8, help="relief attack scenes (default 8)")
    synth.add_argument("--opaque", type=int, default=0,
                       help="opaque-print attack scenes (default 0)")
    synth.add_argument("--width", type=int, default=64, help="scene width (default 64)")
    synth.add_argument("--height", type=int, default=64, help="scene height (default 64)")
    synth.add_argument("--amplitude", type=float, default=0.3,
                       help="mean slope of relief scenes (default 0.3)")
    synth.add_argument("--coverage", type=float, default=0.25,
                       help="printed-dot coverage fraction (default 0.25)")
    synth.add_argument("--noise-sd", type=float, default=0.0,
                       help="Gaussian pixel noise sd (default 0)")
    synth.add_argument("--light-angle", type=_angle, default=30.0, metavar="DEG")
    synth.add_argument("--seed", type=int, default=1, help="corpus seed (default 1)")
    synth.set_defaults(func=cmd_synth)

    train = sub.add_parser("train", help="fit models from a manifest and write them")
    train.add_argument("--manifest", required=True, metavar="PATH")
    train.add_argument("--out", required=True, metavar="DIR", help="model output directory")
    _add_training_flags(train)
    train.set_defaults(func=cmd_train)

    score = sub.add_parser("score", help="run the fused pipeline over a manifest")
    score.add_argument("--manifest", required=True, metavar="PATH")
    score.add_argument("--models", required=True, metavar="DIR",
                       help="directory written by 'train'")
    score.add_argument("--out", required=True, metavar="DIR")
    score.set_defaults(func=cmd_score)

    evaluate = sub.add_parser("eval", help="train/test experiment with reports")
    evaluate.add_argument("--out", required=True, metavar="DIR")
    evaluate.add_argument("--manifest", metavar="PATH",
                          help="single manifest to split (see --protocol, --split-fraction)")
    evaluate.add_argument("--train-manifest", metavar="PATH",
                          help="explicit training manifest (with --test-manifest)")
    evaluate.add_argument("--test-manifest", metavar="PATH")
    evaluate.add_argument("--protocol", choices=["random", "pattern"], default="random",
                          help="random subject-disjoint split, or regular/irregular "
                               "pattern split run in both directions (default random)")
    evaluate.add_argument("--split-fraction", type=_fraction, default=0.6, metavar="F",
                          help="train share of subjects for the random protocol (default 0.6)")
    evaluate.add_argument("--folds", type=int, default=0,
                          help="subject-disjoint k-fold cross-validation (random protocol)")
    evaluate.add_argument("--group-by", choices=["brand", "sensor", "pattern"],
                          default="brand", help="per-group report breakdown (default brand)")
    evaluate.add_argument("--allow-subject-overlap", action="store_true",
                          help="skip the subject-disjointness check")
    evaluate.add_argument("--plot", action="store_true",
                          help="also render SVG figures (CSV stays canonical)")
    _add_training_flags(evaluate)
    evaluate.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1

    if args.command == "eval":
        has_pair = bool(args.train_manifest or args.test_manifest)
        if has_pair and (not args.train_manifest or not args.test_manifest):
            parser_error = "--train-manifest and --test-manifest must be given together"
        elif has_pair and args.manifest:
            parser_error = "--manifest conflicts with --train-manifest/--test-manifest"
        elif not has_pair and not args.manifest:
            parser_error = "eval needs --manifest or --train-manifest/--test-manifest"
        elif has_pair and args.protocol == "pattern":
            parser_error = "--protocol pattern needs a single --manifest"
        elif args.protocol == "pattern" and args.folds > 1:
            parser_error = "--folds applies to the random protocol only"
        else:
            parser_error = None
        if parser_error:
            print(f"irispad eval: error: {parser_error}", file=sys.stderr)
            return 1

    try:
        return int(args.func(args) or 0)
    except DataError as exc:
        print(f"irispad {args.command}: data error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"irispad {args.command}: numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
