"""``crossgp`` command line.

Subcommands: synth, ingest, featurize, pair, train, evaluate, importance, report.

Exit codes: 0 success, 1 validation error, 2 I/O error. Every command
records a run manifest in ``manifest.json`` inside its output directory
(the directory of ``--out``/``--report`` for file outputs); the manifest
holds one entry per output, keyed by file name.

Randomness flows from ``--seed``; each module draws from
``derive_seed(seed, module_name)``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import CLASS_NAMES, __version__
from .augment import AugmentConfig, augment
from .baselines import BoostingHyper, ForestHyper, LogisticHyper, gbt_train, lr_train, rf_train
from .errors import CrossGPError
from .evaluate import evaluate, native_importance, permutation_importance
from .featurize import (
    MIN_CGM_READINGS,
    featurize_bundles,
    pair_cross_day,
    read_examples_csv,
    read_features_csv,
    split_and_normalize,
    to_arrays,
    write_examples_csv,
    write_features_csv,
)
from .ingest import load_raw_dir, read_bundles, write_bundles
from .net import TrainConfig, train as train_net
from .serialize import MODEL_KINDS, dumps, load_model_dict, model_from_dict, save_model
from .synth import SynthConfig, generate

log = logging.getLogger("crossgp")

MANIFEST_NAME = "manifest.json"


class UsageError(CrossGPError):
    pass


def derive_seed(seed: int, module: str) -> int:
    """Stable 32-bit sub-seed for one module: sha256 of ``"<seed>:<module>"``."""
    digest = hashlib.sha256(f"{seed}:{module}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, output_name: str, command: str, args: argparse.Namespace, inputs: Sequence[Path]) -> None:
    """Merge this run's entry into the directory's single manifest file."""
    path = out_dir / MANIFEST_NAME
    manifest = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}
    manifest.setdefault("tool_version", __version__)
    runs = manifest.setdefault("runs", {})
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}
    runs[output_name] = {
        "command": command,
        "flags": flags,
        "seed": flags.get("seed"),
        "inputs": {str(p): file_digest(p) for p in inputs if Path(p).is_file()},
        "outputs": output_name,
        "tool_version": __version__,
    }
    manifest["runs"] = dict(sorted(runs.items()))
    path.write_text(dumps(manifest), encoding="utf-8")


def _parse_mix(text: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad mix {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("mix needs three comma-separated fractions")
    return parts  # type: ignore[return-value]


# -- subcommands -------------------------------------------------------------


def cmd_synth(args) -> None:
    out = Path(args.out)
    cfg = SynthConfig(
        n_subjects=args.subjects,
        days_per_subject=args.days,
        seed=derive_seed(args.seed, "synth"),
        control_mix=args.mix,
        persistence=args.persistence,
        insulin_coupling=args.coupling,
    )
    generate(cfg, out)
    write_manifest(out, ".", "synth", args, [])


def cmd_ingest(args) -> None:
    from .ingest import bundle_by_day, parse_event_file

    streams, n_errors = [], 0
    for schema, path in (("cgm", args.cgm), ("bolus", args.bolus), ("meal", args.meal)):
        events, errors = parse_event_file(path, schema, strict=args.strict)
        streams.append(events)
        n_errors += len(errors)
    bundles = bundle_by_day(*streams)
    out = Path(args.out)
    write_bundles(bundles, out)
    if n_errors:
        log.warning("%d rows rejected", n_errors)
    write_manifest(out, ".", "ingest", args, [Path(args.cgm), Path(args.bolus), Path(args.meal)])


def cmd_featurize(args) -> None:
    raw = Path(args.raw)
    if (raw / "cgm.csv").exists():
        bundles, _ = load_raw_dir(raw, strict=args.strict)
        inputs = [raw / f"{s}.csv" for s in ("cgm", "bolus", "meal")]
    else:
        bundles = read_bundles(raw)
        inputs = sorted(raw.glob("*.jsonl"))
        if not bundles:
            raise FileNotFoundError(f"{raw}: no cgm.csv and no bundle files")
    days = featurize_bundles(bundles, args.min_cgm)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_features_csv(days, out)
    log.info("featurized %d of %d days", len(days), len(bundles))
    write_manifest(out.parent, out.name, "featurize", args, inputs)


def cmd_pair(args) -> None:
    days = read_features_csv(args.features)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_examples_csv(pair_cross_day(days), out)
    write_manifest(out.parent, out.name, "pair", args, [Path(args.features)])


def train_model(kind: str, X, y, mean, std, args, seed: int):
    if kind == "lr":
        return lr_train(X, y, LogisticHyper(args.lr_step, args.lr_epochs, args.l2), mean, std)
    if kind == "rf":
        hyper = ForestHyper(
            n_trees=args.n_trees,
            max_depth=args.max_depth if args.max_depth > 0 else None,
            min_leaf=args.min_leaf,
            features_per_split=args.features_per_split,
            seed=derive_seed(seed, "rf"),
        )
        return rf_train(X, y, hyper)
    if kind == "gbt":
        hyper = BoostingHyper(
            n_rounds=args.rounds,
            learning_rate=args.eta,
            lam=args.lam,
            gamma=args.gamma,
            max_depth=args.gbt_depth,
            seed=derive_seed(seed, "gbt"),
        )
        return gbt_train(X, y, hyper)
    config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        step_size=args.lr,
        seed=derive_seed(seed, "crossgp"),
        hidden=args.hidden,
        class_weights=args.class_weights,
    )
    return train_net(X, y, config, mean, std)


def cmd_train(args) -> None:
    if args.model not in MODEL_KINDS:
        raise UsageError(f"unknown model {args.model!r}; valid models: {', '.join(MODEL_KINDS)}")
    examples = read_examples_csv(args.examples)
    split = split_and_normalize(examples, args.test_fraction)
    aug_cfg = AugmentConfig(args.aug_sigma, args.aug_copies, derive_seed(args.seed, "augment"))
    train_set = augment(split.train, split.std, aug_cfg)
    X, y = to_arrays(train_set)
    model = train_model(args.model, X, y, split.mean, split.std, args, args.seed)
    training = {
        "test_fraction": args.test_fraction,
        "augment": {"sigma_scale": aug_cfg.sigma_scale, "copies_per_example": aug_cfg.copies_per_example},
        "seed": args.seed,
        "n_train": len(split.train),
        "n_train_augmented": len(train_set),
        "n_test": len(split.test),
    }
    if hasattr(model, "loss_history"):
        training["loss_history"] = model.loss_history
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out, mean=split.mean, std=split.std, training=training)
    write_manifest(out.parent, out.name, "train", args, [Path(args.examples)])


def _eval_rows(model_dict: dict, examples_path: str, which: str):
    examples = read_examples_csv(examples_path)
    if which == "all":
        rows = examples
    else:
        split = split_and_normalize(examples, model_dict.get("training", {}).get("test_fraction", 0.2))
        rows = split.test if which == "test" else split.train
    return to_arrays(rows)


def cmd_evaluate(args) -> None:
    d = load_model_dict(args.model)
    model = model_from_dict(d)
    X, y = _eval_rows(d, args.examples, args.split)
    report = evaluate(model, X, y).to_dict()
    report["model_kind"] = model.kind
    report["split"] = args.split
    out = Path(args.report)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dumps(report), encoding="utf-8")
    write_manifest(out.parent, out.name, "evaluate", args, [Path(args.model), Path(args.examples)])


def cmd_importance(args) -> None:
    d = load_model_dict(args.model)
    model = model_from_dict(d)
    if args.method == "native":
        rep = native_importance(model)
    else:
        X, y = _eval_rows(d, args.examples, args.split)
        rep = permutation_importance(model, X, y, args.repeats, derive_seed(args.seed, "importance"))
    payload = rep.to_dict()
    payload["model_kind"] = model.kind
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dumps(payload), encoding="utf-8")
    write_manifest(out.parent, out.name, "importance", args, [Path(args.model), Path(args.examples)])


SUMMARY_COLUMNS = (
    "run",
    "model_kind",
    *(f"{c.lower()}_{m}" for c in CLASS_NAMES for m in ("precision", "f1", "recall")),
    "accuracy",
    "macro_precision",
    "n_examples",
    "top3",
)


def cmd_report(args) -> None:
    """Flatten report and importance JSON files found in ``--reports`` into one CSV."""
    rows: dict[str, dict] = {}
    for path in sorted(Path(args.reports).glob("*.json")):
        if path.name == MANIFEST_NAME:
            continue
        data = json.loads(path.read_text(encoding="utf-8"))
        if "classes" in data:
            row = rows.setdefault(path.stem, {"run": path.stem})
            row["model_kind"] = data.get("model_kind", "")
            for c in CLASS_NAMES:
                for m in ("precision", "f1", "recall"):
                    row[f"{c.lower()}_{m}"] = data["classes"][c][m]
            row["accuracy"] = data["overall"]["accuracy"]
            row["macro_precision"] = data["overall"]["macro_precision"]
            row["n_examples"] = data["n_examples"]
        elif "top3" in data:
            row = rows.setdefault(path.stem, {"run": path.stem})
            row.setdefault("model_kind", data.get("model_kind", ""))
            row["top3"] = "|".join(data["top3"])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, SUMMARY_COLUMNS, lineterminator="\n", restval="")
        w.writeheader()
        for key in sorted(rows):
            w.writerow({k: ("" if v is None else v) for k, v in rows[key].items()})
    write_manifest(out.parent, out.name, "report", args, sorted(Path(args.reports).glob("*.json")))


# -- parser ----------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="crossgp", description="Cross-day glycemic control prediction pipeline.")
    p.add_argument("--version", action="version", version=f"crossgp {__version__}")
    sub = p.add_subparsers(dest="command", metavar="{synth,ingest,featurize,pair,train,evaluate,importance,report}", parser_class=_Parser)

    s = sub.add_parser("synth", help="generate synthetic raw CSV streams")
    s.add_argument("--subjects", type=int, default=30)
    s.add_argument("--days", type=int, default=90)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--mix", type=_parse_mix, default=(0.6, 0.2, 0.2), help="Good,Moderate,Poor day shares")
    s.add_argument("--persistence", type=float, default=SynthConfig.persistence)
    s.add_argument("--coupling", type=float, default=SynthConfig.insulin_coupling, help="insulin to next-day coupling")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("ingest", help="validate raw CSVs and write per-subject day bundles")
    s.add_argument("--cgm", required=True)
    s.add_argument("--bolus", required=True)
    s.add_argument("--meal", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--strict", action="store_true", help="abort on the first bad row")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("featurize", help="daily feature vectors from a raw or bundle directory")
    s.add_argument("--raw", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--min-cgm", type=int, default=MIN_CGM_READINGS)
    s.add_argument("--strict", action="store_true")
    s.set_defaults(func=cmd_featurize)

    s = sub.add_parser("pair", help="pair day-d features with the day-(d+1) class")
    s.add_argument("--features", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_pair)

    s = sub.add_parser("train", help="train one model on the train split")
    s.add_argument("--model", required=True, help=f"one of {', '.join(MODEL_KINDS)}")
    s.add_argument("--examples", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--test-fraction", type=float, default=0.2)
    s.add_argument("--aug-sigma", type=float, default=AugmentConfig.sigma_scale)
    s.add_argument("--aug-copies", type=int, default=AugmentConfig.copies_per_example)
    g = s.add_argument_group("logistic regression")
    g.add_argument("--lr-step", type=float, default=LogisticHyper.step_size)
    g.add_argument("--lr-epochs", type=int, default=LogisticHyper.epochs)
    g.add_argument("--l2", type=float, default=LogisticHyper.l2)
    g = s.add_argument_group("random forest")
    g.add_argument("--n-trees", type=int, default=ForestHyper.n_trees)
    g.add_argument("--max-depth", type=int, default=ForestHyper.max_depth, help="0 = unlimited")
    g.add_argument("--min-leaf", type=int, default=ForestHyper.min_leaf)
    g.add_argument("--features-per-split", type=int, default=ForestHyper.features_per_split)
    g = s.add_argument_group("boosted trees")
    g.add_argument("--rounds", type=int, default=BoostingHyper.n_rounds)
    g.add_argument("--eta", type=float, default=BoostingHyper.learning_rate)
    g.add_argument("--lambda", dest="lam", type=float, default=BoostingHyper.lam)
    g.add_argument("--gamma", type=float, default=BoostingHyper.gamma)
    g.add_argument("--gbt-depth", type=int, default=BoostingHyper.max_depth)
    g = s.add_argument_group("crossgp network")
    g.add_argument("--hidden", type=int, default=TrainConfig.hidden)
    g.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    g.add_argument("--batch", type=int, default=TrainConfig.batch_size)
    g.add_argument("--lr", type=float, default=TrainConfig.step_size)
    g.add_argument("--class-weights", action="store_true")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="per-class metrics on the held-out split")
    s.add_argument("--model", required=True)
    s.add_argument("--examples", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--split", choices=("test", "train", "all"), default="test")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("importance", help="native or permutation feature importance")
    s.add_argument("--model", required=True)
    s.add_argument("--examples", required=True)
    s.add_argument("--method", choices=("native", "permutation"), default="permutation")
    s.add_argument("--repeats", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--split", choices=("test", "train", "all"), default="test")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_importance)

    s = sub.add_parser("report", help="flatten report/importance JSON files into a CSV table")
    s.add_argument("--reports", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_report)
    return p


def _setup_logging() -> None:
    level = os.environ.get("CROSSGP_LOG", "info").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )


def dispatch(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            raise UsageError("missing subcommand")
        args.func(args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except CrossGPError as exc:
        print(f"crossgp: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"crossgp: I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
