"""Command line entry point.

Exit codes: 0 success, 2 invalid configuration, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..errors import FormatError, InvalidInput, NumericalError
from ..metrics import case1_accuracy, confusion
from ..nn import build_cnn, load_checkpoint, save_checkpoint, train
from ..scf import FamConfig
from .config import ExperimentConfig, Mode
from .dataset import cmd_generate, cmd_scf, load_feature_set
from .experiments import run_experiment
from .report import ExperimentReport, cmd_report, write_report

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_CONFIG", "EXIT_DATA", "EXIT_NUMERIC"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

log = logging.getLogger("cyclosense")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _crops(text: str) -> list:
    return [v if v == "full" else int(v) for v in text.split(",") if v]


def _add_config_flags(p: argparse.ArgumentParser, seed_required: bool) -> None:
    p.add_argument("--config", type=Path, help="JSON experiment config; flags override it")
    p.add_argument("--seed", type=int, required=seed_required)
    p.add_argument("--classes", type=_ints)
    p.add_argument("--snr-levels", type=_floats, dest="snr_levels_db")
    p.add_argument("--per-class-per-snr", type=int)
    p.add_argument("--record-length", type=int)
    p.add_argument("--n-prime", type=int)
    p.add_argument("--hop", type=int)
    p.add_argument("--feature", dest="feature_kind")
    p.add_argument("--crop-rows", type=int)
    p.add_argument("--crop-cols", type=int)
    p.add_argument("--normalization")
    p.add_argument("--train-frac", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--val-fraction", type=float)
    p.add_argument("--sweep-features", type=lambda t: t.split(","))
    p.add_argument("--crop-sizes", type=_crops)
    p.add_argument("--train-full-crop", action="store_true", default=None)
    p.add_argument("--timing-examples", type=int)
    p.add_argument("--sense-class", type=int)
    p.add_argument("--cfar-pfas", type=_floats)
    p.add_argument("--cfar-calibration-size", type=int)
    p.add_argument("--cfar-noise-trials", type=int)


_TOP = (
    "classes", "snr_levels_db", "per_class_per_snr", "record_length", "feature_kind", "crop_rows",
    "crop_cols", "normalization", "train_frac", "sweep_features", "crop_sizes", "train_full_crop",
    "timing_examples", "sense_class", "cfar_pfas", "cfar_calibration_size", "cfar_noise_trials", "seed",
)
_TRAIN = {"lr": "learning_rate", "batch_size": "batch_size", "max_epochs": "max_epochs",
          "patience": "early_stop_patience", "val_fraction": "val_fraction"}


def config_from_args(args, mode: Mode = Mode.CASE1, base: dict | None = None) -> ExperimentConfig:
    d = dict(base or {})
    if getattr(args, "config", None):
        d = json.loads(Path(args.config).read_text())
    d["mode"] = mode.value
    for k in _TOP:
        v = getattr(args, k, None)
        if v is not None:
            d[k] = v
    train = dict(d.get("train", {}))
    for flag, key in _TRAIN.items():
        v = getattr(args, flag, None)
        if v is not None:
            train[key] = v
    if train:
        d["train"] = train
    fam = dict(d.get("fam", {}))
    if getattr(args, "n_prime", None) is not None:
        fam["n_prime"] = args.n_prime
    if getattr(args, "hop", None) is not None:
        fam["l_hop"] = args.hop
    if fam:
        d["fam"] = fam
    return ExperimentConfig.from_dict(d)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cyclosense", description="Cyclostationary spectrum sensing and signal classification.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize an I/Q dataset with a manifest")
    _add_config_flags(p, seed_required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("scf", help="compute SCF matrices for every I/Q record of a dataset")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--n-prime", type=int, default=16)
    p.add_argument("--hop", type=int, default=1)

    p = sub.add_parser("train", help="train a classifier on the training split of a dataset")
    _add_config_flags(p, seed_required=False)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split of a dataset")
    _add_config_flags(p, seed_required=False)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    for name, mode in (
        ("case1", Mode.CASE1),
        ("case2", Mode.CASE2),
        ("sweep-features", Mode.FEATURE_SWEEP),
        ("sweep-crop", Mode.CROP_SWEEP),
        ("sense-compare", Mode.SENSE_COMPARE),
    ):
        p = sub.add_parser(name, help=f"run the {mode.value} experiment on synthetic data")
        _add_config_flags(p, seed_required=True)
        p.add_argument("--out", type=Path, required=True)
        p.set_defaults(mode=mode)

    p = sub.add_parser("report", help="re-emit CSV and plot-data files from a saved report")
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    return ap


def _train_cmd(args) -> None:
    cfg = config_from_args(args)
    feat = cfg.feature_kind.upper()
    ds = load_feature_set(args.data, cfg, [feat])
    tr, _ = ds.split(cfg.train_frac, cfg.seed)
    classes = sorted(set(tr.y.tolist()))
    lut = {c: i for i, c in enumerate(classes)}
    y = np.array([lut[int(v)] for v in tr.y])
    tcfg = replace(cfg.train, seed=cfg.seed)
    model = build_cnn(tr.x[feat].shape[1:], len(classes), seed=cfg.seed)
    model, hist = train(model, tr.x[feat], y, tcfg, strata=tr.snr)
    hp = {"experiment": cfg.to_dict(), "class_labels": classes, "epochs": hist.epochs}
    save_checkpoint(args.model, model, None, json.loads(json.dumps(hp, default=str)))
    print(f"trained {hist.epochs} epochs, final val acc {hist.val_acc[-1]:.4f}; wrote {args.model}")


def _eval_cmd(args) -> None:
    model, _, side = load_checkpoint(args.model)
    hp = side.get("hyperparameters", {})
    # the training config travels with the checkpoint; flags still override it
    cfg = config_from_args(args, base=hp.get("experiment"))
    feat = cfg.feature_kind.upper()
    ds = load_feature_set(args.data, cfg, [feat])
    _, te = ds.split(cfg.train_frac, cfg.seed)
    classes = hp.get("class_labels", sorted(set(ds.y.tolist())))
    pred = np.array(classes)[model.predict_proba(te.x[feat]).argmax(axis=1)]
    rep = ExperimentReport("eval", cfg.to_dict())
    levels = sorted(np.unique(te.snr).tolist())
    rep.add_curve("P_CASE1", levels, [case1_accuracy(pred[te.snr == s], te.y[te.snr == s]) for s in levels])
    rep.confusions["all"] = confusion(pred, te.y, max(classes) + 1).counts.tolist()
    rep.log_predictions("classifier", feat, te.seeds, te.snr, te.y, pred)
    write_report(rep, args.out)
    print(f"accuracy {case1_accuracy(pred, te.y):.4f} on {len(te)} test records; report in {args.out}")


def _dispatch(args) -> None:
    if args.command == "generate":
        cfg = config_from_args(args)
        man = cmd_generate(cfg, args.out)
        print(f"wrote {len(man)} records to {args.out}")
    elif args.command == "scf":
        man = cmd_scf(args.data, FamConfig(n_prime=args.n_prime, l_hop=args.hop))
        print(f"{len(man.of_kind('scf'))} SCF matrices in {args.data}")
    elif args.command == "train":
        _train_cmd(args)
    elif args.command == "eval":
        _eval_cmd(args)
    elif args.command == "report":
        files = cmd_report(args.report, args.out)
        print(f"wrote {len(files)} files to {args.out}")
    else:
        cfg = config_from_args(args, args.mode)
        rep = run_experiment(cfg)
        path = write_report(rep, args.out)
        (Path(args.out) / "config.json").write_text(cfg.to_json())
        print(f"report written to {path}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        _dispatch(args)
    except (InvalidInput, json.JSONDecodeError) as e:
        print(f"error: invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, FileNotFoundError, OSError) as e:
        print(f"error: data: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        print(f"error: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
