"""Experiment reports: persistence, CSV/plot-data emission and audit."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..metrics import accuracy_csv, case1_accuracy, case2_accuracies, class_report, confusion, metrics_csv

__all__ = [
    "ExperimentReport",
    "PREDICTION_FIELDS",
    "write_report",
    "read_report",
    "cmd_report",
    "recompute_curves",
]

PREDICTION_FIELDS = ("stage", "feature", "seed", "snr_db", "truth", "pred")
REPORT_NAME = "report.json"
PREDICTIONS_NAME = "predictions.csv"
TIMING_NAME = "timing.json"


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    # curve name -> {"x": axis label, "points": [[x, y], ...]}
    curves: dict = field(default_factory=dict)
    # label -> K x K counts, rows = truth
    confusions: dict = field(default_factory=dict)
    # (experiment, snr_db, class, precision, recall, f1)
    class_metrics: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    predictions: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def add_curve(self, name: str, xs, ys, x_label: str = "snr_db") -> None:
        self.curves[name] = {"x": x_label, "points": [[float(x), float(y)] for x, y in zip(xs, ys)]}

    def curve(self, name: str) -> dict[float, float]:
        return {x: y for x, y in self.curves[name]["points"]}

    def log_predictions(self, stage: str, feature: str, seeds, snrs, truth, preds) -> None:
        for s, snr, t, p in zip(seeds, snrs, truth, preds):
            self.predictions.append((stage, feature, str(s), float(snr), int(t), int(p)))


def _predictions_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PREDICTION_FIELDS)
    for stage, feat, seed, snr, t, p in rows:
        w.writerow([stage, feat, seed, f"{snr:g}", t, p])
    return buf.getvalue()


def _read_predictions(path: Path) -> list:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != PREDICTION_FIELDS:
            raise ValueError(f"{path}: unexpected prediction log header")
        return [(a, b, c, float(d), int(e), int(f)) for a, b, c, d, e, f in r]


def _dump(obj) -> str:
    # insertion order is deterministic and keeps table columns in their written order
    return json.dumps(obj, indent=1) + "\n"


def write_report(report: ExperimentReport, out_dir) -> Path:
    """Persist the report and emit every derived file.

    Wall-clock timings go to a separate file so that the remaining outputs
    are byte-identical across runs with the same configuration and seed.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    body = {
        "experiment": report.experiment,
        "config": report.config,
        "curves": report.curves,
        "confusions": report.confusions,
        "class_metrics": [list(r) for r in report.class_metrics],
        "tables": report.tables,
    }
    (out / REPORT_NAME).write_text(_dump(body))
    (out / PREDICTIONS_NAME).write_text(_predictions_csv(report.predictions))
    (out / TIMING_NAME).write_text(_dump(report.timing))
    emit_files(report, out)
    return out / REPORT_NAME


def read_report(path) -> ExperimentReport:
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_NAME
    if not path.exists():
        raise FileNotFoundError(f"no report at {path}")
    body = json.loads(path.read_text())
    rep = ExperimentReport(
        body["experiment"],
        body["config"],
        body.get("curves", {}),
        body.get("confusions", {}),
        [tuple(r) for r in body.get("class_metrics", [])],
        body.get("tables", {}),
    )
    preds = path.parent / PREDICTIONS_NAME
    if preds.exists():
        rep.predictions = _read_predictions(preds)
    timing = path.parent / TIMING_NAME
    if timing.exists():
        rep.timing = json.loads(timing.read_text())
    return rep


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def emit_files(report: ExperimentReport, out: Path) -> list[Path]:
    written = []

    def put(name, text):
        p = out / name
        p.write_text(text)
        written.append(p)

    if report.class_metrics:
        put("metrics.csv", metrics_csv(report.class_metrics))
    snr_curves = {k: dict(map(tuple, v["points"])) for k, v in report.curves.items() if v["x"] == "snr_db"}
    if snr_curves:
        put("accuracy.csv", accuracy_csv(snr_curves))
    for name, v in sorted(report.curves.items()):
        lines = [f"# {v['x']} {name}"] + [f"{x:g} {y:.6f}" for x, y in v["points"]]
        put(f"plot_{_safe(name)}.dat", "\n".join(lines) + "\n")
    for name, counts in sorted(report.confusions.items()):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        k = len(counts)
        w.writerow(["truth\\pred", *range(k)])
        for i, row in enumerate(counts):
            w.writerow([i, *row])
        put(f"confusion_{_safe(name)}.csv", buf.getvalue())
    for name, rows in sorted(report.tables.items()):
        if not rows:
            continue
        buf = io.StringIO()
        cols = list(rows[0])
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r[c]) for c in cols])
        put(f"table_{_safe(name)}.csv", buf.getvalue())
    return written


def _cell(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6f}"
    return v


def cmd_report(report_path, out_dir) -> list[Path]:
    """Re-emit CSV and plot-data files from a saved report."""
    rep = read_report(report_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return emit_files(rep, out)


# -- audit -------------------------------------------------------------------


def _group(rows, stage, feature=None):
    sel = [r for r in rows if r[0] == stage and (feature is None or r[1] == feature)]
    return {
        "seed": [r[2] for r in sel],
        "snr": np.array([r[3] for r in sel]),
        "truth": np.array([r[4] for r in sel], dtype=np.int64),
        "pred": np.array([r[5] for r in sel], dtype=np.int64),
    }


def recompute_curves(report: ExperimentReport) -> dict[str, dict[float, float]]:
    """Rebuild the per-SNR curves of a report from its prediction log alone."""
    rows = report.predictions
    out: dict[str, dict[float, float]] = {}
    exp = report.experiment
    if exp in ("case1", "eval"):
        g = _group(rows, "classifier")
        out["P_CASE1"] = {float(s): case1_accuracy(g["pred"][g["snr"] == s], g["truth"][g["snr"] == s]) for s in np.unique(g["snr"])}
    elif exp == "case2":
        d = _group(rows, "detector")
        c = _group(rows, "classifier")
        ch = _group(rows, "chain")
        for key in ("P_S", "P_C", "P_CASE2", "chain"):
            out[key] = {}
        for s in np.unique(d["snr"]):
            ds, cs = d["snr"] == s, c["snr"] == s
            h1 = c["truth"][cs] != 0
            ps, pc, po = case2_accuracies(d["pred"][ds], d["truth"][ds], c["pred"][cs][h1], c["truth"][cs][h1])
            out["P_S"][float(s)] = ps
            out["P_C"][float(s)] = pc
            out["P_CASE2"][float(s)] = po
            hs = ch["snr"] == s
            out["chain"][float(s)] = case1_accuracy(ch["pred"][hs], ch["truth"][hs])
    elif exp == "sweep-features":
        for feat in sorted({r[1] for r in rows}):
            g = _group(rows, "classifier", feat)
            k = int(max(g["truth"].max(), g["pred"].max())) + 1
            out[f"macro_f1_{feat}"] = {
                float(s): class_report(confusion(g["pred"][g["snr"] == s], g["truth"][g["snr"] == s], k))[1].f1
                for s in np.unique(g["snr"])
            }
    return out
