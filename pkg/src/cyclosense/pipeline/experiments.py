"""CASE1/CASE2 runs, feature and crop sweeps, and the CNN-vs-CFAR comparison."""

from __future__ import annotations

import logging
import time
from dataclasses import replace

import numpy as np

from ..dataio import stratified_indices
from ..detect import cfd_statistic, dsss_alpha_candidates, threshold_from_statistics
from ..features import normalize_feature, scf_features
from ..metrics import case1_accuracy, case2_accuracies, class_report, confusion, sensing_accuracy
from ..nn import Adam, Sequential, build_cnn, train
from ..scf import compute_scf
from ..waveform import WaveformClass, derive_seed, receive
from .config import ExperimentConfig, Mode
from .dataset import FeatureSet, assemble_rows, build_feature_set, crop_label, featurize, iter_records, record_seed
from .report import ExperimentReport

__all__ = [
    "train_stage",
    "evaluate_classifier",
    "run_case1",
    "run_case2",
    "run_feature_sweep",
    "run_crop_sweep",
    "run_sense_compare",
    "run_experiment",
    "time_epoch",
]

log = logging.getLogger(__name__)

NOISE = int(WaveformClass.NOISE)
_CALIBRATION_OFFSET = 7_001
_AUDIT_OFFSET = 7_002


def _stage_seed(cfg: ExperimentConfig, tag: int) -> int:
    return derive_seed(cfg.seed, cfg.train.seed, tag) % 2**32


def train_stage(x, y, strata, cfg: ExperimentConfig, num_classes: int, tag: int) -> tuple[Sequential, object]:
    """Fresh CNN trained on (x, y) with the config's protocol."""
    seed = _stage_seed(cfg, tag)
    model = build_cnn(x.shape[1:], num_classes, seed=seed)
    tcfg = replace(cfg.train, seed=seed)
    log.info("training %d-class CNN on %d examples of shape %s", num_classes, len(y), x.shape[1:])
    return train(model, x, y, tcfg, strata=strata)


def evaluate_classifier(model: Sequential, x) -> np.ndarray:
    return model.predict_proba(x).argmax(axis=1)


def _per_snr(snr, fn) -> tuple[list[float], list[float]]:
    levels = sorted(np.unique(snr).tolist())
    return levels, [fn(snr == s) for s in levels]


def _class_rows(name, snr, truth, pred, k, labels, report: ExperimentReport) -> dict[float, float]:
    """Table-2 rows per SNR; returns macro-F1 per SNR."""
    macro = {}
    for s in sorted(np.unique(snr).tolist()):
        m = snr == s
        rows, mac = class_report(confusion(pred[m], truth[m], k))
        for i, r in enumerate(rows):
            report.class_metrics.append((name, float(s), labels[i], r.precision, r.recall, r.f1))
        macro[float(s)] = mac.f1
    return macro


def _labels(classes) -> list[str]:
    return [WaveformClass(c).name for c in classes]


def _history_timing(prefix: str, hist, report: ExperimentReport) -> None:
    report.timing[f"{prefix}_epochs"] = hist.epochs
    report.timing[f"{prefix}_mean_epoch_s"] = hist.mean_epoch_time
    report.timing[f"{prefix}_total_s"] = float(np.sum(hist.epoch_time))


def _history_table(hist) -> list[dict]:
    return [
        {"epoch": i + 1, "train_loss": a, "train_acc": b, "val_loss": c, "val_acc": d}
        for i, (a, b, c, d) in enumerate(zip(hist.train_loss, hist.train_acc, hist.val_loss, hist.val_acc))
    ]


def _relabel(y, classes) -> np.ndarray:
    lut = {c: i for i, c in enumerate(classes)}
    return np.array([lut[int(v)] for v in y], dtype=np.int64)


def _data(cfg, names, data):
    return data if data is not None else build_feature_set(cfg, names)


# ---------------------------------------------------------------------------


def run_case1(cfg: ExperimentConfig, data: FeatureSet | None = None) -> ExperimentReport:
    """Joint sensing and classification with one classifier over all classes."""
    feat = cfg.feature_kind.upper()
    ds = _data(cfg, [feat], data)
    tr, te = ds.split(cfg.train_frac, cfg.seed)
    classes = cfg.classes
    model, hist = train_stage(tr.x[feat], _relabel(tr.y, classes), tr.snr, cfg, len(classes), 1)
    pred = np.array(classes)[evaluate_classifier(model, te.x[feat])]

    rep = ExperimentReport("case1", cfg.to_dict())
    xs, ys = _per_snr(te.snr, lambda m: case1_accuracy(pred[m], te.y[m]))
    rep.add_curve("P_CASE1", xs, ys)
    k = max(classes) + 1
    for s in xs:
        m = te.snr == s
        rep.confusions[f"snr{s:g}"] = confusion(pred[m], te.y[m], k).counts.tolist()
    rep.confusions["all"] = confusion(pred, te.y, k).counts.tolist()
    _class_rows("case1", te.snr, _relabel(te.y, classes), _relabel(pred, classes), len(classes), _labels(classes), rep)
    rep.log_predictions("classifier", feat, te.seeds, te.snr, te.y, pred)
    rep.tables["history"] = _history_table(hist)
    _history_timing("train", hist, rep)
    return rep


def run_case2(cfg: ExperimentConfig, data: FeatureSet | None = None) -> ExperimentReport:
    """Sense with a noise-vs-signal detector, then classify detected signals."""
    feat = cfg.feature_kind.upper()
    ds = _data(cfg, [feat], data)
    tr, te = ds.split(cfg.train_frac, cfg.seed)
    sig_classes = cfg.signal_classes

    det, hist_d = train_stage(tr.x[feat], (tr.y != NOISE).astype(np.int64), tr.y * 1000 + tr.snr, cfg, 2, 2)
    h1 = tr.y != NOISE
    clf, hist_c = train_stage(tr.x[feat][h1], _relabel(tr.y[h1], sig_classes), tr.snr[h1], cfg, len(sig_classes), 3)

    sensed = evaluate_classifier(det, te.x[feat]).astype(bool)
    cls_pred = np.array(sig_classes)[evaluate_classifier(clf, te.x[feat])]
    truth_occ = te.y != NOISE
    chain = np.where(sensed, cls_pred, NOISE)

    rep = ExperimentReport("case2", cfg.to_dict())
    levels = sorted(np.unique(te.snr).tolist())
    ps_l, pc_l, po_l, ch_l, pd_l, pn_l = [], [], [], [], [], []
    for s in levels:
        m = te.snr == s
        mh = m & truth_occ
        ps, pc, po = case2_accuracies(sensed[m], truth_occ[m], cls_pred[mh], te.y[mh])
        pd, pn, _ = sensing_accuracy(sensed[m], truth_occ[m])
        ps_l.append(ps)
        pc_l.append(pc)
        po_l.append(po)
        pd_l.append(pd)
        pn_l.append(pn)
        ch_l.append(case1_accuracy(chain[m], te.y[m]))
    rep.add_curve("P_S", levels, ps_l)
    rep.add_curve("P_C", levels, pc_l)
    rep.add_curve("P_CASE2", levels, po_l)
    rep.add_curve("chain", levels, ch_l)
    rep.add_curve("P_detect_given_H1", levels, pd_l)
    rep.add_curve("P_empty_given_H0", levels, pn_l)
    k = max(cfg.classes) + 1
    rep.confusions["detector"] = confusion(sensed.astype(int), truth_occ.astype(int), 2).counts.tolist()
    rep.confusions["classifier"] = confusion(cls_pred[truth_occ], te.y[truth_occ], k).counts.tolist()
    rep.confusions["chain"] = confusion(chain, te.y, k).counts.tolist()
    _class_rows(
        "case2_classifier",
        te.snr[truth_occ],
        _relabel(te.y[truth_occ], sig_classes),
        _relabel(cls_pred[truth_occ], sig_classes),
        len(sig_classes),
        _labels(sig_classes),
        rep,
    )
    rep.log_predictions("detector", feat, te.seeds, te.snr, truth_occ.astype(int), sensed.astype(int))
    rep.log_predictions("classifier", feat, te.seeds[truth_occ], te.snr[truth_occ], te.y[truth_occ], cls_pred[truth_occ])
    rep.log_predictions("chain", feat, te.seeds, te.snr, te.y, chain)
    rep.tables["detector_history"] = _history_table(hist_d)
    rep.tables["classifier_history"] = _history_table(hist_c)
    _history_timing("detector", hist_d, rep)
    _history_timing("classifier", hist_c, rep)
    return rep


def run_feature_sweep(cfg: ExperimentConfig, data: FeatureSet | None = None) -> ExperimentReport:
    """Same classifier and protocol on each input representation."""
    feats = [f.upper() for f in cfg.sweep_features]
    ds = _data(cfg, feats, data)
    tr, te = ds.split(cfg.train_frac, cfg.seed)
    classes = cfg.classes
    rep = ExperimentReport("sweep-features", cfg.to_dict())
    summary = []
    for j, feat in enumerate(feats):
        model, hist = train_stage(tr.x[feat], _relabel(tr.y, classes), tr.snr, cfg, len(classes), 10 + j)
        pred = np.array(classes)[evaluate_classifier(model, te.x[feat])]
        macro = _class_rows(feat, te.snr, _relabel(te.y, classes), _relabel(pred, classes), len(classes), _labels(classes), rep)
        rep.add_curve(f"macro_f1_{feat}", list(macro), list(macro.values()))
        xs, ys = _per_snr(te.snr, lambda m: case1_accuracy(pred[m], te.y[m]))
        rep.add_curve(f"accuracy_{feat}", xs, ys)
        rep.log_predictions("classifier", feat, te.seeds, te.snr, te.y, pred)
        summary.append({"feature": feat, "epochs": hist.epochs, "accuracy": case1_accuracy(pred, te.y)})
        _history_timing(feat, hist, rep)
    rep.tables["summary"] = summary
    return rep


def time_epoch(model: Sequential, x, y, batch_size: int) -> float:
    """Wall time of one training epoch (forward, backward, Adam) over (x, y)."""
    opt = Adam()
    params = model.param_dict()
    t0 = time.perf_counter()
    for s in range(0, len(y), batch_size):
        model.zero_grads()
        model.accumulate_gradients(x[s : s + batch_size], y[s : s + batch_size])
        opt.step(params, model.grad_dict())
    return time.perf_counter() - t0


def _full_scf_features(cfg: ExperimentConfig, ds: FeatureSet, idx) -> np.ndarray:
    out = []
    for i in idx:
        sig = receive(int(ds.y[i]), cfg.record_length, float(ds.snr[i]), int(ds.seeds[i]), cfg.profile).signal
        out.append(normalize_feature(scf_features(compute_scf(sig, cfg.fam)), cfg.normalization).values)
    return np.asarray(out, dtype=np.float32)


def run_crop_sweep(cfg: ExperimentConfig, data: FeatureSet | None = None) -> ExperimentReport:
    """Accuracy and epoch time against the number of alpha rows kept.

    Every size is timed over the same ``timing_examples`` training records.
    The uncropped matrix is only trained when ``train_full_crop`` is set;
    otherwise its row reports timing alone.
    """
    sizes = list(cfg.crop_sizes)
    trained = [s for s in sizes if s != "full" or cfg.train_full_crop]
    names = [f"crop:{crop_label(s)}" for s in trained]
    ds = _data(cfg, names, data)
    tr, te = ds.split(cfg.train_frac, cfg.seed)
    classes = cfg.classes
    ytr = _relabel(tr.y, classes)
    n_time = min(cfg.timing_examples, len(tr))
    rep = ExperimentReport("sweep-crop", cfg.to_dict())
    full_rows = cfg.fam.output_shape(cfg.record_length)[0]
    table, xs, accs = [], [], []
    for j, s in enumerate(sizes):
        label = crop_label(s)
        name = f"crop:{label}"
        if name in ds.x:
            xt = tr.x[name]
        else:
            xt = _full_scf_features(cfg, tr, range(n_time))
        probe = build_cnn(xt.shape[1:], len(classes), seed=_stage_seed(cfg, 100 + j))
        rep.timing[f"epoch_s_{label}"] = time_epoch(probe, xt[:n_time], ytr[:n_time], cfg.train.batch_size)
        rows = xt.shape[1]
        acc = float("nan")
        if name in ds.x:
            model, hist = train_stage(xt, ytr, tr.snr, cfg, len(classes), 20 + j)
            pred = np.array(classes)[evaluate_classifier(model, te.x[name])]
            acc = case1_accuracy(pred, te.y)
            rep.log_predictions("classifier", name, te.seeds, te.snr, te.y, pred)
            _history_timing(f"train_{label}", hist, rep)
            xs.append(full_rows if s == "full" else rows)
            accs.append(acc)
        table.append({"crop": label, "rows": rows, "cols": xt.shape[2], "accuracy": acc})
    rep.add_curve("accuracy_vs_rows", xs, accs, x_label="rows")
    rep.tables["crop_sweep"] = table
    return rep


def _noise_stats(cfg: ExperimentConfig, n: int, offset: int, alphas, feat: str | None):
    stats, feats = [], []
    for i in range(n):
        s = record_seed(cfg.seed + offset, NOISE, 0.0, i)
        sig = receive(NOISE, cfg.record_length, 0.0, s, cfg.profile).signal
        m = compute_scf(sig, cfg.fam)
        stats.append(cfd_statistic(m, alphas))
        if feat is not None:
            feats.append(featurize(sig, cfg, [feat], scf=m)[feat])
    return np.array(stats), (np.array(feats) if feats else None)


def run_sense_compare(cfg: ExperimentConfig) -> ExperimentReport:
    """Detection probability of the CNN detector and the CFAR baseline."""
    feat = cfg.feature_kind.upper()
    alphas = dsss_alpha_candidates(cfg.profile) if cfg.sense_class == int(WaveformClass.UMTS) else [
        k / cfg.profile.symbol_period(WaveformClass(cfg.sense_class)) for k in (1, 2, 3)
    ]
    classes = [NOISE, cfg.sense_class]
    scfg = replace(cfg, classes=classes, mode=Mode.SENSE_COMPARE)

    rows, stats = [], []
    names = [feat]
    for r in iter_records(scfg):
        m = compute_scf(r.signal, cfg.fam)
        rows.append((featurize(r.signal, cfg, names, scf=m), (r.cls, r.snr_db, 0, r.out.signal_power, r.out.noise_power), r.seed))
        stats.append(cfd_statistic(m, alphas))
    ds = assemble_rows(rows, names)
    stats = np.array(stats)
    tr_idx, te_idx = stratified_indices(ds.y, ds.snr, cfg.train_frac, cfg.seed)
    tr, te = ds.subset(tr_idx), ds.subset(te_idx)
    te_stats = stats[te_idx]

    det, hist = train_stage(tr.x[feat], (tr.y != NOISE).astype(np.int64), tr.snr, scfg, 2, 4)
    cnn_occ = evaluate_classifier(det, te.x[feat]).astype(bool)

    cal, _ = _noise_stats(cfg, cfg.cfar_calibration_size, _CALIBRATION_OFFSET, alphas, None)
    audit, audit_x = _noise_stats(cfg, cfg.cfar_noise_trials, _AUDIT_OFFSET, alphas, feat)
    cnn_audit = evaluate_classifier(det, audit_x).astype(bool)

    rep = ExperimentReport("sense-compare", scfg.to_dict())
    sig = te.y != NOISE
    levels = sorted(np.unique(te.snr).tolist())
    rep.add_curve("Pd_CNN", levels, [float(np.mean(cnn_occ[sig & (te.snr == s)])) for s in levels])
    pfa_rows = [
        {"detector": "CNN", "target_pfa": float("nan"), "threshold": 0.5, "empirical_pfa": float(np.mean(cnn_audit)), "trials": len(cnn_audit)}
    ]
    for pfa in cfg.cfar_pfas:
        thr = threshold_from_statistics(cal, pfa)
        occ = te_stats > thr
        rep.add_curve(f"Pd_CFAR_pfa{pfa:g}", levels, [float(np.mean(occ[sig & (te.snr == s)])) for s in levels])
        pfa_rows.append(
            {"detector": "CFAR", "target_pfa": pfa, "threshold": thr, "empirical_pfa": float(np.mean(audit > thr)), "trials": len(audit)}
        )
        rep.log_predictions(f"cfar_pfa{pfa:g}", "cfd", te.seeds, te.snr, sig.astype(int), occ.astype(int))
    rep.tables["pfa_audit"] = pfa_rows
    rep.tables["cfar"] = [
        {"alpha_candidates": " ".join(f"{a:.6g}" for a in alphas), "calibration_size": len(cal), "seed": cfg.seed + _CALIBRATION_OFFSET}
    ]
    rep.log_predictions("detector", feat, te.seeds, te.snr, sig.astype(int), cnn_occ.astype(int))
    _history_timing("detector", hist, rep)
    return rep


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    return {
        Mode.CASE1: run_case1,
        Mode.CASE2: run_case2,
        Mode.FEATURE_SWEEP: run_feature_sweep,
        Mode.CROP_SWEEP: run_crop_sweep,
        Mode.SENSE_COMPARE: run_sense_compare,
    }[cfg.mode](cfg)
