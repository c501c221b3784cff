"""Synthetic record generation, on-disk datasets and in-memory feature sets."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dataio import (
    MANIFEST_NAME,
    DatasetManifest,
    ManifestEntry,
    checksum,
    read_iq,
    read_matrix,
    stratified_indices,
    write_iq,
    write_matrix,
)
from ..errors import FormatError
from ..features import crop_center, extract_feature, normalize_feature, scf_features
from ..scf import FamConfig, compute_scf
from ..waveform import ChannelOutput, ComplexSignal, derive_seed, receive
from .config import ExperimentConfig

__all__ = [
    "Record",
    "FeatureSet",
    "record_seed",
    "iter_records",
    "cmd_generate",
    "cmd_scf",
    "featurize",
    "build_feature_set",
    "load_feature_set",
    "crop_label",
    "assemble_rows",
]

log = logging.getLogger(__name__)


def _snr_key(snr_db: float) -> int:
    # SeedSequence only takes non-negative integers; centi-dB with an offset
    return int(round(snr_db * 100)) + 1_000_000


def record_seed(seed: int, cls: int, snr_db: float, index: int) -> int:
    """Per-record seed; independent of generation order and of the SNR list."""
    return derive_seed(seed, int(cls), _snr_key(snr_db), int(index))


@dataclass
class Record:
    cls: int
    snr_db: float
    index: int
    seed: int
    out: ChannelOutput

    @property
    def signal(self) -> ComplexSignal:
        return self.out.signal


def iter_records(cfg: ExperimentConfig, classes=None, seed_offset: int = 0):
    """Every (class, SNR, index) record of the config, in a fixed order."""
    for c in classes if classes is not None else cfg.classes:
        for snr in cfg.snr_levels_db:
            for i in range(cfg.per_class_per_snr):
                s = record_seed(cfg.seed + seed_offset, c, snr, i)
                yield Record(int(c), snr, i, s, receive(c, cfg.record_length, snr, s, cfg.profile))


def _iq_name(r: Record) -> str:
    return f"iq/c{r.cls}_snr{r.snr_db:g}_{r.index:05d}.iq"


def cmd_generate(cfg: ExperimentConfig, out_dir) -> DatasetManifest:
    """Write one I/Q file per record plus the manifest."""
    out = Path(out_dir)
    (out / "iq").mkdir(parents=True, exist_ok=True)
    man = DatasetManifest(root=out)
    for r in iter_records(cfg):
        rel = _iq_name(r)
        write_iq(out / rel, r.signal)
        man.add(
            ManifestEntry(
                rel, "iq", r.cls, r.snr_db, r.seed, str(cfg.record_length), checksum(out / rel),
                r.out.signal_power, r.out.noise_power,
            )
        )
    man.save(out / MANIFEST_NAME)
    (out / "config.json").write_text(cfg.to_json())
    return man


def cmd_scf(data_dir, fam: FamConfig | None = None) -> DatasetManifest:
    """Add one SCF matrix per I/Q record and rewrite the manifest."""
    root = Path(data_dir)
    man = DatasetManifest.load(root)
    (root / "scf").mkdir(exist_ok=True)
    for e in list(man.of_kind("iq")):
        sig = read_iq(man.path_of(e), int(e.length_or_shape))
        m = compute_scf(sig, fam)
        rel = "scf/" + Path(e.file_path).with_suffix(".scf").name
        write_matrix(root / rel, m)
        man.add(
            ManifestEntry(
                rel, "scf", e.class_label, e.snr_db, e.seed, f"{m.shape[0]}x{m.shape[1]}",
                checksum(root / rel), e.signal_power, e.noise_power,
            )
        )
    man.save(root / MANIFEST_NAME)
    return man


# -- in-memory feature sets ---------------------------------------------------


def crop_label(size) -> str:
    return "full" if size == "full" else str(int(size))


@dataclass
class FeatureSet:
    """Stacked classifier inputs per feature name, with per-record metadata."""

    x: dict[str, np.ndarray]
    y: np.ndarray
    snr: np.ndarray
    seeds: np.ndarray
    signal_power: np.ndarray = field(default_factory=lambda: np.zeros(0))
    noise_power: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, idx) -> "FeatureSet":
        idx = np.asarray(idx)
        return FeatureSet(
            {k: v[idx] for k, v in self.x.items()},
            self.y[idx],
            self.snr[idx],
            self.seeds[idx],
            self.signal_power[idx] if self.signal_power.size else self.signal_power,
            self.noise_power[idx] if self.noise_power.size else self.noise_power,
        )

    def split(self, train_frac: float, seed: int):
        tr, te = stratified_indices(self.y, self.snr, train_frac, seed)
        return self.subset(tr), self.subset(te)


def featurize(sig: ComplexSignal, cfg: ExperimentConfig, names: list[str], scf=None) -> dict[str, np.ndarray]:
    """Feature arrays for one record keyed by name.

    Names are feature kinds ("IQ", "AP", "FFT", "SCF", "SCF_CROP") or
    "crop:<rows>" / "crop:full" for the crop sweep.  The SCF is computed
    once and shared.
    """
    out = {}
    needs_scf = any(n.startswith("crop:") or n.upper() in ("SCF", "SCF_CROP") for n in names)
    if needs_scf and scf is None:
        scf = compute_scf(sig, cfg.fam)
    for n in names:
        if n.startswith("crop:"):
            size = n.split(":", 1)[1]
            if size == "full":
                f = scf_features(scf)
            else:
                rows = min(int(size), scf.shape[0])
                f = crop_center(scf, rows, min(cfg.crop_cols, scf.shape[1]))
            f = normalize_feature(f, cfg.normalization)
        else:
            f = extract_feature(sig, n, cfg.fam, cfg.crop_rows, cfg.crop_cols, cfg.normalization, scf=scf)
        out[n] = f.values.astype(np.float32)
    return out


def assemble_rows(rows, names) -> FeatureSet:
    x = {n: np.stack([r[0][n] for r in rows]) for n in names}
    meta = np.array([r[1] for r in rows], dtype=np.float64).reshape(len(rows), 5)
    return FeatureSet(
        x,
        meta[:, 0].astype(np.int64),
        meta[:, 1],
        np.array([r[2] for r in rows], dtype=object),
        meta[:, 3],
        meta[:, 4],
    )


def build_feature_set(cfg: ExperimentConfig, names: list[str], classes=None, seed_offset: int = 0) -> FeatureSet:
    """Synthesize the config's records in memory and featurize them."""
    rows = []
    for r in iter_records(cfg, classes, seed_offset):
        rows.append((featurize(r.signal, cfg, names), (r.cls, r.snr_db, 0, r.out.signal_power, r.out.noise_power), r.seed))
    return assemble_rows(rows, names)


def load_feature_set(data_dir, cfg: ExperimentConfig, names: list[str]) -> FeatureSet:
    """Featurize an on-disk dataset, reusing stored SCF matrices when present."""
    man = DatasetManifest.load(data_dir)
    scf_by_key = {e.record_key: e for e in man.of_kind("scf")}
    rows = []
    for e in man.of_kind("iq"):
        sig = read_iq(man.path_of(e), int(e.length_or_shape))
        scf = None
        if e.record_key in scf_by_key:
            scf = read_matrix(man.path_of(scf_by_key[e.record_key]))
        rows.append((featurize(sig, cfg, names, scf), (e.class_label, e.snr_db, 0, e.signal_power, e.noise_power), e.seed))
    if not rows:
        raise FormatError(f"{data_dir}: manifest lists no I/Q records")
    return assemble_rows(rows, names)

