"""Spectrum occupancy decisions: cyclic-feature CFAR baseline and CNN detector."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInput
from .scf import ScfMatrix
from .waveform import WaveformProfile, WaveformClass

__all__ = [
    "CfarConfig",
    "Decision",
    "MIN_CALIBRATION",
    "dsss_alpha_candidates",
    "cfd_statistic",
    "threshold_from_statistics",
    "calibrate_threshold",
    "cfar_detect",
    "cnn_detect",
    "ThresholdRecord",
    "save_threshold",
    "load_threshold",
]

MIN_CALIBRATION = 200


@dataclass
class CfarConfig:
    alpha_candidates: list[float] = field(default_factory=list)
    target_pfa: float = 0.05
    calibration_size: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.target_pfa < 1.0:
            raise InvalidInput("target_pfa must lie strictly between 0 and 1")
        if self.calibration_size < 1:
            raise InvalidInput("calibration_size must be positive")
        self.alpha_candidates = [float(a) for a in self.alpha_candidates]


@dataclass(frozen=True)
class Decision:
    occupied: bool
    statistic: float
    threshold: float


def dsss_alpha_candidates(profile: WaveformProfile | None = None, harmonics: int = 3) -> list[float]:
    """The DSSS symbol rate and its next harmonics, in cycles/sample."""
    period = (profile or WaveformProfile()).symbol_period(WaveformClass.UMTS)
    return [k / period for k in range(1, harmonics + 1)]


def cfd_statistic(m: ScfMatrix, alphas) -> float:
    """Largest ratio of an SCF value at a candidate alpha bin to its channel's median.

    The median is taken over the channel's alpha != 0 rows, so the statistic
    is a pure ratio and does not depend on input power.
    """
    alphas = list(alphas)
    if not alphas:
        raise InvalidInput("at least one candidate cyclic frequency is required")
    bins = sorted({m.alpha_bin(a) for a in alphas})
    v = m.values
    off = np.delete(v, m.zero_alpha_row, axis=0) if v.shape[0] > 1 else v
    med = np.median(off, axis=0)
    picked = v[bins]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(med > 0, picked / np.where(med > 0, med, 1.0), np.where(picked > 0, np.inf, 1.0))
    return float(ratio.max())


def threshold_from_statistics(stats, target_pfa: float) -> float:
    """Empirical (1 - target_pfa) quantile of noise-only statistics."""
    stats = np.asarray(stats, dtype=np.float64)
    if stats.size < MIN_CALIBRATION:
        raise InvalidInput(f"calibration needs at least {MIN_CALIBRATION} noise-only statistics, got {stats.size}")
    if not 0.0 < target_pfa < 1.0:
        raise InvalidInput("target_pfa must lie strictly between 0 and 1")
    return float(np.quantile(stats, 1.0 - target_pfa))


def calibrate_threshold(noise_scfs, cfg: CfarConfig) -> float:
    noise_scfs = list(noise_scfs)
    if len(noise_scfs) < MIN_CALIBRATION:
        raise InvalidInput(f"calibration needs at least {MIN_CALIBRATION} noise-only matrices, got {len(noise_scfs)}")
    stats = [cfd_statistic(m, cfg.alpha_candidates) for m in noise_scfs]
    return threshold_from_statistics(stats, cfg.target_pfa)


def cfar_detect(m: ScfMatrix, threshold: float, cfg: CfarConfig) -> Decision:
    s = cfd_statistic(m, cfg.alpha_candidates)
    return Decision(bool(s > threshold), s, float(threshold))


def cnn_detect(model, m) -> Decision:
    """Occupied when the 2-class model's signal probability exceeds one half."""
    values = np.asarray(getattr(m, "values", m))
    p = model.predict_proba(values[None])[0]
    if p.shape[0] != 2:
        raise InvalidInput("cnn_detect needs a two-class model")
    s = float(p[1])
    return Decision(s > 0.5, s, 0.5)


@dataclass(frozen=True)
class ThresholdRecord:
    target_pfa: float
    threshold: float
    calibration_size: int
    seed: int


def save_threshold(path, rec: ThresholdRecord) -> None:
    Path(path).write_text(json.dumps(asdict(rec), sort_keys=True) + "\n")


def load_threshold(path) -> ThresholdRecord:
    try:
        d = json.loads(Path(path).read_text())
        return ThresholdRecord(float(d["target_pfa"]), float(d["threshold"]), int(d["calibration_size"]), int(d["seed"]))
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"bad threshold record {path}: {e}") from e
