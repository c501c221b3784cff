"""Classifier inputs: I/Q, amplitude-phase, FFT, full and cropped SCF."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .scf import FamConfig, ScfMatrix, compute_scf
from .waveform import ComplexSignal

__all__ = [
    "FeatureKind",
    "Normalization",
    "FeatureMatrix",
    "iq_features",
    "ap_features",
    "fft_features",
    "scf_features",
    "crop_center",
    "normalize_feature",
    "extract_feature",
    "stack_features",
]


class FeatureKind(enum.IntEnum):
    IQ = 1
    AP = 2
    FFT = 3
    SCF = 4
    SCF_CROP = 5


class Normalization(str, enum.Enum):
    MAXABS = "maxabs"
    ZSCORE = "zscore"
    NONE = "none"


@dataclass(eq=False)
class FeatureMatrix:
    values: np.ndarray
    kind: FeatureKind
    source_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise InvalidInput(f"feature matrix must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidInput("feature matrix contains non-finite entries")
        self.values = v
        self.kind = FeatureKind(self.kind)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _samples(r) -> np.ndarray:
    x = r.samples if isinstance(r, ComplexSignal) else np.asarray(r, dtype=np.complex128)
    if x.size == 0:
        raise InvalidInput("signal is empty")
    return x


def iq_features(r: ComplexSignal, **meta) -> FeatureMatrix:
    x = _samples(r)
    return FeatureMatrix(np.stack([x.real, x.imag]), FeatureKind.IQ, meta)


def ap_features(r: ComplexSignal, **meta) -> FeatureMatrix:
    """Amplitude and four-quadrant phase rows."""
    x = _samples(r)
    phase = np.arctan2(x.imag, x.real)
    # arctan2 returns -pi for (-0, -x); fold onto the closed end of (-pi, pi]
    phase[phase == -np.pi] = np.pi
    return FeatureMatrix(np.stack([np.abs(x), phase]), FeatureKind.AP, meta)


def fft_features(r: ComplexSignal, **meta) -> FeatureMatrix:
    """Real and imaginary rows of the unnormalized forward DFT."""
    f = np.fft.fft(_samples(r))
    return FeatureMatrix(np.stack([f.real, f.imag]), FeatureKind.FFT, meta)


def scf_features(m: ScfMatrix, **meta) -> FeatureMatrix:
    return FeatureMatrix(m.values, FeatureKind.SCF, meta)


def crop_center(m, rows: int, cols: int, two_sided: bool | None = None) -> FeatureMatrix:
    """Slice a rows x cols block around the alpha=0 band.

    One-sided matrices keep rows 0..rows (alpha=0 sits in row 0); two-sided
    ones are cut symmetrically about row floor(R/2).  Columns are always
    centred.  ``two_sided`` overrides the layout recorded on ``m``.
    """
    values = np.asarray(getattr(m, "values", m))
    if two_sided is None:
        two_sided = not getattr(m, "one_sided", True)
    R, C = values.shape
    rows, cols = int(rows), int(cols)
    if rows < 1 or cols < 1 or rows > R or cols > C:
        raise InvalidInput(f"crop {rows}x{cols} does not fit a {R}x{C} matrix")
    if (rows % 2 and rows != R) or (cols % 2 and cols != C):
        raise InvalidInput("crop dimensions must be even or equal to the full dimension")
    c0 = (C - cols) // 2
    if two_sided and rows != R:
        r0 = R // 2 - rows // 2
    else:
        r0 = 0
    meta = dict(getattr(m, "source_meta", {}) or {})
    return FeatureMatrix(values[r0 : r0 + rows, c0 : c0 + cols].copy(), FeatureKind.SCF_CROP, meta)


def normalize_feature(m: FeatureMatrix, scheme: Normalization | str = Normalization.MAXABS) -> FeatureMatrix:
    scheme = Normalization(scheme)
    v = m.values
    if scheme is Normalization.MAXABS:
        peak = np.max(np.abs(v)) if v.size else 0.0
        out = v / peak if peak > 0 else v.copy()
    elif scheme is Normalization.ZSCORE:
        out = v - v.mean()
        sd = out.std()
        if sd > 0:
            out = out / sd
    else:
        out = v.copy()
    return FeatureMatrix(out, m.kind, dict(m.source_meta))


def extract_feature(
    r: ComplexSignal,
    kind: FeatureKind | str,
    fam: FamConfig | None = None,
    crop_rows: int = 16,
    crop_cols: int = 16,
    normalization: Normalization | str = Normalization.MAXABS,
    scf: ScfMatrix | None = None,
) -> FeatureMatrix:
    """Feature of the requested kind for one received record.

    A precomputed ``scf`` is reused for the SCF kinds when given.
    """
    kind = FeatureKind[kind.upper()] if isinstance(kind, str) else FeatureKind(kind)
    if kind is FeatureKind.IQ:
        f = iq_features(r)
    elif kind is FeatureKind.AP:
        f = ap_features(r)
    elif kind is FeatureKind.FFT:
        f = fft_features(r)
    else:
        m = scf if scf is not None else compute_scf(r, fam)
        if kind is FeatureKind.SCF:
            f = scf_features(m)
        else:
            f = crop_center(m, min(crop_rows, m.shape[0]), min(crop_cols, m.shape[1]))
    return normalize_feature(f, normalization)


def stack_features(feats: list[FeatureMatrix], dtype=np.float32) -> np.ndarray:
    """(n, H, W) array from equally shaped feature matrices."""
    if not feats:
        raise InvalidInput("no features to stack")
    shape = feats[0].shape
    if any(f.shape != shape for f in feats):
        raise InvalidInput("feature matrices differ in shape")
    return np.stack([f.values for f in feats]).astype(dtype)
