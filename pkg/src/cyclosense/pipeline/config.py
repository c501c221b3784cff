"""Experiment configuration, loadable from JSON."""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..errors import InvalidInput
from ..features import FeatureKind, Normalization
from ..nn.train import TrainConfig
from ..scf import FamConfig
from ..waveform import ChannelConfig, WaveformClass, WaveformProfile

__all__ = ["Mode", "ExperimentConfig", "DEFAULT_SNR_LEVELS", "CROP_SIZES"]

DEFAULT_SNR_LEVELS = [float(s) for s in range(1, 16)]
CROP_SIZES = [4, 8, 16, 32, 64, 128, "full"]


class Mode(str, enum.Enum):
    CASE1 = "case1"
    CASE2 = "case2"
    FEATURE_SWEEP = "sweep-features"
    CROP_SWEEP = "sweep-crop"
    SENSE_COMPARE = "sense-compare"


@dataclass
class ExperimentConfig:
    classes: list[int] = field(default_factory=lambda: [int(c) for c in WaveformClass])
    snr_levels_db: list[float] = field(default_factory=lambda: list(DEFAULT_SNR_LEVELS))
    per_class_per_snr: int = 40
    record_length: int = 16384
    fam: FamConfig = field(default_factory=FamConfig)
    feature_kind: str = "SCF_CROP"
    crop_rows: int = 16
    crop_cols: int = 16
    normalization: str = "maxabs"
    train: TrainConfig = field(default_factory=TrainConfig)
    train_frac: float = 0.6
    mode: Mode = Mode.CASE1
    seed: int = 0
    profile: WaveformProfile = field(default_factory=WaveformProfile)
    # feature sweep
    sweep_features: list[str] = field(default_factory=lambda: ["IQ", "AP", "FFT", "SCF_CROP"])
    # crop sweep
    crop_sizes: list = field(default_factory=lambda: list(CROP_SIZES))
    train_full_crop: bool = False
    timing_examples: int = 64
    # sense comparison
    sense_class: int = int(WaveformClass.UMTS)
    cfar_pfas: list[float] = field(default_factory=lambda: [0.05, 0.1])
    cfar_calibration_size: int = 1000
    cfar_noise_trials: int = 1000

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.classes = sorted(int(WaveformClass(c)) for c in self.classes)
        self.snr_levels_db = [float(s) for s in self.snr_levels_db]
        self.validate()

    def validate(self) -> None:
        if len(set(self.classes)) != len(self.classes) or len(self.classes) < 2:
            raise InvalidInput("classes must hold at least two distinct waveform classes")
        if not self.snr_levels_db:
            raise InvalidInput("snr_levels_db must not be empty")
        if self.per_class_per_snr < 1:
            raise InvalidInput("per_class_per_snr must be positive")
        if self.record_length < self.fam.n_prime:
            raise InvalidInput("record_length is shorter than the FAM channelizer")
        self.fam.validate(self.record_length)
        try:
            FeatureKind[self.feature_kind.upper()]
            for k in self.sweep_features:
                FeatureKind[k.upper()]
        except KeyError as e:
            raise InvalidInput(f"unknown feature kind {e}") from None
        Normalization(self.normalization)
        if not 0.0 < self.train_frac < 1.0:
            raise InvalidInput("train_frac must lie strictly between 0 and 1")
        if self.crop_rows < 1 or self.crop_cols < 1:
            raise InvalidInput("crop dimensions must be positive")
        for c in self.crop_sizes:
            if c != "full" and (not isinstance(c, int) or c < 1):
                raise InvalidInput(f"bad crop size {c!r}")
        noise = int(WaveformClass.NOISE)
        if self.mode in (Mode.CASE1, Mode.CASE2, Mode.FEATURE_SWEEP, Mode.CROP_SWEEP) and noise not in self.classes:
            raise InvalidInput(f"{self.mode.value} needs the noise class among the classes")
        if self.mode is Mode.CASE2 and len(self.classes) < 3:
            raise InvalidInput("case2 needs noise plus at least two signal classes")
        if self.sense_class == noise:
            raise InvalidInput("sense_class must be a signal class")
        for p in self.cfar_pfas:
            if not 0.0 < p < 1.0:
                raise InvalidInput("CFAR false-alarm targets must lie in (0, 1)")

    @property
    def signal_classes(self) -> list[int]:
        return [c for c in self.classes if c != int(WaveformClass.NOISE)]

    # -- (de)serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidInput(f"unknown config keys: {sorted(unknown)}")
        try:
            if "fam" in d and isinstance(d["fam"], dict):
                d["fam"] = FamConfig(**d["fam"])
            if "train" in d and isinstance(d["train"], dict):
                d["train"] = TrainConfig(**d["train"])
            if "profile" in d and isinstance(d["profile"], dict):
                p = dict(d["profile"])
                if isinstance(p.get("channel"), dict):
                    ch = dict(p["channel"])
                    for k in ("tap_delays_samples", "tap_power_profile_db"):
                        if k in ch:
                            ch[k] = tuple(ch[k])
                    p["channel"] = ChannelConfig(**ch)
                d["profile"] = WaveformProfile(**p)
            return cls(**d)
        except TypeError as e:
            raise InvalidInput(f"bad config: {e}") from e

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default) + "\n"

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise InvalidInput(f"{path}: not valid JSON ({e})") from e
        if not isinstance(d, dict):
            raise InvalidInput(f"{path}: top level must be an object")
        return cls.from_dict(d)


def _json_default(o):
    if isinstance(o, float) and o != o:
        return None
    if isinstance(o, enum.Enum):
        return o.value
    raise TypeError(f"cannot serialize {type(o).__name__}")
