"""Synthetic baseband waveforms and the fading + AWGN channel.

Four classes stand in for measured cellular captures: noise only, a GSM-like
GMSK burst, a UMTS-like direct-sequence spread signal and an LTE-like CP-OFDM
signal.  Every generator is a pure function of its arguments and a 64-bit
seed; randomness always comes from ``numpy.random.PCG64`` so that datasets
can be rebuilt byte for byte on any platform.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput

__all__ = [
    "ComplexSignal",
    "WaveformClass",
    "ChannelConfig",
    "ChannelOutput",
    "WaveformProfile",
    "make_rng",
    "derive_seed",
    "normalize_power",
    "gaussian_pulse",
    "rrc_pulse",
    "spreading_code",
    "qam_constellation",
    "generate_gmsk",
    "generate_dsss",
    "generate_ofdm",
    "generate_noise",
    "propagate",
    "apply_channel",
    "synthesize",
    "receive",
]


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for a 64-bit seed."""
    if seed < 0 or seed >= 2**64:
        raise InvalidInput(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(*keys: int) -> int:
    """Collapse a tuple of non-negative integers into one 64-bit seed.

    Used to partition a master seed per record so that results do not depend
    on generation order or worker scheduling.
    """
    ss = np.random.SeedSequence([int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(eq=False)
class ComplexSignal:
    samples: np.ndarray
    sample_rate_hz: float = 1.0

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 1 or s.size == 0:
            raise InvalidInput("a signal needs a non-empty 1-D sample vector")
        if not np.iscomplexobj(s):
            s = s.astype(np.complex128)
        if not np.all(np.isfinite(s)):
            raise InvalidInput("signal samples must be finite")
        if not self.sample_rate_hz > 0:
            raise InvalidInput("sample_rate_hz must be positive")
        self.samples = s

    def __len__(self) -> int:
        return self.samples.size

    def power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))


class WaveformClass(enum.IntEnum):
    NOISE = 0
    GSM = 1
    UMTS = 2
    LTE = 3


def normalize_power(sig: ComplexSignal) -> ComplexSignal:
    """Scale to unit mean power; an all-zero signal is returned unchanged."""
    p = sig.power()
    if p == 0.0:
        return sig
    return ComplexSignal(sig.samples / math.sqrt(p), sig.sample_rate_hz)


def _bits(bits) -> np.ndarray:
    b = np.asarray(bits, dtype=np.int64).ravel()
    if b.size == 0:
        raise InvalidInput("bit vector is empty")
    if np.any((b != 0) & (b != 1)):
        raise InvalidInput("bits must be 0 or 1")
    return b


# ---------------------------------------------------------------------------
# pulses and constellations


def gaussian_pulse(samples_per_symbol: int, bt_product: float, span_symbols: int = 4) -> np.ndarray:
    """Unit-area Gaussian frequency-shaping filter with the given BT product."""
    half = span_symbols * samples_per_symbol // 2
    t = np.arange(-half, half + 1) / samples_per_symbol
    sigma = math.sqrt(math.log(2.0)) / (2.0 * math.pi * bt_product)
    g = np.exp(-(t**2) / (2.0 * sigma**2))
    return g / g.sum()


def rrc_pulse(samples_per_chip: int, rolloff: float, span_chips: int = 8) -> np.ndarray:
    """Root-raised-cosine taps normalised to unit energy."""
    half = span_chips * samples_per_chip // 2
    t = np.arange(-half, half + 1) / samples_per_chip
    beta = rolloff
    h = np.empty_like(t)
    for i, ti in enumerate(t):
        if ti == 0.0:
            h[i] = 1.0 + beta * (4.0 / math.pi - 1.0)
        elif beta > 0 and abs(abs(ti) - 1.0 / (4.0 * beta)) < 1e-12:
            h[i] = (beta / math.sqrt(2.0)) * (
                (1 + 2 / math.pi) * math.sin(math.pi / (4 * beta))
                + (1 - 2 / math.pi) * math.cos(math.pi / (4 * beta))
            )
        else:
            num = math.sin(math.pi * ti * (1 - beta)) + 4 * beta * ti * math.cos(math.pi * ti * (1 + beta))
            den = math.pi * ti * (1 - (4 * beta * ti) ** 2)
            h[i] = num / den
    return h / math.sqrt(np.sum(h**2))


def spreading_code(spreading_factor: int, seed: int) -> np.ndarray:
    """Pseudo-random QPSK chip code: each of I and Q is a +/-1 sequence."""
    rng = make_rng(seed)
    i = 2 * rng.integers(0, 2, spreading_factor) - 1
    q = 2 * rng.integers(0, 2, spreading_factor) - 1
    return (i + 1j * q) / math.sqrt(2.0)


def qam_constellation(order: int) -> np.ndarray:
    """Square QAM points with unit average energy."""
    if order not in (4, 16, 64):
        raise InvalidInput(f"qam_order must be 4, 16 or 64, got {order}")
    m = int(round(math.sqrt(order)))
    levels = 2 * np.arange(m) - (m - 1)
    pts = (levels[:, None] + 1j * levels[None, :]).ravel()
    return pts / math.sqrt(np.mean(np.abs(pts) ** 2))


# ---------------------------------------------------------------------------
# generators


def _filter_same(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Centred convolution with the length of ``x`` even when the taps are longer."""
    half = (len(taps) - 1) // 2
    return np.convolve(x, taps)[half : half + len(x)]


def generate_gmsk(bits, samples_per_symbol: int = 4, bt_product: float = 0.3) -> ComplexSignal:
    """Continuous-phase GMSK (modulation index 0.5), one bit per symbol.

    Bit 1 maps to a positive frequency deviation, bit 0 to a negative one.
    """
    b = _bits(bits)
    if samples_per_symbol < 2:
        raise InvalidInput("samples_per_symbol must be at least 2")
    if not 0.0 < bt_product <= 1.0:
        raise InvalidInput("bt_product must lie in (0, 1]")
    nrz = np.repeat(2.0 * b - 1.0, samples_per_symbol)
    freq = _filter_same(nrz, gaussian_pulse(samples_per_symbol, bt_product))
    phase = (math.pi / 2.0 / samples_per_symbol) * np.cumsum(freq)
    return ComplexSignal(np.exp(1j * phase))


def generate_dsss(
    bits,
    spreading_factor: int = 16,
    seed: int = 0,
    samples_per_chip: int = 1,
    rolloff: float | None = None,
) -> ComplexSignal:
    """BPSK data spread by a fixed QPSK chip code that repeats every symbol.

    With ``rolloff=None`` chips are rectangular (held for ``samples_per_chip``
    samples).  Otherwise chips are shaped by a root-raised-cosine filter.
    """
    b = _bits(bits)
    if spreading_factor < 4:
        raise InvalidInput("spreading_factor must be at least 4")
    if samples_per_chip < 1:
        raise InvalidInput("samples_per_chip must be positive")
    code = spreading_code(spreading_factor, seed)
    chips = np.outer(2.0 * b - 1.0, code).ravel()
    if rolloff is None:
        return ComplexSignal(np.repeat(chips, samples_per_chip))
    if samples_per_chip < 2:
        raise InvalidInput("pulse shaping needs samples_per_chip >= 2")
    up = np.zeros(chips.size * samples_per_chip, dtype=np.complex128)
    up[::samples_per_chip] = chips
    shaped = _filter_same(up, rrc_pulse(samples_per_chip, rolloff))
    return ComplexSignal(shaped)


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def generate_ofdm(
    num_subcarriers: int = 64,
    cp_len: int = 16,
    num_symbols: int = 1,
    qam_order: int = 16,
    seed: int = 0,
    active_subcarriers: int | None = None,
    payload: np.ndarray | None = None,
) -> ComplexSignal:
    """CP-OFDM symbols.

    ``active_subcarriers`` (even) loads that many subcarriers symmetrically
    around an unused DC bin, leaving the band edges empty; ``None`` loads all
    of them.  An explicit ``payload`` of shape (num_symbols, num_subcarriers)
    replaces the random QAM data.
    """
    n = num_subcarriers
    if not _is_pow2(n):
        raise InvalidInput(f"num_subcarriers must be a power of two, got {n}")
    if not 0 <= cp_len < n:
        raise InvalidInput("cp_len must satisfy 0 <= cp_len < num_subcarriers")
    if num_symbols < 1:
        raise InvalidInput("num_symbols must be positive")
    if payload is not None:
        grid = np.asarray(payload, dtype=np.complex128)
        if grid.shape != (num_symbols, n):
            raise InvalidInput(f"payload must have shape {(num_symbols, n)}")
    else:
        rng = make_rng(seed)
        pts = qam_constellation(qam_order)
        grid = np.zeros((num_symbols, n), dtype=np.complex128)
        if active_subcarriers is None:
            used = np.arange(n)
        else:
            k = active_subcarriers
            if k % 2 or not 0 < k < n:
                raise InvalidInput("active_subcarriers must be even and below num_subcarriers")
            used = np.r_[1 : k // 2 + 1, n - k // 2 : n]
        grid[:, used] = pts[rng.integers(0, pts.size, (num_symbols, used.size))]
    body = np.fft.ifft(grid, axis=1) * math.sqrt(n)
    out = np.concatenate([body[:, n - cp_len :], body], axis=1) if cp_len else body
    return ComplexSignal(out.ravel())


def generate_noise(length: int, seed: int) -> ComplexSignal:
    """Circularly-symmetric complex Gaussian noise with unit variance."""
    if length < 1:
        raise InvalidInput("length must be positive")
    rng = make_rng(seed)
    z = rng.standard_normal((2, length))
    return ComplexSignal((z[0] + 1j * z[1]) / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# channel


@dataclass
class ChannelConfig:
    num_taps: int = 3
    tap_delays_samples: tuple[int, ...] = (0, 2, 5)
    tap_power_profile_db: tuple[float, ...] = (0.0, -3.0, -6.0)
    snr_db: float = math.inf
    seed: int = 0
    fading: bool = True

    def __post_init__(self):
        self.tap_delays_samples = tuple(int(d) for d in self.tap_delays_samples)
        self.tap_power_profile_db = tuple(float(p) for p in self.tap_power_profile_db)
        if self.num_taps < 1:
            raise InvalidInput("num_taps must be positive")
        if len(self.tap_delays_samples) != self.num_taps or len(self.tap_power_profile_db) != self.num_taps:
            raise InvalidInput("tap delay and power lists must have num_taps entries")
        d = np.asarray(self.tap_delays_samples)
        if d[0] != 0 or np.any(np.diff(d) < 0):
            raise InvalidInput("tap delays must start at 0 and be nondecreasing")

    def tap_powers(self) -> np.ndarray:
        p = 10.0 ** (np.asarray(self.tap_power_profile_db) / 10.0)
        return p / p.sum()


@dataclass(eq=False)
class ChannelOutput:
    signal: ComplexSignal
    impulse_response: np.ndarray
    signal_power: float
    noise_power: float = 0.0

    @property
    def realized_snr_db(self) -> float:
        if self.noise_power == 0.0:
            return math.inf
        return 10.0 * math.log10(self.signal_power / self.noise_power)


def propagate(x: ComplexSignal, cfg: ChannelConfig) -> ChannelOutput:
    """Rayleigh multipath followed by AWGN, keeping the powers for audit.

    The noise is rescaled to the measured power of the faded signal, so the
    realised SNR equals ``cfg.snr_db`` up to rounding.
    """
    rng = make_rng(cfg.seed)
    p = cfg.tap_powers()
    if cfg.fading:
        z = rng.standard_normal((2, cfg.num_taps))
        gains = np.sqrt(p / 2.0) * (z[0] + 1j * z[1])
    else:
        gains = np.sqrt(p).astype(np.complex128)
    h = np.zeros(cfg.tap_delays_samples[-1] + 1, dtype=np.complex128)
    np.add.at(h, np.asarray(cfg.tap_delays_samples), gains)

    y = np.convolve(x.samples, h)[: len(x)] if h.size > 1 else x.samples * h[0]
    ps = float(np.mean(np.abs(y) ** 2))
    if math.isinf(cfg.snr_db) and cfg.snr_db > 0:
        return ChannelOutput(ComplexSignal(y, x.sample_rate_hz), h, ps, 0.0)

    z = rng.standard_normal((2, len(x)))
    w = z[0] + 1j * z[1]
    target = ps / 10.0 ** (cfg.snr_db / 10.0)
    w *= math.sqrt(target / np.mean(np.abs(w) ** 2))
    pn = float(np.mean(np.abs(w) ** 2))
    return ChannelOutput(ComplexSignal(y + w, x.sample_rate_hz), h, ps, pn)


def apply_channel(x: ComplexSignal, cfg: ChannelConfig) -> ComplexSignal:
    return propagate(x, cfg).signal


# ---------------------------------------------------------------------------
# class-level synthesis used by the dataset builder


@dataclass
class WaveformProfile:
    """Per-class synthesis defaults for desk-scale datasets."""

    gmsk_samples_per_symbol: int = 8
    gmsk_bt: float = 0.3
    dsss_spreading_factor: int = 16
    dsss_samples_per_chip: int = 2
    dsss_rolloff: float | None = 0.22
    ofdm_subcarriers: int = 64
    ofdm_cp_len: int = 16
    ofdm_qam_order: int = 16
    ofdm_active_subcarriers: int | None = 40
    channel: ChannelConfig = field(default_factory=ChannelConfig)

    def symbol_period(self, cls: WaveformClass) -> int:
        """Samples per symbol, i.e. the inverse of the main cyclic frequency."""
        if cls == WaveformClass.GSM:
            return self.gmsk_samples_per_symbol
        if cls == WaveformClass.UMTS:
            return self.dsss_spreading_factor * self.dsss_samples_per_chip
        if cls == WaveformClass.LTE:
            return self.ofdm_subcarriers + self.ofdm_cp_len
        raise InvalidInput("noise has no symbol period")


def synthesize(cls: WaveformClass, num_samples: int, seed: int, profile: WaveformProfile | None = None) -> ComplexSignal:
    """Unit-power transmit waveform of ``cls`` with a random symbol timing offset."""
    prof = profile or WaveformProfile()
    cls = WaveformClass(cls)
    if cls == WaveformClass.NOISE:
        return generate_noise(num_samples, seed)
    rng = make_rng(seed)
    period = prof.symbol_period(cls)
    n_sym = num_samples // period + 2
    offset = int(rng.integers(0, period))
    if cls == WaveformClass.GSM:
        bits = rng.integers(0, 2, n_sym)
        sig = generate_gmsk(bits, prof.gmsk_samples_per_symbol, prof.gmsk_bt)
    elif cls == WaveformClass.UMTS:
        bits = rng.integers(0, 2, n_sym)
        code_seed = int(rng.integers(0, 2**63))
        sig = generate_dsss(
            bits, prof.dsss_spreading_factor, code_seed, prof.dsss_samples_per_chip, prof.dsss_rolloff
        )
    else:
        sig = generate_ofdm(
            prof.ofdm_subcarriers,
            prof.ofdm_cp_len,
            n_sym,
            prof.ofdm_qam_order,
            int(rng.integers(0, 2**63)),
            prof.ofdm_active_subcarriers,
        )
    return normalize_power(ComplexSignal(sig.samples[offset : offset + num_samples]))


def receive(
    cls: WaveformClass,
    num_samples: int,
    snr_db: float,
    seed: int,
    profile: WaveformProfile | None = None,
) -> ChannelOutput:
    """One received record under H0 (noise class) or H1 (any signal class)."""
    prof = profile or WaveformProfile()
    cls = WaveformClass(cls)
    if cls == WaveformClass.NOISE:
        w = generate_noise(num_samples, derive_seed(seed, 1))
        return ChannelOutput(w, np.zeros(1, dtype=np.complex128), 0.0, w.power())
    x = synthesize(cls, num_samples, derive_seed(seed, 0), prof)
    ch = prof.channel
    cfg = ChannelConfig(
        ch.num_taps, ch.tap_delays_samples, ch.tap_power_profile_db, snr_db, derive_seed(seed, 1), ch.fading
    )
    return propagate(x, cfg)
