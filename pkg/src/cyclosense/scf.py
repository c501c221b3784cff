"""Spectral correlation estimation with the FFT accumulation method.

The estimator channelises the record with a Hamming-windowed N'-point FFT at
every hop of L samples (the complex demodulates), multiplies each channel by
its own conjugate and takes a P-point FFT over hops, P = len(r) / L.  Only the
auto-conjugate products are formed, so the output is a (cyclic frequency x
channel) matrix rather than a full bi-frequency plane; with 16384 samples,
N' = 16 and L = 1 it is 8193 x 16 on the one-sided alpha axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInput
from .waveform import ComplexSignal

__all__ = [
    "FamConfig",
    "ScfComplex",
    "ScfMatrix",
    "complex_demodulates",
    "fam_scf",
    "scf_magnitude",
    "compute_scf",
    "direct_caf",
    "direct_scf_oracle",
    "oracle_freq_axis",
]

_WINDOWS = ("hamming", "rectangular")


@dataclass(frozen=True)
class FamConfig:
    n_prime: int = 16
    l_hop: int = 1
    demod_window: str = "hamming"
    smooth_window: str = "rectangular"
    one_sided_alpha: bool = True

    def __post_init__(self):
        if self.n_prime < 1 or self.l_hop < 1:
            raise InvalidInput("n_prime and l_hop must be positive")
        if self.demod_window not in _WINDOWS:
            raise InvalidInput(f"unknown demodulation window {self.demod_window!r}")
        if self.smooth_window != "rectangular":
            raise InvalidInput("only the unit rectangle smoothing window is supported")

    def num_hops(self, signal_length: int) -> int:
        return signal_length // self.l_hop

    def validate(self, signal_length: int) -> None:
        if self.n_prime > signal_length:
            raise InvalidInput(f"n_prime={self.n_prime} exceeds signal length {signal_length}")
        if signal_length % self.l_hop:
            raise InvalidInput("signal length must be a multiple of l_hop")
        p = signal_length // self.l_hop
        if p & (p - 1):
            raise InvalidInput(f"number of hops P={p} must be a power of two")

    def output_shape(self, signal_length: int) -> tuple[int, int]:
        p = self.num_hops(signal_length)
        return (p // 2 + 1 if self.one_sided_alpha else p, self.n_prime)

    def window(self) -> np.ndarray:
        if self.demod_window == "hamming":
            return np.hamming(self.n_prime)
        return np.ones(self.n_prime)


@dataclass(eq=False)
class ScfComplex:
    """Complex FAM output; rows are cyclic frequencies, columns are channels.

    Both axes are in cycles per sample.  Channels are ordered from -1/2 up
    (fftshift order).  The two-sided alpha axis is fftshift-ordered as well,
    which puts alpha = 0 at row P // 2.
    """

    values: np.ndarray
    alpha_axis: np.ndarray
    freq_axis: np.ndarray
    one_sided: bool = True

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(eq=False)
class ScfMatrix:
    values: np.ndarray
    alpha_axis: np.ndarray
    freq_axis: np.ndarray
    one_sided: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise InvalidInput("SCF matrix must be 2-D")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InvalidInput("SCF magnitudes must be finite and non-negative")
        self.values = v

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def zero_alpha_row(self) -> int:
        return 0 if self.one_sided else self.values.shape[0] // 2

    def alpha_bin(self, alpha: float) -> int:
        """Row index of the alpha bin nearest to ``alpha``."""
        step = self.alpha_axis[1] - self.alpha_axis[0] if self.alpha_axis.size > 1 else 1.0
        idx = int(round((alpha - self.alpha_axis[0]) / step))
        if idx < 0 or idx >= self.alpha_axis.size:
            raise InvalidInput(f"alpha={alpha} lies outside the cyclic frequency axis")
        return idx


def _samples(r) -> np.ndarray:
    if isinstance(r, ComplexSignal):
        return r.samples
    return np.asarray(r, dtype=np.complex128).ravel()


def complex_demodulates(r: ComplexSignal, cfg: FamConfig, window: np.ndarray | None = None) -> np.ndarray:
    """Windowed N'-point spectra of every hop, shape (P, N'), natural FFT order.

    Row t is the DFT of ``r[tL : tL + N']`` (zero padded past the end) times
    the window, with the phase of each channel k referred back to sample 0 by
    the factor exp(-2j*pi*k*t*L/N').
    """
    x = _samples(r)
    n = x.size
    cfg.validate(n)
    npr, hop = cfg.n_prime, cfg.l_hop
    p = cfg.num_hops(n)
    a = cfg.window() if window is None else np.asarray(window, dtype=np.float64)
    padded = np.concatenate([x, np.zeros(npr, dtype=x.dtype)])
    frames = sliding_window_view(padded, npr)[: p * hop : hop]
    spectra = np.fft.fft(frames * a, axis=1)
    k = np.arange(npr)
    starts = np.arange(p) * hop
    phase = np.exp(-2j * np.pi * np.outer(starts % npr, k) / npr)
    return spectra * phase


def fam_scf(r: ComplexSignal, cfg: FamConfig | None = None) -> ScfComplex:
    """FAM estimate restricted to auto-conjugate channel products.

    The P-point FFT over hops is divided by P so that magnitudes do not grow
    with record length.
    """
    cfg = cfg or FamConfig()
    demod = complex_demodulates(r, cfg)
    p = demod.shape[0]
    prod = (demod * demod.conj()).real
    scf = np.fft.fft(prod, axis=0) / p
    scf = np.fft.fftshift(scf, axes=1)
    freq = np.fft.fftshift(np.fft.fftfreq(cfg.n_prime))
    alpha = np.fft.fftfreq(p) / cfg.l_hop
    if cfg.one_sided_alpha:
        rows = p // 2 + 1
        scf = scf[:rows]
        alpha = np.arange(rows) / (p * cfg.l_hop)
    else:
        scf = np.fft.fftshift(scf, axes=0)
        alpha = np.fft.fftshift(alpha)
    return ScfComplex(scf, alpha, freq, cfg.one_sided_alpha)


def scf_magnitude(s: ScfComplex) -> ScfMatrix:
    return ScfMatrix(np.abs(s.values), s.alpha_axis, s.freq_axis, s.one_sided)


def compute_scf(r: ComplexSignal, cfg: FamConfig | None = None) -> ScfMatrix:
    """|SCF| matrix of a record, the classifier input."""
    return scf_magnitude(fam_scf(r, cfg))


def direct_caf(r: ComplexSignal, alpha: float, max_lag: int) -> np.ndarray:
    """Brute-force cyclic autocorrelation for lags -max_lag..max_lag.

    R(tau) = (1/T) * sum_t r(t + tau) conj(r(t)) exp(-2j*pi*alpha*t), summing
    over the t for which both samples exist.
    """
    x = _samples(r)
    n = x.size
    if max_lag < 1 or max_lag >= n / 2:
        raise InvalidInput("max_lag must satisfy 1 <= max_lag < len(r) / 2")
    t = np.arange(n)
    rot = np.exp(-2j * np.pi * alpha * t)
    out = np.empty(2 * max_lag + 1, dtype=np.complex128)
    for i, tau in enumerate(range(-max_lag, max_lag + 1)):
        if tau >= 0:
            out[i] = np.sum(x[tau:] * np.conj(x[: n - tau]) * rot[: n - tau]) / n
        else:
            out[i] = np.sum(x[: n + tau] * np.conj(x[-tau:]) * rot[-tau:]) / n
    return out


def oracle_freq_axis(max_lag: int) -> np.ndarray:
    return np.fft.fftshift(np.fft.fftfreq(2 * max_lag + 1))


def direct_scf_oracle(r: ComplexSignal, alpha: float, max_lag: int) -> np.ndarray:
    """SCF at one cyclic frequency from the brute-force CAF.

    The CAF is transformed over lag with a plain DFT; the result is sampled on
    ``oracle_freq_axis(max_lag)``.  O(len(r) * max_lag); meant for tests.
    """
    caf = direct_caf(r, alpha, max_lag)
    lags = np.arange(-max_lag, max_lag + 1)
    f = oracle_freq_axis(max_lag)
    return np.exp(-2j * np.pi * np.outer(f, lags)) @ caf
