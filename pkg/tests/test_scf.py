import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import signal as sps

from cyclosense.errors import InvalidInput
from cyclosense.scf import (
    FamConfig,
    ScfComplex,
    ScfMatrix,
    complex_demodulates,
    compute_scf,
    direct_caf,
    direct_scf_oracle,
    fam_scf,
    oracle_freq_axis,
    scf_magnitude,
)
from cyclosense.waveform import ComplexSignal, generate_dsss, generate_noise, generate_ofdm, normalize_power


def _dsss(n_bits=1024, sf=16, seed=1):
    bits = np.random.default_rng(seed).integers(0, 2, n_bits)
    return normalize_power(generate_dsss(bits, sf, seed, 1))


def test_config_validation():
    with pytest.raises(InvalidInput):
        FamConfig(n_prime=0)
    with pytest.raises(InvalidInput):
        FamConfig(demod_window="kaiser")
    with pytest.raises(InvalidInput):
        FamConfig(smooth_window="hann")
    cfg = FamConfig(n_prime=16, l_hop=3)
    with pytest.raises(InvalidInput):
        cfg.validate(1024)
    with pytest.raises(InvalidInput):
        FamConfig().validate(1000)
    with pytest.raises(InvalidInput):
        FamConfig(n_prime=32).validate(16)


def test_demodulates_of_zeros():
    d = complex_demodulates(ComplexSignal(np.zeros(64, dtype=complex)), FamConfig())
    assert d.shape == (64, 16)
    assert np.all(d == 0)


def test_demodulates_rejects_long_window():
    with pytest.raises(InvalidInput):
        complex_demodulates(ComplexSignal(np.ones(8, dtype=complex)), FamConfig(n_prime=16))


def test_demodulates_exact_bin_tone():
    k0 = 5
    n = np.arange(256)
    r = ComplexSignal(np.exp(2j * np.pi * n * k0 / 16))
    d = complex_demodulates(r, FamConfig(demod_window="rectangular"))
    # full frames only; the last ones are zero padded
    mags = np.abs(d[: 256 - 16])
    others = np.delete(mags, k0, axis=1)
    assert np.all(mags[:, k0] > 1e3 * others.max(axis=1).clip(1e-300))


@given(st.integers(0, 2**32), st.sampled_from([1, 2, 4]), st.sampled_from([4, 8, 16]))
def test_demodulates_match_direct_dft(seed, hop, npr):
    n = 64 * hop
    x = generate_noise(n, seed).samples
    cfg = FamConfig(n_prime=npr, l_hop=hop)
    d = complex_demodulates(ComplexSignal(x), cfg)
    a = np.hamming(npr)
    padded = np.concatenate([x, np.zeros(npr)])
    for t in range(0, d.shape[0], 7):
        seg = padded[t * hop : t * hop + npr] * a
        for k in range(npr):
            direct = sum(seg[m] * np.exp(-2j * np.pi * k * (m + t * hop) / npr) for m in range(npr))
            assert abs(d[t, k] - direct) <= 1e-6 * max(1.0, abs(direct))


def test_default_shape():
    m = compute_scf(generate_noise(16384, 0))
    assert m.shape == (8193, 16)
    assert m.alpha_axis[0] == 0.0
    assert m.alpha_axis[-1] == pytest.approx(0.5)
    assert m.zero_alpha_row == 0


def test_two_sided_shape_and_axis():
    s = fam_scf(generate_noise(1024, 0), FamConfig(one_sided_alpha=False))
    assert s.shape == (1024, 16)
    assert s.alpha_axis[512] == 0.0
    m = scf_magnitude(s)
    assert m.zero_alpha_row == 512


def test_fam_of_zeros():
    s = fam_scf(ComplexSignal(np.zeros(256, dtype=complex)))
    assert np.all(s.values == 0)


def test_noise_alpha_zero_dominates():
    ratios = []
    for seed in range(10):
        m = compute_scf(generate_noise(16384, seed)).values
        ratios.append(m[1:].max(axis=0) / m[0])
    assert np.all(np.mean(ratios, axis=0) < 0.2)


def test_dsss_symbol_rate_peak():
    m = compute_scf(_dsss())
    row = m.alpha_bin(1 / 16)
    assert np.all(m.values[row] > 5 * np.median(m.values, axis=0))


def test_scf_magnitude_examples():
    z = ScfComplex(np.array([[3 + 4j, 0]]), np.zeros(1), np.zeros(2))
    np.testing.assert_array_equal(scf_magnitude(z).values, [[5.0, 0.0]])


@given(st.integers(0, 2**32))
def test_scf_magnitude_definition(seed):
    g = np.random.default_rng(seed)
    v = g.normal(size=(9, 4)) + 1j * g.normal(size=(9, 4))
    m = scf_magnitude(ScfComplex(v, np.arange(9.0), np.arange(4.0))).values
    assert np.all(m >= 0)
    np.testing.assert_allclose(m, np.sqrt(v.real**2 + v.imag**2), rtol=1e-15)


def test_scf_matrix_validation():
    with pytest.raises(InvalidInput):
        ScfMatrix(np.ones(3), np.zeros(3), np.zeros(1))
    with pytest.raises(InvalidInput):
        ScfMatrix(-np.ones((2, 2)), np.zeros(2), np.zeros(2))
    m = ScfMatrix(np.ones((5, 2)), np.arange(5) / 8, np.zeros(2))
    with pytest.raises(InvalidInput):
        m.alpha_bin(0.9)


def test_oracle_of_zeros():
    assert np.all(direct_scf_oracle(ComplexSignal(np.zeros(64, dtype=complex)), 0.1, 8) == 0)


def test_oracle_tone_psd_peak():
    f0 = 0.125
    n = np.arange(512)
    s = direct_scf_oracle(ComplexSignal(np.exp(2j * np.pi * f0 * n)), 0.0, 16)
    f = oracle_freq_axis(16)
    assert abs(f[np.argmax(np.abs(s))] - f0) < 1 / 33


def test_oracle_rejects_bad_lag():
    with pytest.raises(InvalidInput):
        direct_caf(ComplexSignal(np.ones(16, dtype=complex)), 0.0, 8)
    with pytest.raises(InvalidInput):
        direct_caf(ComplexSignal(np.ones(16, dtype=complex)), 0.0, 0)


def test_oracle_dsss_symbol_rate_beats_incommensurate():
    r = _dsss(256)
    on = np.abs(direct_caf(r, 1 / 16, 16)).max()
    off = np.abs(direct_caf(r, 1 / (16 * math.sqrt(2)), 16)).max()
    assert on > 5 * off


def test_alpha_zero_row_tracks_welch_psd():
    r = _dsss(1024)
    m = compute_scf(r, FamConfig(demod_window="hamming"))
    _, psd = sps.welch(r.samples, nperseg=16, noverlap=15, window="hamming", return_onesided=False, detrend=False)
    psd = np.fft.fftshift(psd)
    assert np.corrcoef(m.values[0], psd)[0, 1] > 0.9


def test_two_sided_symmetry_for_real_input():
    x = np.random.default_rng(4).normal(size=2048)
    m = scf_magnitude(fam_scf(ComplexSignal(x), FamConfig(one_sided_alpha=False))).values
    centre = m.shape[0] // 2
    # row centre + q is alpha = q / P, row centre - q is -q / P
    np.testing.assert_allclose(m[centre + 1 :], m[centre - 1 : 0 : -1], rtol=1e-6, atol=1e-12)


@given(st.integers(0, 2**32), st.floats(0.01, 100.0), st.floats(-math.pi, math.pi))
def test_quadratic_in_scale(seed, amp, phase):
    r = generate_noise(512, seed)
    c = amp * np.exp(1j * phase)
    a = compute_scf(r).values
    b = compute_scf(ComplexSignal(c * r.samples)).values
    np.testing.assert_allclose(b, abs(c) ** 2 * a, rtol=1e-9, atol=1e-12 * abs(c) ** 2 * a.max())


def test_fam_peak_agrees_with_oracle_for_dsss():
    r = _dsss()
    m = compute_scf(r)
    v = m.values.sum(axis=1)
    peak = int(np.argmax(v[1:])) + 1
    bins = np.arange(peak - 24, peak + 25)
    e = [np.mean(np.abs(direct_scf_oracle(r, m.alpha_axis[b], 32)) ** 2) for b in bins]
    assert abs(int(bins[int(np.argmax(e))]) - peak) <= 1


def test_oracle_sees_ofdm_cp_cycle():
    # the CP feature sits at lag N, which an auto-product FAM with N' = 16 cannot
    # reach; the oracle with lags up to N finds it at the symbol rate
    o = ComplexSignal(normalize_power(generate_ofdm(64, 16, 205, 16, 2)).samples[:16384])
    m = compute_scf(o)
    bins = np.arange(190, 221)
    e = [np.mean(np.abs(direct_scf_oracle(o, m.alpha_axis[b], 80)) ** 2) for b in bins]
    assert abs(int(bins[int(np.argmax(e))]) - m.alpha_bin(1 / 80)) <= 1


def test_length_invariant_magnitude():
    a = compute_scf(generate_noise(4096, 1)).values[0].mean()
    b = compute_scf(generate_noise(16384, 1)).values[0].mean()
    assert a == pytest.approx(b, rel=0.1)
