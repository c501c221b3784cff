import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from cyclosense.errors import InvalidInput
from cyclosense.scf import direct_scf_oracle
from cyclosense.waveform import (
    ChannelConfig,
    ComplexSignal,
    WaveformClass,
    WaveformProfile,
    apply_channel,
    derive_seed,
    gaussian_pulse,
    generate_dsss,
    generate_gmsk,
    generate_noise,
    generate_ofdm,
    make_rng,
    normalize_power,
    propagate,
    receive,
    spreading_code,
    synthesize,
)


def test_complex_signal_rejects_bad_input():
    with pytest.raises(InvalidInput):
        ComplexSignal(np.array([], dtype=complex))
    with pytest.raises(InvalidInput):
        ComplexSignal(np.array([1.0, np.nan]))
    with pytest.raises(InvalidInput):
        ComplexSignal(np.ones(4), sample_rate_hz=0.0)


def test_class_labels_follow_label_order():
    assert [int(c) for c in WaveformClass] == [0, 1, 2, 3]
    assert WaveformClass(0).name == "NOISE"


def test_make_rng_rejects_out_of_range_seed():
    with pytest.raises(InvalidInput):
        make_rng(-1)
    with pytest.raises(InvalidInput):
        make_rng(2**64)
    make_rng(2**64 - 1)


def test_derive_seed_is_order_sensitive_and_stable():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert derive_seed(1, 2, 3) != derive_seed(3, 2, 1)
    assert 0 <= derive_seed(5) < 2**64


@given(st.integers(0, 2**32), st.integers(1, 300), st.floats(0.01, 100.0))
def test_normalize_power_gives_unit_power(seed, n, scale):
    x = scale * generate_noise(n, seed).samples
    assert abs(normalize_power(ComplexSignal(x)).power() - 1.0) < 1e-9


def test_normalize_power_leaves_zero_signal():
    z = ComplexSignal(np.zeros(8, dtype=complex))
    assert normalize_power(z).power() == 0.0


# -- GMSK ---------------------------------------------------------------------


@given(st.lists(st.integers(0, 1), min_size=1, max_size=64), st.integers(2, 16), st.floats(0.1, 1.0))
def test_gmsk_constant_envelope_and_continuous_phase(bits, sps, bt):
    s = generate_gmsk(bits, sps, bt).samples
    env = np.abs(s)
    assert np.max(np.abs(env - env[0])) / env[0] < 1e-6
    dphi = np.angle(s[1:] * np.conj(s[:-1]))
    assert np.all(np.abs(dphi) < math.pi)
    assert len(s) == len(bits) * sps


def test_gmsk_all_zeros_is_a_tone():
    sps = 4
    s = generate_gmsk(np.zeros(64, dtype=int), sps, 0.3).samples
    dphi = np.angle(s[1:] * np.conj(s[:-1]))
    # the filter span is 4 symbols, so skip two symbols at each end
    core = dphi[2 * sps : -2 * sps]
    assert np.max(np.abs(core - core[0])) < 1e-6
    assert core[0] == pytest.approx(-math.pi / 2 / sps)


def _brute_force_frequency(bits, sps, bt):
    g = gaussian_pulse(sps, bt)
    nrz = np.repeat(2.0 * np.asarray(bits) - 1.0, sps)
    half = len(g) // 2
    out = np.zeros(nrz.size)
    for n in range(nrz.size):
        acc = 0.0
        for k in range(len(g)):
            m = n + half - k
            if 0 <= m < nrz.size:
                acc += g[k] * nrz[m]
        out[n] = acc
    return out


def test_gmsk_alternating_bits_alternate_frequency_sign():
    sps = 8
    bits = [1, 0] * 16
    s = generate_gmsk(bits, sps, 0.3).samples
    dphi = np.angle(s[1:] * np.conj(s[:-1]))
    freq = _brute_force_frequency(bits, sps, 0.3)
    expected = (math.pi / 2 / sps) * freq[1:]
    np.testing.assert_allclose(dphi, expected, atol=1e-9)
    # sample at symbol centres away from the ends; the sign flips every symbol
    centres = np.arange(4, len(bits) - 4) * sps + sps // 2
    signs = np.sign(dphi[centres - 1])
    assert np.all(signs[1:] == -signs[:-1])
    assert signs[0] == (1 if bits[4] == 1 else -1)


def test_gmsk_rejects_bad_input():
    with pytest.raises(InvalidInput):
        generate_gmsk([], 4, 0.3)
    with pytest.raises(InvalidInput):
        generate_gmsk([1, 0], 1, 0.3)
    with pytest.raises(InvalidInput):
        generate_gmsk([1, 0], 4, 0.0)
    with pytest.raises(InvalidInput):
        generate_gmsk([2], 4, 0.3)


# -- DSSS ---------------------------------------------------------------------


def test_dsss_single_symbol_is_the_code():
    s = generate_dsss([1], spreading_factor=8, seed=7, samples_per_chip=1).samples
    np.testing.assert_array_equal(s, spreading_code(8, 7))


def test_dsss_code_reuse():
    s = generate_dsss([1, 1], spreading_factor=8, seed=7).samples
    np.testing.assert_array_equal(s[:8], s[8:])
    s = generate_dsss([1, 0], spreading_factor=8, seed=7).samples
    np.testing.assert_array_equal(s[:8], -s[8:])


@given(st.lists(st.integers(0, 1), min_size=1, max_size=40), st.integers(4, 64), st.integers(1, 4))
def test_dsss_length(bits, sf, spc):
    assert len(generate_dsss(bits, sf, 3, spc)) == len(bits) * sf * spc


def test_dsss_shaped_length_and_power():
    s = generate_dsss(np.ones(50, dtype=int), 16, 1, samples_per_chip=2, rolloff=0.22)
    assert len(s) == 50 * 16 * 2
    assert abs(normalize_power(s).power() - 1.0) < 1e-9


def test_dsss_rejects_short_code():
    with pytest.raises(InvalidInput):
        generate_dsss([1], spreading_factor=3)


def _cycle_energy_ratio(r, alpha, max_lag=80):
    # SCF energy at alpha against the median over nearby off-cycle frequencies
    def energy(a):
        return np.mean(np.abs(direct_scf_oracle(r, a, max_lag)) ** 2)

    offsets = np.arange(1, 12) * 0.37 * 40 / len(r)
    return energy(alpha) / np.median([energy(alpha + d) for d in offsets])


def test_dsss_cyclic_peak_at_symbol_rate():
    prof = WaveformProfile()
    alpha = 1.0 / prof.symbol_period(WaveformClass.UMTS)
    sig = receive(WaveformClass.UMTS, 16384, 10.0, 11, prof).signal
    noise = receive(WaveformClass.NOISE, 16384, 10.0, 11, prof).signal
    assert _cycle_energy_ratio(sig, alpha) > 5
    assert _cycle_energy_ratio(noise, alpha) < 2


def test_ofdm_cyclic_peak_at_symbol_rate():
    prof = WaveformProfile()
    alpha = 1.0 / prof.symbol_period(WaveformClass.LTE)
    sig = receive(WaveformClass.LTE, 16384, 10.0, 11, prof).signal
    noise = receive(WaveformClass.NOISE, 16384, 10.0, 12, prof).signal
    assert _cycle_energy_ratio(sig, alpha) > 5
    assert _cycle_energy_ratio(noise, alpha) < 2


# -- OFDM ---------------------------------------------------------------------


def test_ofdm_cp_small_example():
    s = generate_ofdm(8, 2, 1, 4, seed=3).samples
    np.testing.assert_array_equal(s[0:2], s[8:10])


@given(st.sampled_from([8, 16, 64]), st.integers(0, 7), st.integers(1, 6), st.sampled_from([4, 16, 64]), st.integers(0, 2**32))
def test_ofdm_cp_identity_and_length(n, cp, nsym, q, seed):
    s = generate_ofdm(n, cp, nsym, q, seed).samples
    assert len(s) == nsym * (n + cp)
    sym = s.reshape(nsym, n + cp)
    np.testing.assert_allclose(sym[:, :cp], sym[:, n:], atol=1e-12)


def test_ofdm_zero_payload_is_silent():
    s = generate_ofdm(16, 4, 3, payload=np.zeros((3, 16)))
    assert np.all(s.samples == 0)


def test_ofdm_rejects_bad_parameters():
    with pytest.raises(InvalidInput):
        generate_ofdm(48, 4)
    with pytest.raises(InvalidInput):
        generate_ofdm(16, 16)
    with pytest.raises(InvalidInput):
        generate_ofdm(16, 4, qam_order=8)


def test_ofdm_lag_n_correlation_lives_in_cp():
    n, cp, nsym = 64, 16, 400
    s = generate_ofdm(n, cp, nsym, 16, seed=5).samples
    # direct lag-N correlation at each position within the symbol, averaged over symbols
    starts = np.arange(nsym - 1) * (n + cp)
    corr = np.array([np.mean(s[starts + p] * np.conj(s[starts + p + n])) for p in range(n + cp)])
    assert np.all(np.abs(corr[:cp]) > 0.9)
    assert np.all(np.abs(corr[cp:]) < 0.2)


# -- noise --------------------------------------------------------------------


def test_noise_variance_and_mean():
    w = generate_noise(100_000, 42).samples
    assert np.var(w.real) == pytest.approx(0.5, abs=0.02)
    assert np.var(w.imag) == pytest.approx(0.5, abs=0.02)
    assert abs(np.mean(w)) < 4 / math.sqrt(w.size)


def test_noise_deterministic():
    np.testing.assert_array_equal(generate_noise(1000, 9).samples, generate_noise(1000, 9).samples)
    assert not np.array_equal(generate_noise(1000, 9).samples, generate_noise(1000, 10).samples)


def test_noise_ks_against_gaussian():
    w = generate_noise(100_000, 3).samples
    assert stats.kstest(w.real, "norm", args=(0.0, math.sqrt(0.5))).pvalue > 0.01
    assert stats.kstest(w.imag, "norm", args=(0.0, math.sqrt(0.5))).pvalue > 0.01


def test_noise_rejects_empty():
    with pytest.raises(InvalidInput):
        generate_noise(0, 1)


# -- channel ------------------------------------------------------------------


def test_channel_config_validation():
    with pytest.raises(InvalidInput):
        ChannelConfig(num_taps=2, tap_delays_samples=(0,), tap_power_profile_db=(0.0,))
    with pytest.raises(InvalidInput):
        ChannelConfig(num_taps=2, tap_delays_samples=(1, 2), tap_power_profile_db=(0.0, 0.0))
    with pytest.raises(InvalidInput):
        ChannelConfig(num_taps=2, tap_delays_samples=(0, -1), tap_power_profile_db=(0.0, 0.0))


@given(st.lists(st.floats(-30.0, 10.0), min_size=1, max_size=6))
def test_tap_powers_sum_to_one(db):
    cfg = ChannelConfig(len(db), tuple(range(len(db))), tuple(db))
    assert abs(cfg.tap_powers().sum() - 1.0) < 1e-9


def test_single_tap_noiseless_channel_is_a_gain():
    x = generate_ofdm(64, 16, 4, seed=1)
    out = propagate(x, ChannelConfig(1, (0,), (0.0,), math.inf, seed=4))
    np.testing.assert_array_equal(out.signal.samples, x.samples * out.impulse_response[0])
    assert out.noise_power == 0.0


def test_zero_db_snr_is_realized():
    x = normalize_power(generate_dsss(np.ones(200, dtype=int), 16, 2, 2))
    out = propagate(x, ChannelConfig(1, (0,), (0.0,), 0.0, seed=8, fading=False))
    assert out.signal_power / out.noise_power == pytest.approx(1.0, abs=0.023)
    # the injected noise really is the difference
    w = out.signal.samples - x.samples
    assert np.mean(np.abs(w) ** 2) == pytest.approx(out.noise_power, rel=1e-9)


@given(st.floats(-5.0, 20.0), st.integers(0, 2**32))
def test_realized_snr_within_tenth_db(snr, seed):
    x = normalize_power(generate_gmsk(np.arange(300) % 2, 4))
    out = propagate(x, ChannelConfig(snr_db=snr, seed=seed))
    assert abs(out.realized_snr_db - snr) < 0.1


def test_faded_phase_is_uniform():
    x = ComplexSignal(np.ones(4, dtype=complex))
    phases = np.array([np.angle(apply_channel(x, ChannelConfig(1, (0,), (0.0,), seed=s)).samples[0]) for s in range(4000)])
    counts, _ = np.histogram(phases, bins=16, range=(-math.pi, math.pi))
    assert stats.chisquare(counts).pvalue > 0.01


def test_faded_amplitude_is_rayleigh():
    x = ComplexSignal(np.ones(4, dtype=complex))
    amps = np.array([abs(apply_channel(x, ChannelConfig(1, (0,), (0.0,), seed=s)).samples[0]) for s in range(4000)])
    # unit mean power Rayleigh has scale 1/sqrt(2)
    assert stats.kstest(amps, "rayleigh", args=(0.0, math.sqrt(0.5))).pvalue > 0.01


def test_channel_deterministic():
    x = generate_noise(256, 1)
    a = apply_channel(x, ChannelConfig(snr_db=5.0, seed=3)).samples
    b = apply_channel(x, ChannelConfig(snr_db=5.0, seed=3)).samples
    np.testing.assert_array_equal(a, b)


# -- class-level synthesis ----------------------------------------------------


@pytest.mark.parametrize("cls", [WaveformClass.GSM, WaveformClass.UMTS, WaveformClass.LTE])
def test_synthesize_unit_power_and_deterministic(cls):
    a = synthesize(cls, 4096, 17)
    assert len(a) == 4096
    assert abs(a.power() - 1.0) < 1e-9
    np.testing.assert_array_equal(a.samples, synthesize(cls, 4096, 17).samples)


def test_noise_class_matches_noise_statistics():
    out = receive(WaveformClass.NOISE, 100_000, 10.0, 5)
    w = out.signal.samples
    assert out.signal_power == 0.0
    assert np.var(w.real) == pytest.approx(0.5, abs=0.02)
    assert stats.kstest(w.real, "norm", args=(0.0, math.sqrt(0.5))).pvalue > 0.01


@pytest.mark.parametrize("cls", list(WaveformClass))
def test_receive_is_deterministic(cls):
    a = receive(cls, 2048, 3.0, 99).signal.samples
    b = receive(cls, 2048, 3.0, 99).signal.samples
    np.testing.assert_array_equal(a, b)
