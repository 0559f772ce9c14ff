import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sltm.errors import ValidationError
from sltm.sequence import ChipDistribution, ChipMoments, chip_moments
from sltm.spectral import (Spectrum, analytic_chip_psd, first_nulls, periodogram_psd, read_spectrum_csv,
                           to_db, write_spectrum_csv)

FC = 256e6


def thirty_degree_moments():
    vals = np.array([-2, -2j, 2, 2j, -2, -2j, 2, 2j])
    return chip_moments(ChipDistribution(vals, np.full(8, 1 / 8)))


def test_analytic_density_at_dc():
    # variance 2 + 2 over a 256 MHz chip rate
    s = analytic_chip_psd(thirty_degree_moments(), FC, np.array([0.0]))
    assert s.psd[0] == pytest.approx(1.5625e-8, rel=1e-12)
    assert s.dc_impulse_power == 0


def test_analytic_zeros_and_shape():
    f = np.array([-2 * FC, -FC, FC / 2, FC, 3 * FC])
    s = analytic_chip_psd(ChipMoments(0j, 0.5, 0.5), FC, f)
    assert s.psd[[0, 1, 3, 4]].tolist() == [0.0, 0.0, 0.0, 0.0]
    assert s.psd[2] == pytest.approx(1 / FC * (2 / np.pi) ** 2)


def test_analytic_impulse_for_constant_chips():
    s = analytic_chip_psd(chip_moments(ChipDistribution(np.full(8, 6.0 + 0j), np.full(8, 1 / 8))), FC)
    assert s.dc_impulse_power == pytest.approx(36.0)
    assert s.peak() == 0.0


def test_analytic_default_grid_and_nulls():
    s = analytic_chip_psd(thirty_degree_moments(), FC)
    assert s.freqs_hz[0] == -2 * FC and s.freqs_hz[-1] == 2 * FC and s.freqs_hz.size == 4096
    lo, hi = first_nulls(s)
    assert abs(lo + FC) <= s.bin_width and abs(hi - FC) <= s.bin_width


def test_periodogram_constant_lands_in_dc_bin():
    x = np.full(64 * 4, 3 - 4j)
    s = periodogram_psd(x, 1e6, 64, 4)
    k0 = np.flatnonzero(s.freqs_hz == 0)[0]
    assert s.psd[k0] * s.bin_width == pytest.approx(25.0)
    assert np.all(np.delete(s.psd, k0) < 1e-20)
    sep = periodogram_psd(x, 1e6, 64, 4, separate_dc=True)
    assert sep.dc_impulse_power == pytest.approx(25.0) and sep.peak() < 1e-20


def test_periodogram_grid():
    s = periodogram_psd(np.ones(8), 8.0, 8, 1)
    assert s.freqs_hz.tolist() == [-3, -2, -1, 0, 1, 2, 3, 4]


def test_bin_centred_tone():
    L, fs, k = 128, 1e3, 5
    n = np.arange(L * 3)
    s = periodogram_psd(np.exp(2j * np.pi * k * n / L), fs, L, 3)
    assert s.freqs_hz[np.argmax(s.psd)] == pytest.approx(k * fs / L)
    assert s.peak() * s.bin_width == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), L=st.sampled_from([8, 31, 64]), n=st.integers(1, 6))
def test_parseval(seed, L, n):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(L * n) + 1j * rng.standard_normal(L * n)
    for sep in (False, True):
        s = periodogram_psd(x, 2.5e6, L, n, separate_dc=sep)
        assert s.integrated_power() == pytest.approx(np.mean(np.abs(x) ** 2), rel=1e-9)


def test_estimator_variance_falls_with_segments():
    rng = np.random.default_rng(0)
    x = (rng.standard_normal(256 * 256) + 1j * rng.standard_normal(256 * 256)) / np.sqrt(2)
    rel = []
    for n in (4, 64):
        s = periodogram_psd(x, 1.0, 256, n)
        rel.append(np.std(s.psd) / np.mean(s.psd))
    # relative spread of an n-segment average of exponential bins is 1 / sqrt(n)
    assert rel[0] == pytest.approx(0.5, rel=0.15)
    assert rel[1] == pytest.approx(0.125, rel=0.15)


def test_periodogram_argument_checks():
    with pytest.raises(ValidationError):
        periodogram_psd(np.ones(10), 1.0, 8, 2)
    with pytest.raises(ValidationError):
        periodogram_psd(np.ones(10), 0.0, 5, 2)


def test_to_db():
    s = Spectrum(np.array([-1.0, 0.0, 1.0]), np.array([0.0, 10.0, 1.0]), 100.0)
    db = to_db(s, 10.0)
    assert db.psd_db.tolist() == [-120.0, 0.0, -10.0]
    assert db.dc_impulse_db == pytest.approx(10.0)
    assert to_db(s, 10.0, floor_db=-50).psd_db[0] == -50
    with pytest.raises(ValidationError):
        to_db(s, 0.0)


def test_scaling_and_validation():
    s = Spectrum(np.array([0.0, 1.0]), np.array([1.0, 2.0]), 3.0).scaled(2.0)
    assert s.psd.tolist() == [2.0, 4.0] and s.dc_impulse_power == 6.0
    with pytest.raises(ValidationError):
        Spectrum(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValidationError):
        Spectrum(np.array([0.0, 1.0]), np.array([-1.0, 1.0]))


def test_csv_round_trip(tmp_path):
    s = analytic_chip_psd(ChipMoments(0.3 + 0.1j, 1.0, 0.5), FC)
    path = tmp_path / "s.csv"
    write_spectrum_csv(path, s, s.peak())
    back = read_spectrum_csv(path)
    np.testing.assert_array_equal(back.freqs_hz, s.freqs_hz)
    np.testing.assert_allclose(back.psd, s.psd, rtol=1e-9)
    assert back.dc_impulse_power == s.dc_impulse_power
    assert path.read_text().splitlines()[-1].startswith("# dc_impulse_power=")
