"""Exit criteria for the toolkit, one test per criterion.

Every test prints a PASS/FAIL line; the same lines are repeated in the
pytest terminal summary. Run with ``pytest tests/test_acceptance.py -v``.

Shared setup: isotropic 8-element array at 0.5 wavelength spacing, chip
rate 256 MHz, 16 chips per QPSK symbol (16 Msym/s).
"""

import itertools
import json
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import record
from sltm.array_model import ArrayGeometry, IsotropicPattern, canonical_mode_set
from sltm.cli import main as cli_main
from sltm.link import (JamScenario, QpskConfig, TxScenario, design_sequences, ebn0_for_ber,
                       simulate_rx_jamming_ber, simulate_tx_ber, simulate_tx_psd,
                       theoretical_qpsk_ber)
from sltm.sequence import ChipDistribution, SltmSequence, chip_moments, chip_values, chips_to_waveform
from sltm.spectral import analytic_chip_psd, first_nulls, periodogram_psd

CHIP_RATE = 256e6
SYMBOL_RATE = 16e6
CPS = 16
SIDELOBES = (10.0, 20.0, 30.0)
SEED = 20240611
GEOM = ArrayGeometry(8, 0.5)
PATTERN = IsotropicPattern(GEOM, canonical_mode_set(8))


@pytest.fixture(scope="module")
def designed():
    return design_sequences(GEOM, (0.0,) + SIDELOBES, CHIP_RATE, length=2 ** 13, seed=SEED)


@pytest.fixture(scope="module")
def sequences(designed):
    return {a: d.sequence for a, d in designed.items()}


@pytest.fixture(scope="module")
def psd_sweeps(sequences):
    """PSDs toward 0/10/20/30 deg for both arrays, 4 samples per chip."""
    cfg = QpskConfig(SYMBOL_RATE, CPS * 4)
    t0 = time.perf_counter()
    out = {}
    for kind in ("conventional", "sltm"):
        scn = TxScenario(GEOM, kind == "sltm", (0.0,) + SIDELOBES, (), 2 * 2 ** 13, SEED, cfg,
                         sequences=sequences)
        out[kind] = simulate_tx_psd(scn, n_segments=64)
    return out, time.perf_counter() - t0


def test_c01_main_lobe_level(psd_sweeps):
    sweeps, elapsed = psd_sweeps
    diff = 10 * np.log10(sweeps["sltm"].spectra[0.0].peak() / sweeps["conventional"].spectra[0.0].peak())
    ok = abs(diff - 20 * np.log10(6 / 8)) <= 0.3 and elapsed < 30
    record(1, ok, f"SLTM-conventional main-lobe peak = {diff:.3f} dB (target -2.50 +/- 0.3), {elapsed:.1f} s")
    assert ok


def test_c02_sidelobe_suppression(psd_sweeps):
    sweeps, elapsed = psd_sweeps
    supp = {a: 10 * np.log10(sweeps["conventional"].spectra[a].peak() / sweeps["sltm"].spectra[a].peak())
            for a in SIDELOBES}
    ok = all(s >= 10 for s in supp.values()) and elapsed < 120
    text = ", ".join(f"{a:g} deg: {s:.1f} dB" for a, s in supp.items())
    record(2, ok, f"peak suppression vs conventional (need >= 10 dB) {text}")
    assert ok, text


def test_c03_null_to_null_width(psd_sweeps):
    spectra = psd_sweeps[0]["sltm"].spectra
    report, ok = [], True
    for a in SIDELOBES:
        s = spectra[a]
        lo, hi = first_nulls(s)
        good = abs(hi - CHIP_RATE) <= s.bin_width and abs(lo + CHIP_RATE) <= s.bin_width
        ok &= good
        report.append(f"{a:g} deg: [{lo / 1e6:.3f}, {hi / 1e6:.3f}] MHz")
    record(3, ok, f"first nulls (expect +/-{CHIP_RATE / 1e6:g} MHz within one bin) " + ", ".join(report))
    assert ok


def test_c04_analytic_vs_periodogram():
    values = PATTERN.response(np.radians(30)).values
    dist = ChipDistribution(values, np.full(8, 1 / 8))
    rng = np.random.default_rng(SEED)
    n_chips, spc = 2 ** 14, 4
    seq = SltmSequence(rng.integers(8, size=n_chips), CHIP_RATE)
    wave = chips_to_waveform(seq, PATTERN.response(np.radians(30)), spc)
    est = periodogram_psd(wave, CHIP_RATE * spc, segment_len=wave.size // 64, n_segments=64)
    truth = analytic_chip_psd(chip_moments(dist), CHIP_RATE, est.freqs_hz)
    band = np.abs(est.freqs_hz) < 0.8 * CHIP_RATE
    err = np.mean(np.abs(10 * np.log10(est.psd[band] / truth.psd[band])))
    ok = err < 1.0
    record(4, ok, f"mean |dB error| periodogram vs closed form = {err:.3f} dB (need < 1 dB)")
    assert ok


def test_c05_dc_impulse_suppression(designed):
    spc = 4
    report, ok = [], True
    for a in SIDELOBES:
        seq, mean = designed[a].sequence, designed[a].achieved_mean
        resp = PATTERN.response(np.radians(a))
        wave = chips_to_waveform(seq, resp, spc)
        est = periodogram_psd(wave, CHIP_RATE * spc, segment_len=wave.size // 64, n_segments=64)
        envelope = analytic_chip_psd(chip_moments(ChipDistribution.from_sequence(seq, resp)), CHIP_RATE, [0.0])
        excess = 10 * np.log10(est.psd[np.argmin(np.abs(est.freqs_hz))] / envelope.psd[0])
        good = abs(mean) < 1e-2 and excess < 3.0
        ok &= good
        report.append(f"{a:g} deg: |mean|={abs(mean):.2e}, DC excess={excess:.2f} dB")
    record(5, ok, "optimizer |mean| < 1e-2 and DC bin < 3 dB over envelope; " + "; ".join(report))
    assert ok, report


def test_c06_conventional_ber_matches_theory():
    t0 = time.perf_counter()
    snrs = (0.0, 2.0, 4.0, 6.0, 8.0)
    scn = TxScenario(GEOM, False, (0.0,), snrs, 200_000, SEED, QpskConfig(SYMBOL_RATE, CPS))
    res = simulate_tx_ber(scn)
    elapsed = time.perf_counter() - t0
    report, ok = [], elapsed < 120
    for s in snrs:
        c = res.cell(0.0, s)
        p = theoretical_qpsk_ber(10 ** (s / 10))
        z = (c.ber - p) / np.sqrt(p * (1 - p) / c.bits)
        ok &= abs(z) <= 3
        report.append(f"{s:g} dB: {c.ber:.3e} vs {p:.3e} ({z:+.2f} sigma)")
    record(6, ok, f"conventional main-lobe BER within 3 sigma of theory, {elapsed:.1f} s; " + "; ".join(report))
    assert ok, report


def test_c07_sltm_main_lobe_shift(sequences):
    snrs = (2.0, 4.0, 6.0, 8.0, 10.0)
    scn = TxScenario(GEOM, True, (0.0,), snrs, 200_000, SEED, QpskConfig(SYMBOL_RATE, CPS),
                     sequences=sequences)
    res = simulate_tx_ber(scn)
    shifts = []
    for s in snrs:
        c = res.cell(0.0, s)
        shifts.append(s - 10 * np.log10(ebn0_for_ber(c.ber)))
    shift = float(np.mean(shifts))
    ok = abs(shift - 2.5) <= 0.4
    record(7, ok, f"SLTM main-lobe BER shift = {shift:.3f} dB (target 2.5 +/- 0.4; exact {20 * np.log10(8 / 6):.3f})")
    assert ok


def test_c08_sidelobe_scrambling(sequences):
    scn = TxScenario(GEOM, True, SIDELOBES, (35.0,), 20_000, SEED, QpskConfig(SYMBOL_RATE, CPS),
                     sequences=sequences)
    res = simulate_tx_ber(scn)
    bers = {a: res.ber(a, 35.0) for a in SIDELOBES}
    ok = all(0.45 <= b <= 0.55 for b in bers.values())
    text = ", ".join(f"{a:g} deg: {b:.4f}" for a, b in bers.items())
    record(8, ok, f"eavesdropper BER at 35 dB in [0.45, 0.55]: {text}")
    assert ok, text


def test_c09_jamming_resilience(sequences):
    t0 = time.perf_counter()
    cfg = QpskConfig(SYMBOL_RATE, CPS)
    report, qualifying, ok = [], 0, True
    for a in SIDELOBES:
        ber = {}
        for kind in ("conventional", "sltm"):
            scn = JamScenario(GEOM, kind == "sltm", 0.0, a, (), 20.0, 35.0, True, 100_000, SEED, cfg,
                              sequence=sequences[a])
            ber[kind] = simulate_rx_jamming_ber(scn).cells[0].ber
        if 0.05 <= ber["conventional"] <= 0.4:
            qualifying += 1
            ok &= ber["sltm"] <= ber["conventional"] / 2
            tag = "checked"
        else:
            tag = "conventional BER outside [0.05, 0.4], not checked"
        report.append(f"{a:g} deg: conv {ber['conventional']:.4f}, sltm {ber['sltm']:.4f} ({tag})")
    elapsed = time.perf_counter() - t0
    ok = ok and qualifying > 0 and elapsed < 180
    record(9, ok, f"SLTM BER <= half of conventional under 20 dB jammer, {elapsed:.1f} s; " + "; ".join(report))
    assert ok, report


def _brute_moments(values, probs):
    """Moments by expanding the law into ten equally likely outcomes."""
    outcomes = []
    for v, p in zip(values, probs):
        outcomes += [v] * int(p * 10)
    n = len(outcomes)
    mre = sum(v[0] for v in outcomes) / n
    mim = sum(v[1] for v in outcomes) / n
    vre = sum((v[0] - mre) ** 2 for v in outcomes) / n
    vim = sum((v[1] - mim) ** 2 for v in outcomes) / n
    return mre, mim, vre, vim


def test_c10_chip_statistics(sequences):
    worst = {}
    for a in SIDELOBES:
        c = chip_values(sequences[a], PATTERN.response(np.radians(a)))
        b = c - c.mean()
        m = b.size
        r0 = np.vdot(b, b).real / m
        worst[a] = max(abs(np.vdot(b[:-k], b[k:])) / m / r0 for k in range(1, 33))
    corr_ok = all(w < 0.05 for w in worst.values())

    rng = np.random.default_rng(SEED)
    grid = [Fraction(k, 10) for k in range(1, 10)]
    n_dists, max_err = 0, 0.0
    for p in itertools.product(grid, repeat=3):
        if sum(p) != 1:
            continue
        vals = [(Fraction(int(x), 8), Fraction(int(y), 8)) for x, y in rng.integers(-40, 41, size=(3, 2))]
        mre, mim, vre, vim = _brute_moments(vals, p)
        got = chip_moments(ChipDistribution([float(x) + 1j * float(y) for x, y in vals], [float(q) for q in p]))
        err = max(abs(got.mean_real - float(mre)), abs(got.mean_imag - float(mim)),
                  abs(got.var_real - float(vre)), abs(got.var_imag - float(vim)))
        max_err = max(max_err, err)
        n_dists += 1
    mom_ok = max_err <= 1e-12
    ok = corr_ok and mom_ok
    text = ", ".join(f"{a:g} deg: {w:.4f}" for a, w in worst.items())
    record(10, ok, f"max |R(k)|/R(0), k=1..32 (need < 0.05): {text}; "
                   f"moments vs enumeration on {n_dists} laws, max err {max_err:.1e}")
    assert ok


def test_c11_determinism(tmp_path):
    configs = {
        "optimize": {"seed": 5, "sequence": {"target_angles_deg": [20.0, 30.0]}},
        "psd": {"seed": 5, "link": {"n_bits": 4096, "angles_deg": [0.0, 20.0], "psd_segments": 16}},
        "ber-tx": {"seed": 5, "link": {"n_bits": 2000, "angles_deg": [0.0, 20.0], "snr_db": [0.0, 4.0]}},
        "ber-rx": {"seed": 5, "link": {"n_bits": 2000, "jammer_angles_deg": [20.0]}},
        "pattern-export": {"seed": 5, "pattern_export": {"step_deg": 5.0}},
    }
    mismatched = []
    for cmd, cfg in configs.items():
        path = tmp_path / f"{cmd}.json"
        path.write_text(json.dumps(cfg))
        outs = []
        for run in range(2):
            out = tmp_path / f"{cmd}-{run}"
            assert cli_main([cmd, "--config", str(path), "--out", str(out), "--threads", str(1 + run)]) == 0
            outs.append(out)
        for f in sorted(outs[0].glob("*.csv")) + sorted(outs[0].glob("*.bin")):
            if f.read_bytes() != (outs[1] / f.name).read_bytes():
                mismatched.append(f"{cmd}/{f.name}")
    ok = not mismatched
    record(11, ok, "byte-identical CSV outputs across reruns (1 vs 2 threads)"
                   + ("" if ok else f"; differing: {mismatched}"))
    assert ok
