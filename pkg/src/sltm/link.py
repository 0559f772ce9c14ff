"""Monte Carlo QPSK links through SLTM and conventional arrays.

Everything is complex baseband with rectangular pulses. SNR values are
Eb/N0 with Eb referenced to the conventional array's main-lobe gain, so a
weaker SLTM main lobe shows up as a shift of its BER curve.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import erfc, erfcinv
from scipy.stats import binomtest

from .array_model import (ArrayGeometry, AngularResponse, IsotropicPattern, canonical_mode_set,
                          conventional_mode_set)
from .errors import ConfigurationError, ValidationError
from .sequence import DesignedSequence, SltmSequence, chips_to_waveform, design_sequence
from .spectral import Spectrum, periodogram_psd

# Gray map: first bit -> sign of I, second bit -> sign of Q
_GRAY = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)
# natural binary order around the circle
_NATURAL = np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4)))


@dataclass(frozen=True)
class QpskConfig:
    symbol_rate_hz: float = 2e6
    samples_per_symbol: int = 128
    gray_mapping: bool = True

    def __post_init__(self):
        if not self.symbol_rate_hz > 0:
            raise ValidationError("symbol_rate_hz must be > 0")
        if int(self.samples_per_symbol) != self.samples_per_symbol or self.samples_per_symbol < 1:
            raise ValidationError("samples_per_symbol must be a positive integer")

    @property
    def sample_rate_hz(self) -> float:
        return self.symbol_rate_hz * self.samples_per_symbol

    @property
    def constellation(self) -> np.ndarray:
        return _GRAY if self.gray_mapping else _NATURAL


def qpsk_modulate(bits, cfg: QpskConfig) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64).reshape(-1)
    if bits.size % 2:
        raise ValidationError(f"QPSK needs an even number of bits, got {bits.size}")
    sym = cfg.constellation[2 * bits[0::2] + bits[1::2]]
    return np.repeat(sym, cfg.samples_per_symbol)


def qpsk_demodulate(samples, cfg: QpskConfig, channel: complex = 1.0) -> np.ndarray:
    """Integrate-and-dump detector with hard quadrant decisions.

    ``channel`` is the receiver's carrier reference; only its phase is used.
    """
    x = np.asarray(samples, dtype=complex)
    sps = cfg.samples_per_symbol
    if x.size % sps:
        raise ValidationError(f"{x.size} samples is not a multiple of samples_per_symbol={sps}")
    z = x.reshape(-1, sps).sum(axis=1)
    if channel != 0:
        z = z * np.exp(-1j * np.angle(channel))
    if cfg.gray_mapping:
        bits = np.empty(2 * z.size, dtype=np.int8)
        bits[0::2] = z.real < 0
        bits[1::2] = z.imag < 0
        return bits
    idx = np.argmax((z[:, None] * np.conj(_NATURAL)[None, :]).real, axis=1)
    return np.stack([idx >> 1, idx & 1], axis=1).reshape(-1).astype(np.int8)


def theoretical_qpsk_ber(snr_linear):
    snr = np.asarray(snr_linear, dtype=float)
    if np.any(snr < 0):
        raise ValidationError("SNR must be non-negative")
    out = 0.5 * erfc(np.sqrt(snr))
    return float(out) if out.ndim == 0 else out


def ebn0_for_ber(ber) -> np.ndarray:
    """Inverse of :func:`theoretical_qpsk_ber` (linear Eb/N0)."""
    return erfcinv(2 * np.asarray(ber, float)) ** 2


def chip_ratio(chip_rate_hz: float, symbol_rate_hz: float) -> int:
    """Chips per symbol; must be a positive integer."""
    ratio = chip_rate_hz / symbol_rate_hz
    cps = round(ratio)
    if cps < 1 or abs(ratio - cps) > 1e-9 * ratio:
        raise ConfigurationError(
            f"chip rate {chip_rate_hz:g} Hz is not an integer multiple of symbol rate {symbol_rate_hz:g} Hz")
    return cps


def chips_per_symbol(chip_rate_hz: float, cfg: QpskConfig) -> int:
    cps = chip_ratio(chip_rate_hz, cfg.symbol_rate_hz)
    if cfg.samples_per_symbol % cps:
        raise ConfigurationError(
            f"samples_per_symbol={cfg.samples_per_symbol} is not divisible by {cps} chips per symbol")
    return cps


def sltm_waveform(n_samples: int, seq: SltmSequence, response: AngularResponse, cfg: QpskConfig) -> np.ndarray:
    """Chip waveform aligned to symbol boundaries, replayed cyclically."""
    cps = chips_per_symbol(seq.chip_rate_hz, cfg)
    spc = cfg.samples_per_symbol // cps
    n_chips = -(-n_samples // spc)
    reps = -(-n_chips // len(seq))
    tiled = SltmSequence(np.tile(seq.mode_indices, reps)[:n_chips], seq.chip_rate_hz)
    return chips_to_waveform(tiled, response, spc)[:n_samples]


def apply_sltm_channel(tx, seq: SltmSequence, response: AngularResponse, cfg: QpskConfig) -> np.ndarray:
    tx = np.asarray(tx, dtype=complex)
    return tx * sltm_waveform(tx.size, seq, response, cfg)


def noise_variance(ebn0_db: float, cfg: QpskConfig, reference_gain: float) -> float:
    """Per-sample complex noise variance for a unit-power transmit signal."""
    if not reference_gain > 0:
        raise ValidationError("reference_gain must be > 0")
    if math.isinf(ebn0_db) and ebn0_db > 0:
        return 0.0
    eb = reference_gain ** 2 * cfg.samples_per_symbol / 2
    return eb / 10 ** (ebn0_db / 10)


def complex_gaussian(rng: np.random.Generator, n: int, variance: float) -> np.ndarray:
    s = math.sqrt(variance / 2)
    return s * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def add_awgn(samples, ebn0_db: float, cfg: QpskConfig, reference_gain: float, seed) -> np.ndarray:
    x = np.asarray(samples, dtype=complex)
    var = noise_variance(ebn0_db, cfg, reference_gain)
    if var == 0:
        return x.copy()
    return x + complex_gaussian(np.random.default_rng(seed), x.size, var)


# --------------------------------------------------------------------------
# Scenarios and results


@dataclass
class TxScenario:
    """Transmit-mode sweep over observation angles and SNRs.

    ``sequences`` maps observation angle (degrees) to the mode sequence
    radiated when looking from that angle; ``sequence`` is the fallback.
    Ignored for the conventional array.
    """

    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    sltm: bool = True
    angles_deg: Sequence[float] = (0.0, 10.0, 20.0, 30.0)
    snr_db: Sequence[float] = (0.0, 2.0, 4.0, 6.0, 8.0)
    n_bits: int = 20_000
    seed: int = 0
    qpsk: QpskConfig = field(default_factory=lambda: QpskConfig(16e6, 16))
    sequence: SltmSequence | None = None
    sequences: Mapping[float, SltmSequence] = field(default_factory=dict)
    pattern: object | None = None
    main_lobe_deg: float = 0.0
    threads: int = 1

    def __post_init__(self):
        if self.n_bits <= 0 or self.n_bits % 2:
            raise ValidationError("n_bits must be a positive even number")
        for a in self.angles_deg:
            if abs(a) > 90:
                raise ValidationError(f"angle {a} deg outside +/-90")


@dataclass
class JamScenario:
    """Receive-mode link with a Gaussian jammer entering through a sidelobe.

    With ``sinr_db`` empty the jammer power is fixed at ``jammer_excess_db``
    above the desired transmit power and one cell is produced; otherwise the
    jammer power is solved per SINR value. SINR is Eb / (N0 + J0) measured
    through the conventional array, J0 being the jammer's per-sample power
    after the conventional sidelobe gain.
    """

    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    sltm: bool = True
    desired_deg: float = 0.0
    jammer_deg: float = 20.0
    sinr_db: Sequence[float] = ()
    jammer_excess_db: float = 20.0
    snr_db: float = 35.0
    jammer_on: bool = True
    n_bits: int = 20_000
    seed: int = 0
    qpsk: QpskConfig = field(default_factory=lambda: QpskConfig(16e6, 16))
    sequence: SltmSequence | None = None
    pattern: object | None = None
    threads: int = 1

    def __post_init__(self):
        if self.n_bits <= 0 or self.n_bits % 2:
            raise ValidationError("n_bits must be a positive even number")
        for a in (self.desired_deg, self.jammer_deg):
            if abs(a) > 90:
                raise ValidationError(f"angle {a} deg outside +/-90")


@dataclass(frozen=True)
class BerCell:
    key: float
    snr_db: float
    bits: int
    errors: int

    @property
    def ber(self) -> float:
        return self.errors / self.bits

    @property
    def ci(self) -> tuple[float, float]:
        r = binomtest(self.errors, self.bits).proportion_ci(0.95)
        return float(r.low), float(r.high)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.ber * (1 - self.ber) / self.bits)


@dataclass
class BerResult:
    cells: list[BerCell]
    key_name: str = "angle_deg"

    def ber(self, key: float, snr_db: float | None = None) -> float:
        return self.cell(key, snr_db).ber

    def cell(self, key: float, snr_db: float | None = None) -> BerCell:
        for c in self.cells:
            if math.isclose(c.key, key, abs_tol=1e-9) and (snr_db is None or math.isclose(c.snr_db, snr_db, abs_tol=1e-9)):
                return c
        raise KeyError((key, snr_db))

    def curve(self, key: float) -> tuple[np.ndarray, np.ndarray]:
        cs = [c for c in self.cells if math.isclose(c.key, key, abs_tol=1e-9)]
        return np.array([c.snr_db for c in cs]), np.array([c.ber for c in cs])


BER_HEADER = ("angle_deg_or_sinr_db", "snr_db", "bits", "errors", "ber", "ci_low", "ci_high")


def write_ber_csv(path, result: BerResult):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BER_HEADER)
        for c in result.cells:
            lo, hi = c.ci
            w.writerow([f"{c.key:.6f}", f"{c.snr_db:.6f}", c.bits, c.errors,
                        f"{c.ber:.10e}", f"{lo:.10e}", f"{hi:.10e}"])


# --------------------------------------------------------------------------
# helpers shared by the simulations


def default_pattern(geom: ArrayGeometry, sltm: bool):
    modes = canonical_mode_set(geom.n_elements) if sltm else conventional_mode_set(geom.n_elements)
    return IsotropicPattern(geom, modes)


def reference_gain(geom: ArrayGeometry, main_lobe_deg: float = 0.0) -> float:
    """Magnitude of the conventional array factor toward the main lobe."""
    return abs(default_pattern(geom, sltm=False).response(np.radians(main_lobe_deg)).values[0])


def _resolve_sequence(scn, angle_deg: float) -> SltmSequence:
    seqs = getattr(scn, "sequences", {}) or {}
    for a, s in seqs.items():
        if math.isclose(float(a), angle_deg, abs_tol=1e-9):
            return s
    if scn.sequence is None:
        raise ConfigurationError(f"no SLTM sequence available for {angle_deg} deg")
    return scn.sequence


def _chip_rate(scn) -> float:
    if scn.sltm:
        seqs = list(getattr(scn, "sequences", {}).values())
        seq = scn.sequence or (seqs[0] if seqs else None)
        if seq is not None:
            return seq.chip_rate_hz
    return scn.qpsk.symbol_rate_hz


def _gain_waveform(scn, angle_deg: float, n_samples: int, cfg: QpskConfig) -> tuple[np.ndarray, complex]:
    """Sampled array gain toward ``angle_deg`` and its time average."""
    pattern = scn.pattern if (scn.pattern is not None and scn.sltm) else default_pattern(scn.geometry, scn.sltm)
    resp = pattern.response(np.radians(angle_deg))
    if not scn.sltm:
        g = resp.values[0]
        return np.full(n_samples, g), complex(g)
    seq = _resolve_sequence(scn, angle_deg)
    wf = sltm_waveform(n_samples, seq, resp, cfg)
    # long-run mean over one full replay of the sequence
    return wf, complex(resp.values[seq.mode_indices].mean())


def _cell_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


def _run_cells(fn, args: list, threads: int):
    if threads and threads > 1 and len(args) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda a: fn(*a), args))
    return [fn(*a) for a in args]


def _random_bits(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.int8)


# --------------------------------------------------------------------------
# simulations


@dataclass
class PsdSweep:
    """Per-angle spectra and the normalization used for plotting."""

    spectra: dict[float, Spectrum]
    reference_peak: float


def simulate_tx_psd(scn: TxScenario, n_segments: int = 64, segment_symbols: int | None = None) -> PsdSweep:
    """PSD of the signal radiated toward each observation angle.

    All angles share one random bit stream, and the reference is the peak of
    the conventional array's main-lobe PSD for that same stream.
    """
    cfg = scn.qpsk
    if scn.sltm:
        chips_per_symbol(_chip_rate(scn), cfg)
    rng = np.random.default_rng(np.random.SeedSequence(scn.seed).spawn(1)[0])
    tx = qpsk_modulate(_random_bits(rng, scn.n_bits), cfg)
    if segment_symbols is None:
        seg_len = tx.size // n_segments
    else:
        seg_len = segment_symbols * cfg.samples_per_symbol
    seg_len -= seg_len % cfg.samples_per_symbol
    if seg_len < 2:
        raise ValidationError("too few bits for the requested number of PSD segments")

    def one(angle):
        g, _ = _gain_waveform(scn, angle, tx.size, cfg)
        return periodogram_psd(tx * g, cfg.sample_rate_hz, seg_len, n_segments)

    spectra = dict(zip(scn.angles_deg, _run_cells(one, [(a,) for a in scn.angles_deg], scn.threads)))
    ref_gain = reference_gain(scn.geometry, scn.main_lobe_deg)
    ref = periodogram_psd(tx * ref_gain, cfg.sample_rate_hz, seg_len, n_segments).peak()
    return PsdSweep({float(a): s for a, s in spectra.items()}, ref)


def simulate_tx_ber(scn: TxScenario) -> BerResult:
    """BER seen by a standard coherent QPSK receiver at each angle.

    The receiver locks to the long-run average channel toward it and has no
    knowledge of the mode sequence.
    """
    cfg = scn.qpsk
    if scn.sltm:
        chips_per_symbol(_chip_rate(scn), cfg)
    ref = reference_gain(scn.geometry, scn.main_lobe_deg)
    cells = [(a, s) for a in scn.angles_deg for s in scn.snr_db]
    seeds = _cell_seeds(scn.seed, len(cells))

    def one(angle, snr, ss):
        bit_ss, noise_ss = ss.spawn(2)
        bits = _random_bits(np.random.default_rng(bit_ss), scn.n_bits)
        tx = qpsk_modulate(bits, cfg)
        g, mean_gain = _gain_waveform(scn, angle, tx.size, cfg)
        rx = add_awgn(tx * g, snr, cfg, ref, noise_ss)
        errors = int(np.count_nonzero(qpsk_demodulate(rx, cfg, channel=mean_gain) != bits))
        return BerCell(float(angle), float(snr), scn.n_bits, errors)

    out = _run_cells(one, [(a, s, ss) for (a, s), ss in zip(cells, seeds)], scn.threads)
    return BerResult(out, "angle_deg")


def jammer_power_for_sinr(sinr_db: float, snr_db: float, geom: ArrayGeometry, jammer_deg: float,
                          cfg: QpskConfig, desired_deg: float = 0.0) -> float:
    """Per-sample jammer transmit power that yields ``sinr_db`` on the conventional array."""
    ref = reference_gain(geom, desired_deg)
    eb = ref ** 2 * cfg.samples_per_symbol / 2
    n0 = noise_variance(snr_db, cfg, ref)
    side = reference_gain(geom, jammer_deg) ** 2
    j0 = eb / 10 ** (sinr_db / 10) - n0
    if j0 < 0:
        raise ConfigurationError(f"SINR {sinr_db} dB exceeds the thermal-noise limit of {snr_db} dB")
    if j0 > 0 and side < 1e-20:
        raise ConfigurationError(f"jammer at {jammer_deg} deg sits in a conventional-array null")
    return j0 / side if j0 > 0 else 0.0


def conventional_sinr_db(jammer_power: float, snr_db: float, geom: ArrayGeometry, jammer_deg: float,
                         cfg: QpskConfig, desired_deg: float = 0.0) -> float:
    ref = reference_gain(geom, desired_deg)
    eb = ref ** 2 * cfg.samples_per_symbol / 2
    denom = noise_variance(snr_db, cfg, ref) + jammer_power * reference_gain(geom, jammer_deg) ** 2
    return math.inf if denom == 0 else 10 * math.log10(eb / denom)


def simulate_rx_jamming_ber(scn: JamScenario) -> BerResult:
    """BER of the desired main-lobe link while a Gaussian jammer hits a sidelobe.

    Result keys are the conventional-array SINR in dB.
    """
    cfg = scn.qpsk
    if scn.sltm:
        if scn.sequence is None:
            raise ConfigurationError("SLTM jamming run needs a sequence")
        chips_per_symbol(scn.sequence.chip_rate_hz, cfg)
    ref = reference_gain(scn.geometry, scn.desired_deg)

    if not scn.jammer_on:
        powers = [0.0]
    elif scn.sinr_db:
        powers = [jammer_power_for_sinr(s, scn.snr_db, scn.geometry, scn.jammer_deg, cfg, scn.desired_deg)
                  for s in scn.sinr_db]
    else:
        powers = [10 ** (scn.jammer_excess_db / 10)]
    keys = [conventional_sinr_db(p, scn.snr_db, scn.geometry, scn.jammer_deg, cfg, scn.desired_deg)
            for p in powers]
    if scn.sinr_db and scn.jammer_on:
        keys = [float(s) for s in scn.sinr_db]
    seeds = _cell_seeds(scn.seed, len(powers))

    def one(key, pj, ss):
        bit_ss, jam_ss, noise_ss = ss.spawn(3)
        bits = _random_bits(np.random.default_rng(bit_ss), scn.n_bits)
        tx = qpsk_modulate(bits, cfg)
        g_des, mean_des = _gain_waveform(scn, scn.desired_deg, tx.size, cfg)
        rx = tx * g_des
        if pj > 0:
            g_jam, _ = _gain_waveform(scn, scn.jammer_deg, tx.size, cfg)
            rx = rx + g_jam * complex_gaussian(np.random.default_rng(jam_ss), tx.size, pj)
        rx = add_awgn(rx, scn.snr_db, cfg, ref, noise_ss)
        errors = int(np.count_nonzero(qpsk_demodulate(rx, cfg, channel=mean_des) != bits))
        return BerCell(float(key), float(scn.snr_db), scn.n_bits, errors)

    out = _run_cells(one, list(zip(keys, powers, seeds)), scn.threads)
    return BerResult(out, "sinr_db")


def design_sequences(geom: ArrayGeometry, angles_deg, chip_rate_hz: float, *, length: int = 2 ** 13,
                     min_len: int = 64, threshold: float = 1e-2, seed: int = 0, pattern=None,
                     main_lobe_deg: float = 0.0) -> dict[float, DesignedSequence]:
    """One optimized sequence per observation angle.

    The main-lobe angle gets no optimization (every mode is identical
    there); it reuses a uniformly random sequence. Angles where the
    threshold is unreachable fall back to the best sequence found.
    """
    pattern = pattern or default_pattern(geom, sltm=True)
    out = {}
    for a, ss in zip(angles_deg, _cell_seeds(seed, len(angles_deg))):
        resp = pattern.response(np.radians(a))
        spread = np.max(np.abs(resp.values - resp.values[0]))
        if math.isclose(a, main_lobe_deg, abs_tol=1e-9) or spread <= 1e-9 * np.max(np.abs(resp.values)):
            idx = np.random.default_rng(ss).integers(len(resp), size=length)
            mean = complex(resp.values[idx].mean())
            out[float(a)] = DesignedSequence(SltmSequence(idx, chip_rate_hz), mean, mean, length, False)
            continue
        out[float(a)] = design_sequence(resp, chip_rate_hz, length=length, min_len=min_len,
                                        threshold=threshold, seed=ss, allow_best_effort=True)
    return out
