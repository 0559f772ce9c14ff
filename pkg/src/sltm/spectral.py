"""Closed-form chip-process PSD and averaged periodogram estimates."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .sequence import ChipMoments

DEFAULT_DB_FLOOR = -120.0


@dataclass(frozen=True)
class Spectrum:
    """Two-sided power spectral density.

    A spectral line at DC that cannot be represented on the density grid is
    carried separately in ``dc_impulse_power``.
    """

    freqs_hz: np.ndarray
    psd: np.ndarray
    dc_impulse_power: float = 0.0

    def __post_init__(self):
        f = np.asarray(self.freqs_hz, float)
        p = np.asarray(self.psd, float)
        if f.shape != p.shape or f.ndim != 1:
            raise ValidationError("freqs_hz and psd must be 1-D arrays of equal length")
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise ValidationError("frequency grid must be strictly increasing")
        if np.any(p < 0) or self.dc_impulse_power < 0:
            raise ValidationError("power densities must be non-negative")
        object.__setattr__(self, "freqs_hz", f)
        object.__setattr__(self, "psd", p)
        object.__setattr__(self, "dc_impulse_power", float(self.dc_impulse_power))

    @property
    def bin_width(self) -> float:
        return float(self.freqs_hz[1] - self.freqs_hz[0])

    def integrated_power(self) -> float:
        """Grid-integrated density plus the DC line (uniform grids)."""
        return float(self.psd.sum() * self.bin_width + self.dc_impulse_power)

    def peak(self) -> float:
        return float(self.psd.max())

    def scaled(self, factor: float) -> "Spectrum":
        return Spectrum(self.freqs_hz, self.psd * factor, self.dc_impulse_power * factor)


@dataclass(frozen=True)
class DbSpectrum:
    freqs_hz: np.ndarray
    psd_db: np.ndarray
    dc_impulse_db: float


def default_grid(chip_rate_hz: float, n_points: int = 4096) -> np.ndarray:
    return np.linspace(-2 * chip_rate_hz, 2 * chip_rate_hz, n_points)


def analytic_chip_psd(moments: ChipMoments, chip_rate_hz: float, freqs_hz=None) -> Spectrum:
    """Theoretical PSD of an i.i.d. chip process held for 1/chip_rate each.

    The continuum is (var_re + var_im) / f_chip * sinc^2(pi f / f_chip);
    the mean contributes a DC line of power |mean|^2.
    """
    if not chip_rate_hz > 0:
        raise ValidationError("chip_rate_hz must be > 0")
    f = default_grid(chip_rate_hz) if freqs_hz is None else np.asarray(freqs_hz, float)
    # np.sinc(x) = sin(pi x) / (pi x), with np.sinc(0) = 1
    shape = np.sinc(f / chip_rate_hz) ** 2
    x = f / chip_rate_hz
    shape[np.isclose(x, np.round(x), atol=1e-12) & (np.round(x) != 0)] = 0.0
    psd = moments.total_variance / chip_rate_hz * shape
    return Spectrum(f, psd, abs(moments.mean) ** 2)


def _centered_freqs(n: int, fs: float) -> np.ndarray:
    # bins -n/2+1 .. n/2 for even n, so the grid spans (-fs/2, fs/2]
    k = np.arange(n) - (n - 1) // 2
    return k * fs / n


def periodogram_psd(samples, sample_rate_hz: float, segment_len: int, n_segments: int,
                    separate_dc: bool = False) -> Spectrum:
    """Average of rectangular-window periodograms over disjoint segments.

    Parameters
    ----------
    samples : array_like of complex
        Signal; only the first ``segment_len * n_segments`` samples are used.
    separate_dc : bool
        If True the mean over the used samples is removed before the FFT and
        reported as ``dc_impulse_power``. Otherwise any DC line stays in the
        zero-frequency bin.
    """
    x = np.asarray(samples, dtype=complex)
    if segment_len < 2 or n_segments < 1:
        raise ValidationError("segment_len must be >= 2 and n_segments >= 1")
    need = segment_len * n_segments
    if x.size < need:
        raise ValidationError(f"need {need} samples for {n_segments} segments of {segment_len}, got {x.size}")
    if not sample_rate_hz > 0:
        raise ValidationError("sample_rate_hz must be > 0")
    x = x[:need]
    dc = 0.0
    if separate_dc:
        mu = x.mean()
        x = x - mu
        dc = abs(mu) ** 2
    segs = x.reshape(n_segments, segment_len)
    power = np.mean(np.abs(np.fft.fft(segs, axis=1)) ** 2, axis=0) / (segment_len * sample_rate_hz)
    shift = (segment_len - 1) // 2
    psd = np.roll(power, shift)
    return Spectrum(_centered_freqs(segment_len, sample_rate_hz), psd, dc)


def to_db(spectrum: Spectrum, reference_power: float, floor_db: float = DEFAULT_DB_FLOOR) -> DbSpectrum:
    if not reference_power > 0:
        raise ValidationError("reference_power must be > 0")
    with np.errstate(divide="ignore"):
        db = 10 * np.log10(spectrum.psd / reference_power)
        imp = 10 * np.log10(spectrum.dc_impulse_power / reference_power) if spectrum.dc_impulse_power > 0 else -np.inf
    return DbSpectrum(spectrum.freqs_hz, np.maximum(db, floor_db), max(imp, floor_db))


def first_nulls(spectrum: Spectrum, rel_level: float = 1e-6) -> tuple[float, float]:
    """Frequencies of the first nulls either side of DC.

    A null is the minimum of the first run of bins that drop below
    ``rel_level`` times the peak density.
    """
    f, p = spectrum.freqs_hz, spectrum.psd
    thresh = rel_level * p.max()

    def walk(order):
        below = p[order] <= thresh
        if not below.any():
            raise ValidationError("no null found on one side of DC")
        start = int(np.argmax(below))
        stop = start + (int(np.argmin(below[start:])) if not below[start:].all() else below.size - start)
        run = order[start:stop]
        return float(f[run[np.argmin(p[run])]])

    idx = np.arange(f.size)
    return walk(idx[f < 0][::-1]), walk(idx[f > 0])


SPECTRUM_HEADER = ("freq_hz", "psd_per_hz", "psd_db")


def write_spectrum_csv(path, spectrum: Spectrum, reference_power: float, floor_db: float = DEFAULT_DB_FLOOR):
    db = to_db(spectrum, reference_power, floor_db)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SPECTRUM_HEADER)
        for f, p, d in zip(spectrum.freqs_hz, spectrum.psd, db.psd_db):
            w.writerow([repr(float(f)), f"{p:.10e}", f"{d:.6f}"])
        fh.write(f"# dc_impulse_power={spectrum.dc_impulse_power!r}\n")


def read_spectrum_csv(path) -> Spectrum:
    freqs, psd, dc = [], [], 0.0
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(line for line in fh if not _footer(line)))
        fh.seek(0)
        for line in fh:
            if line.startswith("# dc_impulse_power="):
                dc = float(line.split("=", 1)[1])
    if not rows or tuple(rows[0]) != SPECTRUM_HEADER:
        raise ValidationError(f"{path}: not a spectrum CSV")
    for r in rows[1:]:
        freqs.append(float(r[0]))
        psd.append(float(r[1]))
    return Spectrum(np.array(freqs), np.array(psd), dc)


def _footer(line: str) -> bool:
    return line.startswith("#")
