"""Chip statistics, greedy mode-sequence optimization and waveform rendering."""

from __future__ import annotations

import json
import logging
from itertools import combinations
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .array_model import AngularResponse
from .errors import ConvergenceError, ValidationError

log = logging.getLogger(__name__)

DEFAULT_SEQUENCE_LENGTH = 2 ** 13
DEFAULT_THRESHOLD = 1e-2


@dataclass(frozen=True)
class ChipDistribution:
    """Categorical law over complex chip values."""

    values: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).reshape(-1)
        p = np.asarray(self.probabilities, dtype=float).reshape(-1)
        if v.size == 0 or v.shape != p.shape:
            raise ValidationError("values and probabilities must be non-empty and of equal length")
        if np.any(p < 0):
            raise ValidationError("probabilities must be non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValidationError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probabilities", p)

    @classmethod
    def from_sequence(cls, seq: "SltmSequence", response: AngularResponse) -> "ChipDistribution":
        p = empirical_proportions(seq, len(response))
        return cls(response.values, p / p.sum())


@dataclass(frozen=True)
class ChipMoments:
    mean: complex
    var_real: float
    var_imag: float

    @property
    def mean_real(self) -> float:
        return self.mean.real

    @property
    def mean_imag(self) -> float:
        return self.mean.imag

    @property
    def total_variance(self) -> float:
        return self.var_real + self.var_imag


@dataclass(frozen=True)
class SltmSequence:
    mode_indices: np.ndarray
    chip_rate_hz: float

    def __post_init__(self):
        idx = np.asarray(self.mode_indices).reshape(-1)
        if idx.size == 0:
            raise ValidationError("a sequence needs at least one chip")
        if not np.issubdtype(idx.dtype, np.integer) or np.any(idx < 0):
            raise ValidationError("mode indices must be non-negative integers")
        if not self.chip_rate_hz > 0:
            raise ValidationError(f"chip_rate_hz must be > 0, got {self.chip_rate_hz}")
        object.__setattr__(self, "mode_indices", idx.astype(np.int64))
        object.__setattr__(self, "chip_rate_hz", float(self.chip_rate_hz))

    def __len__(self):
        return len(self.mode_indices)


def chip_moments(dist: ChipDistribution) -> ChipMoments:
    p, c = dist.probabilities, dist.values
    mean = complex(np.dot(p, c))
    # E[X^2] - E[X]^2, clipped at 0 against rounding
    var_re = max(float(np.dot(p, c.real ** 2)) - mean.real ** 2, 0.0)
    var_im = max(float(np.dot(p, c.imag ** 2)) - mean.imag ** 2, 0.0)
    return ChipMoments(mean, var_re, var_im)


def optimize_sequence(response: AngularResponse, min_len: int = 64,
                      threshold: float = DEFAULT_THRESHOLD, max_len: int = DEFAULT_SEQUENCE_LENGTH,
                      seed: int = 0) -> tuple[np.ndarray, complex]:
    """Greedily build a mode sequence whose chip mean vanishes at one angle.

    The first mode is drawn at random. Each following mode is the one that
    brings the running complex sum of chip values closest to zero, with
    ties broken at random. The search stops at the first length
    ``>= min_len`` whose running mean magnitude is below ``threshold``.

    Returns
    -------
    skeleton : ndarray of int
        Mode indices of the optimized sequence.
    achieved_mean : complex
        Mean chip value along the skeleton.

    Raises
    ------
    ConvergenceError
        If ``max_len`` chips are reached first. The exception carries the
        sequence with the smallest running mean seen at or beyond ``min_len``.
    """
    values = response.values
    if len(values) == 0:
        raise ValidationError("response has no modes")
    if not threshold > 0:
        raise ValidationError("threshold must be > 0")
    if min_len < len(values):
        raise ValidationError(f"min_len ({min_len}) must be at least the number of modes ({len(values)})")
    if max_len < min_len:
        raise ValidationError("max_len must be >= min_len")

    rng = np.random.default_rng(seed)
    scale = float(np.max(np.abs(values))) or 1.0
    tie_tol = 1e-12 * scale

    seq = np.empty(max_len, dtype=np.int64)
    seq[0] = rng.integers(len(values))
    total = values[seq[0]]
    best_k, best_mag = 0, np.inf
    for k in range(1, max_len + 1):
        mag = abs(total) / k
        if k >= min_len:
            if mag < threshold:
                return seq[:k].copy(), complex(total / k)
            if mag < best_mag:
                best_k, best_mag = k, mag
        if k == max_len:
            break
        cand = np.abs(total + values)
        ties = np.flatnonzero(cand <= cand.min() + tie_tol)
        pick = ties[0] if len(ties) == 1 else rng.choice(ties)
        seq[k] = pick
        total += values[pick]

    best = seq[:best_k].copy()
    best_mean = complex(values[best].mean())
    raise ConvergenceError(
        f"running mean stayed above {threshold:g} up to {max_len} chips "
        f"(best |mean| = {abs(best_mean):.4g} at length {best_k})",
        best_sequence=best, best_mean=best_mean)


def extend_and_shuffle(skeleton, target_len: int = DEFAULT_SEQUENCE_LENGTH, seed: int = 0,
                       values=None) -> np.ndarray:
    """Stretch a skeleton to ``target_len`` chips and randomize the order.

    Per-mode counts follow the skeleton's proportions, each rounded down or
    up so they sum exactly to ``target_len``. By default the largest
    fractional parts are rounded up. If the chip ``values`` are given, the
    rounding that keeps the extended mean closest to zero is used instead.
    """
    skeleton = np.asarray(skeleton, dtype=np.int64).reshape(-1)
    if skeleton.size == 0:
        raise ValidationError("skeleton is empty")
    if target_len < skeleton.size:
        raise ValidationError(f"target_len ({target_len}) is shorter than the skeleton ({skeleton.size})")
    counts = np.bincount(skeleton)
    exact = counts * target_len / skeleton.size
    alloc = np.floor(exact).astype(np.int64)
    short = int(target_len - alloc.sum())
    if short:
        order = np.argsort(-(exact - alloc), kind="stable")
        frac = [int(i) for i in order if exact[i] > alloc[i]]
        bump = order[:short]
        if values is not None and len(frac) <= 16:
            v = np.asarray(values, dtype=complex)[:len(counts)]
            base = np.dot(alloc, v)
            bump = min(combinations(frac, short), key=lambda c: abs(base + v[list(c)].sum()))
        alloc[list(bump)] += 1
    extended = np.repeat(np.arange(len(counts)), alloc)
    return np.random.default_rng(seed).permutation(extended)


def empirical_proportions(seq, n_modes: int) -> np.ndarray:
    idx = seq.mode_indices if isinstance(seq, SltmSequence) else np.asarray(seq)
    if idx.size and (idx.max() >= n_modes or idx.min() < 0):
        raise ValidationError(f"mode index {int(idx.max())} out of range for {n_modes} modes")
    return np.bincount(idx, minlength=n_modes) / idx.size


def chip_values(seq: SltmSequence, response: AngularResponse) -> np.ndarray:
    if seq.mode_indices.max() >= len(response):
        raise ValidationError(
            f"mode index {int(seq.mode_indices.max())} out of range for {len(response)} modes")
    return response.values[seq.mode_indices]


def chips_to_waveform(seq: SltmSequence, response: AngularResponse, samples_per_chip: int) -> np.ndarray:
    """Zero-order hold of the chip values, ``samples_per_chip`` samples each."""
    if samples_per_chip < 1:
        raise ValidationError("samples_per_chip must be >= 1")
    return np.repeat(chip_values(seq, response), samples_per_chip)


@dataclass(frozen=True)
class DesignedSequence:
    sequence: SltmSequence
    achieved_mean: complex
    sequence_mean: complex
    skeleton_length: int
    converged: bool


def design_sequence(response: AngularResponse, chip_rate_hz: float, *, length: int = DEFAULT_SEQUENCE_LENGTH,
                    min_len: int = 64, threshold: float = DEFAULT_THRESHOLD, max_len: int | None = None,
                    seed: int = 0, allow_best_effort: bool = False) -> DesignedSequence:
    """Optimize then extend-and-shuffle, the full sequence-design flow.

    ``achieved_mean`` is the optimizer's mean over the skeleton and
    ``sequence_mean`` the mean over the final ``length`` chips. With
    ``allow_best_effort`` a :class:`ConvergenceError` is logged and the best
    skeleton found is used anyway.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    opt_seed, shuffle_seed = ss.spawn(2)
    max_len = length if max_len is None else max_len
    converged = True
    try:
        skeleton, achieved = optimize_sequence(response, min_len, threshold, max_len,
                                               seed=np.random.default_rng(opt_seed))
    except ConvergenceError as exc:
        if not allow_best_effort:
            raise
        log.warning("angle %.2f deg: %s; using best-effort sequence",
                    np.degrees(response.angle), exc)
        skeleton, achieved, converged = exc.best_sequence, exc.best_mean, False
    idx = extend_and_shuffle(skeleton, max(length, len(skeleton)),
                             seed=np.random.default_rng(shuffle_seed), values=response.values)
    seq = SltmSequence(idx, chip_rate_hz)
    return DesignedSequence(seq, complex(achieved), complex(chip_values(seq, response).mean()),
                            len(skeleton), converged)


def save_sequence(path, seq: SltmSequence, n_modes: int, seed: int, achieved_mean: complex, **extra):
    """Write mode indices as one unsigned byte per chip plus a JSON sidecar.

    Returns the sidecar path.
    """
    if n_modes > 256:
        raise ValidationError("byte export supports at most 256 modes")
    path = Path(path)
    seq.mode_indices.astype(np.uint8).tofile(path)
    meta = {
        "chip_rate_hz": seq.chip_rate_hz,
        "n_modes": int(n_modes),
        "seed": int(seed),
        "achieved_mean_re": float(achieved_mean.real),
        "achieved_mean_im": float(achieved_mean.imag),
        **extra,
    }
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return sidecar


def load_sequence(path) -> tuple[SltmSequence, dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    idx = np.fromfile(path, dtype=np.uint8).astype(np.int64)
    if idx.size and idx.max() >= meta["n_modes"]:
        raise ValidationError(f"{path}: mode index {int(idx.max())} exceeds n_modes={meta['n_modes']}")
    return SltmSequence(idx, meta["chip_rate_hz"]), meta
