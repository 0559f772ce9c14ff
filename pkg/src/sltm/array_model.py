"""Far-field array factor of a uniform linear array with +/-1 element states.

Angles are in radians here; degrees only appear in file formats and the CLI.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionError, InvalidGeometryError, ValidationError

ElementPattern = Callable[[float], complex]


def _isotropic(theta: float) -> complex:
    return 1.0 + 0.0j


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array.

    Parameters
    ----------
    n_elements : int
        Number of radiating elements.
    spacing_wl : float
        Element spacing in carrier wavelengths (d / lambda).
    amplitudes, phases : array_like, optional
        Per-element excitation magnitude and phase (radians). Default to
        uniform, in-phase excitation.
    element_pattern : callable, optional
        Complex element gain as a function of angle. Isotropic if omitted.
    """

    n_elements: int = 8
    spacing_wl: float = 0.5
    amplitudes: np.ndarray | None = None
    phases: np.ndarray | None = None
    element_pattern: ElementPattern = field(default=_isotropic, compare=False)

    def __post_init__(self):
        n = self.n_elements
        if int(n) != n or n < 2:
            raise InvalidGeometryError(f"n_elements must be an integer >= 2, got {n}")
        if not self.spacing_wl > 0:
            raise InvalidGeometryError(f"spacing_wl must be > 0, got {self.spacing_wl}")
        amps = np.ones(n) if self.amplitudes is None else np.asarray(self.amplitudes, float)
        phs = np.zeros(n) if self.phases is None else np.asarray(self.phases, float)
        if amps.shape != (n,) or phs.shape != (n,):
            raise InvalidGeometryError("amplitudes and phases must both have length n_elements")
        if np.any(amps <= 0):
            raise InvalidGeometryError("amplitudes must all be > 0")
        object.__setattr__(self, "n_elements", int(n))
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "phases", phs)

    @property
    def excitation(self) -> np.ndarray:
        return self.amplitudes * np.exp(1j * self.phases)

    def with_phases(self, phases) -> "ArrayGeometry":
        return ArrayGeometry(self.n_elements, self.spacing_wl, self.amplitudes,
                             np.asarray(phases, float), self.element_pattern)


@dataclass(frozen=True)
class Mode:
    signs: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.signs)
        if s.ndim != 1 or not np.all((s == 1) | (s == -1)):
            raise ValidationError("mode entries must be exactly +1 or -1")
        object.__setattr__(self, "signs", s.astype(np.int8))

    def __len__(self):
        return len(self.signs)


@dataclass(frozen=True)
class ModeSet:
    modes: tuple[Mode, ...]

    def __post_init__(self):
        modes = tuple(m if isinstance(m, Mode) else Mode(np.asarray(m)) for m in self.modes)
        if not modes:
            raise ValidationError("a mode set needs at least one mode")
        if len({len(m) for m in modes}) != 1:
            raise DimensionError("all modes must have the same length")
        object.__setattr__(self, "modes", modes)

    def __len__(self):
        return len(self.modes)

    def __getitem__(self, i) -> Mode:
        return self.modes[i]

    def __iter__(self):
        return iter(self.modes)

    def as_matrix(self) -> np.ndarray:
        """Modes stacked as an (n_modes, n_elements) array of +/-1."""
        return np.stack([m.signs for m in self.modes]).astype(float)


@dataclass(frozen=True)
class AngularResponse:
    angle: float
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex).reshape(-1))

    def __len__(self):
        return len(self.values)


def canonical_mode_set(n: int) -> ModeSet:
    """Mode i inverts element i and leaves the rest in phase."""
    if int(n) != n or n < 2:
        raise InvalidGeometryError(f"need at least 2 elements, got {n}")
    signs = np.ones((n, n), dtype=np.int8) - 2 * np.eye(n, dtype=np.int8)
    return ModeSet(tuple(Mode(row) for row in signs))


def conventional_mode_set(n: int) -> ModeSet:
    """Single all-in-phase mode, i.e. an ordinary phased array."""
    return ModeSet((Mode(np.ones(n, dtype=np.int8)),))


def _check_angle(theta: float):
    if abs(theta) > np.pi / 2 + 1e-12:
        raise ValidationError(f"angle {theta} rad lies outside the visible region")


def _phase_terms(geom: ArrayGeometry, theta: float) -> np.ndarray:
    k = np.arange(geom.n_elements)
    return geom.excitation * np.exp(2j * np.pi * geom.spacing_wl * k * np.sin(theta))


def array_factor(geom: ArrayGeometry, mode: Mode, theta: float) -> complex:
    _check_angle(theta)
    if len(mode) != geom.n_elements:
        raise DimensionError(
            f"mode has {len(mode)} entries but the array has {geom.n_elements} elements")
    total = np.sum(mode.signs * _phase_terms(geom, theta))
    return complex(geom.element_pattern(theta) * total)


def steering_phases(geom: ArrayGeometry, theta_steer: float) -> np.ndarray:
    """Progressive phase that points the in-phase beam at ``theta_steer``."""
    _check_angle(theta_steer)
    k = np.arange(geom.n_elements)
    return -2 * np.pi * geom.spacing_wl * k * np.sin(theta_steer)


def angular_response(geom: ArrayGeometry, modes: ModeSet, theta: float) -> AngularResponse:
    _check_angle(theta)
    if len(modes[0]) != geom.n_elements:
        raise DimensionError(
            f"modes have {len(modes[0])} entries but the array has {geom.n_elements} elements")
    values = modes.as_matrix() @ _phase_terms(geom, theta)
    return AngularResponse(theta, geom.element_pattern(theta) * values)


class IsotropicPattern:
    """Per-mode response computed from an :class:`ArrayGeometry`."""

    def __init__(self, geom: ArrayGeometry, modes: ModeSet):
        self.geometry = geom
        self.modes = modes

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def response(self, theta: float) -> AngularResponse:
        return angular_response(self.geometry, self.modes, theta)


class TabulatedPattern:
    """Per-mode response interpolated from a measured pattern table.

    Amplitude and unwrapped phase are interpolated linearly in angle.
    """

    def __init__(self, angles_deg: np.ndarray, amplitude: np.ndarray, phase_rad: np.ndarray):
        # amplitude, phase_rad: (n_modes, n_angles)
        self.angles_deg = np.asarray(angles_deg, float)
        self.amplitude = np.asarray(amplitude, float)
        self.phase = np.unwrap(np.asarray(phase_rad, float), axis=1)

    @property
    def n_modes(self) -> int:
        return self.amplitude.shape[0]

    def response(self, theta: float) -> AngularResponse:
        deg = np.degrees(theta)
        lo, hi = self.angles_deg[0], self.angles_deg[-1]
        if not lo - 1e-9 <= deg <= hi + 1e-9:
            raise ValidationError(f"angle {deg:.3f} deg outside table range [{lo}, {hi}]")
        amp = np.array([np.interp(deg, self.angles_deg, a) for a in self.amplitude])
        ph = np.array([np.interp(deg, self.angles_deg, p) for p in self.phase])
        return AngularResponse(theta, amp * np.exp(1j * ph))


PATTERN_HEADER = ("angle_deg", "mode_index", "amplitude", "phase_deg")


def load_pattern_table(source) -> TabulatedPattern:
    """Read a pattern table CSV (path, file object or CSV text).

    Rows are ``angle_deg,mode_index,amplitude,phase_deg`` with linear
    amplitudes and 0-based mode indices. Every mode must cover the same
    strictly increasing angle grid.
    """
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = str(source)

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError("pattern table is empty") from None
    if tuple(h.strip() for h in header) != PATTERN_HEADER:
        raise ValidationError(f"row 1: expected header {','.join(PATTERN_HEADER)}")

    per_mode: dict[int, list[tuple[float, float, float]]] = {}
    for rowno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise ValidationError(f"row {rowno}: expected 4 columns, got {len(row)}")
        try:
            angle, amp, phase = float(row[0]), float(row[2]), float(row[3])
            mode = int(row[1])
        except ValueError:
            raise ValidationError(f"row {rowno}: non-numeric field") from None
        if mode < 0:
            raise ValidationError(f"row {rowno}: negative mode index {mode}")
        if amp < 0 or not np.isfinite([angle, amp, phase]).all():
            raise ValidationError(f"row {rowno}: invalid amplitude or non-finite value")
        rows = per_mode.setdefault(mode, [])
        if rows and angle <= rows[-1][0]:
            raise ValidationError(f"row {rowno}: angles for mode {mode} are not strictly increasing")
        rows.append((angle, amp, phase))

    if not per_mode:
        raise ValidationError("pattern table has no data rows")
    n_modes = max(per_mode) + 1
    missing = [m for m in range(n_modes) if m not in per_mode]
    if missing:
        raise ValidationError(f"pattern table is missing mode(s) {', '.join(map(str, missing))}")
    grid = np.array([r[0] for r in per_mode[0]])
    for m in range(1, n_modes):
        g = np.array([r[0] for r in per_mode[m]])
        if g.shape != grid.shape or not np.allclose(g, grid):
            raise ValidationError(f"mode {m} does not cover the same angle grid as mode 0")
    amp = np.array([[r[1] for r in per_mode[m]] for m in range(n_modes)])
    phase = np.radians([[r[2] for r in per_mode[m]] for m in range(n_modes)])
    return TabulatedPattern(grid, amp, phase)


def pattern_table_rows(pattern, angles_deg: Iterable[float]) -> list[tuple[float, int, float, float]]:
    """Sample any pattern model into rows of the pattern table format."""
    rows = []
    responses = [pattern.response(np.radians(a)) for a in angles_deg]
    for m in range(pattern.n_modes):
        for a, resp in zip(angles_deg, responses):
            v = resp.values[m]
            rows.append((float(a), m, float(abs(v)), float(np.degrees(np.angle(v)))))
    return rows


def write_pattern_table(path, rows: Sequence[tuple[float, int, float, float]]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PATTERN_HEADER)
        for a, m, amp, ph in rows:
            w.writerow([f"{a:.6f}", m, f"{amp:.12g}", f"{ph:.12g}"])
