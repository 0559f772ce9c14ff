"""``sltm`` command-line front end.

Usage::

    sltm <command> --config <path> --out <dir> [--seed N] [--threads N]

Exit status is 0 on success, 2 on invalid input and 1 on runtime failure.
All artifacts are staged in a temporary directory and moved into ``--out``
only when the whole command succeeds.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import pydantic
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator

from . import __version__
from .array_model import (ArrayGeometry, IsotropicPattern, canonical_mode_set, load_pattern_table,
                          pattern_table_rows, steering_phases, write_pattern_table)
from .errors import SltmError, ValidationError
from .link import (JamScenario, QpskConfig, TxScenario, chip_ratio, design_sequences,
                   simulate_rx_jamming_ber, simulate_tx_ber, simulate_tx_psd, write_ber_csv)
from .plotting import emit_plot
from .sequence import ChipDistribution, chip_moments, load_sequence, save_sequence
from .spectral import analytic_chip_psd, write_spectrum_csv

log = logging.getLogger("sltm")

COMMANDS = ("optimize", "psd", "ber-tx", "ber-rx", "pattern-export")


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ArrayBlock(_Block):
    n_elements: int = Field(8, ge=2)
    spacing_wl: PositiveFloat = 0.5
    amplitudes: Optional[list[PositiveFloat]] = None
    phases_deg: Optional[list[float]] = None
    steer_deg: float = Field(0.0, ge=-90, le=90)
    pattern_table: Optional[str] = None


class SequenceBlock(_Block):
    chip_rate_hz: PositiveFloat = 256e6
    length: PositiveInt = 2 ** 13
    min_len: PositiveInt = 64
    threshold: PositiveFloat = 1e-2
    target_angles_deg: list[float] = Field(default_factory=lambda: [10.0, 20.0, 30.0])
    file: Optional[str] = None


class LinkBlock(_Block):
    symbol_rate_hz: PositiveFloat = 16e6
    samples_per_symbol: PositiveInt = 16
    gray_mapping: bool = True
    arrays: list[Literal["sltm", "conventional"]] = Field(default_factory=lambda: ["conventional", "sltm"])
    angles_deg: Optional[list[float]] = None
    snr_db: list[float] = Field(default_factory=lambda: [0.0, 2.0, 4.0, 6.0, 8.0, 10.0])
    n_bits: PositiveInt = 20_000
    psd_segments: PositiveInt = 64
    psd_samples_per_chip: PositiveInt = 4
    jammer_angles_deg: list[float] = Field(default_factory=lambda: [10.0, 20.0, 30.0])
    sinr_db: list[float] = Field(default_factory=list)
    jammer_excess_db: float = 20.0
    thermal_snr_db: float = 35.0

    @model_validator(mode="after")
    def _checks(self):
        if self.n_bits % 2:
            raise ValueError("n_bits must be even")
        for a in (self.angles_deg or []) + self.jammer_angles_deg:
            if abs(a) > 90:
                raise ValueError(f"angle {a} outside +/-90 deg")
        return self


class PatternExportBlock(_Block):
    start_deg: float = Field(-90.0, ge=-90, le=90)
    stop_deg: float = Field(90.0, ge=-90, le=90)
    step_deg: PositiveFloat = 0.5


class ScenarioConfig(_Block):
    command: Optional[Literal["optimize", "psd", "ber-tx", "ber-rx", "pattern-export"]] = None
    seed: Optional[int] = Field(None, ge=0, lt=2 ** 64)
    array: ArrayBlock = Field(default_factory=ArrayBlock)
    sequence: SequenceBlock = Field(default_factory=SequenceBlock)
    link: LinkBlock = Field(default_factory=LinkBlock)
    pattern_export: PatternExportBlock = Field(default_factory=PatternExportBlock)


DEFAULT_ANGLES = {
    "psd": [0.0, 10.0, 20.0, 30.0],
    "ber-tx": [float(a) for a in range(-45, 50, 5)],
}


class ConfigError(ValidationError):
    """Config failed validation; ``problems`` lists (field, message)."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{f}: {m}" for f, m in problems))


def load_config(path, command: str, seed_override: int | None = None, base_dir=None) -> ScenarioConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError([("--config", f"file not found: {path}")]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([("--config", f"malformed JSON: {exc}")]) from None
    if not isinstance(raw, dict):
        raise ConfigError([("<root>", "config must be a JSON object")])
    try:
        cfg = ScenarioConfig.model_validate(raw)
    except pydantic.ValidationError as exc:
        raise ConfigError([(".".join(map(str, e["loc"])) or "<root>", e["msg"]) for e in exc.errors()]) from None

    problems = []
    if cfg.command is not None and cfg.command != command:
        problems.append(("command", f"config is for '{cfg.command}' but '{command}' was requested"))
    if seed_override is not None:
        cfg.seed = seed_override
    if cfg.seed is None:
        problems.append(("seed", "a seed is required (config 'seed' or --seed)"))
    base = Path(base_dir) if base_dir else Path(path).resolve().parent
    for field, value in (("array.pattern_table", cfg.array.pattern_table), ("sequence.file", cfg.sequence.file)):
        if value is not None:
            p = Path(value) if Path(value).is_absolute() else base / value
            if not p.exists():
                problems.append((field, f"file not found: {value}"))
    n = cfg.array.n_elements
    for field, value in (("array.amplitudes", cfg.array.amplitudes), ("array.phases_deg", cfg.array.phases_deg)):
        if value is not None and len(value) != n:
            problems.append((field, f"expected {n} entries, got {len(value)}"))
    if problems:
        raise ConfigError(problems)
    return cfg


def config_hash(cfg: ScenarioConfig) -> str:
    blob = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# --------------------------------------------------------------------------


class Runner:
    def __init__(self, cfg: ScenarioConfig, command: str, workdir: Path, base_dir: Path, threads: int = 1):
        self.cfg = cfg
        self.command = command
        self.work = workdir
        self.base = base_dir
        self.threads = threads
        self.artifacts: list[str] = []
        a = cfg.array
        geom = ArrayGeometry(a.n_elements, a.spacing_wl, a.amplitudes,
                             None if a.phases_deg is None else np.radians(a.phases_deg))
        if a.phases_deg is None and a.steer_deg:
            geom = geom.with_phases(steering_phases(geom, np.radians(a.steer_deg)))
        self.geometry = geom
        self.pattern = (load_pattern_table(self._path(a.pattern_table)) if a.pattern_table
                        else IsotropicPattern(geom, canonical_mode_set(geom.n_elements)))
        l = cfg.link
        self.qpsk = QpskConfig(l.symbol_rate_hz, l.samples_per_symbol, l.gray_mapping)

    def _path(self, p) -> Path:
        return Path(p) if Path(p).is_absolute() else self.base / p

    def _add(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.work / name

    def _plot(self, csvs, name, style):
        emit_plot([self.work / c for c in csvs], self._add(name), style)

    def sequences(self, angles):
        """Sequences per angle: loaded from file, or optimized per angle."""
        s = self.cfg.sequence
        if s.file:
            seq, _ = load_sequence(self._path(s.file))
            return {float(a): seq for a in angles}, None
        designed = design_sequences(self.geometry, list(angles), s.chip_rate_hz, length=s.length,
                                    min_len=s.min_len, threshold=s.threshold, seed=self.cfg.seed,
                                    pattern=self.pattern, main_lobe_deg=self.cfg.array.steer_deg)
        return {a: d.sequence for a, d in designed.items()}, {a: d.achieved_mean for a, d in designed.items()}

    # commands ------------------------------------------------------------

    def optimize(self):
        s = self.cfg.sequence
        designed = design_sequences(self.geometry, s.target_angles_deg, s.chip_rate_hz, length=s.length,
                                    min_len=s.min_len, threshold=s.threshold, seed=self.cfg.seed,
                                    pattern=self.pattern, main_lobe_deg=self.cfg.array.steer_deg)
        for angle, d in designed.items():
            tag = _angle_tag(angle)
            seq, mean = d.sequence, d.achieved_mean
            save_sequence(self._add(f"sequence_{tag}.bin"), seq, self.pattern.n_modes, self.cfg.seed, mean,
                          target_angle_deg=angle, threshold=s.threshold,
                          threshold_met=bool(abs(mean) < s.threshold),
                          skeleton_length=d.skeleton_length,
                          sequence_mean_re=d.sequence_mean.real, sequence_mean_im=d.sequence_mean.imag)
            self.artifacts.append(f"sequence_{tag}.json")
            resp = self.pattern.response(np.radians(angle))
            spectrum = analytic_chip_psd(chip_moments(ChipDistribution.from_sequence(seq, resp)), s.chip_rate_hz)
            ref = spectrum.peak() if spectrum.peak() > 0 else 1.0
            write_spectrum_csv(self._add(f"chip_psd_{tag}.csv"), spectrum, ref)
            self._plot([f"chip_psd_{tag}.csv"], f"chip_psd_{tag}.svg",
                       {"title": f"Chip-process PSD at {angle:g} deg, |mean| = {abs(mean):.2e}",
                        "y_label": "PSD rel. peak (dB)"})

    def psd(self):
        l = self.cfg.link
        angles = l.angles_deg or DEFAULT_ANGLES["psd"]
        seqs = self.sequences(angles)[0] if "sltm" in l.arrays else {}
        cps = chip_ratio(self.cfg.sequence.chip_rate_hz, l.symbol_rate_hz)
        qpsk = QpskConfig(l.symbol_rate_hz, cps * l.psd_samples_per_chip, l.gray_mapping)
        sweeps = {}
        for kind in l.arrays:
            scn = TxScenario(self.geometry, kind == "sltm", angles, l.snr_db, l.n_bits, self.cfg.seed,
                             qpsk, sequences=seqs, pattern=self.pattern,
                             main_lobe_deg=self.cfg.array.steer_deg, threads=self.threads)
            sweeps[kind] = simulate_tx_psd(scn, n_segments=l.psd_segments)
        ref = next(iter(sweeps.values())).reference_peak
        for angle in angles:
            tag = _angle_tag(angle)
            names = []
            for kind, sweep in sweeps.items():
                name = f"psd_{tag}_{kind}.csv"
                write_spectrum_csv(self._add(name), sweep.spectra[float(angle)], ref)
                names.append(name)
            self._plot(names, f"psd_{tag}.svg", {"title": f"PSD toward {angle:g} deg",
                                                 "labels": list(sweeps), "ylim": (-80, 5)})

    def ber_tx(self):
        l = self.cfg.link
        angles = l.angles_deg or DEFAULT_ANGLES["ber-tx"]
        seqs = self.sequences(angles)[0] if "sltm" in l.arrays else {}
        for kind in l.arrays:
            scn = TxScenario(self.geometry, kind == "sltm", angles, l.snr_db, l.n_bits, self.cfg.seed,
                             self.qpsk, sequences=seqs, pattern=self.pattern,
                             main_lobe_deg=self.cfg.array.steer_deg, threads=self.threads)
            name = f"ber_tx_{kind}.csv"
            write_ber_csv(self._add(name), simulate_tx_ber(scn))
            self._plot([name], f"ber_tx_{kind}.svg", {"title": f"Eavesdropper BER, {kind} array"})

    def ber_rx(self):
        l = self.cfg.link
        seqs = self.sequences(l.jammer_angles_deg)[0] if "sltm" in l.arrays else {}
        for angle in l.jammer_angles_deg:
            tag = _angle_tag(angle)
            names = []
            for kind in l.arrays:
                scn = JamScenario(self.geometry, kind == "sltm", self.cfg.array.steer_deg, angle, l.sinr_db,
                                  l.jammer_excess_db, l.thermal_snr_db, True, l.n_bits, self.cfg.seed,
                                  self.qpsk, sequence=seqs.get(float(angle)), pattern=self.pattern,
                                  threads=self.threads)
                name = f"ber_rx_{tag}_{kind}.csv"
                write_ber_csv(self._add(name), simulate_rx_jamming_ber(scn))
                names.append(name)
            self._plot(names, f"ber_rx_{tag}.svg", {"title": f"Jammer at {angle:g} deg",
                                                    "labels": list(l.arrays), "x": "key"})

    def pattern_export(self):
        p = self.cfg.pattern_export
        angles = np.arange(p.start_deg, p.stop_deg + p.step_deg / 2, p.step_deg)
        angles = angles[np.abs(angles) <= 90]
        write_pattern_table(self._add("pattern_table.csv"), pattern_table_rows(self.pattern, angles))
        self._plot(["pattern_table.csv"], "pattern_table.svg", {"title": "Per-mode array factor"})

    def run(self):
        getattr(self, self.command.replace("-", "_"))()
        manifest = {
            "command": self.command,
            "config_sha256": config_hash(self.cfg),
            "seed": self.cfg.seed,
            "version": __version__,
            "artifacts": sorted(self.artifacts),
        }
        (self.work / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        return manifest


def _angle_tag(angle: float) -> str:
    s = f"{angle:g}".replace("-", "m").replace(".", "p")
    return f"{s}deg"


def run(command: str, config_path, out_dir, seed: int | None = None, threads: int = 1) -> dict:
    """Validate, execute and publish one scenario. Returns the manifest."""
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}")
    cfg = load_config(config_path, command, seed)
    out = Path(out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".sltm-stage-", dir=out.parent))
    try:
        manifest = Runner(cfg, command, stage, Path(config_path).resolve().parent, threads).run()
        out.mkdir(parents=True, exist_ok=True)
        for f in sorted(stage.iterdir()):
            os.replace(f, out / f.name)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    return manifest


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sltm", description="Sidelobe time-modulated array simulations")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON scenario file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int, help="overrides the config seed")
    ap.add_argument("--threads", type=int, default=1, help="parallel Monte Carlo cells")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        manifest = run(args.command, args.config, args.out, args.seed, args.threads)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for field, msg in exc.problems:
            print(f"  {field}: {msg}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error ({args.command}): {exc}", file=sys.stderr)
        return 2
    except (SltmError, OSError, ArithmeticError, RuntimeError) as exc:
        print(f"runtime error ({args.command}): {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(manifest['artifacts']) + 1} files to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
