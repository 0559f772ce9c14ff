"""SVG figures rendered from the toolkit's CSV artifacts."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .array_model import PATTERN_HEADER  # noqa: E402
from .errors import ValidationError  # noqa: E402
from .link import BER_HEADER, theoretical_qpsk_ber  # noqa: E402
from .spectral import SPECTRUM_HEADER  # noqa: E402

STYLE = {
    "svg.hashsalt": "sltm",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.figsize": (6.4, 4.0),
}


def _read(path) -> tuple[tuple[str, ...], list[list[str]]]:
    with open(path, encoding="utf-8") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    if not rows:
        raise ValidationError(f"{path}: empty CSV")
    header, body = tuple(h.strip() for h in rows[0]), rows[1:]
    if not body:
        raise ValidationError(f"{path}: CSV has a header but no data")
    return header, body


def csv_schema(path) -> str:
    header, _ = _read(path)
    for name, h in (("spectrum", SPECTRUM_HEADER), ("ber", BER_HEADER), ("pattern", PATTERN_HEADER)):
        if header == h:
            return name
    raise ValidationError(f"{path}: unknown CSV schema {','.join(header)}")


def emit_plot(csv_paths, out_path, style: dict | None = None) -> Path:
    """Render one or more CSVs of the same schema into an SVG file.

    ``style`` keys (all optional): ``title``, ``labels`` (one legend entry per
    CSV), ``x`` for BER files (``"snr"`` or ``"key"``), ``x_label``,
    ``theory`` (overlay the QPSK curve on BER plots), ``ylim``.
    """
    style = dict(style or {})
    paths = [csv_paths] if isinstance(csv_paths, (str, Path)) else list(csv_paths)
    if not paths:
        raise ValidationError("nothing to plot")
    schemas = {csv_schema(p) for p in paths}
    if len(schemas) != 1:
        raise ValidationError(f"cannot overlay different schemas: {sorted(schemas)}")
    schema = schemas.pop()
    labels = style.get("labels") or [Path(p).stem for p in paths]

    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        {"spectrum": _plot_spectra, "ber": _plot_ber, "pattern": _plot_pattern}[schema](ax, paths, labels, style)
        if style.get("title"):
            ax.set_title(style["title"])
        if len(paths) > 1 or schema != "spectrum":
            ax.legend(fontsize=8)
        fig.tight_layout()
        out_path = Path(out_path)
        fig.savefig(out_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return out_path


def _plot_spectra(ax, paths, labels, style):
    for p, lab in zip(paths, labels):
        _, body = _read(p)
        data = np.array([[float(r[0]), float(r[2])] for r in body])
        ax.plot(data[:, 0] / 1e6, data[:, 1], lw=0.8, label=lab)
    ax.set_xlabel("Frequency offset (MHz)")
    ax.set_ylabel(style.get("y_label", "Normalized PSD (dB)"))
    if "ylim" in style:
        ax.set_ylim(*style["ylim"])


def _plot_ber(ax, paths, labels, style):
    x_mode = style.get("x", "snr")
    xs_all = []
    for p, lab in zip(paths, labels):
        _, body = _read(p)
        rows = np.array([[float(r[0]), float(r[1]), float(r[4])] for r in body])
        if x_mode == "key":
            order = np.argsort(rows[:, 0])
            x, y = rows[order, 0], rows[order, 2]
            xs_all.append(x)
            ax.semilogy(x, np.maximum(y, 1e-7), "o-", ms=3, label=lab)
        else:
            for key in np.unique(rows[:, 0]):
                sel = rows[rows[:, 0] == key]
                xs_all.append(sel[:, 1])
                ax.semilogy(sel[:, 1], np.maximum(sel[:, 2], 1e-7), "o-", ms=3,
                            label=f"{lab} {key:g}\N{DEGREE SIGN}")
    if style.get("theory", True):
        x = np.concatenate(xs_all)
        grid = np.linspace(x.min(), x.max(), 200)
        ax.semilogy(grid, theoretical_qpsk_ber(10 ** (grid / 10)), "k--", lw=1, label="theory")
    ax.set_xlabel(style.get("x_label", "SINR (dB)" if x_mode == "key" else "Eb/N0 (dB)"))
    ax.set_ylabel("Bit error rate")
    ax.set_ylim(1e-6, 1)


def _plot_pattern(ax, paths, labels, style):
    for p, lab in zip(paths, labels):
        _, body = _read(p)
        rows = np.array([[float(r[0]), int(r[1]), float(r[2])] for r in body])
        for m in np.unique(rows[:, 1]).astype(int):
            sel = rows[rows[:, 1] == m]
            with np.errstate(divide="ignore"):
                db = 20 * np.log10(sel[:, 2])
            ax.plot(sel[:, 0], np.maximum(db, -40), lw=0.8, label=f"mode {m}")
    ax.set_xlabel("Angle (deg)")
    ax.set_ylabel("Array factor (dB)")
