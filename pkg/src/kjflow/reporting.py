"""Deterministic artifact writers: delimited tables, key=value manifests,
binary field snapshots, and rendered figures.

CSV output uses a fixed float format so identical inputs produce
byte-identical files.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = [
    "format_value",
    "write_csv",
    "write_manifest",
    "write_snapshot",
    "read_snapshot",
    "save_line_plot",
    "save_heatmap",
]

_FLOAT_FMT = "{:.12e}"
_SNAP_MAGIC = b"KJSNAP1\x00"


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _FLOAT_FMT.format(float(v))
    if isinstance(v, complex):
        return f"{_FLOAT_FMT.format(v.real)}{v.imag:+.12e}j"
    return str(v)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_manifest(path, entries: dict) -> None:
    path = Path(path)
    lines = [f"{k}={format_value(v)}" for k, v in entries.items()]
    path.write_text("\n".join(lines) + "\n")


def write_snapshot(path, field: np.ndarray, spacings) -> None:
    """Binary snapshot: magic, ndim, dims, grid spacings, float64 data."""
    field = np.asarray(field, dtype="<f8")
    spacings = [float(s) for s in np.atleast_1d(spacings)]
    if len(spacings) != field.ndim:
        raise ValueError("one spacing per array dimension required")
    with open(path, "wb") as fh:
        fh.write(_SNAP_MAGIC)
        fh.write(struct.pack("<i", field.ndim))
        fh.write(struct.pack(f"<{field.ndim}i", *field.shape))
        fh.write(struct.pack(f"<{field.ndim}d", *spacings))
        fh.write(field.tobytes(order="C"))


def read_snapshot(path):
    with open(path, "rb") as fh:
        if fh.read(8) != _SNAP_MAGIC:
            raise ValueError("not a snapshot file")
        (ndim,) = struct.unpack("<i", fh.read(4))
        shape = struct.unpack(f"<{ndim}i", fh.read(4 * ndim))
        spacings = struct.unpack(f"<{ndim}d", fh.read(8 * ndim))
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(shape)
    return data, list(spacings)


def save_line_plot(path, x, series: dict, xlabel="", ylabel="", title="",
                   logy=False) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in series.items():
        ax.plot(x, y, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_heatmap(path, field, extent=None, xlabel="", ylabel="", title="") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    im = ax.imshow(np.asarray(field).T, origin="lower", aspect="auto",
                   extent=extent, cmap="RdBu_r")
    fig.colorbar(im, ax=ax)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
