"""CSV output with a comment header carrying the resolved configuration."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError


def fmt_float(x) -> str:
    # shortest round-trip decimal
    return repr(float(x))


def _fmt_cell(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return fmt_float(x)
    return str(x)


def write_csv(
    path: str | Path,
    columns: Sequence[str],
    rows: Iterable[Sequence],
    header: Sequence[str] = (),
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {h}" if h else "#" for h in header]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt_cell(x) for x in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def trajectory_rows(traj):
    for k in range(traj.t.size):
        yield (k, traj.t[k], traj.h[k], traj.gap[k], traj.rho[k], *traj.y[k])


def trajectory_columns(dim: int) -> list[str]:
    return ["k", "t", "h", "gap", "rho"] + [f"y{i}" for i in range(dim)]


def _column(values: list[str]) -> np.ndarray:
    try:
        return np.array([float(v) for v in values], dtype=float)
    except ValueError:
        return np.array(values, dtype=str)


def read_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Columns of a CSV written by :func:`write_csv`, comment lines skipped.

    Fully numeric columns come back as float arrays, all others as strings.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from None
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ConfigError(f"{path}: no CSV header found")
    rows = list(csv.reader(lines))
    names = [c.strip() for c in rows[0]]
    if any(len(r) != len(names) for r in rows[1:]):
        raise ConfigError(f"{path}: row width does not match header")
    return {name: _column([r[j] for r in rows[1:]]) for j, name in enumerate(names)}
