"""CSV artifacts, atomic writes and flat key-value config files."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .herding import SampleRecord


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    atomic_write_text(path, csv_text(header, rows))


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def fmt(v: float) -> str:
    """Shortest round-tripping representation of a float."""
    return repr(float(v))


def write_record(rec: SampleRecord, path: str | Path) -> None:
    n = rec.num_vars
    header = ["sweep"] + [f"x{i}" for i in range(n)]
    rows = ([k + 1, *row] for k, row in enumerate(rec.samples.tolist()))
    write_csv(path, header, rows)


def read_record(path: str | Path) -> SampleRecord:
    rows = read_csv(path)
    if not rows:
        raise ValueError(f"{path} has no samples")
    cols = [c for c in rows[0] if c != "sweep"]
    samples = np.array([[int(r[c]) for c in cols] for r in rows], dtype=np.uint8)
    return SampleRecord(samples, tuple(range(len(cols))))


def write_trace(trace, path: str | Path) -> None:
    header = ["t", "var", "blanket_code", "w_before", "p", "x_emitted"]
    write_csv(path, header, ((t, i, c, fmt(w), fmt(p), x) for t, i, c, w, p, x in trace))


def write_marginal_trajectory(trajectory: np.ndarray, path: str | Path) -> None:
    n = trajectory.shape[1]
    header = ["sweep"] + [f"q{i}" for i in range(n)]
    write_csv(path, header, ([k, *map(fmt, row)] for k, row in enumerate(trajectory)))


def write_series(series, path: str | Path) -> None:
    write_csv(path, ["T", "error"], ((t, fmt(e)) for t, e in series.points))


# -- config -------------------------------------------------------------------


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key.lower()] = value
    return out


def load_config(path: str | Path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def float_list(value: str | Sequence[float]) -> list[float]:
    if isinstance(value, str):
        try:
            return [float(v) for v in value.replace(",", " ").split()]
        except ValueError as exc:
            raise ConfigError(f"bad number list {value!r}") from exc
    return [float(v) for v in value]
