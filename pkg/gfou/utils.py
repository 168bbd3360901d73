import hashlib
import json
import os
from datetime import datetime
from pathlib import Path

import numpy as np

from gfou.config import CSV_DIGITS
from gfou.errors import ConfigurationError


def now_iso() -> str:
    return datetime.now().astimezone().isoformat()


def sha256_of_text(s: str) -> str:
    return hashlib.sha256(s.encode("utf-8")).hexdigest()


def sha256_of_array(a) -> str:
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    return hashlib.sha256(a.tobytes()).hexdigest()


def config_hash(cfg: dict) -> str:
    return sha256_of_text(json.dumps(cfg, sort_keys=True, default=str))[:16]


def ensure_dir(p: Path) -> None:
    p.mkdir(parents=True, exist_ok=True)


def fmt(x) -> str:
    """Round-trip representation of a float (17 significant digits)."""
    return format(float(x), f".{CSV_DIGITS}g")


def write_matrix(path: Path, header, matrix, comments=()) -> Path:
    """Write a numeric table: '#' comment lines, a header line, then data rows.

    The file is written to a temporary sibling first and moved into place.
    """
    path = Path(path)
    ensure_dir(path.parent)
    matrix = np.asarray(matrix, dtype=float).reshape(-1, len(header))
    head = "\n".join([f"# {line}" for line in comments] + [",".join(header)])
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        np.savetxt(fh, matrix, fmt=f"%.{CSV_DIGITS}g", delimiter=",", header=head, comments="")
    os.replace(tmp, path)
    return path


def write_csv(path: Path, header, rows, comments=()) -> Path:
    return write_matrix(path, header, np.array(list(rows), dtype=float), comments)


def read_csv(path: Path):
    """Return (header, data, comments); data has one column per header entry."""
    comments, header, skip, has_rows = [], None, 0, False
    with Path(path).open(encoding="utf-8") as fh:
        for i, raw in enumerate(fh):
            if header is None:
                if raw.startswith("#"):
                    comments.append(raw[1:].strip())
                elif raw.strip():
                    header, skip = raw.strip().split(","), i + 1
            elif raw.strip():
                has_rows = True
                break
    if header is None:
        raise ConfigurationError(f"{path}: no header line")
    if not has_rows:
        return header, np.zeros((0, len(header))), comments
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    except ValueError as exc:
        raise ConfigurationError(f"{path}: malformed table: {exc}") from exc
    if data.shape[1] != len(header):
        raise ConfigurationError(f"{path}: {data.shape[1]} columns under a {len(header)}-column header")
    return header, data, comments


def read_matrix(path: Path) -> np.ndarray:
    return read_csv(path)[1]
