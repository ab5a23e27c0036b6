import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd

logger = logging.getLogger(__name__)

CSV_SCHEMA_VERSION = 1
CSV_HEADER_PREFIX = "# markov-lossy csv"


class SymbolFormat(str, Enum):
    """On-disk representation of a symbol sequence"""

    RAW = "raw"  # one symbol per byte
    DIGITS = "digits"  # ASCII text of digits, whitespace ignored


def read_symbols(path: Path, fmt: SymbolFormat) -> npt.NDArray[np.int64]:
    """Read a symbol file in the given format"""
    data = Path(path).read_bytes()
    if fmt is SymbolFormat.RAW:
        return np.frombuffer(data, dtype=np.uint8).astype(np.int64)

    text = bytes(b for b in data if not chr(b).isspace())
    if not text.isdigit():
        raise ValueError(f"{path} contains characters other than ASCII digits")
    return np.frombuffer(text, dtype=np.uint8).astype(np.int64) - ord("0")


def write_symbols(path: Path, symbols: npt.ArrayLike, fmt: SymbolFormat) -> None:
    """Write symbols in the given format"""
    values = np.asarray(symbols, dtype=np.int64)
    if fmt is SymbolFormat.RAW:
        Path(path).write_bytes(values.astype(np.uint8).tobytes())
        return
    if values.size and values.max() > 9:
        raise ValueError("digit format holds symbols 0..9 only")
    Path(path).write_bytes((values + ord("0")).astype(np.uint8).tobytes())


def format_header(meta: Mapping[str, Any]) -> str:
    fields = " ".join(f"{key}={_format_value(value)}" for key, value in meta.items())
    return f"{CSV_HEADER_PREFIX} schema={CSV_SCHEMA_VERSION} {fields}".rstrip()


def _format_value(value: Any) -> str:
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def parse_header(line: str) -> Dict[str, str]:
    if not line.startswith(CSV_HEADER_PREFIX):
        raise ValueError(f"missing markov-lossy CSV header: {line[:40]!r}")
    meta: Dict[str, str] = {}
    for token in line[len(CSV_HEADER_PREFIX) :].split():
        key, _, value = token.partition("=")
        meta[key] = value
    return meta


def write_csv_with_header(
    frame: pd.DataFrame,
    path: Path,
    meta: Mapping[str, Any],
    index: bool = False,
    append: bool = False,
) -> None:
    """
    Write a DataFrame preceded by the versioned header comment line

    Args:
        frame: Rows to write
        path: Destination CSV file
        meta: Parameters declared in the header comment
        index: Whether to write the frame index
        append: Append rows (without header) when the file already exists
    """
    path = Path(path)
    if append and path.exists() and path.stat().st_size > 0:
        frame.to_csv(path, mode="a", header=False, index=index)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(format_header(meta) + "\n")
        frame.to_csv(f, index=index)


def read_csv_with_header(
    path: Path, index_col: str | None = None
) -> Tuple[pd.DataFrame, Dict[str, str]]:
    """Read a CSV written by write_csv_with_header, returning rows and header fields"""
    with open(path) as f:
        meta = parse_header(f.readline().strip())
        frame = pd.read_csv(f, index_col=index_col)
    if index_col is None:
        return frame, meta
    frame.columns = [int(c) for c in frame.columns]
    return frame, meta
