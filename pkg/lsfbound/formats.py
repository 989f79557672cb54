"""CSV and text interchange formats between pipeline stages.

Vector files (LSF, delta-LSF, LPC pairs) have no header: one vector per
line, comma separated. Output tables carry a header row. Floats are written
with %.17g so files round-trip exactly and are byte-stable across runs.
"""

import re
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import DomainError, FormatError, InputError, ParseError
from .signal_frontend import LpcFrame

FLOAT_FORMAT = "%.17g"
UNSTABLE_MARKER = "unstable"

_PANDAS_LINE = re.compile(r"line (\d+)")


def read_vector_csv(path, expected_columns: Optional[int] = None) -> np.ndarray:
    """N x K float matrix from a headerless CSV; ParseError points at the bad line."""
    path = Path(path)
    try:
        table = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=False, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise DomainError(f"{path}: file is empty") from e
    except pd.errors.ParserError as e:
        match = _PANDAS_LINE.search(str(e))
        raise ParseError(f"{path}: inconsistent number of fields", line=int(match.group(1)) if match else None) from e
    except OSError as e:
        raise InputError(path, e.strerror or str(e)) from e

    values = table.apply(lambda column: pd.to_numeric(column.str.strip(), errors="coerce")).to_numpy(dtype=float)
    bad_rows = np.flatnonzero(~np.all(np.isfinite(values), axis=1))
    if len(bad_rows):
        raise ParseError(f"{path}: missing or non-numeric field", line=int(bad_rows[0]) + 1)
    if len(values) == 0:
        raise DomainError(f"{path}: file is empty")
    if expected_columns is not None and values.shape[1] != expected_columns:
        raise FormatError(f"{path}: expected {expected_columns} columns, found {values.shape[1]}")
    return values


def write_vector_csv(path, vectors) -> Path:
    path = Path(path)
    pd.DataFrame(np.atleast_2d(vectors)).to_csv(
        path, header=False, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
    )
    return path


def write_lpc_dump(path, frames: Sequence[LpcFrame]) -> Path:
    """frame_index, a_1..a_K, residual_energy; one row per retained frame."""
    path = Path(path)
    order = frames[0].order if frames else 0
    columns = ["frame_index"] + [f"a_{k}" for k in range(1, order + 1)] + ["residual_energy"]
    table = pd.DataFrame(
        [[f.frame_index, *f.coefficients, f.residual_energy] for f in frames],
        columns=columns,
    )
    table["frame_index"] = table["frame_index"].astype(int)
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_curve_csv(path, curve) -> Path:
    path = Path(path)
    table = pd.DataFrame(
        {
            "rate_bits": [p.rate_bits for p in curve],
            "mse_delta": [p.mse_delta for p in curve],
            "mse_lsf": [p.mse_lsf for p in curve],
            "lsd_db": [p.lsd_db for p in curve],
        }
    )
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_curve_csv(path) -> pd.DataFrame:
    return pd.read_csv(path)


def write_lsd_values(path, values: List[Optional[float]]) -> Path:
    """pair_index,lsd_db; rows whose filters were unstable carry the marker instead of a value."""
    path = Path(path)
    column = [UNSTABLE_MARKER if v is None else FLOAT_FORMAT % v for v in values]
    pd.DataFrame({"pair_index": range(len(values)), "lsd_db": column}).to_csv(
        path, index=False, lineterminator="\n"
    )
    return path


def write_report(path, lines: Sequence[str]) -> Path:
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
