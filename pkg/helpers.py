import json
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

import config
from classes.Errors import MalformedDataError, MissingInputError, OutputError
from classes.Sample import PairedSample, Sample
from config import log

MAX_REPORTED_LINES = 10

# header -> kind of data it holds
COLUMN_LAYOUTS = {
    ("x",): "density",
    ("x1", "x2"): "density",
    ("x", "y"): "regression",
}


def read_csv(
    path: Union[str, Path], expected: Optional[Sequence[str]] = None
) -> Union[Sample, PairedSample]:
    """Loads observations from a headed, comma-separated file

    Args:
        path (Union[str, Path]): CSV file with a header row
        expected (Optional[Sequence[str]], optional): Required columns. Defaults to
            inferring them from the header: `x`, `x1,x2` or `x,y`.

    Raises:
        MissingInputError: The file does not exist
        MalformedDataError: Unknown header or rows with non-numeric fields

    Returns:
        Union[Sample, PairedSample]: PairedSample for `x,y`, Sample otherwise
    """
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"Input file {path} does not exist")

    try:
        frame = pd.read_csv(
            path, dtype=str, skipinitialspace=True, skip_blank_lines=False, keep_default_na=False
        )
    except pd.errors.EmptyDataError:
        raise MalformedDataError(f"{path} is empty, a header row is required", [1])
    except pd.errors.ParserError as error:
        raise MalformedDataError(f"{path} could not be parsed: {error}")

    columns = tuple(str(column).strip() for column in frame.columns)
    frame.columns = columns
    if expected is None:
        matches = [layout for layout in COLUMN_LAYOUTS if set(layout) == set(columns)]
        if not matches:
            raise MalformedDataError(
                f"Header {','.join(columns)} is not one of x | x1,x2 | x,y", [1]
            )
        expected = matches[0]
    missing = [column for column in expected if column not in columns]
    if missing:
        raise MalformedDataError(f"Missing column(s) {', '.join(missing)}", [1])

    values = frame[list(expected)].apply(pd.to_numeric, errors="coerce")
    bad_rows = ~np.isfinite(values.to_numpy(dtype=float)).all(axis=1)
    if bad_rows.any():
        # header is line 1, first data row line 2
        lines = [int(i) + 2 for i in np.nonzero(bad_rows)[0][:MAX_REPORTED_LINES]]
        raise MalformedDataError(f"{int(bad_rows.sum())} row(s) with non-numeric fields", lines)

    try:
        if tuple(expected) == ("x", "y"):
            data = PairedSample(values["x"].to_numpy(), values["y"].to_numpy())
        else:
            data = Sample(values.to_numpy())
    except ValueError as error:
        raise MalformedDataError(f"{path}: {error}")

    log.info(f"Loaded {len(values)} rows ({','.join(expected)}) from {path}")
    return data


def to_jsonable(value):
    """Plain JSON types: arrays become lists, non-finite floats become null"""
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    return value


def build_result_document(
    command: str,
    resolved_config: dict,
    payload: dict,
    dropped_replicates: int = 0,
    timing: Optional[dict] = None,
) -> dict:
    return to_jsonable(
        {
            "schema_version": config.SCHEMA_VERSION,
            "command": command,
            "config": resolved_config,
            "payload": payload,
            "replicates": {"dropped": dropped_replicates},
            "timing": timing or {},
        }
    )


def _format_real(value: float) -> str:
    text = "%.17g" % value
    return text if any(c in text for c in ".e") else text + ".0"


class _RealDigitsEncoder(json.JSONEncoder):
    """JSON encoder writing every real with 17 significant digits"""

    def iterencode(self, o, _one_shot=False):
        encode = json.encoder._make_iterencode(
            {} if self.check_circular else None,
            self.default,
            json.encoder.py_encode_basestring_ascii,
            self.indent,
            _format_real,
            self.key_separator,
            self.item_separator,
            self.sort_keys,
            self.skipkeys,
            _one_shot,
        )
        return encode(o, 0)


def dumps_result(doc: dict, include_timing: bool = True) -> str:
    """Canonical JSON text: sorted keys, 17 significant digits per real"""
    if not include_timing:
        doc = {key: value for key, value in doc.items() if key != "timing"}
    return json.dumps(to_jsonable(doc), cls=_RealDigitsEncoder, sort_keys=True, indent=2) + "\n"


def write_result(
    doc: dict, path: Union[str, Path], table: Optional[pd.DataFrame] = None
) -> None:
    """Writes the result document, and the flat table next to it when given

    Args:
        doc (dict): Result document
        path (Union[str, Path]): JSON destination
        table (Optional[pd.DataFrame], optional): Written to `path` with a .csv
            suffix. Defaults to None.

    Raises:
        OutputError: When a file cannot be written
    """
    path = Path(path)
    try:
        path.write_text(dumps_result(doc))
        log.info(f"Result written to {path}")
        if table is not None:
            csv_path = path.with_suffix(".csv")
            table.to_csv(csv_path, index=False, float_format="%.17g")
            log.info(f"Table written to {csv_path}")
    except OSError as error:
        raise OutputError(f"Could not write {path}: {error}")


def read_result(path: Union[str, Path]) -> dict:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"Result file {path} does not exist")
    with open(path, "r") as result_file:
        return json.load(result_file)
