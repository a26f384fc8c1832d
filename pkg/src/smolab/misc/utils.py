import csv
import json
import math
from collections import OrderedDict
from json.decoder import JSONDecodeError
from pathlib import Path
from typing import Any, Iterable, List, Sequence, Union


def import_dict_from_json(import_path: Union[str, Path]) -> dict:
    """Import a dictionary from a JSON file.

    Args:
        import_path (Union[str, Path]): The path to the json file.
            Should end in ``.json``.

    Returns:
        dict: The contents of the imported JSON file.
    """
    with open(import_path) as f:
        data = f.read()
    try:
        data_dict = json.loads(data, object_pairs_hook=OrderedDict)
    except JSONDecodeError:
        data_dict = data
    if isinstance(data_dict, dict):
        return data_dict
    else:
        return {"data": data}


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return repr(float(value))
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if hasattr(value, "item") and callable(value.item):
        return _json_safe(value.item())
    return value


def export_dict_to_json(data: dict, export_path: Union[str, Path]) -> Path:
    """Export a dictionary to a JSON file with sorted keys.

    Non-finite floats are written as strings (``"inf"``, ``"nan"``) so the file
    stays valid JSON.

    Args:
        data (dict): The dictionary to export.
        export_path (Union[str, Path]): Destination path. Parent folders are
            created if needed.

    Returns:
        Path: The path written to.
    """
    export_path = Path(export_path)
    export_path.parent.mkdir(parents=True, exist_ok=True)
    export_path.write_text(json.dumps(_json_safe(data), indent=2, sort_keys=True) + "\n")
    return export_path


def _format_cell(value: Any) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, int):
        return repr(int(value))
    if hasattr(value, "item") and callable(value.item):
        return _format_cell(value.item())
    return str(value)


def write_csv(
    export_path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> Path:
    """Write rows to a CSV file with a fixed header.

    Floats are written with ``repr`` so that two identical runs produce
    byte-identical files.

    Args:
        export_path (Union[str, Path]): Destination path.
        header (Sequence[str]): Column names.
        rows (Iterable[Sequence[Any]]): Rows, each with ``len(header)`` cells.

    Returns:
        Path: The path written to.
    """
    export_path = Path(export_path)
    export_path.parent.mkdir(parents=True, exist_ok=True)
    with open(export_path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(
                    f"Row has {len(row)} cells but header has {len(header)}"
                )
            writer.writerow([_format_cell(cell) for cell in row])
    return export_path


def read_csv(import_path: Union[str, Path]) -> List[dict]:
    """Read a CSV file written by :func:`write_csv`.

    Args:
        import_path (Union[str, Path]): The path to the CSV file.

    Returns:
        List[dict]: One dictionary per row, keyed by the header.
    """
    with open(import_path, newline="") as f:
        return list(csv.DictReader(f))
