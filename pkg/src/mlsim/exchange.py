"""JSON interchange between the micro and macro levels.

When file exchange is enabled, every coordinator cycle writes one
record to disk and reads it back before invoking the continuous model,
reproducing the temporary-file mechanics of loosely coupled simulators.
Serialization is canonical: top-level keys in a fixed documented order
(time, node_id, direction, compartments, params), map keys sorted, and
numbers in Python's shortest round-trip decimal form, so
read(write(x)) == x exactly and identical records yield identical
bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IoError, ParseError

MICRO_TO_MACRO = "micro_to_macro"
MACRO_TO_MICRO = "macro_to_micro"
_DIRECTIONS = (MICRO_TO_MACRO, MACRO_TO_MICRO)
_FIELDS = ("time", "node_id", "direction", "compartments", "params")


@dataclass
class ExchangeRecord:
    """One level-crossing message: compartment values plus parameters."""

    time: float
    node_id: int
    direction: str
    compartments: dict[str, float]
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.time = float(self.time)
        self.node_id = int(self.node_id)
        self.compartments = {k: float(v) for k, v in self.compartments.items()}
        self.params = {k: float(v) for k, v in self.params.items()}
        _validate(self, where="<record>")


def _validate(record: ExchangeRecord, where: str) -> None:
    if record.direction not in _DIRECTIONS:
        raise ParseError(where, f"bad direction {record.direction!r}")
    if not math.isfinite(record.time):
        raise ParseError(where, f"non-finite time {record.time!r}")
    for name, value in record.compartments.items():
        if not math.isfinite(value) or value < 0:
            raise ParseError(
                where, f"compartment {name!r} must be finite and >= 0, got {value!r}"
            )
    for name, value in record.params.items():
        if not math.isfinite(value):
            raise ParseError(where, f"param {name!r} must be finite, got {value!r}")


def exchange_filename(node_id: int, step: int) -> str:
    return f"exchange_{node_id}_{step}.json"


def write_exchange(record: ExchangeRecord, directory: str | Path) -> Path:
    """Write one record to its canonical file; never overwrites.

    The file name is derived from the node id and the record's step
    (its time at a decision point), so a second record for the same
    (node, step) is a scheduling bug and fails with IoError.
    """
    directory = Path(directory)
    step = int(round(record.time))
    path = directory / exchange_filename(record.node_id, step)
    if path.exists():
        raise IoError(f"exchange file already exists: {path}")
    payload = {
        "time": record.time,
        "node_id": record.node_id,
        "direction": record.direction,
        "compartments": dict(sorted(record.compartments.items())),
        "params": dict(sorted(record.params.items())),
    }
    try:
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def read_exchange(path: str | Path) -> ExchangeRecord:
    """Parse one exchange file back into a record, validating it."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}", exc.msg) from exc
    if not isinstance(data, dict) or set(data) != set(_FIELDS):
        raise ParseError(
            str(path),
            f"expected exactly the keys {list(_FIELDS)}, got "
            f"{sorted(data) if isinstance(data, dict) else type(data).__name__}",
        )
    for key in ("compartments", "params"):
        if not isinstance(data[key], dict):
            raise ParseError(str(path), f"{key} must be an object")
    for key, value in list(data["compartments"].items()) + list(data["params"].items()):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(str(path), f"value of {key!r} must be a number")
    if isinstance(data["node_id"], bool) or not isinstance(data["node_id"], int):
        raise ParseError(str(path), "node_id must be an integer")
    if isinstance(data["time"], bool) or not isinstance(data["time"], (int, float)):
        raise ParseError(str(path), "time must be a number")
    try:
        return ExchangeRecord(
            time=data["time"],
            node_id=data["node_id"],
            direction=data["direction"],
            compartments=data["compartments"],
            params=data["params"],
        )
    except ParseError as exc:
        raise ParseError(str(path), exc.reason) from exc
