"""Scenario files, JSON records and CSV tables.

Scenario files are JSON objects::

    {"params": {"k_M": 1, "k_E": 1, "a_M": 1, "a_E": 1, "b_M": 2, "b_E": 1},
     "x0": [100, 0, 1], "T": 2.0,
     "config": {"tol": 1e-10, "lp_nodes": 1000, "samples": 1000}}

``"raw"`` with keys ``kA, kM, kE, aM, aE, bM, bE`` may replace ``"params"``.
All floats are written with 17 significant digits so outputs round-trip
exactly and are byte-stable.
"""
from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, TextIO

from .config import RunConfig
from .errors import GrowthCtlError, ScenarioError
from .model import ModelParams, RawNetworkParams, State, reduce_params
from .regimes import Scenario

PARAM_KEYS = ("k_M", "k_E", "a_M", "a_E", "b_M", "b_E")
RAW_KEYS = ("kA", "kM", "kE", "aM", "aE", "bM", "bE")
CONFIG_KEYS = ("tol", "lp_nodes", "samples")
TOP_KEYS = ("params", "raw", "x0", "T", "config")


@dataclass(frozen=True)
class ScenarioFile:
    scenario: Scenario
    raw: RawNetworkParams | None = None
    config: Mapping[str, Any] = field(default_factory=dict)

    def run_config(self, base: RunConfig | None = None) -> RunConfig:
        return (base or RunConfig()).with_overrides(**self.config)


def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ScenarioError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _key_line(text: str, key: str) -> str:
    """Best-effort ``line N`` locator for a key in the source text."""
    needle = f'"{key}"'
    for n, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return f"line {n}, field {key!r}"
    return f"field {key!r}"


def _number(value, where: str, *, integer: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"expected a number, got {value!r}", where)
    if integer and (not float(value).is_integer()):
        raise ScenarioError(f"expected an integer, got {value!r}", where)
    if not math.isfinite(value):
        raise ScenarioError(f"expected a finite number, got {value!r}", where)
    return int(value) if integer else float(value)


def _record(obj, keys: Sequence[str], where: str, text: str) -> dict[str, float]:
    if not isinstance(obj, dict):
        raise ScenarioError(f"expected an object with keys {list(keys)}", where)
    unknown = [k for k in obj if k not in keys]
    if unknown:
        raise ScenarioError(f"unknown key {unknown[0]!r}; expected {list(keys)}", _key_line(text, unknown[0]))
    missing = [k for k in keys if k not in obj]
    if missing:
        raise ScenarioError(f"missing key {missing[0]!r}", where)
    return {k: _number(obj[k], _key_line(text, k)) for k in keys}


def scenario_from_text(text: str) -> ScenarioFile:
    try:
        doc = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("top level must be a JSON object", "line 1")
    unknown = [k for k in doc if k not in TOP_KEYS]
    if unknown:
        raise ScenarioError(f"unknown key {unknown[0]!r}; expected {list(TOP_KEYS)}", _key_line(text, unknown[0]))
    if ("params" in doc) == ("raw" in doc):
        raise ScenarioError("exactly one of 'params' or 'raw' is required", "top level")
    for key in ("x0", "T"):
        if key not in doc:
            raise ScenarioError(f"missing key {key!r}", "top level")

    try:
        raw = None
        if "params" in doc:
            params = ModelParams(**_record(doc["params"], PARAM_KEYS, _key_line(text, "params"), text))
        else:
            r = _record(doc["raw"], RAW_KEYS, _key_line(text, "raw"), text)
            raw = RawNetworkParams(r["kA"], r["kM"], r["kE"], r["aM"], r["aE"], r["bM"], r["bE"])
            params = reduce_params(raw)

        where = _key_line(text, "x0")
        x0 = doc["x0"]
        if not isinstance(x0, list) or len(x0) != 3:
            raise ScenarioError("expected a list [x_N, x_M, x_E]", where)
        x0 = State(*(_number(v, f"{where}[{i}]") for i, v in enumerate(x0)))
        T = _number(doc["T"], _key_line(text, "T"))
        scenario = Scenario(params, x0, T)
    except ScenarioError:
        raise
    except GrowthCtlError as exc:
        raise ScenarioError(str(exc), "values") from None

    config = {}
    if "config" in doc:
        cfg = doc["config"]
        where = _key_line(text, "config")
        if not isinstance(cfg, dict):
            raise ScenarioError("expected an object", where)
        for k, v in cfg.items():
            if k not in CONFIG_KEYS:
                raise ScenarioError(f"unknown key {k!r}; expected {list(CONFIG_KEYS)}", _key_line(text, k))
            num = _number(v, _key_line(text, k), integer=k != "tol")
            if num < 0 or (num == 0 and k != "tol"):
                raise ScenarioError(f"must be positive, got {v!r}", _key_line(text, k))
            config[k] = num
    return ScenarioFile(scenario, raw, config)


def parse_scenario(path) -> ScenarioFile:
    """Read and validate a scenario file.

    Raises:
        ScenarioError: unreadable file or schema violation; the message
            names the line and field where possible.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(exc.strerror or str(exc), str(path)) from None
    return scenario_from_text(text)


def scenario_to_dict(sf: ScenarioFile) -> dict:
    s = sf.scenario
    out: dict[str, Any] = {}
    if sf.raw is not None:
        r = sf.raw
        out["raw"] = dict(zip(RAW_KEYS, (r.kA_raw, r.kM_raw, r.kE_raw, r.aM_raw, r.aE_raw, r.b_M, r.b_E)))
    else:
        out["params"] = s.params.as_dict()
    out["x0"] = list(s.x0)
    out["T"] = s.T
    if sf.config:
        out["config"] = dict(sf.config)
    return out


# --- JSON ------------------------------------------------------------------


def fmt_float(x: float) -> str:
    return format(x, ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, float):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalar
        return _encode(obj.item(), indent, level)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):  # enums
        return json.dumps(obj.value)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (Mapping, list, tuple)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with 17-digit floats and ``null`` for non-finite values."""
    return _encode(obj, indent, 0) + "\n"


def write_json(obj, path=None) -> None:
    text = dumps(obj)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")


# --- CSV -------------------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return ""
    if hasattr(v, "item") and callable(v.item):
        v = v.item()
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return fmt_float(v)
    if hasattr(v, "value") and isinstance(getattr(v, "value"), str):
        return v.value
    return str(v)


def csv_text(records: Iterable[Mapping], header: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for rec in records:
        w.writerow([_cell(rec.get(h)) for h in header])
    return buf.getvalue()


def write_csv(records: Iterable[Mapping], path, header: Sequence[str] | None = None) -> None:
    """Write ``records`` as CSV with LF line endings; ``path`` may be ``-`` or a stream."""
    records = list(records)
    if header is None:
        header = list(records[0].keys()) if records else []
    text = csv_text(records, header)
    if isinstance(path, io.TextIOBase) or hasattr(path, "write"):
        path.write(text)
    elif path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def read_csv(path: str | Path | TextIO) -> list[dict[str, str]]:
    if hasattr(path, "read"):
        return list(csv.DictReader(path))
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
