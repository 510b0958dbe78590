"""Config loading, CSV ingestion and result writers."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import jsonschema
import numpy as np

from .errors import FormatError, NonMonotoneGrid, ParseError, SchemaError
from .expansion import SampledFunction
from .expr import parse
from .spectral import SpectralConfig

DEFAULT_TRUNCATION = 64
DEFAULT_NODES = 1024
DEFAULT_COUNT = 10
MODES = ("SPECTRUM", "DIRECT", "INVERSE", "VERIFY")
REQUIRED_KEYS = {
    "SPECTRUM": (),
    "DIRECT": ("T", "phi", "p"),
    "INVERSE": ("T", "phi", "E"),
    "VERIFY": ("T", "phi", "p"),
}


def load_schema() -> dict:
    text = resources.files("heatdyn").joinpath("schema/run_config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


@dataclass
class RunConfig:
    spectral: SpectralConfig
    mode: Optional[str] = None
    count: int = DEFAULT_COUNT
    T: Optional[float] = None
    truncation: int = DEFAULT_TRUNCATION
    n0: int = 0
    nodes: int = DEFAULT_NODES
    nx: int = 100
    nt: int = 100
    fdm: dict = field(default_factory=lambda: {"nx": 400, "nt": 4000, "theta": 0.5})
    phi: object = None
    f: Optional[str] = None
    p: object = None
    E: object = None
    E_deriv: object = None
    policy: str = "strict"
    method: str = "direct"
    override: bool = False
    out: Optional[str] = None
    tolerances: dict = field(default_factory=dict)
    base_dir: Path = Path(".")
    raw: dict = field(default_factory=dict, repr=False)

    def require(self, mode: str):
        """Check the keys ``mode`` needs; raises :class:`SchemaError`."""
        mode = mode.upper()
        if self.mode is not None and self.mode != mode:
            raise SchemaError(f"config declares mode {self.mode} but {mode} was requested", "/mode")
        for key in REQUIRED_KEYS[mode]:
            if getattr(self, key) is None:
                raise SchemaError(f"{key!r} is required for {mode}", f"/{key}")
        return self

    def tolerance(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))

    # -- data descriptors ---------------------------------------------------

    def function(self, key: str, role: str):
        """Build the callable (or sampled function) behind descriptor ``key``."""
        desc = getattr(self, key)
        if desc is None:
            return None
        try:
            if isinstance(desc, (int, float)):
                return float(desc)
            if isinstance(desc, dict) and "csv" in desc:
                path = Path(desc["csv"])
                return load_samples(path if path.is_absolute() else self.base_dir / path)
            text = desc["expr"] if isinstance(desc, dict) else desc
            return parse(text, self.spectral, role)
        except ParseError as exc:
            raise SchemaError(str(exc), f"/{key}") from None


def _pointer(err: jsonschema.ValidationError) -> str:
    return "".join(f"/{part}" for part in err.absolute_path)


def validate_config(data: dict) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: (len(e.absolute_path), e.message))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        pointer = _pointer(err)
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            pointer = f"{pointer}/{extra[0]}" if extra else pointer
        raise SchemaError(err.message, pointer)
    for key in ("a", "b", "d", "T"):
        if key in data and not math.isfinite(data[key]):
            raise SchemaError("must be finite", f"/{key}")
    if not data["a"] * data["d"] > 0:
        raise SchemaError(f"a*d > 0 is required (a={data['a']}, d={data['d']})", "/a")


def config_from_dict(data: dict, base_dir: Path = Path(".")) -> RunConfig:
    validate_config(data)
    grids = data.get("grids", {})
    fdm = {"nx": 400, "nt": 4000, "theta": 0.5, **data.get("fdm", {})}
    mode = data.get("mode")
    n0 = data.get("n0", 0)
    truncation = data.get("truncation", DEFAULT_TRUNCATION)
    if n0 > truncation:
        raise SchemaError(f"n0={n0} exceeds truncation={truncation}", "/n0")
    return RunConfig(
        spectral=SpectralConfig(float(data["a"]), float(data["b"]), float(data["d"])),
        mode=mode.upper() if mode else None,
        count=data.get("count", DEFAULT_COUNT),
        T=data.get("T"),
        truncation=truncation,
        n0=n0,
        nodes=data.get("nodes", DEFAULT_NODES),
        nx=grids.get("nx", 100),
        nt=grids.get("nt", 100),
        fdm=fdm,
        phi=data.get("phi"),
        f=data.get("f"),
        p=data.get("p"),
        E=data.get("E"),
        E_deriv=data.get("E_deriv"),
        policy=data.get("policy", "strict"),
        method=data.get("method", "direct"),
        override=data.get("override", False),
        out=data.get("out"),
        tolerances=dict(data.get("tolerances", {})),
        base_dir=base_dir,
        raw=data,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise SchemaError("top level must be an object", "")
    return config_from_dict(data, path.parent)


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_table(path, columns: int = 2):
    """Numeric CSV with an optional header row; returns an array ``(rows, columns)``."""
    path = Path(path)
    try:
        handle = path.open(encoding="utf-8", newline="")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from None
    rows = []
    with handle:
        for lineno, row in enumerate(csv.reader(handle), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            cells = [c.strip() for c in row]
            if lineno == 1 and not all(_is_number(c) for c in cells):
                continue
            if len(cells) != columns:
                raise FormatError(f"expected {columns} columns, got {len(cells)}", lineno)
            try:
                vals = [float(c) for c in cells]
            except ValueError:
                raise FormatError(f"non-numeric value in {cells}", lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise FormatError("non-finite value", lineno)
            rows.append(vals)
    if not rows:
        raise FormatError(f"{path} holds no data rows")
    return np.array(rows, dtype=float)


def load_samples(path) -> SampledFunction:
    """Two-column (coordinate, value) CSV as a :class:`SampledFunction`."""
    table = read_table(path, 2)
    grid = table[:, 0]
    steps = np.diff(grid)
    if np.any(steps <= 0):
        k = int(np.flatnonzero(steps <= 0)[0])
        kind = "duplicate" if steps[k] == 0 else "decreasing"
        raise NonMonotoneGrid(f"{path}: {kind} coordinate at data row {k + 2} ({grid[k + 1]!r})")
    if grid.size < 2:
        raise FormatError(f"{path} needs at least 2 rows")
    return SampledFunction(grid, table[:, 1])


def write_csv(path, header: Sequence, columns) -> Path:
    """Write equal-length columns with 17 significant digits (lossless for float64)."""
    path = Path(path)
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, data, fmt="%.17g", delimiter=",")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def has_failure(report) -> bool:
    """True if any ``status`` anywhere in a nested report is FAIL."""
    if isinstance(report, dict):
        if report.get("status") == "FAIL":
            return True
        return any(has_failure(v) for v in report.values())
    if isinstance(report, list):
        return any(has_failure(v) for v in report)
    return False
