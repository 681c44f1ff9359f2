"""Deterministic report records: canonical JSON with fixed float
formatting (17 significant digits) and a config digest."""

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1"


def _canonical(obj):
    """Recursively convert to plain JSON-able values with floats rendered
    via %.17g (shortest faithful fixed-width form)."""
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_canonical(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return RawFloat(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": RawFloat(obj.real), "im": RawFloat(obj.imag)}
    return obj


class RawFloat(float):
    pass


class _Encoder(json.JSONEncoder):
    def iterencode(self, o, _one_shot=False):
        for chunk in super().iterencode(o, _one_shot=_one_shot):
            yield chunk

    def default(self, o):  # pragma: no cover
        return str(o)


def canonical_json(obj) -> str:
    """Sorted keys, floats at 17 significant digits, newline-terminated."""
    canon = _canonical(obj)

    def render(o, indent=0):
        pad = "  " * indent
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f'{pad}  "{k}": {render(v, indent + 1)}' for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + pad + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            items = [f"{pad}  {render(v, indent + 1)}" for v in o]
            return "[\n" + ",\n".join(items) + "\n" + pad + "]"
        if isinstance(o, RawFloat):
            return "%.17g" % float(o)
        if isinstance(o, bool):
            return "true" if o else "false"
        if o is None:
            return "null"
        if isinstance(o, (int,)):
            return str(o)
        return json.dumps(o)

    return render(canon) + "\n"


def config_digest(raw_config: dict) -> str:
    return hashlib.sha256(canonical_json(raw_config).encode()).hexdigest()


@dataclass
class ReportRecord:
    command: str
    config_digest: str
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    timings: dict = None
    schema_version: str = SCHEMA_VERSION

    def as_dict(self) -> dict:
        out = {
            "command": self.command,
            "config_digest": self.config_digest,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "residuals": self.residuals,
            "schema_version": self.schema_version,
        }
        if self.timings is not None:
            out["timings"] = self.timings
        return out

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(canonical_json(self.as_dict()))
        return path

    @classmethod
    def read(cls, path):
        raw = json.loads(Path(path).read_text())

        def parse_floats(o):
            if isinstance(o, dict):
                return {k: parse_floats(v) for k, v in o.items()}
            if isinstance(o, list):
                return [parse_floats(v) for v in o]
            if o == "nan":
                return float("nan")
            return o

        raw = parse_floats(raw)
        return cls(
            command=raw["command"], config_digest=raw["config_digest"],
            inputs=raw.get("inputs", {}), outputs=raw.get("outputs", {}),
            residuals=raw.get("residuals", {}), timings=raw.get("timings"),
            schema_version=raw.get("schema_version", "?"),
        )


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["%.17g" % v if isinstance(v, float) else v
                             for v in row])
    return path
