"""On-disk formats.

Measurements are a JSON manifest plus a headerless CSV matrix (one row per
sensor in manifest order, one column per time step ``k = 1..N_T``, 17
significant digits so values round-trip exactly). Result tables are CSV
with a header row. Every command writes a :class:`RunManifest` listing its
outputs with SHA-256 checksums.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .core import MeasurementSet, NoiseInfo, SensorArray, Signal, TimeGrid
from .errors import ValidationError

MEASUREMENT_FORMAT = "wavesource-measurements/1"


def fmt(x):
    return "%.17g" % x


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_matrix(path, a):
    with open(path, "w", newline="") as fh:
        for row in np.atleast_2d(a):
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_matrix(path):
    rows = []
    with open(path, newline="") as fh:
        for line in csv.reader(fh):
            if line:
                rows.append([float(v) for v in line])
    return np.array(rows, dtype=float)


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else
                              (str(v) if isinstance(v, (int, np.integer, bool, np.bool_))
                               else fmt(v)) for v in row) + "\n")


def read_table(path):
    """Header row plus numeric rows as a dict of column arrays."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = list(zip(*[r for r in reader if r])) or [()] * len(header)
    out = {}
    for name, col in zip(header, cols):
        try:
            out[name] = np.array([float(v) for v in col])
        except ValueError:
            out[name] = np.array(col)
    return out


def write_measurements(data: MeasurementSet, signal: Signal, directory, stem="measurements"):
    """Write ``<stem>.json`` and ``<stem>.csv``; returns both paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{stem}.csv"
    json_path = directory / f"{stem}.json"
    write_matrix(csv_path, data.samples)
    meta = {
        "format": MEASUREMENT_FORMAT,
        "data_file": csv_path.name,
        "provenance": data.provenance,
        "c": data.c,
        "time": {"T": data.timegrid.T, "N_T": data.timegrid.n_steps},
        "signal": signal.to_dict(),
        "sensors": data.sensors.points.tolist(),
        "noise": asdict(data.noise) if data.noise else None,
    }
    with open(json_path, "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return json_path, csv_path


def read_measurements(path):
    """Load a measurement manifest; returns ``(MeasurementSet, Signal)``."""
    path = Path(path)
    try:
        with open(path) as fh:
            meta = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"cannot parse JSON: {exc}", str(path)) from None
    if meta.get("format") != MEASUREMENT_FORMAT:
        raise ValidationError(f"unsupported format {meta.get('format')!r}", "format")
    samples = read_matrix(path.parent / meta["data_file"])
    noise = NoiseInfo(**meta["noise"]) if meta.get("noise") else None
    data = MeasurementSet(
        SensorArray(meta["sensors"]),
        TimeGrid(meta["time"]["T"], meta["time"]["N_T"]),
        meta["c"],
        samples.reshape(len(meta["sensors"]), -1),
        noise,
        meta.get("provenance", "external"),
    )
    return data, Signal.from_dict(meta["signal"])


@dataclass
class RunManifest:
    command: str
    config: dict
    tool_version: str
    generator: Optional[str] = None
    seed: Optional[int] = None
    timings: Dict[str, float] = field(default_factory=dict)
    outputs: Dict[str, Dict[str, str]] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def add_output(self, name, path, root):
        path = Path(path)
        self.outputs[name] = {"path": str(path.relative_to(root)), "sha256": sha256(path)}

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    def write(self, path):
        Path(path).write_text(self.to_json())

    def verify(self, root):
        """Names of declared outputs that are missing or fail their checksum."""
        bad = []
        for name, entry in self.outputs.items():
            p = Path(root) / entry["path"]
            if not p.exists() or sha256(p) != entry["sha256"]:
                bad.append(name)
        return bad
