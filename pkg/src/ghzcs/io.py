"""File formats: JSON documents and schema-tagged CSV tables."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .simulate import ParitySample

SCHEMA_PREFIX = "# schema: "
PARITY_SCHEMA = "ghzcs.parity_samples/v1"


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def _cell(value):
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    if isinstance(value, bool):
        return str(value).lower()
    return value


def write_csv(path, schema: str, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"{SCHEMA_PREFIX}{schema}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            values = [row[h] for h in header] if isinstance(row, dict) else row
            writer.writerow([_cell(v) for v in values])
    return path


def read_csv(path) -> tuple[str | None, list[dict]]:
    """Return (schema, rows as dicts of strings)."""
    schema = None
    lines = []
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                if schema is None and line.startswith(SCHEMA_PREFIX):
                    schema = line[len(SCHEMA_PREFIX):].strip()
                continue
            lines.append(line)
    return schema, list(csv.DictReader(lines))


def write_parity_samples(path, samples) -> Path:
    rows = [(s.phi, s.parity, s.shots) for s in samples]
    return write_csv(path, PARITY_SCHEMA, ["phi", "parity", "shots"], rows)


def read_parity_samples(path) -> list[ParitySample]:
    _, rows = read_csv(path)
    return [ParitySample(float(r["phi"]), float(r["parity"]), int(r["shots"])) for r in rows]
