"""Experiment manifests and deterministic CSV/JSON emission.

Every run produces its outputs plus a manifest recording the subcommand, the
full parameter record, the master seed and shard count, the tool version and
the sha256 digest of each output file.  Re-running a manifest must reproduce
byte-identical outputs; wall-clock time is recorded but excluded from the
reproducibility contract.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import dataclass, field

from . import __version__


def format_float(x) -> str:
    """Floats with 17 significant digits; integers and strings pass through."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def emit_csv(header: list[str], rows) -> str:
    """RFC-4180 CSV with a mandatory header row, streamed through a buffer."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) for v in row])
    return buf.getvalue()


def emit_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    import numpy as np

    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class ExperimentManifest:
    subcommand: str
    params: dict
    seed: int
    shards: int
    version: str = __version__
    wall_clock_s: float = 0.0
    output_digests: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "params": self.params,
            "seed": self.seed,
            "shards": self.shards,
            "version": self.version,
            "wall_clock_s": self.wall_clock_s,
            "output_digests": self.output_digests,
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "ExperimentManifest":
        return ExperimentManifest(
            subcommand=obj["subcommand"],
            params=obj["params"],
            seed=obj["seed"],
            shards=obj["shards"],
            version=obj.get("version", __version__),
            wall_clock_s=obj.get("wall_clock_s", 0.0),
            output_digests=obj.get("output_digests", {}),
        )


class RunTimer:
    def __enter__(self):
        self.t0 = time.monotonic()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.monotonic() - self.t0
        return False
