"""Output writers. Every file starts with the resolved configuration."""

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .core import write_pgm


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def metadata(config):
    return {"tool": "fracmin", "version": __version__, "config": _plain(config)}


@dataclass
class Report:
    """A named result: summary values, an optional table and optional mask images."""

    name: str
    summary: dict
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    images: dict = field(default_factory=dict)

    def to_dict(self, config=None):
        out = {"metadata": metadata(config or {}), "name": self.name, "summary": _plain(self.summary)}
        if self.rows:
            out["table"] = {"columns": list(self.columns), "rows": _plain(self.rows)}
        return out

    def write(self, outdir, config):
        """Write ``<name>.json``, ``<name>.csv`` and one PGM per image; return the paths."""
        os.makedirs(outdir, exist_ok=True)
        paths = [write_json(os.path.join(outdir, self.name + ".json"), self.to_dict(config))]
        if self.rows:
            paths.append(write_csv(os.path.join(outdir, self.name + ".csv"),
                                   self.columns, self.rows, config))
        for tag, img in self.images.items():
            p = os.path.join(outdir, f"{self.name}_{tag}.pgm")
            write_pgm(p, img, comment=json.dumps(metadata(config), sort_keys=True))
            paths.append(p)
        return paths


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_plain(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_csv(path, columns, rows, config):
    """CSV with the metadata as ``#`` comment lines above the header row."""
    with open(path, "w", newline="") as fh:
        for line in json.dumps(metadata(config), sort_keys=True, indent=1).splitlines():
            fh.write("# " + line + "\n")
        wr = csv.writer(fh)
        wr.writerow(columns)
        for row in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_csv(path):
    """Inverse of :func:`write_csv`: ``(metadata, columns, rows)`` with rows as strings."""
    meta_lines, body = [], []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("# "):
                meta_lines.append(line[2:])
            else:
                body.append(line)
    rows = list(csv.reader(body))
    return json.loads("".join(meta_lines)) if meta_lines else {}, rows[0], rows[1:]
