"""Deterministic file output: CSV with commented headers, SVG, PGM, manifests.

CSV files carry a '#'-prefixed header block (key/value lines, a config
hash, then the column list), which keeps them greppable and
diff-friendly; identical configurations produce byte-identical files.
SVG output draws polylines and cell rasters only, so plots can be
regenerated from the CSVs with any tool.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from pathlib import Path

import numpy as np

__version__ = "0.1.0"


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"),
                      default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, columns, rows, header: dict | None = None) -> Path:
    """Write rows with a commented header block; returns the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for key, val in (header or {}).items():
        lines.append(f"# {key}: {val}")
    lines.append("# columns: " + ",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Read back a commented-header CSV: (header dict, columns, ndarray)."""
    header, columns, data = {}, [], []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body:
                key, val = body.split(":", 1)
                if key.strip() == "columns":
                    columns = [c.strip() for c in val.split(",")]
                else:
                    header[key.strip()] = val.strip()
            continue
        if line.strip():
            row = []
            for x in line.split(","):
                try:
                    row.append(float(x))
                except ValueError:
                    row.append(math.nan)  # non-numeric column (labels)
            data.append(row)
    return header, columns, np.asarray(data)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def write_manifest(out_dir, command: str, config: dict, outputs,
                   wall_clock: float) -> Path:
    """Run manifest: config echo, tool version, timing, output checksums."""
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "version": __version__,
        "config": config,
        "config_hash": config_hash(config),
        "deterministic": "seedless; identical config yields byte-identical CSVs",
        "wall_clock_sec": round(wall_clock, 3),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "outputs": {Path(p).name: sha256_file(p) for p in outputs},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def write_pgm(path, matrix, maxval: int = 2) -> Path:
    """Plain-text PGM raster of small integer codes (top row first)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    m = np.asarray(matrix)
    lines = ["P2", f"{m.shape[1]} {m.shape[0]}", str(maxval)]
    for row in m[::-1]:
        lines.append(" ".join(str(int(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


class SvgCanvas:
    """Minimal SVG writer: polylines, circles and cell rasters.

    Data coordinates are mapped to a fixed pixel viewport; y increases
    upward in data space.
    """

    def __init__(self, x_range, y_range, width: int = 640, height: int = 480,
                 margin: int = 40):
        self.x0, self.x1 = map(float, x_range)
        self.y0, self.y1 = map(float, y_range)
        self.w, self.h, self.m = width, height, margin
        self.elements: list[str] = []

    def _px(self, x, y):
        sx = (x - self.x0) / (self.x1 - self.x0)
        sy = (y - self.y0) / (self.y1 - self.y0)
        return (self.m + sx * (self.w - 2 * self.m),
                self.h - self.m - sy * (self.h - 2 * self.m))

    def polyline(self, xs, ys, stroke: str = "black", width: float = 1.0):
        pts = " ".join("%.2f,%.2f" % self._px(x, y) for x, y in zip(xs, ys))
        self.elements.append(
            f'<polyline points="{pts}" fill="none" stroke="{stroke}" '
            f'stroke-width="{width}"/>')

    def circle(self, x, y, r_px: float = 3.0, fill: str = "black"):
        cx, cy = self._px(x, y)
        self.elements.append(
            f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{r_px}" fill="{fill}"/>')

    def raster(self, xs, ys, codes, palette):
        """One rect per cell; ``palette`` maps code -> fill color."""
        dx = (xs[1] - xs[0]) if len(xs) > 1 else 1.0
        dy = (ys[1] - ys[0]) if len(ys) > 1 else 1.0
        for iy, y in enumerate(ys):
            for ix, x in enumerate(xs):
                code = int(codes[iy, ix])
                px, py = self._px(x - 0.5 * dx, y + 0.5 * dy)
                px2, py2 = self._px(x + 0.5 * dx, y - 0.5 * dy)
                self.elements.append(
                    f'<rect x="{px:.2f}" y="{py:.2f}" width="{px2 - px:.2f}" '
                    f'height="{py2 - py:.2f}" fill="{palette.get(code, "#999")}"/>')

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        body = "\n".join(self.elements)
        path.write_text(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" '
            f'height="{self.h}" viewBox="0 0 {self.w} {self.h}">\n'
            f'<rect width="{self.w}" height="{self.h}" fill="white"/>\n'
            f"{body}\n</svg>\n")
        return path


def output_root(flag_value=None) -> Path:
    """Output directory: flag wins, else GALLOP_OUT_ROOT, else cwd."""
    if flag_value:
        return Path(flag_value)
    env = os.environ.get("GALLOP_OUT_ROOT")
    return Path(env) if env else Path(".")
