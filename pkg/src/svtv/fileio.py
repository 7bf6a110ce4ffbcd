"""File formats used by the command line: PGM images, map files, configs, sidecars.

PGM files carry an optional ``# range LO HI`` comment giving the intensities
of grey levels 0 and maxval, so data outside [0, 1] survives a round trip
(up to quantization). Map blobs are little-endian float64 behind a 16-byte
header: 8 magic bytes, then the two dimensions as uint32.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError

MAP_MAGIC = b"SVTVMAP\x00"
_RANGE_RE = re.compile(r"^range\s+(\S+)\s+(\S+)$")


# ---------------------------------------------------------------------------
# PGM


def write_pgm(path, image, bits: int = 16, comments=(), value_range=None) -> None:
    """Write a binary (P5) PGM.

    ``value_range`` defaults to the smallest interval containing [0, 1] and
    the data, so nothing is clipped; values are rounded to the nearest level.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM images must be 2-D")
    if not np.all(np.isfinite(img)):
        raise ValueError("cannot write non-finite pixels")
    if bits not in (8, 16):
        raise ConfigError(f"PGM depth must be 8 or 16 bits, got {bits}")
    if value_range is None:
        lo, hi = min(0.0, float(img.min())), max(1.0, float(img.max()))
    else:
        lo, hi = map(float, value_range)
    maxval = 255 if bits == 8 else 65535
    levels = np.clip(np.rint((img - lo) / (hi - lo) * maxval), 0, maxval)
    dtype = ">u1" if bits == 8 else ">u2"
    header = ["P5"] + [f"# {c}" for c in comments]
    if (lo, hi) != (0.0, 1.0):
        header.append(f"# range {lo!r} {hi!r}")
    header.append(f"{img.shape[1]} {img.shape[0]}")
    header.append(str(maxval))
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(levels.astype(dtype).tobytes())


def _pgm_tokens(data: bytes):
    # yields (token, end offset) for the header, collecting comments on the way
    pos, comments, tokens = 0, [], []
    while len(tokens) < 4:
        if pos >= len(data):
            raise ValueError("truncated PGM header")
        c = data[pos:pos + 1]
        if c == b"#":
            end = data.find(b"\n", pos)
            end = len(data) if end < 0 else end
            comments.append(data[pos + 1:end].decode("ascii", "replace").strip())
            pos = end + 1
        elif c.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
                pos += 1
            tokens.append(data[start:pos].decode("ascii"))
    return tokens, comments, pos


def read_pgm(path):
    """Read a P5 or P2 PGM. Returns ``(image, comments)``."""
    data = Path(path).read_bytes()
    tokens, comments, pos = _pgm_tokens(data)
    magic, width, height, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic not in ("P5", "P2"):
        raise ValueError(f"{path}: not a greyscale PGM (magic {magic!r})")
    if not 0 < maxval < 65536:
        raise ValueError(f"{path}: bad maxval {maxval}")
    n = width * height
    if magic == "P5":
        pos += 1  # single whitespace after maxval
        dtype = ">u1" if maxval < 256 else ">u2"
        raw = np.frombuffer(data, dtype=dtype, count=n, offset=pos)
    else:
        raw = np.array(data[pos:].split()[:n], dtype=np.int64)
        if raw.size != n:
            raise ValueError(f"{path}: truncated pixel data")
    levels = raw.astype(np.float64).reshape(height, width)
    lo, hi = 0.0, 1.0
    for c in comments:
        m = _RANGE_RE.match(c)
        if m:
            lo, hi = float(m.group(1)), float(m.group(2))
    return lo + levels / maxval * (hi - lo), comments


# ---------------------------------------------------------------------------
# maps


def write_map_blob(path, array) -> None:
    arr = np.ascontiguousarray(array, dtype="<f8")
    if arr.ndim != 2:
        raise ValueError("map blobs hold 2-D arrays")
    with open(path, "wb") as fh:
        fh.write(MAP_MAGIC + struct.pack("<II", *arr.shape))
        fh.write(arr.tobytes())


def read_map_blob(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != MAP_MAGIC:
        raise ValueError(f"{path}: not a map blob")
    n1, n2 = struct.unpack("<II", data[8:16])
    if len(data) != 16 + 8 * n1 * n2:
        raise ValueError(f"{path}: size does not match header {n1}x{n2}")
    return np.frombuffer(data, dtype="<f8", offset=16).reshape(n1, n2).astype(np.float64)


def write_maps_csv(path, maps: dict, header_lines=()) -> None:
    """One row per pixel: ``row, col`` and one column per map, full precision."""
    names = list(maps)
    arrays = [np.asarray(maps[k], dtype=np.float64) for k in names]
    shape = arrays[0].shape
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["row", "col"] + names)
        for i in range(shape[0]):
            for j in range(shape[1]):
                w.writerow([i, j] + [repr(float(a[i, j])) for a in arrays])


def read_maps_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    head, body = rows[0], rows[1:]
    idx = np.array([[int(r[0]), int(r[1])] for r in body])
    shape = (idx[:, 0].max() + 1, idx[:, 1].max() + 1)
    out = {}
    for k, name in enumerate(head[2:], start=2):
        arr = np.empty(shape)
        arr[idx[:, 0], idx[:, 1]] = [float(r[k]) for r in body]
        out[name] = arr
    return out


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class Key:
    kind: type
    default: object
    help: str = ""


def _shape_value(text):
    return math.inf if str(text).strip().lower() in ("inf", "infinity") else float(text)


CONFIG_KEYS: dict[str, Key] = {
    "model": Key(str, "WTV", "regularizer: TV, TVp, WTV, WTVpSV or WDTVpSV"),
    "seed": Key(int, 0, "noise seed"),
    "noise.q": Key(_shape_value, 2.0, "noise shape q (1, 2, ..., inf)"),
    "noise.sigma": Key(float, None, "noise standard deviation"),
    "noise.omega": Key(float, None, "noise scale; alternative to sigma"),
    "noise.tau": Key(float, 1.0, "discrepancy multiplier"),
    "blur.band": Key(int, 5, "kernel side length"),
    "blur.sigma": Key(float, 1.0, "kernel standard deviation"),
    "blur.boundary": Key(str, "periodic", "periodic or replicate"),
    "gradient.boundary": Key(str, "neumann", "neumann or periodic"),
    "estimation.radius": Key(int, 1, "window radius r"),
    "estimation.eps_reg": Key(float, None, "added to window mean powers (1e-6 for estimate, 1e-2 for restore)"),
    "estimation.p_min": Key(float, 0.5, "lower end of the shape range"),
    "estimation.p_max": Key(float, 2.0, "upper end of the shape range"),
    "estimation.a_floor": Key(float, 1e-2, "smallest anisotropy"),
    "estimation.grid_p": Key(int, 64, "shape grid size"),
    "estimation.grid_theta": Key(int, 90, "orientation grid size"),
    "estimation.grid_a": Key(int, 32, "anisotropy grid size"),
    "admm.beta_g": Key(float, None, "gradient penalty parameter"),
    "admm.beta_r": Key(float, None, "fidelity penalty parameter"),
    "admm.tol": Key(float, 1e-5, "relative change stop"),
    "admm.max_iters": Key(int, 500, "iteration cap"),
    "admm.refresh": Key(_shape_value, None, "iterations between map updates (0 = once)"),
    "admm.init": Key(str, "observed", "observed, flat, or a PGM path"),
    "admm.prox_grid": Key(int, 513, "grid size of the anisotropic prox for p < 1"),
    "prox.alpha": Key(float, 1.0, "prox-field alpha"),
    "prox.p": Key(float, 1.0, "prox-field p"),
    "prox.theta": Key(float, 0.0, "prox-field theta"),
    "prox.a": Key(float, 1.0, "prox-field a"),
    "prox.beta": Key(float, 3.0, "prox-field beta"),
    "prox.grid": Key(int, 21, "prox-field points per axis"),
    "prox.extent": Key(float, 1.0, "prox-field half width"),
    "io.bits": Key(int, 16, "PGM depth of written images"),
    "io.truth": Key(str, None, "ground truth PGM for scores"),
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    source: str = ""

    def __getitem__(self, key):
        if key not in CONFIG_KEYS:
            raise KeyError(key)
        return self.values.get(key, CONFIG_KEYS[key].default)

    def set(self, key, value) -> None:
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            self.values[key] = CONFIG_KEYS[key].kind(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc

    def canonical(self) -> str:
        return "\n".join(f"{k} = {self[k]!r}" for k in sorted(CONFIG_KEYS))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    cfg = RunConfig(source=source)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        cfg.set(key, value)
    return cfg


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    return parse_config(Path(path).read_text(), str(path))


# ---------------------------------------------------------------------------
# sidecars and provenance


def sidecar_path(image_path) -> Path:
    return Path(str(image_path) + ".json")


def write_sidecar(image_path, record: dict) -> None:
    sidecar_path(image_path).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def read_sidecar(image_path):
    p = sidecar_path(image_path)
    if not p.exists():
        return None
    return json.loads(p.read_text())


def provenance(cfg: RunConfig, seed, command: str) -> list[str]:
    return [f"svtv {command}", f"config-hash {cfg.digest()}", f"seed {seed}"]
