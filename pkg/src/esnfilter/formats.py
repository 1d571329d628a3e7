"""File formats: model files, signal CSV, PGM frames and key=value text.

Model file (JSON)::

    {"format_version": 1,
     "checksum": "<16 hex digits>",
     "payload": {"config": {...}, "lambda": ..., "training_nrmse": ...,
                 "matrices": {"w_self": {"rows": n, "cols": n, "data": [...]},
                              ...}}}

Matrix data is row-major; floats are written with Python's shortest
round-trip repr, so loading reproduces every entry bit for bit. The checksum
is BLAKE2b-64 over the payload serialised with sorted keys and no whitespace.

Signal CSV: optional ``# frame_shape=LxW`` comment, a ``t,v0,v1,...`` header,
then one row per time step.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io as _io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

import numpy as np

from .metrics import RecoveryReport
from .readout import TrainedModel
from .reservoir import ReservoirConfig, WeightSet
from .signals import SignalSeries

__all__ = [
    "FORMAT_VERSION",
    "ModelFileError",
    "ModelVersionError",
    "ChecksumError",
    "ModelShapeError",
    "SignalFileError",
    "PGMError",
    "atomic_write",
    "save_model",
    "load_model",
    "write_signal_csv",
    "read_signal_csv",
    "to_byte",
    "from_byte",
    "write_frame_pgm",
    "read_frame_pgm",
    "write_triptychs",
    "format_kv",
    "parse_kv",
    "write_report_csv",
    "read_report_csv",
]

PathLike = Union[str, os.PathLike]
FORMAT_VERSION = 1
_MATRICES = ("w_self", "w_in", "w_fb", "w_out")


class ModelFileError(ValueError):
    """Unreadable or inconsistent model file."""


class ModelVersionError(ModelFileError):
    pass


class ChecksumError(ModelFileError):
    pass


class ModelShapeError(ModelFileError):
    pass


class SignalFileError(ValueError):
    pass


class PGMError(ValueError):
    pass


def atomic_write(path: PathLike, data: Union[str, bytes]) -> None:
    """Write ``data`` to a temporary file beside ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


# -- models -----------------------------------------------------------------


def _canonical(payload) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def _checksum(payload) -> str:
    return hashlib.blake2b(_canonical(payload), digest_size=8).hexdigest()


def _matrix_payload(m: np.ndarray) -> dict:
    return {"rows": m.shape[0], "cols": m.shape[1], "data": [float(v) for v in m.ravel()]}


def model_to_json(model: TrainedModel) -> str:
    payload = {
        "config": dataclasses.asdict(model.config),
        "lambda": float(model.lam),
        "training_nrmse": float(model.training_nrmse),
        "matrices": {k: _matrix_payload(getattr(model.weights, k)) for k in _MATRICES},
    }
    doc = {"format_version": FORMAT_VERSION, "checksum": _checksum(payload), "payload": payload}
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def save_model(model: TrainedModel, path: PathLike) -> None:
    atomic_write(path, model_to_json(model))


def model_from_json(text: str) -> TrainedModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise ModelFileError("model file has no format_version")
    version = doc["format_version"]
    if version != FORMAT_VERSION:
        raise ModelVersionError(
            f"unsupported model format_version {version!r} (this build reads {FORMAT_VERSION})"
        )
    payload = doc.get("payload")
    if payload is None or "checksum" not in doc:
        raise ModelFileError("model file lacks payload or checksum")
    if _checksum(payload) != doc["checksum"]:
        raise ChecksumError("model payload does not match its checksum")
    try:
        config = ReservoirConfig(**payload["config"])
        mats = {}
        for key in _MATRICES:
            entry = payload["matrices"][key]
            rows, cols, data = entry["rows"], entry["cols"], entry["data"]
            if len(data) != rows * cols:
                raise ModelShapeError(
                    f"{key}: {len(data)} values for declared {rows}x{cols}"
                )
            mats[key] = np.array(data, dtype=np.float64).reshape(rows, cols)
        lam = float(payload["lambda"])
        fit = float(payload["training_nrmse"])
    except (KeyError, TypeError) as exc:
        raise ModelFileError(f"model payload is missing or malformed: {exc}") from exc
    expected = {
        "w_self": (config.n, config.n),
        "w_in": (config.n, config.in_dim),
        "w_fb": (config.n, config.out_dim),
        "w_out": (config.out_dim, config.n),
    }
    for key, shape in expected.items():
        if mats[key].shape != shape:
            raise ModelShapeError(
                f"{key} is {mats[key].shape[0]}x{mats[key].shape[1]}, config implies "
                f"{shape[0]}x{shape[1]}"
            )
    return TrainedModel(config, WeightSet(**mats), lam, fit)


def load_model(path: PathLike) -> TrainedModel:
    return model_from_json(Path(path).read_text())


# -- signals ----------------------------------------------------------------


def write_signal_csv(series: SignalSeries, path: PathLike) -> None:
    buf = _io.StringIO()
    if series.frame_shape is not None:
        buf.write(f"# frame_shape={series.frame_shape[0]}x{series.frame_shape[1]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"v{i}" for i in range(series.dim)])
    for t, row in enumerate(series.data):
        w.writerow([t] + [repr(float(v)) for v in row])
    atomic_write(path, buf.getvalue())


def parse_frame_shape(text: str) -> tuple[int, int]:
    try:
        L, W = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"frame shape must look like LxW, got {text!r}") from None
    if L < 1 or W < 1:
        raise ValueError(f"frame shape must be positive, got {text!r}")
    return L, W


def read_signal_csv(path: PathLike) -> SignalSeries:
    frame_shape = None
    header = None
    rows = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key.strip() == "frame_shape":
                    try:
                        frame_shape = parse_frame_shape(value.strip())
                    except ValueError as exc:
                        raise SignalFileError(f"{path}:{lineno}: {exc}") from None
                continue
            cells = next(csv.reader([line]))
            if header is None:
                if not cells or cells[0].strip() != "t":
                    raise SignalFileError(
                        f"{path}:{lineno}: missing header row 't,v0,v1,...'"
                    )
                header = cells
                if len(header) < 2:
                    raise SignalFileError(f"{path}:{lineno}: header names no value columns")
                continue
            if len(cells) != len(header):
                raise SignalFileError(
                    f"{path}:{lineno}: ragged row with {len(cells)} cells, "
                    f"header has {len(header)}"
                )
            try:
                rows.append([float(c) for c in cells[1:]])
            except ValueError:
                raise SignalFileError(f"{path}:{lineno}: non-numeric cell") from None
    if header is None:
        raise SignalFileError(f"{path}: missing header row 't,v0,v1,...' (file is empty)")
    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 1)
    if not np.all(np.isfinite(data)):
        raise SignalFileError(f"{path}: non-finite values")
    try:
        return SignalSeries(data, frame_shape)
    except ValueError as exc:
        raise SignalFileError(f"{path}: {exc}") from None


# -- PGM frames --------------------------------------------------------------


def to_byte(v) -> np.ndarray:
    """Map [-1, 1] to 0..255 with round-half-up; values outside are clamped."""
    v = np.clip(np.asarray(v, dtype=np.float64), -1.0, 1.0)
    return np.floor((v + 1.0) * 127.5 + 0.5).astype(np.uint8)


def from_byte(b) -> np.ndarray:
    return np.asarray(b, dtype=np.float64) / 127.5 - 1.0


def write_frame_pgm(frame, path: PathLike) -> None:
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2:
        raise PGMError(f"frame must be 2-D, got shape {frame.shape}")
    L, W = frame.shape
    atomic_write(path, b"P5\n%d %d\n255\n" % (W, L) + to_byte(frame).tobytes())


def _pgm_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PGMError("truncated PGM header")
        tok = data[start:pos]
        if not tok.isdigit():
            raise PGMError(f"malformed PGM header token {tok!r}")
        tokens.append(int(tok))
    return tokens, pos + 1


def read_frame_pgm(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise PGMError(f"{path}: not a binary PGM (magic {data[:2]!r})")
    (W, L, maxval), start = _pgm_tokens(data[2:], 3)
    if maxval != 255:
        raise PGMError(f"{path}: unsupported maxval {maxval}")
    pixels = data[2 + start : 2 + start + W * L]
    if len(pixels) != W * L:
        raise PGMError(f"{path}: expected {W * L} pixels, found {len(pixels)}")
    return from_byte(np.frombuffer(pixels, dtype=np.uint8).reshape(L, W))


def write_triptychs(
    out_dir: Path,
    seed: int,
    clean: SignalSeries,
    distorted: SignalSeries,
    filtered: SignalSeries,
    start: int = 0,
    count: int = 4,
) -> list[Path]:
    """Write clean/distorted/filtered PGMs for ``count`` evenly spaced test frames."""
    T = len(clean)
    if T <= start or count < 1:
        return []
    picks = np.unique(np.linspace(start, T - 1, count).round().astype(int))
    written = []
    for t in picks:
        for label, series in (("clean", clean), ("distorted", distorted), ("filtered", filtered)):
            p = Path(out_dir) / f"seed{seed}_frame{t:04d}_{label}.pgm"
            write_frame_pgm(series.data[t].reshape(clean.frame_shape), p)
            written.append(p)
    return written


# -- key=value text ----------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    if v is None:
        return ""
    return str(v)


def format_kv(items: Mapping) -> str:
    return "".join(f"{k}={_fmt(v)}\n" for k, v in items.items())


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"{source}:{lineno}: expected key=value, got {line!r}")
        out[key.strip()] = value.strip()
    return out


_REPORT_FIELDS = [f.name for f in dataclasses.fields(RecoveryReport)]


def report_row(report: RecoveryReport) -> dict:
    return {k: _fmt(getattr(report, k)) for k in _REPORT_FIELDS}


def report_csv_text(reports: Iterable[RecoveryReport]) -> str:
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=_REPORT_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(report_row(r))
    return buf.getvalue()


def write_report_csv(reports: Iterable[RecoveryReport], path: PathLike) -> None:
    atomic_write(path, report_csv_text(reports))


def read_report_csv(path: PathLike) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
