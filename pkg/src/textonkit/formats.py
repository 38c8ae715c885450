"""Serialization: texton documents, images, and tensor dumps.

The texton document is canonical UTF-8 JSON: fixed key order, two-space
indent, trailing newline, shortest round-trip float repr.  Saving a loaded
document reproduces it byte for byte.  Loading validates the set and rejects
documents with invariant violations.

Images are 8-bit RGB, exchanged as binary PPM (P6) or PNG; pixel values map
to [0, 1] floats.  Dense tensors use a little-endian container: magic
"TXG1", u32 rank, u32 dims, float32 payload in C order.
"""

from __future__ import annotations

import io
import json
import math
import struct

import numpy as np
from PIL import Image

from .model import GaussianSet, ImageFrame, TextonGaussian, validate_set

FORMAT_VERSION = 1
TENSOR_MAGIC = b"TXG1"


def _f(x) -> float:
    return float(x)


def gaussian_record(g: TextonGaussian) -> dict:
    return {
        "delta": _f(g.weight),
        "prob": _f(g.prob),
        "mean": [_f(g.mean[0]), _f(g.mean[1])],
        "cov": [
            [_f(g.cov[0, 0]), _f(g.cov[0, 1])],
            [_f(g.cov[1, 0]), _f(g.cov[1, 1])],
        ],
        "dir": [_f(g.direction[0]), _f(g.direction[1])],
        "feat": [_f(v) for v in g.feature],
        "area": None if math.isnan(g.mask_area) else _f(g.mask_area),
    }


def _record_to_gaussian(rec: dict, index: int) -> TextonGaussian:
    try:
        cov = rec["cov"]
        if cov[0][1] != cov[1][0]:
            raise ValueError(f"cov not symmetric in gaussian {index}")
        area = rec["area"]
        return TextonGaussian(
            weight=float(rec["delta"]),
            prob=float(rec["prob"]),
            mean=np.array(rec["mean"], dtype=np.float64),
            cov=np.array(cov, dtype=np.float64),
            direction=np.array(rec["dir"], dtype=np.float64),
            feature=np.array(rec["feat"], dtype=np.float64),
            mask_area=math.nan if area is None else float(area),
        )
    except KeyError as e:
        raise ValueError(f"missing field {e.args[0]!r} in gaussian {index}") from None


def set_to_document(s: GaussianSet) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "frame": {"width": s.frame.width, "height": s.frame.height},
        "n_f": s.feature_dim,
        "capacity": s.capacity,
        "gaussians": [gaussian_record(g) for g in s],
    }


def document_to_set(doc: dict) -> GaussianSet:
    try:
        version = doc["format_version"]
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported format_version {version}")
        frame = ImageFrame(width=int(doc["frame"]["width"]), height=int(doc["frame"]["height"]))
        nf = int(doc["n_f"])
        cap = int(doc.get("capacity", max(len(doc["gaussians"]), 1)))
        gaussians = tuple(
            _record_to_gaussian(rec, i) for i, rec in enumerate(doc["gaussians"])
        )
    except KeyError as e:
        raise ValueError(f"missing field {e.args[0]!r}") from None
    s = GaussianSet(frame=frame, gaussians=gaussians, feature_dim=nf, capacity=cap)
    violations = validate_set(s)
    if violations:
        raise ValueError("invalid document: " + "; ".join(violations))
    return s


def dumps_set(s: GaussianSet) -> str:
    return json.dumps(set_to_document(s), indent=2) + "\n"


def loads_set(text: str) -> GaussianSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(f"parse error at line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ValueError("parse error: document must be a JSON object")
    return document_to_set(doc)


def save_set(s: GaussianSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_set(s))


def load_set(path) -> GaussianSet:
    with open(path, encoding="utf-8") as fh:
        return loads_set(fh.read())


def _quantize(rgb: np.ndarray) -> np.ndarray:
    v = np.clip(np.asarray(rgb, dtype=np.float64), 0.0, 1.0)
    return np.rint(v * 255.0).astype(np.uint8)


def _read_ppm(data: bytes) -> np.ndarray:
    pos = 2  # past magic
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise ValueError("unexpected end of stream")
        ch = data[pos : pos + 1]
        if ch == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    need = w * h * 3
    raw = data[pos : pos + need]
    if len(raw) < need:
        raise ValueError("unexpected end of stream")
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3)
    return arr.astype(np.float64) / 255.0


def encode_ppm(rgb: np.ndarray) -> bytes:
    q = _quantize(rgb)
    h, w = q.shape[:2]
    return b"P6\n%d %d\n255\n" % (w, h) + q.tobytes()


def encode_png(rgb: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(_quantize(rgb), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def read_image(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic == b"P6":
        return _read_ppm(data)
    if magic == b"\x89P":
        img = Image.open(io.BytesIO(data)).convert("RGB")
        return np.asarray(img, dtype=np.float64) / 255.0
    raise ValueError(f"unsupported format: magic {magic!r}")


def write_image(path, rgb: np.ndarray) -> None:
    path = str(path)
    if path.endswith(".ppm"):
        payload = encode_ppm(rgb)
    elif path.endswith(".png"):
        payload = encode_png(rgb)
    else:
        raise ValueError(f"unsupported image extension for {path!r}")
    with open(path, "wb") as fh:
        fh.write(payload)


def save_tensor(path, arr: np.ndarray) -> None:
    a = np.ascontiguousarray(arr, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sI", TENSOR_MAGIC, a.ndim))
        fh.write(struct.pack(f"<{a.ndim}I", *a.shape))
        fh.write(a.tobytes(order="C"))


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != TENSOR_MAGIC:
        raise ValueError(f"unsupported format: magic {data[:4]!r}")
    if len(data) < 8:
        raise ValueError("unexpected end of stream")
    (ndim,) = struct.unpack_from("<I", data, 4)
    dims = struct.unpack_from(f"<{ndim}I", data, 8)
    off = 8 + 4 * ndim
    count = int(np.prod(dims)) if ndim else 1
    need = count * 4
    if len(data) - off < need:
        raise ValueError("unexpected end of stream")
    arr = np.frombuffer(data, dtype="<f4", count=count, offset=off)
    return arr.reshape(dims).astype(np.float64)
