"""File formats: grayscale PFM rasters, 8-bit PNG images and sample CSVs.

PFM is the lossless container for unclamped float images. Only the
grayscale ``Pf`` variant is supported. Files are written little-endian
(negative scale) with rows stored bottom to top, as the format requires.
"""

from __future__ import annotations

import csv
import re

import numpy as np
from PIL import Image

_PFM_HEADER = re.compile(rb"\A(Pf|PF)\s+(\d+)\s+(\d+)\s+(\S+)\s")


def write_pfm(path, img) -> None:
    a = np.asarray(img, dtype="<f4")
    if a.ndim != 2:
        raise ValueError("PFM output needs a 2-D image")
    h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(a[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a grayscale PFM into a float32 array with the top row first."""
    with open(path, "rb") as fh:
        data = fh.read()
    m = _PFM_HEADER.match(data)
    if m is None:
        raise ValueError(f"{path}: not a PFM file")
    if m.group(1) != b"Pf":
        raise ValueError(f"{path}: colour PFM is not supported")
    w, h = int(m.group(2)), int(m.group(3))
    scale = float(m.group(4))
    if scale == 0 or w < 1 or h < 1:
        raise ValueError(f"{path}: bad PFM header")
    dtype = "<f4" if scale < 0 else ">f4"
    body = data[m.end():]
    if len(body) != 4 * w * h:
        raise ValueError(f"{path}: expected {w * h} samples, found {len(body) // 4}")
    a = np.frombuffer(body, dtype=dtype).reshape(h, w)[::-1]
    return a.astype(np.float32)


def read_png(path) -> np.ndarray:
    """Read an 8-bit grayscale PNG as floats 0..255."""
    with Image.open(path) as im:
        if im.mode != "L":
            raise ValueError(f"{path}: expected 8-bit grayscale, got mode {im.mode}")
        return np.asarray(im, dtype=np.float64)


def to_preview(img) -> np.ndarray:
    """Round half away from zero, then clamp to 0..255."""
    a = np.asarray(img, dtype=float)
    r = np.sign(a) * np.floor(np.abs(a) + 0.5)
    return np.clip(r, 0, 255).astype(np.uint8)


def write_png(path, img) -> None:
    Image.fromarray(to_preview(img), mode="L").save(path)


def read_image(path) -> np.ndarray:
    """PFM or PNG by file extension, as float64."""
    p = str(path).lower()
    if p.endswith(".pfm"):
        return read_pfm(path).astype(np.float64)
    if p.endswith(".png"):
        return read_png(path)
    raise ValueError(f"{path}: unsupported image type (use .png or .pfm)")


def read_samples_csv(path):
    """Values and optional weights from a CSV with header ``value[,weight]``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    if header not in (["value"], ["value", "weight"]):
        raise ValueError(f"{path}: header must be 'value' or 'value,weight'")
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    if not body:
        raise ValueError(f"{path}: no samples")
    try:
        table = np.array([[float(c) for c in r] for r in body])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if table.ndim != 2 or table.shape[1] != len(header):
        raise ValueError(f"{path}: every row needs {len(header)} column(s)")
    values = table[:, 0]
    weights = table[:, 1] if len(header) == 2 else None
    return values, weights
