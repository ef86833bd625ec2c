"""Portable graymap/pixmap IO and area-averaging resize."""
from __future__ import annotations

import logging
import re
from pathlib import Path

import numpy as np

from .datasets import Dataset

log = logging.getLogger(__name__)

EXTENSIONS = (".pgm", ".ppm", ".pnm")
_TOKEN = re.compile(rb"(?:#[^\n]*\n|\s)*([^\s#]+)")


class ImageFormatError(ValueError):
    pass


def read_pnm(path) -> np.ndarray:
    """Decode P2/P3/P5/P6 into an (H, W, C) float array scaled to [0, 1]."""
    raw = Path(path).read_bytes()
    pos = 0
    fields = []
    while len(fields) < 4:
        m = _TOKEN.match(raw, pos)
        if m is None:
            raise ImageFormatError(f"{path}: truncated header")
        fields.append(m.group(1))
        pos = m.end()
    magic = fields[0].decode(errors="replace")
    if magic not in ("P2", "P3", "P5", "P6"):
        raise ImageFormatError(f"{path}: unsupported magic {magic!r}")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise ImageFormatError(f"{path}: malformed header") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ImageFormatError(f"{path}: bad dimensions or maxval")
    channels = 3 if magic in ("P3", "P6") else 1
    count = width * height * channels
    if magic in ("P2", "P3"):
        values = np.array(raw[pos:].split()[:count], dtype=np.int64)
    else:
        body = raw[pos + 1:]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        values = np.frombuffer(body, dtype=dtype, count=count) if len(body) >= count * dtype.itemsize else np.array([])
    if values.size != count:
        raise ImageFormatError(f"{path}: expected {count} samples, found {values.size}")
    if values.max(initial=0) > maxval:
        raise ImageFormatError(f"{path}: sample exceeds maxval")
    return values.reshape(height, width, channels).astype(np.float64) / maxval


def write_pnm(path, image) -> None:
    """Write a [-1, 1] image of shape (H, W), (1, H, W) or (3, H, W) as binary P5/P6."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        img = np.moveaxis(img, 0, -1)
    if img.ndim == 2:
        img = img[..., None]
    if img.shape[-1] not in (1, 3):
        raise ValueError(f"cannot write an image with {img.shape[-1]} channels")
    q = np.clip(np.rint((img + 1.0) * 127.5), 0, 255).astype(np.uint8)
    magic = b"P5" if q.shape[-1] == 1 else b"P6"
    header = magic + b"\n%d %d\n255\n" % (q.shape[1], q.shape[0])
    Path(path).write_bytes(header + q.tobytes())


def save_grid(path, images, ncols: int = 8, pad: int = 1) -> None:
    """Tile (N, C, H, W) or (N, H, W) images in [-1, 1] into one pixmap."""
    imgs = np.asarray(images, dtype=np.float64)
    if imgs.ndim == 3:
        imgs = imgs[:, None]
    n, c, h, w = imgs.shape
    ncols = max(1, min(ncols, n))
    nrows = -(-n // ncols)
    grid = -np.ones((c, nrows * (h + pad) + pad, ncols * (w + pad) + pad))
    for k in range(n):
        r, col = divmod(k, ncols)
        y, x = pad + r * (h + pad), pad + col * (w + pad)
        grid[:, y:y + h, x:x + w] = imgs[k]
    write_pnm(path, grid)


def _area_matrix(src: int, dst: int) -> np.ndarray:
    """(dst, src) weights: each output cell averages the source cells it overlaps."""
    edges = np.arange(dst + 1) * (src / dst)
    M = np.zeros((dst, src))
    for j in range(dst):
        a, b = edges[j], edges[j + 1]
        for i in range(int(np.floor(a)), min(src, int(np.ceil(b)))):
            M[j, i] = max(0.0, min(b, i + 1) - max(a, i))
    return M / M.sum(axis=1, keepdims=True)


def resize_area(img: np.ndarray, size) -> np.ndarray:
    """Area-averaging resize of an (H, W, C) array."""
    th, tw = (size, size) if np.isscalar(size) else size
    h, w, _ = img.shape
    if (h, w) == (th, tw):
        return img
    rows, cols = _area_matrix(h, th), _area_matrix(w, tw)
    return np.einsum("ih,hwc,jw->ijc", rows, img, cols)


def load_image_folder(path, target_size) -> Dataset:
    """Load every .pgm/.ppm/.pnm in ``path`` into a [-1, 1] dataset of shape (C, H, W).

    Unreadable files are skipped with a warning; ``dataset.skipped`` counts
    them.  Grayscale images are promoted to RGB when the folder mixes both.
    """
    folder = Path(path)
    files = sorted(p for p in folder.iterdir() if p.suffix.lower() in EXTENSIONS) if folder.is_dir() else []
    if not files:
        raise ValueError(f"no portable graymap/pixmap images found in {folder}")
    images, names, skipped = [], [], 0
    for f in files:
        try:
            images.append(resize_area(read_pnm(f), target_size))
            names.append(str(f))
        except (ImageFormatError, OSError) as exc:
            log.warning("skipping unreadable image %s: %s", f, exc)
            skipped += 1
    if not images:
        raise ValueError(f"none of the {len(files)} images in {folder} could be read")
    channels = max(im.shape[-1] for im in images)
    images = [np.repeat(im, channels, axis=-1) if im.shape[-1] != channels else im for im in images]
    arr = np.stack([np.moveaxis(im, -1, 0) for im in images]) * 2.0 - 1.0
    return Dataset(np.clip(arr, -1.0, 1.0), f"folder:{folder}", paths=names, skipped=skipped)
