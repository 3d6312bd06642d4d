"""Loading and validation of images, depth maps and intrinsics.

Pixel convention used throughout the package: pixel ``(col, row)`` covers the
square ``[col, col + 1) x [row, row + 1)`` and is sampled at its center
``(col + 0.5, row + 0.5)``. Intrinsics ``cx, cy`` live in the same continuous
coordinates, so normalized camera coordinates of a pixel center are
``u = (col + 0.5 - cx) / fx`` and ``v = (row + 0.5 - cy) / fy``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import InputError

DEFAULT_DEPTH_SCALE = 0.001
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InputError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        for name in ("fx", "fy", "cx", "cy"):
            if not np.isfinite(getattr(self, name)):
                raise InputError(f"intrinsic {name} is not finite")

    def normalize(self, x, y):
        """Map continuous pixel coordinates to normalized camera coordinates."""
        return (np.asarray(x, dtype=float) - self.cx) / self.fx, (np.asarray(y, dtype=float) - self.cy) / self.fy

    def pixel_grid(self, width: int, height: int):
        """Normalized ``(u, v)`` of every pixel center, each shaped ``(height, width)``."""
        xs = np.arange(width, dtype=float) + 0.5
        ys = np.arange(height, dtype=float) + 0.5
        u, v = self.normalize(xs, ys)
        return np.broadcast_to(u[None, :], (height, width)), np.broadcast_to(v[:, None], (height, width))

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}

    @classmethod
    def centered(cls, width: int, height: int, focal: float) -> "Intrinsics":
        return cls(float(focal), float(focal), width / 2.0, height / 2.0)


@dataclass(frozen=True)
class Image2D:
    """Raster of intensities in [0, 1], shape ``(height, width, channels)``."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise InputError(f"image must be HxW, HxWx1 or HxWx3, got shape {np.shape(self.data)}")
        if data.shape[0] == 0 or data.shape[1] == 0:
            raise InputError("image has a zero dimension")
        if not np.all(np.isfinite(data)) or data.min() < 0.0 or data.max() > 1.0:
            raise InputError("image values must lie in [0, 1]")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def gray(self) -> np.ndarray:
        if self.channels == 1:
            return self.data[:, :, 0]
        return self.data @ _LUMA


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel depth in meters, shape ``(height, width)``; 0 marks invalid pixels."""

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim != 2 or data.size == 0:
            raise InputError(f"depth map must be a non-empty 2D array, got shape {data.shape}")
        if not np.all(np.isfinite(data)) or data.min() < 0.0:
            raise InputError("depth values must be finite and non-negative")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return self.data > 0

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(self.data > 0))


@dataclass(frozen=True)
class NormalMap:
    """Unit normals in camera coordinates, shape ``(height, width, 3)``.

    Invalid pixels hold the zero vector. Valid normals face the camera
    (negative z, with +z pointing away from the camera).
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim != 3 or data.shape[2] != 3:
            raise InputError(f"normal map must have shape (H, W, 3), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise InputError("normal map contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return np.any(self.data != 0.0, axis=2)

    @classmethod
    def invalid(cls, width: int, height: int) -> "NormalMap":
        return cls(np.zeros((height, width, 3)))


def _open(path) -> Image.Image:
    if not os.path.isfile(path):
        raise InputError(f"no such file: {path}")
    try:
        im = Image.open(path)
        im.load()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise InputError(f"unsupported format / decode failure: {path} ({exc})") from exc
    if im.format not in ("PNG", "PPM"):
        raise InputError(f"unsupported format {im.format!r}: {path} (expected PNG or PGM/PPM)")
    if im.width == 0 or im.height == 0:
        raise InputError(f"zero-dimension image: {path}")
    return im


def load_image(path) -> Image2D:
    """Read an 8-bit (or 16-bit grayscale) PNG/PGM/PPM and scale it to [0, 1]."""
    im = _open(path)
    if im.mode in ("L", "RGB"):
        return Image2D(np.asarray(im, dtype=float) / 255.0)
    if im.mode in ("LA", "RGBA", "P"):
        im = im.convert("RGB")
        return Image2D(np.asarray(im, dtype=float) / 255.0)
    if im.mode == "1":
        return Image2D(np.asarray(im, dtype=float))
    if im.mode.startswith("I;16") or im.mode == "I":
        arr = np.asarray(im).astype(float)
        return Image2D(np.clip(arr, 0, 65535) / 65535.0)
    raise InputError(f"unsupported image mode {im.mode!r}: {path}")


def load_depth(path, depth_scale: float = DEFAULT_DEPTH_SCALE) -> DepthMap:
    """Read a 16-bit single-channel PNG/PGM; stored integer ``u`` becomes ``u * depth_scale`` meters."""
    if not depth_scale > 0:
        raise InputError(f"depth_scale must be positive, got {depth_scale}")
    im = _open(path)
    if not (im.mode.startswith("I;16") or im.mode == "I"):
        raise InputError(f"depth image must be 16-bit single channel, got mode {im.mode!r}: {path}")
    raw = np.asarray(im).astype(np.int64)
    if raw.min() < 0 or raw.max() > 65535:
        raise InputError(f"depth image values out of 16-bit range: {path}")
    return DepthMap(raw.astype(float) * depth_scale)


def depth_to_uint16(depth: DepthMap, depth_scale: float = DEFAULT_DEPTH_SCALE) -> np.ndarray:
    if not depth_scale > 0:
        raise InputError(f"depth_scale must be positive, got {depth_scale}")
    units = np.rint(depth.data / depth_scale)
    return np.clip(units, 0, 65535).astype(np.uint16)


def save_depth(depth: DepthMap, path, depth_scale: float = DEFAULT_DEPTH_SCALE) -> None:
    """Write ``depth`` as a 16-bit PNG (or PGM when the suffix is .pgm)."""
    Image.fromarray(depth_to_uint16(depth, depth_scale)).save(path)


def save_image(img: Image2D | np.ndarray, path) -> None:
    """Write an 8-bit gray or RGB image; values are expected in [0, 1]."""
    arr = img.data if isinstance(img, Image2D) else np.asarray(img, dtype=float)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)).save(path)


def save_normals(normals: NormalMap, path) -> None:
    """Write normals as 8-bit RGB using ``(n + 1) / 2``; invalid pixels become black."""
    rgb = (normals.data + 1.0) / 2.0
    rgb[~normals.valid] = 0.0
    save_image(rgb, path)


def load_intrinsics(path) -> Intrinsics:
    if not os.path.isfile(path):
        raise InputError(f"no such file: {path}")
    try:
        with open(path) as fh:
            raw = json.load(fh)
        return Intrinsics(float(raw["fx"]), float(raw["fy"]), float(raw["cx"]), float(raw["cy"]))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"bad intrinsics file {path}: {exc}") from exc


def backproject(depth: np.ndarray, K: Intrinsics) -> np.ndarray:
    """Back-project every pixel center; returns ``(H, W, 3)`` camera-frame points."""
    h, w = depth.shape
    u, v = K.pixel_grid(w, h)
    return np.stack([u * depth, v * depth, depth], axis=-1)


def normals_from_depth(depth: DepthMap, K: Intrinsics) -> NormalMap:
    """Normals from central differences of the back-projected surface.

    A pixel is valid only when it and its four neighbors all carry valid
    depth; image-border pixels are therefore always invalid.
    """
    if depth.n_valid == 0:
        raise InputError("normals_from_depth needs at least one valid depth pixel")
    z = depth.data
    pts = backproject(z, K)
    h, w = z.shape
    out = np.zeros((h, w, 3))
    if h < 3 or w < 3:
        return NormalMap(out)
    ok = z > 0
    inner = ok[1:-1, 1:-1] & ok[1:-1, 2:] & ok[1:-1, :-2] & ok[2:, 1:-1] & ok[:-2, 1:-1]
    tx = pts[1:-1, 2:] - pts[1:-1, :-2]
    ty = pts[2:, 1:-1] - pts[:-2, 1:-1]
    n = np.cross(tx, ty)
    norm = np.linalg.norm(n, axis=-1)
    inner &= norm > 0
    n = n / np.where(norm > 0, norm, 1.0)[..., None]
    n = np.where((n[..., 2] > 0)[..., None], -n, n)
    inner &= n[..., 2] < 0
    out[1:-1, 1:-1] = np.where(inner[..., None], n, 0.0)
    return NormalMap(out)


def load_normals(path) -> NormalMap:
    """Inverse of :func:`save_normals`; black pixels are invalid, the rest are renormalized."""
    img = load_image(path)
    if img.channels != 3:
        raise InputError(f"normal map must be RGB: {path}")
    n = 2.0 * img.data - 1.0
    invalid = np.all(img.data == 0, axis=2)
    norm = np.linalg.norm(n, axis=2, keepdims=True)
    n = np.where(norm > 0, n / np.where(norm > 0, norm, 1.0), 0.0)
    n[invalid] = 0.0
    return NormalMap(n)
