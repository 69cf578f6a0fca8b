"""Image and scan preprocessing."""
from __future__ import annotations

import numpy as np
from PIL import Image

from ..errors import DegenerateInputError, InvalidInputError

# Fallback when a dataset has no norm.txt (ImageNet statistics, [0, 1] scale).
DEFAULT_MEAN = (0.485, 0.456, 0.406)
DEFAULT_STD = (0.229, 0.224, 0.225)


def resize_short_side(image: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize so the shorter side equals ``size``; aspect ratio kept."""
    h, w = image.shape[:2]
    if min(h, w) < 1:
        raise InvalidInputError(f"image has empty side: {image.shape}")
    if min(h, w) == size:
        return image
    scale = size / min(h, w)
    new_w = size if w <= h else int(round(w * scale))
    new_h = size if h <= w else int(round(h * scale))
    return np.asarray(Image.fromarray(image).resize((new_w, new_h), Image.BILINEAR))


def crop(image: np.ndarray, size: int, mode: str = "eval", rng: np.random.Generator | None = None) -> np.ndarray:
    h, w = image.shape[:2]
    if mode == "train":
        rng = rng if rng is not None else np.random.default_rng()
        top = int(rng.integers(0, h - size + 1))
        left = int(rng.integers(0, w - size + 1))
    elif mode == "eval":
        top, left = (h - size) // 2, (w - size) // 2
    else:
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    return image[top : top + size, left : left + size]


def normalize(image: np.ndarray, mean=DEFAULT_MEAN, std=DEFAULT_STD) -> np.ndarray:
    """uint8 HxWx3 -> float32 3xHxW, per-channel standardised."""
    x = image.astype(np.float32) / 255.0
    x = (x - np.asarray(mean, dtype=np.float32)) / np.asarray(std, dtype=np.float32)
    return np.ascontiguousarray(x.transpose(2, 0, 1))


def preprocess_image(
    image: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    size: int = 256,
    mean=DEFAULT_MEAN,
    std=DEFAULT_STD,
) -> np.ndarray:
    """Scale short side to ``size``, crop ``size`` x ``size`` (random in train, centre in eval), normalise."""
    resized = resize_short_side(np.asarray(image, dtype=np.uint8), size)
    return normalize(crop(resized, size, mode, rng), mean, std)


def _grayscale(x: np.ndarray) -> np.ndarray:
    return x[..., 0] * 0.299 + x[..., 1] * 0.587 + x[..., 2] * 0.114


def color_jitter(
    image: np.ndarray,
    rng: np.random.Generator,
    brightness: float = 0.7,
    contrast: float = 0.7,
    saturation: float = 0.7,
    hue: float = 0.5,
) -> np.ndarray:
    """Random brightness/contrast/saturation scaling and hue rotation of a uint8 RGB image.

    Factors are drawn from ``[max(0, 1 - s), 1 + s]``; the hue shift from
    ``[-hue, hue]`` as a fraction of the full hue circle.
    """
    b = rng.uniform(max(0.0, 1 - brightness), 1 + brightness)
    c = rng.uniform(max(0.0, 1 - contrast), 1 + contrast)
    s = rng.uniform(max(0.0, 1 - saturation), 1 + saturation)
    h = rng.uniform(-hue, hue)

    x = image.astype(np.float64)
    x = np.clip(x * b, 0, 255)
    x = np.clip(x * c + _grayscale(x).mean() * (1 - c), 0, 255)
    x = np.clip(x * s + _grayscale(x)[..., None] * (1 - s), 0, 255)
    out = np.rint(x).astype(np.uint8)
    if h != 0.0:
        hsv = np.array(Image.fromarray(out).convert("HSV"))
        hsv[..., 0] = (hsv[..., 0].astype(np.int64) + int(round(h * 255))) % 256
        out = np.asarray(Image.fromarray(hsv, mode="HSV").convert("RGB"))
    return out


def sample_scan(
    scan: np.ndarray, n_fixed: int = 1024, mode: str = "eval", rng: np.random.Generator | None = None
) -> np.ndarray:
    """Bring a variable-length scan to exactly ``n_fixed`` points.

    Longer scans are subsampled (random without replacement in train, even
    stride in eval); shorter scans keep every point and are padded with
    resampled duplicates (random in train, cyclic in eval).
    """
    scan = np.asarray(scan, dtype=np.float32).reshape(-1, 2)
    n = len(scan)
    if n == 0:
        raise DegenerateInputError("cannot sample from an empty scan")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "train" and rng is None:
        rng = np.random.default_rng()
    if n >= n_fixed:
        if mode == "train":
            idx = np.sort(rng.choice(n, size=n_fixed, replace=False))
        else:
            idx = (np.arange(n_fixed) * n) // n_fixed
    else:
        if mode == "train":
            extra = rng.integers(0, n, size=n_fixed - n)
        else:
            extra = np.arange(n_fixed - n) % n
        idx = np.concatenate([np.arange(n), extra])
    return scan[idx]
