"""HOG features for the filters, colour histograms for the similarity cue.

The HOG variant is the 31-channel one from Felzenszwalb et al.'s DPM code:
18 contrast-sensitive orientation channels, 9 contrast-insensitive ones and
4 gradient-energy (texture) channels per cell.
"""
from dataclasses import dataclass

import cv2
import numpy as np

_TRUNC = 0.2
_EPS = 1e-4


@dataclass(frozen=True)
class HogConfig:
    cell_size: int = 4
    orientations: int = 9
    channels: int = 31

    def __post_init__(self):
        if self.cell_size < 1:
            raise ValueError("cell_size must be >= 1")
        if self.channels != 3 * self.orientations + 4:
            raise ValueError("channels must equal 3 * orientations + 4")


def _to_float(region):
    region = np.asarray(region)
    if region.ndim == 2:
        region = region[:, :, None]
    return region.astype(np.float32) / 255.0 if region.dtype == np.uint8 else region.astype(np.float32)


_DIFF = np.array([[-1.0, 0.0, 1.0]], dtype=np.float32)


def _gradients(img):
    """Per-pixel gradient magnitude and angle, taking the strongest colour channel."""
    # edge-replicated central differences
    dx = cv2.filter2D(img, -1, _DIFF, borderType=cv2.BORDER_REPLICATE)
    dy = cv2.filter2D(img, -1, _DIFF.T, borderType=cv2.BORDER_REPLICATE)
    if img.shape[2] == 1 or dx.ndim == 2:
        dx = dx.reshape(img.shape)
        dy = dy.reshape(img.shape)
    mag2 = dx * dx + dy * dy
    gx, gy, best = dx[:, :, 0], dy[:, :, 0], mag2[:, :, 0]
    for c in range(1, img.shape[2]):
        take = mag2[:, :, c] > best
        gx = np.where(take, dx[:, :, c], gx)
        gy = np.where(take, dy[:, :, c], gy)
        best = np.where(take, mag2[:, :, c], best)
    return np.sqrt(best), np.arctan2(gy, gx)


def extract_hog(region, cfg=HogConfig()):
    """Return a ``(H // cell, W // cell, 31)`` float array for an image region."""
    img = _to_float(region)
    h, w = img.shape[:2]
    cs = cfg.cell_size
    hc, wc = h // cs, w // cs
    if hc < 1 or wc < 1:
        raise ValueError(f"region {h}x{w} is smaller than one {cs}x{cs} cell")
    nori = cfg.orientations
    nbins = 2 * nori

    mag, ang = _gradients(img)
    mag = mag[: hc * cs, : wc * cs]
    ang = ang[: hc * cs, : wc * cs]
    # snap to the nearest of 2*nori signed directions
    bins = np.rint(ang * (nbins / (2 * np.pi))).astype(np.int64) % nbins

    cell_idx = (np.arange(hc * cs) // cs)[:, None] * wc + (np.arange(wc * cs) // cs)[None, :]
    flat = (cell_idx * nbins + bins).ravel()
    hist = np.bincount(flat, weights=mag.ravel(), minlength=hc * wc * nbins)
    hist = hist.reshape(hc, wc, nbins).astype(np.float32)

    unsigned = hist[:, :, :nori] + hist[:, :, nori:]
    energy = np.sum(unsigned * unsigned, axis=2)
    e = np.pad(energy, 1, mode="edge")
    # 2x2 block energies; block (i, j) covers cells i..i+1, j..j+1 of the padded grid
    blocks = e[:-1, :-1] + e[1:, :-1] + e[:-1, 1:] + e[1:, 1:]
    norms = (
        blocks[1:, 1:],  # cell is the top-left of its block
        blocks[:-1, 1:],
        blocks[1:, :-1],
        blocks[:-1, :-1],
    )

    out = np.zeros((hc, wc, cfg.channels), dtype=np.float32)
    signed_acc = out[:, :, :nbins]
    unsigned_acc = out[:, :, nbins : nbins + nori]
    for k, n in enumerate(norms):
        inv = (1.0 / np.sqrt(n + _EPS))[:, :, None]
        sn = np.minimum(hist * inv, _TRUNC)
        signed_acc += sn
        unsigned_acc += np.minimum(unsigned * inv, _TRUNC)
        out[:, :, nbins + nori + k] = 0.2357 * sn.sum(axis=2)
    signed_acc *= 0.5
    unsigned_acc *= 0.5
    return out


def hann_window(shape):
    return np.outer(np.hanning(shape[0]), np.hanning(shape[1]))


def apply_window(g, window=None):
    """Multiply every channel by a separable Hann taper."""
    g = np.asarray(g, dtype=float)
    if window is None:
        window = hann_window(g.shape[:2])
    return g * window[:, :, None] if g.ndim == 3 else g * window


def color_histogram(region, bins_per_channel=8):
    """L1-normalised joint RGB histogram with ``bins_per_channel**3`` bins.

    Grayscale input is replicated to three channels.
    """
    region = np.asarray(region)
    if region.size == 0:
        raise ValueError("empty region")
    if region.ndim == 2:
        region = np.repeat(region[:, :, None], 3, axis=2)
    elif region.shape[2] == 1:
        region = np.repeat(region, 3, axis=2)
    px = region.reshape(-1, region.shape[2])[:, :3].astype(np.int64)
    q = np.clip(px * bins_per_channel // 256, 0, bins_per_channel - 1)
    idx = (q[:, 0] * bins_per_channel + q[:, 1]) * bins_per_channel + q[:, 2]
    hist = np.bincount(idx, minlength=bins_per_channel ** 3).astype(float)
    return hist / hist.sum()


def get_subwindow(frame, center, size, out_size=None):
    """Crop a ``size=(h, w)`` window centred at ``center=(row, col)``.

    Pixels outside the frame replicate the nearest edge. When ``out_size``
    is given the crop is resampled to that ``(h, w)``.
    """
    frame = np.asarray(frame)
    h, w = int(round(size[0])), int(round(size[1]))
    h, w = max(h, 1), max(w, 1)
    top = int(np.floor(center[0] - h / 2.0 + 0.5))
    left = int(np.floor(center[1] - w / 2.0 + 0.5))
    rows = np.clip(np.arange(top, top + h), 0, frame.shape[0] - 1)
    cols = np.clip(np.arange(left, left + w), 0, frame.shape[1] - 1)
    if 0 <= top and top + h <= frame.shape[0] and 0 <= left and left + w <= frame.shape[1]:
        patch = frame[top : top + h, left : left + w]
    else:
        patch = frame[rows[:, None], cols[None, :]]
    if out_size is not None and (h, w) != tuple(out_size):
        interp = cv2.INTER_AREA if h > out_size[0] else cv2.INTER_LINEAR
        patch = cv2.resize(np.ascontiguousarray(patch), (int(out_size[1]), int(out_size[0])), interpolation=interp)
    return patch
