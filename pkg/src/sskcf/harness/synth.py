"""Deterministic synthetic sequences with exact ground truth.

A textured target (drawn from a small colour palette) moves over a
textured background along a piecewise-linear path, optionally zooming and
optionally covered by an occluder whose box is given relative to the
target so it moves with it.
"""
import json
from dataclasses import dataclass, field
from typing import List, Tuple

import cv2
import numpy as np

from .io import Sequence


@dataclass
class Occluder:
    rel_box: Tuple[float, float, float, float]  # (x0, y0, x1, y1) as fractions of the target box
    start: int  # first covered frame, 0-based inclusive
    end: int  # last covered frame, inclusive


@dataclass
class SynthSpec:
    frame_size: Tuple[int, int] = (240, 320)  # (h, w)
    n_frames: int = 100
    target_size: Tuple[float, float] = (100.0, 100.0)  # (h, w) at scale 1
    # (frame, row, col) knots of the target-centre path
    path: List[Tuple[int, float, float]] = field(default_factory=lambda: [(0, 120.0, 160.0)])
    # (frame, scale) knots
    scales: List[Tuple[int, float]] = field(default_factory=lambda: [(0, 1.0)])
    occluders: List[Occluder] = field(default_factory=list)
    palette_size: int = 3
    block: int = 10

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["occluders"] = [Occluder(**o) for o in d.get("occluders", [])]
        for key in ("frame_size", "target_size"):
            if key in d:
                d[key] = tuple(d[key])
        for key in ("path", "scales"):
            if key in d:
                d[key] = [tuple(k) for k in d[key]]
        return cls(**d)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _interp(knots, t):
    knots = sorted(knots)
    frames = [k[0] for k in knots]
    cols = list(zip(*[k[1:] for k in knots]))
    return np.array([np.interp(t, frames, c) for c in cols])


def _smooth_noise(rng, h, w, grain):
    small = rng.random((max(h // grain, 2) + 1, max(w // grain, 2) + 1, 3)).astype(np.float32)
    big = cv2.resize(small, (w, h), interpolation=cv2.INTER_CUBIC)
    return np.clip(big, 0, 1)


def _palette_texture(rng, h, w, palette, block):
    idx = rng.integers(0, len(palette), size=(h // block + 1, w // block + 1))
    tex = palette[idx].astype(np.float32)
    tex = np.repeat(np.repeat(tex, block, axis=0), block, axis=1)[:h, :w]
    return cv2.GaussianBlur(tex, (0, 0), 0.8)


def trajectory(spec):
    """Per-frame (row, col) centres and scales."""
    t = np.arange(spec.n_frames)
    centers = np.stack([_interp(spec.path, k) for k in t])
    scales = np.array([_interp(spec.scales, k)[0] for k in t])
    return centers, scales


def ground_truth(spec):
    """OTB-style (x, y, w, h) boxes, 1-based."""
    centers, scales = trajectory(spec)
    h0, w0 = spec.target_size
    hs, ws = h0 * scales, w0 * scales
    return np.stack([centers[:, 1] - ws / 2 + 1, centers[:, 0] - hs / 2 + 1, ws, hs], axis=1)


def synth_generate(spec, seed=0):
    """Render the sequence. Returns a :class:`Sequence` with in-memory frames.

    ``sequence.meta['occlusion']`` holds, per frame, the list of occluder
    boxes (1-based x, y, w, h) drawn in that frame.
    """
    rng = np.random.default_rng(seed)
    fh, fw = spec.frame_size
    centers, scales = trajectory(spec)
    gt = ground_truth(spec)
    h0, w0 = spec.target_size
    for k, (x, y, w, h) in enumerate(gt):
        if x - 1 < 0 or y - 1 < 0 or x - 1 + w > fw or y - 1 + h > fh:
            raise ValueError(f"target leaves the frame at frame {k}")

    background = (0.25 + 0.5 * _smooth_noise(rng, fh, fw, 24)) * 0.6 + 0.4 * rng.random((fh, fw, 3)).astype(np.float32) * 0.5
    palette = np.array([[0.9, 0.15, 0.1], [0.95, 0.8, 0.1], [0.1, 0.1, 0.15], [0.2, 0.7, 0.2]])[: spec.palette_size]
    tex_scale = 2.0
    th, tw = int(np.ceil(h0 * tex_scale)), int(np.ceil(w0 * tex_scale))
    texture = _palette_texture(rng, th, tw, palette, int(spec.block * tex_scale))
    occ_palette = np.array([[0.2, 0.35, 0.95], [0.75, 0.85, 1.0]])
    occ_texture = _palette_texture(rng, th, tw, occ_palette, int(spec.block * tex_scale))

    frames, occlusion = [], []
    for k in range(spec.n_frames):
        frame = background.copy()
        s = scales[k]
        cy, cx = centers[k]
        a = s / tex_scale
        # maps texture coords (continuous, pixel k covers [k, k+1)) to frame coords
        M = np.array([[a, 0.0, cx - w0 * s / 2 + 0.5 * a - 0.5], [0.0, a, cy - h0 * s / 2 + 0.5 * a - 0.5]])
        warped = cv2.warpAffine(texture, M, (fw, fh), flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_CONSTANT)
        mask = cv2.warpAffine(np.ones((th, tw), np.float32), M, (fw, fh), flags=cv2.INTER_LINEAR)[:, :, None]
        frame = frame * (1 - mask) + warped * mask
        boxes = []
        for occ in spec.occluders:
            if occ.start <= k <= occ.end:
                x, y, w, h = gt[k]
                ox0 = x - 1 + occ.rel_box[0] * w
                oy0 = y - 1 + occ.rel_box[1] * h
                ox1 = x - 1 + occ.rel_box[2] * w
                oy1 = y - 1 + occ.rel_box[3] * h
                r0, r1 = int(np.floor(oy0)), int(np.ceil(oy1))
                c0, c1 = int(np.floor(ox0)), int(np.ceil(ox1))
                r0, c0 = max(r0, 0), max(c0, 0)
                r1, c1 = min(r1, fh), min(c1, fw)
                frame[r0:r1, c0:c1] = occ_texture[: r1 - r0, : c1 - c0]
                boxes.append((c0 + 1.0, r0 + 1.0, float(c1 - c0), float(r1 - r0)))
        occlusion.append(boxes)
        frames.append(np.clip(frame * 255 + 0.5, 0, 255).astype(np.uint8))
    return Sequence(name="synthetic", frames=frames, boxes=gt, meta={"occlusion": occlusion, "scales": scales})


def translation_spec(n_frames=100):
    """Target moving around a 240x320 frame at under 4 px/frame, no scale change."""
    knots = [(0, 120.0, 160.0), (25, 150.0, 220.0), (50, 100.0, 250.0), (75, 80.0, 160.0), (n_frames - 1, 120.0, 120.0)]
    return SynthSpec(frame_size=(240, 320), n_frames=n_frames, path=knots)


def occlusion_spec(n_frames=80, start=30, end=50):
    """Slowly moving target whose upper-left quadrant is covered in ``start..end``."""
    knots = [(0, 120.0, 150.0), (n_frames - 1, 130.0, 190.0)]
    occ = Occluder(rel_box=(-0.02, -0.02, 0.5, 0.5), start=start, end=end)
    return SynthSpec(frame_size=(240, 320), n_frames=n_frames, path=knots, occluders=[occ])


def zoom_spec(n_frames=61, final_scale=1.5):
    """Static-centre target zooming uniformly from 1.0 to ``final_scale``."""
    return SynthSpec(
        frame_size=(280, 360),
        n_frames=n_frames,
        target_size=(100.0, 100.0),
        path=[(0, 140.0, 180.0)],
        scales=[(0, 1.0), (n_frames - 1, final_scale)],
    )
