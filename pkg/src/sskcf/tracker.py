"""Part-based tracking loop: detection, reliability gating, fusion, scale, update.

Coordinates are continuous pixel coordinates ``(row, col)`` in which pixel
``k`` covers ``[k, k + 1)``. Boxes handed in and out are OTB style
``(x, y, w, h)`` with a 1-based top-left corner.
"""
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from . import features as feat
from .labeling import make_labels
from .solver import (
    PartSolution,
    PartTrainingInput,
    SolverConfig,
    compute_omega,
    recover_filter,
    solve_joint,
    update_alpha_r,
)
from .spectral import dft2, idft2, kernel_spectrum

ASPECT_LOW = 0.6
ASPECT_HIGH = 1.6


@dataclass(frozen=True)
class TrackerConfig:
    padding: float = 1.8
    psr_threshold: float = 5.5
    similarity_threshold: float = 0.2
    learning_rate: float = 0.015
    fusion_mix: float = 0.4
    similarity_bandwidth: float = 0.5
    scale_smoothing: float = 0.6
    canonical_size: int = 48
    label_thresholds: Tuple[float, float] = (0.4, 0.9)
    eta_factor: float = 0.1
    label_shape: float = 2.0
    hist_bins: int = 8
    use_window: bool = True
    subcell: bool = True
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(penalty_sign=1.0))
    hog: feat.HogConfig = field(default_factory=feat.HogConfig)

    def __post_init__(self):
        if not 0.0 <= self.fusion_mix <= 1.0:
            raise ValueError("fusion_mix must lie in [0, 1]")
        if self.psr_threshold <= 0 or self.similarity_threshold <= 0:
            raise ValueError("reliability thresholds must be positive")
        if self.padding < 1.0:
            raise ValueError("padding must be >= 1")
        if not 0.0 < self.scale_smoothing <= 1.0:
            raise ValueError("scale_smoothing must lie in (0, 1]")
        if self.similarity_bandwidth <= 0 or self.learning_rate < 0:
            raise ValueError("similarity_bandwidth must be positive and learning_rate non-negative")

    def with_overrides(self, **kw):
        return replace(self, **kw)

    @property
    def window_pixels(self):
        """Side of the padded canonical patch, rounded to whole cells."""
        cs = self.hog.cell_size
        return max(int(round(self.canonical_size * self.padding / cs)), 1) * cs

    @property
    def grid_shape(self):
        n = self.window_pixels // self.hog.cell_size
        return (n, n)


@dataclass
class PartLayout:
    """Parts as (row, col) offsets of their centres from the target centre and
    (h, w) sizes, both relative to the target size."""

    arrangement: str
    offsets: np.ndarray
    sizes: np.ndarray

    @property
    def count(self):
        return len(self.offsets)


def make_layout(w, h):
    """2x2 parts for near-square targets, 3x1 for tall ones, 1x3 for wide ones."""
    if w <= 0 or h <= 0:
        raise ValueError(f"target size must be positive, got {w}x{h}")
    r = w / h
    if r <= ASPECT_LOW:
        rows, cols, name = 3, 1, "3x1"
    elif r >= ASPECT_HIGH:
        rows, cols, name = 1, 3, "1x3"
    else:
        rows, cols, name = 2, 2, "2x2"
    offsets = [((i + 0.5) / rows - 0.5, (j + 0.5) / cols - 0.5) for i in range(rows) for j in range(cols)]
    sizes = [(1.0 / rows, 1.0 / cols)] * (rows * cols)
    return PartLayout(name, np.array(offsets), np.array(sizes))


@dataclass
class PartState:
    model: PartSolution
    x: np.ndarray
    xf: np.ndarray
    hist: np.ndarray
    position: np.ndarray
    psr: float = 0.0
    similarity: float = 1.0
    reliable: bool = True
    weight: float = 0.0
    learning_rate: float = 0.0
    omega: float = 1.0
    delta: np.ndarray = field(default_factory=lambda: np.zeros(2))


@dataclass
class TrackerState:
    center: np.ndarray
    size: np.ndarray  # initial (h, w)
    scale: float
    layout: PartLayout
    parts: List[PartState]
    prev_translation: np.ndarray
    labels: np.ndarray
    window: Optional[np.ndarray]
    frame_index: int = 0
    raw_ratio: float = 1.0

    @property
    def target_size(self):
        return self.size * self.scale

    def box(self):
        h, w = self.target_size
        return np.array([self.center[1] - w / 2 + 1, self.center[0] - h / 2 + 1, w, h])


# -- per-frame building blocks -------------------------------------------------


def psr(response):
    """Peak-to-sidelobe ratio ``(max - mean) / std``; 0 for a flat map."""
    mu = float(np.mean(response))
    sd = float(np.std(response))
    peak = float(np.max(response))
    if sd <= 1e-12 * max(1.0, abs(peak)):
        return 0.0
    return (peak - mu) / sd


def _subcell(left, center, right):
    den = 2.0 * center - right - left
    return 0.0 if den == 0 else 0.5 * (right - left) / den


def peak_displacement(response, subcell=False):
    """Displacement (cells) of the response peak, wrapping past half the grid."""
    m, n = response.shape
    i, j = np.unravel_index(int(np.argmax(response)), response.shape)
    di, dj = float(i), float(j)
    if subcell:
        di += _subcell(response[(i - 1) % m, j], response[i, j], response[(i + 1) % m, j])
        dj += _subcell(response[i, (j - 1) % n], response[i, j], response[i, (j + 1) % n])
    if di > m / 2:
        di -= m
    if dj > n / 2:
        dj -= n
    return np.array([di, dj])


def appearance_similarity(hist_t, hist_prev, gamma):
    diff = np.asarray(hist_t) - np.asarray(hist_prev)
    return float(np.exp(-np.sum(diff * diff) / (gamma * gamma)))


def fusion_weights(psrs, sims, reliable, mix):
    """Per-part weights over the reliable parts; zero for the others."""
    psrs = np.asarray(psrs, dtype=float)
    sims = np.asarray(sims, dtype=float)
    mask = np.asarray(reliable, dtype=bool)
    pi = np.zeros(len(psrs))
    if not mask.any():
        return pi
    p, d = psrs[mask], sims[mask]
    ptot, dtot = p.sum(), d.sum()
    pterm = p / ptot if ptot > 0 else np.full(p.shape, 1.0 / p.size)
    dterm = d / dtot if dtot > 0 else np.full(d.shape, 1.0 / d.size)
    pi[mask] = (1.0 - mix) * pterm + mix * dterm
    return pi


def fuse_translation(deltas, psrs, sims, reliable, prev_translation, mix):
    """Weighted global translation; falls back to the previous one when no part is reliable.

    Returns ``(translation, weights, J)``.
    """
    pi = fusion_weights(psrs, sims, reliable, mix)
    j = int(np.count_nonzero(reliable))
    if j == 0:
        return np.array(prev_translation, dtype=float), pi, 0
    return pi @ np.asarray(deltas, dtype=float), pi, j


def scale_ratio(prev_positions, positions):
    """Mean ratio of pairwise distances now vs before over ordered pairs.

    Returns ``None`` if fewer than two parts or all pairs were coincident.
    """
    prev_positions = np.asarray(prev_positions, dtype=float)
    positions = np.asarray(positions, dtype=float)
    k = len(positions)
    if k < 2:
        return None
    ratios = []
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            before = np.linalg.norm(prev_positions[i] - prev_positions[j])
            if before <= 1e-12:
                continue
            ratios.append(np.linalg.norm(positions[i] - positions[j]) / before)
    return float(np.mean(ratios)) if ratios else None


def estimate_scale(prev_positions, positions, scale_prev, smoothing):
    """Exponentially smoothed scale from reliable-part geometry.

    Returns ``(scale, raw_ratio)``; the scale is unchanged when the ratio is
    undefined.
    """
    ratio = scale_ratio(prev_positions, positions)
    if ratio is None:
        return scale_prev, 1.0
    raw = scale_prev * ratio
    return (1.0 - smoothing) * scale_prev + smoothing * raw, ratio


def interpolate_part(part, rate, x_new, xf_new, sol_new, hist_new):
    """Blend the part model toward a freshly computed one with the given rate."""
    if rate <= 0.0:
        return
    keep = 1.0 - rate
    part.x = keep * part.x + rate * x_new
    part.xf = keep * part.xf + rate * xf_new
    part.hist = keep * part.hist + rate * hist_new
    m = part.model
    part.model = PartSolution(
        alpha_hat=keep * m.alpha_hat + rate * sol_new.alpha_hat,
        b=keep * m.b + rate * sol_new.b,
        v=sol_new.v,
        q=sol_new.q,
        iterations=sol_new.iterations,
        history=sol_new.history,
    )


# -- the tracker ---------------------------------------------------------------


class Tracker:
    """Owns one tracking session. Call :meth:`init` once, then :meth:`step` per frame."""

    def __init__(self, cfg=None):
        self.cfg = cfg or TrackerConfig()
        self.state: Optional[TrackerState] = None

    # geometry helpers

    def part_anchor(self, center, size, scale, offset):
        return np.asarray(center) + np.asarray(offset) * np.asarray(size) * scale

    def part_window(self, size, scale, rel_size):
        """Image-space (h, w) of a part's padded window."""
        return np.asarray(rel_size) * np.asarray(size) * scale * self.cfg.padding

    def features_at(self, frame, center, window_hw, win):
        cfg = self.cfg
        wp = cfg.window_pixels
        patch = feat.get_subwindow(frame, center, window_hw, out_size=(wp, wp))
        x = feat.extract_hog(patch, cfg.hog)
        if win is not None:
            x = feat.apply_window(x, win)
        return x

    def hist_at(self, frame, center, box_hw):
        patch = feat.get_subwindow(frame, center, box_hw)
        return feat.color_histogram(patch, self.cfg.hist_bins)

    def cells_to_pixels(self, window_hw):
        return np.asarray(window_hw) / self.cfg.grid_shape[0]

    # algorithm

    def init(self, frame, box):
        """Build the layout and train every part on the first frame."""
        cfg = self.cfg
        frame = np.asarray(frame)
        x0, y0, w, h = [float(v) for v in box]
        fh, fw = frame.shape[:2]
        if w <= 0 or h <= 0:
            raise ValueError("initial box must have positive size")
        if x0 - 1 < 0 or y0 - 1 < 0 or x0 - 1 + w > fw or y0 - 1 + h > fh:
            raise ValueError(f"initial box {box} is outside the {fw}x{fh} frame")
        layout = make_layout(w, h)
        size = np.array([h, w])
        for rel in layout.sizes:
            ph, pw = rel * size
            if ph < cfg.hog.cell_size or pw < cfg.hog.cell_size:
                raise ValueError("target too small for one feature cell per part")
        center = np.array([y0 - 1 + h / 2.0, x0 - 1 + w / 2.0])
        grid = cfg.grid_shape
        labels = make_labels(grid, (0, 0), cfg.label_thresholds, cfg.eta_factor, cfg.label_shape)
        win = feat.hann_window(grid) if cfg.use_window else None

        inputs, hists, anchors = [], [], []
        for off, rel in zip(layout.offsets, layout.sizes):
            anchor = self.part_anchor(center, size, 1.0, off)
            x = self.features_at(frame, anchor, self.part_window(size, 1.0, rel), win)
            inputs.append(PartTrainingInput(x, labels))
            hists.append(self.hist_at(frame, anchor, rel * size))
            anchors.append(anchor)
        sols = solve_joint(inputs, cfg.solver, max_iter=cfg.solver.max_iter_first)
        parts = [
            PartState(model=s, x=p.x, xf=p.xf, hist=hst, position=a)
            for s, p, hst, a in zip(sols, inputs, hists, anchors)
        ]
        self.state = TrackerState(
            center=center,
            size=size,
            scale=1.0,
            layout=layout,
            parts=parts,
            prev_translation=np.zeros(2),
            labels=labels,
            window=win,
        )
        # self-detection sets PSR and the initial learning rates
        for part, off, rel in zip(parts, layout.offsets, layout.sizes):
            _, delta, phi = self.detect_part(part, frame, part.position, self.part_window(size, 1.0, rel))
            part.psr, part.similarity, part.reliable = phi, 1.0, True
            part.delta = delta
        pi = fusion_weights([p.psr for p in parts], [1.0] * len(parts), [True] * len(parts), cfg.fusion_mix)
        for part, w_ in zip(parts, pi):
            part.weight = float(w_)
            part.learning_rate = float(w_) * cfg.learning_rate
        return self.state

    def response(self, part, z):
        s = self.cfg.solver
        zf = dft2(z)
        kzf = kernel_spectrum(part.x, z, s.kernel, s.sigma, xf=part.xf, zf=zf)
        return idft2(kzf * part.model.alpha_hat) + part.model.b

    def detect_part(self, part, frame, anchor, window_hw):
        """Response map, pixel displacement and PSR of one part around ``anchor``."""
        z = self.features_at(frame, anchor, window_hw, self.state.window)
        f = self.response(part, z)
        cells = peak_displacement(f, subcell=self.cfg.subcell)
        return f, cells * self.cells_to_pixels(window_hw), psr(f)

    def step(self, frame):
        """Track one frame; returns the predicted ``(x, y, w, h)`` box."""
        st = self.state
        if st is None:
            raise RuntimeError("tracker is not initialised")
        cfg = self.cfg
        frame = np.asarray(frame)
        layout = st.layout
        scale_prev = st.scale

        anchors, deltas = [], []
        for part, off, rel in zip(st.parts, layout.offsets, layout.sizes):
            anchor = self.part_anchor(st.center, st.size, scale_prev, off)
            _, delta, phi = self.detect_part(part, frame, anchor, self.part_window(st.size, scale_prev, rel))
            new_pos = anchor + delta
            # appearance is sampled where the part was expected, not where it was detected
            hist = self.hist_at(frame, anchor, rel * st.size * scale_prev)
            part.psr = phi
            part.similarity = appearance_similarity(hist, part.hist, cfg.similarity_bandwidth)
            part.reliable = bool(phi > cfg.psr_threshold or part.similarity > cfg.similarity_threshold)
            part.delta = delta
            part.position = new_pos
            anchors.append(anchor)
            deltas.append(delta)

        reliable = [p.reliable for p in st.parts]
        translation, pi, j = fuse_translation(
            deltas, [p.psr for p in st.parts], [p.similarity for p in st.parts], reliable, st.prev_translation, cfg.fusion_mix
        )
        st.center = st.center + translation
        st.prev_translation = translation

        idx = [k for k, r in enumerate(reliable) if r]
        st.scale, st.raw_ratio = estimate_scale(
            [anchors[k] for k in idx], [st.parts[k].position for k in idx], scale_prev, cfg.scale_smoothing
        )
        for part, w_ in zip(st.parts, pi):
            part.weight = float(w_)
            part.learning_rate = float(w_) * cfg.learning_rate if part.reliable else 0.0

        self.update_models(frame)
        st.frame_index += 1
        return st.box()

    def update_models(self, frame):
        """Re-solve the reliable parts on the new frame and blend them in."""
        st = self.state
        cfg = self.cfg
        idx = [k for k, p in enumerate(st.parts) if p.reliable and p.learning_rate > 0]
        if not idx:
            return
        omegas = self.root_weights()
        inputs, hists = [], []
        for k in idx:
            off, rel = st.layout.offsets[k], st.layout.sizes[k]
            anchor = self.part_anchor(st.center, st.size, st.scale, off)
            x = self.features_at(frame, anchor, self.part_window(st.size, st.scale, rel), st.window)
            part = st.parts[k]
            inputs.append(PartTrainingInput(x, st.labels, alpha_prev=part.model.alpha_hat, omega=omegas[k]))
            hists.append(self.hist_at(frame, anchor, rel * st.size * st.scale))
        warm = [st.parts[k].model for k in idx]
        sols = solve_joint(inputs, cfg.solver, max_iter=cfg.solver.max_iter_update, warm=warm)
        for k, inp, sol, hst in zip(idx, inputs, sols, hists):
            part = st.parts[k]
            part.omega = omegas[k]
            interpolate_part(part, part.learning_rate, inp.x, inp.xf, sol, hst)

    def root_weights(self):
        """Root couplings from the previous-frame models.

        The linear kernel compares recovered primal filters; the Gaussian
        kernel has no explicit filter, so dual coefficients are compared.
        """
        st = self.state
        s = self.cfg.solver
        prev_w = [p.omega for p in st.parts]
        if s.kernel == "linear":
            filters = [recover_filter(p.xf, p.model.alpha_hat) for p in st.parts]
        else:
            filters = [p.model.alpha_hat for p in st.parts]
        root = update_alpha_r(filters, prev_w)
        return [max(compute_omega(f, root, s.kappa), 1e-300) for f in filters]


def run_sequence(frames, init_box, cfg=None, on_frame=None):
    """Track ``frames`` (an iterable of images) from ``init_box``.

    Returns the list of predicted boxes for frames 2..T.
    """
    tracker = Tracker(cfg)
    boxes = []
    it = iter(frames)
    tracker.init(next(it), init_box)
    for frame in it:
        box = tracker.step(frame)
        boxes.append(box)
        if on_frame is not None:
            on_frame(tracker)
    return boxes
