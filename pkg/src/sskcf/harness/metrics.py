"""Per-frame evaluation records, DP/OP/AUC summaries and the text report."""
import time
from dataclasses import dataclass
from typing import List

import numpy as np

from ..tracker import TrackerConfig
from .io import config_keys

DP_THRESHOLD = 20.0
OP_THRESHOLD = 0.5
PRECISION_THRESHOLDS = np.arange(0, 51, dtype=float)
# k / 20 is the float nearest each decimal threshold, so 0.4 compares as 0.4
SUCCESS_THRESHOLDS = np.arange(21) / 20.0


def iou(a, b):
    """Intersection over union of two ``(x, y, w, h)`` boxes."""
    ax, ay, aw, ah = (float(v) for v in a)
    bx, by, bw, bh = (float(v) for v in b)
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (aw * ah + bw * bh - inter)


def center_error(a, b):
    return float(np.hypot(a[0] + a[2] / 2 - b[0] - b[2] / 2, a[1] + a[3] / 2 - b[1] - b[3] / 2))


@dataclass
class EvalRecord:
    frame: int
    pred: tuple
    gt: tuple
    cle: float
    overlap: float

    @classmethod
    def from_boxes(cls, frame, pred, gt):
        pred, gt = tuple(float(v) for v in pred), tuple(float(v) for v in gt)
        return cls(frame, pred, gt, center_error(pred, gt), iou(pred, gt))


def records_for(boxes, gt, first_frame=1):
    """Records for predicted ``boxes`` against ``gt`` rows starting at ``first_frame``."""
    return [EvalRecord.from_boxes(first_frame + k, b, gt[first_frame + k]) for k, b in enumerate(boxes)]


@dataclass
class Metrics:
    n: int
    dp20: float
    op50: float
    auc: float
    mean_iou: float
    mean_cle: float
    precision: np.ndarray
    success: np.ndarray


def metrics(records: List[EvalRecord]) -> Metrics:
    if not records:
        raise ValueError("no evaluation records")
    cle = np.array([r.cle for r in records])
    ov = np.array([r.overlap for r in records])
    precision = (cle[None, :] < PRECISION_THRESHOLDS[:, None]).mean(axis=1)
    success = (ov[None, :] > SUCCESS_THRESHOLDS[:, None]).mean(axis=1)
    return Metrics(
        n=len(records),
        dp20=float(np.mean(cle < DP_THRESHOLD)),
        op50=float(np.mean(ov > OP_THRESHOLD)),
        auc=float(success.mean()),
        mean_iou=float(ov.mean()),
        mean_cle=float(cle.mean()),
        precision=precision,
        success=success,
    )


class Timer:
    """Wall-clock accumulator around the tracking calls only."""

    def __init__(self):
        self.elapsed = 0.0
        self.frames = 0
        self._t0 = None

    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed += time.perf_counter() - self._t0
        self.frames += 1
        return False

    @property
    def fps(self):
        return self.frames / self.elapsed if self.elapsed > 0 else float("inf")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def format_report(name, cfg: TrackerConfig, boxes, records=None, summary=None, fps=None, extra=None):
    """Key-value header, a blank line, then a tab-separated per-frame table.

    Header lines are ``key = value``. Config keys are dotted
    (``solver.delta``). Curve values are comma-separated.
    """
    lines = [f"sequence = {name}", f"frames_processed = {len(boxes)}"]
    lines.append(f"records = {len(records) if records is not None else 0}")
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {_fmt(v)}")
    for k, v in config_keys(cfg).items():
        lines.append(f"{k} = {_fmt(v)}")
    if fps is not None:
        lines.append(f"fps = {fps:.2f}")
    if summary is not None:
        lines += [
            f"dp20 = {summary.dp20!r}",
            f"op50 = {summary.op50!r}",
            f"auc = {summary.auc!r}",
            f"mean_iou = {summary.mean_iou!r}",
            f"mean_cle = {summary.mean_cle!r}",
            "precision_thresholds = 0:50:1",
            "precision_curve = " + ",".join(f"{p:.6g}" for p in summary.precision),
            "success_thresholds = 0:1:0.05",
            "success_curve = " + ",".join(f"{s:.6g}" for s in summary.success),
        ]
    lines.append("")
    if records is not None:
        lines.append("frame\tx\ty\tw\th\tgt_x\tgt_y\tgt_w\tgt_h\tcle\tiou")
        for r in records:
            vals = [*r.pred, *r.gt, r.cle, r.overlap]
            lines.append(f"{r.frame}\t" + "\t".join(f"{v:.4f}" for v in vals))
    else:
        lines.append("frame\tx\ty\tw\th")
        for k, b in enumerate(boxes, 1):
            lines.append(f"{k}\t" + "\t".join(f"{v:.4f}" for v in b))
    return "\n".join(lines) + "\n"


def parse_report(text):
    """Inverse of :func:`format_report`: ``(header dict of strings, table rows)``."""
    head, _, table = text.partition("\n\n")
    header = {}
    for line in head.splitlines():
        k, _, v = line.partition(" = ")
        header[k] = v
    rows = [line.split("\t") for line in table.strip().splitlines()]
    return header, rows
