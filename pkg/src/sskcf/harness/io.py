"""Sequence ingestion (OTB directory layout), box files and config files."""
import re
from dataclasses import dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import cv2
import numpy as np

IMAGE_EXTS = (".jpg", ".jpeg", ".png", ".bmp")


class SequenceError(ValueError):
    pass


class ConfigError(ValueError):
    pass


@dataclass
class Sequence:
    """Frames (paths or arrays) plus per-frame ``(x, y, w, h)`` 1-based boxes."""

    name: str
    frames: List[Union[str, np.ndarray]]
    boxes: Optional[np.ndarray] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def __len__(self):
        return len(self.frames)

    def frame(self, k):
        f = self.frames[k]
        if isinstance(f, np.ndarray):
            return f
        img = cv2.imread(str(f), cv2.IMREAD_UNCHANGED)
        if img is None:
            raise SequenceError(f"cannot decode frame {f}")
        if img.ndim == 3:
            img = cv2.cvtColor(img[:, :, :3], cv2.COLOR_BGR2RGB)
        return img

    def iter_frames(self):
        for k in range(len(self.frames)):
            yield self.frame(k)


def parse_box_line(line, lineno=None):
    parts = [p for p in re.split(r"[,\s]+", line.strip()) if p]
    where = f" on line {lineno}" if lineno is not None else ""
    if len(parts) != 4:
        raise SequenceError(f"expected 4 values x,y,w,h{where}, got {line.strip()!r}")
    try:
        box = [float(p) for p in parts]
    except ValueError:
        raise SequenceError(f"non-numeric box{where}: {line.strip()!r}") from None
    return box


def read_boxes(path):
    boxes = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            boxes.append(parse_box_line(line, lineno))
    return np.array(boxes, dtype=float).reshape(-1, 4)


def write_boxes(path, boxes):
    with open(path, "w") as fh:
        for b in boxes:
            fh.write(",".join(f"{v:.2f}" for v in b) + "\n")


def _frame_key(p):
    m = re.search(r"(\d+)(?!.*\d)", p.stem)
    return (int(m.group(1)) if m else -1, p.name)


def load_sequence(path):
    """Load an OTB-style directory: ``img/`` frames and ``groundtruth_rect.txt``."""
    root = Path(path)
    img_dir = root / "img"
    gt_path = root / "groundtruth_rect.txt"
    if not img_dir.is_dir():
        raise SequenceError(f"missing image folder {img_dir}")
    if not gt_path.is_file():
        raise SequenceError(f"missing ground truth {gt_path}")
    frames = sorted((p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_EXTS), key=_frame_key)
    if not frames:
        raise SequenceError(f"no frames in {img_dir}")
    boxes = read_boxes(gt_path)
    if len(boxes) != len(frames):
        raise SequenceError(f"{len(frames)} frames but {len(boxes)} ground-truth boxes in {root}")
    if np.any(boxes[:, 2:] <= 0):
        raise SequenceError("ground-truth boxes must have positive size")
    return Sequence(name=root.name, frames=[str(p) for p in frames], boxes=boxes)


# -- flat key = value config --------------------------------------------------


def _coerce(raw, current, key, lineno):
    try:
        if isinstance(current, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, tuple):
            vals = [float(v) for v in re.split(r"[,\s]+", raw.strip("()[] ")) if v]
            if len(vals) != len(current):
                raise ValueError(raw)
            return tuple(vals)
        return raw
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value {raw!r} for {key}") from None


def config_keys(cfg, prefix=""):
    """Flat ``{dotted_key: value}`` view of a (nested) dataclass config."""
    out = {}
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        if is_dataclass(val):
            out.update(config_keys(val, prefix + f.name + "."))
        else:
            out[prefix + f.name] = val
    return out


def _set(cfg, dotted, value):
    head, _, rest = dotted.partition(".")
    if rest:
        value = _set(getattr(cfg, head), rest, value)
    return replace(cfg, **{head: value})


def apply_overrides(cfg, items):
    """Apply ``[(key, raw_value, lineno)]``. Keys are dotted (``solver.delta``);
    undotted keys that name a unique leaf anywhere in the tree are accepted."""
    for key, raw, lineno in items:
        flat = config_keys(cfg)
        if key not in flat:
            matches = [k for k in flat if k.rsplit(".", 1)[-1] == key]
            if len(matches) != 1:
                raise ConfigError(f"line {lineno}: unknown config key {key!r}")
            key = matches[0]
        cfg = _set(cfg, key, _coerce(raw, flat[key], key, lineno))
    return cfg


def read_config(path, cfg):
    """Override ``cfg`` from a flat ``key = value`` file (``#`` starts a comment)."""
    items = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
            key, raw = (s.strip() for s in line.split("=", 1))
            items.append((key, raw, lineno))
    try:
        return apply_overrides(cfg, items)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
