"""Class-agnostic motion-segmentation metrics.

SQ is the mean IoU of matched pairs, RQ is ``TP / (TP + FN)`` (false
positives do not enter it), and CAQ is their product. Matching pairs a
prediction with a ground-truth instance when their IoU exceeds 0.5. Object
F-measure and background IoU are pixel-level scores on the union masks.
The standard panoptic RQ, which does count false positives, is reported
alongside for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MATCH_IOU = 0.5


@dataclass
class InstanceSet:
    masks: list[np.ndarray]
    scores: list[float]
    shape: tuple[int, int] | None = None

    def __post_init__(self):
        self.masks = [np.asarray(m, dtype=bool) for m in self.masks]
        self.scores = [float(s) for s in self.scores] if self.scores is not None else [1.0] * len(self.masks)
        if len(self.scores) != len(self.masks):
            raise ValueError(f"{len(self.masks)} masks but {len(self.scores)} scores")
        shapes = {m.shape for m in self.masks}
        if self.shape is not None:
            shapes.add(tuple(self.shape))
        if len(shapes) > 1:
            raise ValueError(f"instance masks disagree on dims: {sorted(shapes)}")
        if self.shape is None and self.masks:
            self.shape = self.masks[0].shape
        for s in self.scores:
            if not 0.0 <= s <= 1.0:
                raise ValueError(f"score {s} outside [0, 1]")

    def __len__(self) -> int:
        return len(self.masks)

    def resolved(self) -> list[np.ndarray]:
        """Masks with overlaps removed: higher scores claim contested pixels,
        ties go to the earlier instance."""
        if not self.masks:
            return []
        order = sorted(range(len(self.masks)), key=lambda i: -self.scores[i])
        claimed = np.zeros(self.shape, dtype=bool)
        out = [None] * len(self.masks)
        for i in order:
            out[i] = self.masks[i] & ~claimed
            claimed |= self.masks[i]
        return out

    def union(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=bool)
        for m in self.masks:
            out |= m
        return out

    def label_map(self) -> np.ndarray:
        """Indexed map: 0 background, ``i + 1`` for instance ``i``."""
        labels = np.zeros(self.shape, dtype=np.int64)
        for i, m in enumerate(self.resolved()):
            labels[m] = i + 1
        return labels

    @classmethod
    def from_label_map(cls, labels) -> "InstanceSet":
        labels = np.asarray(labels)
        ids = [int(i) for i in np.unique(labels) if i != 0]
        return cls([labels == i for i in ids], [1.0] * len(ids), labels.shape)


@dataclass
class MatchResult:
    pairs: list[tuple[int, int, float]]
    unmatched_pred: list[int]
    unmatched_gt: list[int]


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"mask dims differ: {list(a.shape)} vs {list(b.shape)}")


def mask_iou(a, b) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    _check_dims(a, b)
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 0.0
    return int(np.count_nonzero(a & b)) / union


def match_instances(pred: InstanceSet, gt: InstanceSet) -> MatchResult:
    """Greedy matching in descending IoU among pairs with IoU > 0.5."""
    if pred.shape is not None and gt.shape is not None and tuple(pred.shape) != tuple(gt.shape):
        raise ValueError(f"prediction dims {list(pred.shape)} != ground-truth dims {list(gt.shape)}")
    pm, gm = pred.resolved(), gt.resolved()
    candidates = []
    for i, p in enumerate(pm):
        for j, g in enumerate(gm):
            iou = mask_iou(p, g)
            if iou > MATCH_IOU:
                candidates.append((-iou, i, j))
    candidates.sort()
    used_p, used_g, pairs = set(), set(), []
    for neg, i, j in candidates:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        pairs.append((i, j, -neg))
    pairs.sort(key=lambda t: (t[0], t[1]))
    return MatchResult(pairs, [i for i in range(len(pm)) if i not in used_p],
                       [j for j in range(len(gm)) if j not in used_g])


def caq(match: MatchResult) -> tuple[float, float, float]:
    tp, fn = len(match.pairs), len(match.unmatched_gt)
    sq = math.fsum(p[2] for p in match.pairs) / tp if tp else 0.0
    rq = tp / (tp + fn) if tp + fn else 0.0
    return sq, rq, sq * rq


def _f_from_counts(inter: int, n_pred: int, n_gt: int) -> float:
    p = inter / n_pred if n_pred else 0.0
    r = inter / n_gt if n_gt else 0.0
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def f_measure(pred_union, gt_union) -> float:
    """Pixel-level F1 of the predicted vs ground-truth moving pixels."""
    a = np.asarray(pred_union, dtype=bool)
    b = np.asarray(gt_union, dtype=bool)
    _check_dims(a, b)
    return _f_from_counts(int(np.count_nonzero(a & b)), int(a.sum()), int(b.sum()))


def bg_iou(pred_union, gt_union) -> float:
    a = np.asarray(pred_union, dtype=bool)
    b = np.asarray(gt_union, dtype=bool)
    _check_dims(a, b)
    return mask_iou(~a, ~b)


@dataclass
class MetricReport:
    sq: float
    rq: float
    caq: float
    f_measure: float
    bg_iou: float
    tp: int
    fn: int
    fp: int
    panoptic_rq: float
    counts: dict = field(default_factory=dict, repr=False)

    COLUMNS = ("sq", "rq", "caq", "f_measure", "bg_iou", "tp", "fn", "fp", "panoptic_rq")

    def row(self) -> dict:
        return {k: getattr(self, k) for k in self.COLUMNS}


def _panoptic_rq(tp, fp, fn) -> float:
    d = tp + 0.5 * fp + 0.5 * fn
    return tp / d if d else 0.0


def evaluate(pred: InstanceSet, gt: InstanceSet) -> MetricReport:
    match = match_instances(pred, gt)
    sq, rq, q = caq(match)
    pu = np.zeros(gt.shape if gt.shape is not None else pred.shape, dtype=bool)
    if len(pred):
        pu = pred.union()
    gu = gt.union() if len(gt) else np.zeros_like(pu)
    _check_dims(pu, gu)
    tp, fn, fp = len(match.pairs), len(match.unmatched_gt), len(match.unmatched_pred)
    counts = {
        "iou_sum": math.fsum(p[2] for p in match.pairs),
        "fg_inter": int(np.count_nonzero(pu & gu)), "fg_pred": int(pu.sum()), "fg_gt": int(gu.sum()),
        "bg_inter": int(np.count_nonzero(~pu & ~gu)), "bg_union": int(np.count_nonzero(~pu | ~gu)),
    }
    return MetricReport(sq, rq, q, f_measure(pu, gu), bg_iou(pu, gu), tp, fn, fp,
                        _panoptic_rq(tp, fp, fn), counts)


def aggregate(reports: list[MetricReport]) -> MetricReport:
    """Dataset-level scores from summed counts (order-independent sums)."""
    tp = sum(r.tp for r in reports)
    fn = sum(r.fn for r in reports)
    fp = sum(r.fp for r in reports)
    c = {k: sum(r.counts[k] for r in reports) for k in ("fg_inter", "fg_pred", "fg_gt", "bg_inter", "bg_union")}
    iou_sum = math.fsum(r.counts["iou_sum"] for r in reports)
    sq = iou_sum / tp if tp else 0.0
    rq = tp / (tp + fn) if tp + fn else 0.0
    bg = c["bg_inter"] / c["bg_union"] if c["bg_union"] else 0.0
    c["iou_sum"] = iou_sum
    return MetricReport(sq, rq, sq * rq, _f_from_counts(c["fg_inter"], c["fg_pred"], c["fg_gt"]), bg,
                        tp, fn, fp, _panoptic_rq(tp, fp, fn), c)
