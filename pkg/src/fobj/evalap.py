"""Class-agnostic instance segmentation metrics.

Average precision follows the standard protocol: predictions sorted by
descending confidence (ties by scene id, then insertion order) are greedily
matched to the unmatched ground-truth mask of highest IoU at or above the
threshold; the precision-recall curve is integrated with all-point
interpolation (precision envelope). AP averages thresholds 0.50..0.95 in
steps of 0.05; AP@50 and AP@25 are the single-threshold values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .masks import MaskRecord, mask_iou

AP_THRESHOLDS = tuple(np.round(np.arange(0.50, 0.96, 0.05), 2))


@dataclass
class EvalReport:
    ap: float
    ap50: float
    ap25: float
    n_gt: int
    n_pred: int
    per_scene: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"ap": self.ap, "ap50": self.ap50, "ap25": self.ap25,
                "n_gt": self.n_gt, "n_pred": self.n_pred,
                "per_scene": self.per_scene}


def iou(mask_a, mask_b) -> float:
    """|A n B| / |A u B| over point-index sets; 0 when the union is empty."""
    return mask_iou(np.asarray(list(mask_a)), np.asarray(list(mask_b)))


def gt_masks_from_instances(instance_ids: np.ndarray) -> list[np.ndarray]:
    """One point-index mask per non-background instance id, ascending."""
    instance_ids = np.asarray(instance_ids)
    return [np.nonzero(instance_ids == i)[0]
            for i in np.unique(instance_ids) if i != -1]


def _sorted_predictions(predictions: list[MaskRecord]):
    order = sorted(range(len(predictions)),
                   key=lambda i: (-predictions[i].score,
                                  predictions[i].scene_id, i))
    return [predictions[i] for i in order]


def _ap_at_threshold(preds_sorted, gt_by_scene, iou_matrix, tau: float) -> float:
    n_gt = sum(len(v) for v in gt_by_scene.values())
    if n_gt == 0:
        raise ValueError("empty ground truth")
    matched = {sid: np.zeros(len(g), dtype=bool) for sid, g in gt_by_scene.items()}
    tp = np.zeros(len(preds_sorted))
    for pi, pred in enumerate(preds_sorted):
        ious = iou_matrix[pi]
        if ious is None:
            continue
        avail = ~matched[pred.scene_id]
        cand = np.where(avail & (ious >= tau), ious, -1.0)
        if cand.size and cand.max() >= 0.0:
            gi = int(np.argmax(cand))
            matched[pred.scene_id][gi] = True
            tp[pi] = 1.0
    if not len(preds_sorted):
        return 0.0
    ctp = np.cumsum(tp)
    precision = ctp / np.arange(1, len(tp) + 1)
    recall = ctp / n_gt
    # all-point interpolation: running max of precision from the right
    env = np.maximum.accumulate(precision[::-1])[::-1]
    prev_r = 0.0
    area = 0.0
    for r, p in zip(recall, env):
        area += (r - prev_r) * p
        prev_r = r
    return float(area)


def evaluate_ap(predictions: list[MaskRecord],
                gt_instances_by_scene: dict[str, np.ndarray]) -> EvalReport:
    """AP / AP@50 / AP@25 over one or more scenes."""
    gt_by_scene = {sid: gt_masks_from_instances(inst)
                   for sid, inst in gt_instances_by_scene.items()}
    n_gt = sum(len(v) for v in gt_by_scene.values())
    if n_gt == 0:
        raise ValueError("empty ground truth")
    preds = _sorted_predictions(list(predictions))
    iou_matrix = []
    for p in preds:
        gts = gt_by_scene.get(p.scene_id)
        if gts is None:
            iou_matrix.append(None)
        else:
            iou_matrix.append(np.array([mask_iou(p.point_indices, g)
                                        for g in gts]))
    ap_by_tau = {tau: _ap_at_threshold(preds, gt_by_scene, iou_matrix, tau)
                 for tau in AP_THRESHOLDS + (0.25,)}
    per_scene = {}
    for sid in gt_by_scene:
        sp = [p for p in predictions if p.scene_id == sid]
        per_scene[sid] = {"n_gt": len(gt_by_scene[sid]), "n_pred": len(sp)}
    return EvalReport(
        ap=float(np.mean([ap_by_tau[t] for t in AP_THRESHOLDS])),
        ap50=ap_by_tau[0.50], ap25=ap_by_tau[0.25],
        n_gt=n_gt, n_pred=len(preds), per_scene=per_scene)


def clean_pseudo_labels(predictions: list[MaskRecord],
                        gt_instances_by_scene: dict[str, np.ndarray]) -> list[MaskRecord]:
    """Replace each prediction whose best-IoU ground-truth overlap exceeds 0.5
    with that ground-truth mask; discard the rest; collapse duplicates."""
    gt_by_scene = {sid: gt_masks_from_instances(inst)
                   for sid, inst in gt_instances_by_scene.items()}
    taken = set()
    out = []
    for p in predictions:
        gts = gt_by_scene.get(p.scene_id, [])
        if not gts:
            continue
        ious = [mask_iou(p.point_indices, g) for g in gts]
        gi = int(np.argmax(ious))
        if ious[gi] > 0.5 and (p.scene_id, gi) not in taken:
            taken.add((p.scene_id, gi))
            out.append(MaskRecord(scene_id=p.scene_id,
                                  point_indices=gts[gi].copy(),
                                  score=p.score, source="cleaned"))
    return out


@dataclass
class DiscoveryStats:
    checkpoints: list
    n_objects: list
    accuracy: list
    n_new: list
    accuracy_of_new: list

    def rows(self):
        for i, c in enumerate(self.checkpoints):
            yield {"checkpoint": c, "n_objects": self.n_objects[i],
                   "accuracy": self.accuracy[i], "n_new": self.n_new[i],
                   "accuracy_of_new": self.accuracy_of_new[i]}


def discovery_stats(bank_masks: list[MaskRecord],
                    gt_instances_by_scene: dict[str, np.ndarray],
                    checkpoints: list[int]) -> DiscoveryStats:
    """Exploration dynamics: cumulative unique masks per checkpoint epoch,
    their accuracy (IoU > 0.5 to some ground truth), and the same for masks
    first discovered since the previous checkpoint. Uniqueness uses the
    shared dedupe rule (IoU > 0.8 against any earlier mask)."""
    gt_by_scene = {sid: gt_masks_from_instances(inst)
                   for sid, inst in gt_instances_by_scene.items()}

    def accurate(m: MaskRecord) -> bool:
        return any(mask_iou(m.point_indices, g) > 0.5
                   for g in gt_by_scene.get(m.scene_id, []))

    ordered = sorted(bank_masks, key=lambda m: m.epoch)
    unique: list[MaskRecord] = []
    for m in ordered:
        if all(not (u.scene_id == m.scene_id
                    and mask_iou(u.point_indices, m.point_indices) > 0.8)
               for u in unique):
            unique.append(m)

    checkpoints = sorted(checkpoints)
    n_objects, acc, n_new, acc_new = [], [], [], []
    prev = -1
    for c in checkpoints:
        upto = [m for m in unique if m.epoch < c]
        fresh = [m for m in upto if m.epoch >= prev]
        n_objects.append(len(upto))
        acc.append(float(np.mean([accurate(m) for m in upto])) if upto else 0.0)
        n_new.append(len(fresh))
        acc_new.append(float(np.mean([accurate(m) for m in fresh])) if fresh else 0.0)
        prev = c
    return DiscoveryStats(checkpoints=checkpoints, n_objects=n_objects,
                          accuracy=acc, n_new=n_new, accuracy_of_new=acc_new)
