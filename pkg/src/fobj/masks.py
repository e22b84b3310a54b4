"""Point-level mask records, deduplication, and the pseudo-mask bank."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DEDUPE_IOU = 0.8


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """IoU of two point-index sets; 0 when the union is empty."""
    sa, sb = set(np.asarray(a).tolist()), set(np.asarray(b).tolist())
    union = len(sa | sb)
    if union == 0:
        return 0.0
    return len(sa & sb) / union


@dataclass
class MaskRecord:
    scene_id: str
    point_indices: np.ndarray
    score: float
    source: str = ""   # "geo", "sem", or "both"
    epoch: int = -1

    def __post_init__(self):
        self.point_indices = np.unique(np.asarray(self.point_indices, dtype=np.int64))
        if self.point_indices.size == 0:
            raise ValueError("empty mask")


def dedupe_masks(masks: list[MaskRecord],
                 iou_threshold: float = DEFAULT_DEDUPE_IOU) -> list[MaskRecord]:
    """Greedy by descending score: keep a mask iff its IoU with every kept
    mask of the same scene is <= threshold."""
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError("iou_threshold must be in (0, 1]")
    order = sorted(range(len(masks)),
                   key=lambda i: (-masks[i].score, i))  # stable on ties
    kept: list[MaskRecord] = []
    for i in order:
        m = masks[i]
        if all(not (k.scene_id == m.scene_id
                    and mask_iou(k.point_indices, m.point_indices) > iou_threshold)
               for k in kept):
            kept.append(m)
    return kept


class PseudoMaskBank:
    """Per-scene store of positively rewarded masks.

    Insertion keeps the first-discovered copy of near-duplicates (IoU above
    the dedupe threshold), so discovery epochs stay meaningful for the
    exploration statistics.
    """

    def __init__(self, dedupe_iou: float = DEFAULT_DEDUPE_IOU):
        self.dedupe_iou = dedupe_iou
        self.by_scene: dict[str, list[MaskRecord]] = {}

    def add(self, record: MaskRecord) -> bool:
        """Returns True when the mask was new (stored)."""
        stored = self.by_scene.setdefault(record.scene_id, [])
        for m in stored:
            if mask_iou(m.point_indices, record.point_indices) > self.dedupe_iou:
                return False
        stored.append(record)
        return True

    def masks(self, scene_id: str | None = None) -> list[MaskRecord]:
        if scene_id is not None:
            return list(self.by_scene.get(scene_id, []))
        return [m for recs in self.by_scene.values() for m in recs]

    def size(self, scene_id: str | None = None) -> int:
        return len(self.masks(scene_id))

    def save(self, path: str, scene_id: str) -> None:
        recs = [{"point_indices": m.point_indices.tolist(), "score": m.score,
                 "source": m.source, "epoch": m.epoch}
                for m in self.by_scene.get(scene_id, [])]
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"scene_id": scene_id, "masks": recs}, f)

    def load(self, path: str) -> str:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
        sid = doc["scene_id"]
        for r in doc["masks"]:
            self.add(MaskRecord(scene_id=sid,
                                point_indices=np.array(r["point_indices"]),
                                score=r["score"], source=r.get("source", ""),
                                epoch=r.get("epoch", -1)))
        return sid
