"""Scoring detection flags against investigation labels."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable

from .detect import DetectionFlag
from .errors import MissingLabelError, UndefinedRateError
from .registry import InvestigationLabel

CONFUSION_COLUMNS = ("alpha", "tp", "fp", "fn", "tn", "recall")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows detected / not detected, columns under / not under investigation."""

    alpha: float
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def format(self) -> str:
        w = max(len(str(x)) for x in (self.tp, self.fp, self.fn, self.tn, 3))
        return "\n".join(
            [
                f"alpha={self.alpha:g}",
                f"{'':14}{'Inv.':>{w + 2}}{'No inv.':>{w + 8}}",
                f"{'Detected':14}{self.tp:>{w + 2}}{self.fp:>{w + 8}}",
                f"{'Not detected':14}{self.fn:>{w + 2}}{self.tn:>{w + 8}}",
            ]
        )


def confusion_matrix(flags: Iterable[DetectionFlag], labels, alpha: float) -> ConfusionMatrix:
    """Count (detected, investigated) pairs at ``alpha``.

    ``labels`` maps ``(product, exporter)`` to an ``InvestigationLabel`` or is
    an iterable of labels.  Detection is re-derived from each flag's p-value,
    so flags computed at any level can be scored at any other.
    """
    if not isinstance(labels, dict):
        labels = {lab.key: lab for lab in labels}
    flags = list(flags)
    unlabeled = [f.key for f in flags if (f.product, f.exporter) not in labels]
    if unlabeled:
        raise MissingLabelError(f"no investigation label for flows: {unlabeled}")
    tp = fp = fn = tn = 0
    for f in flags:
        hit = f.fit.p_value < alpha
        pos = labels[(f.product, f.exporter)].under_investigation
        if hit and pos:
            tp += 1
        elif hit:
            fp += 1
        elif pos:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(alpha, tp, fp, fn, tn)


def detection_rate(cm: ConfusionMatrix) -> float:
    """Recall ``tp / (tp + fn)``."""
    if cm.tp + cm.fn == 0:
        raise UndefinedRateError("no flows under investigation; detection rate undefined")
    return cm.tp / (cm.tp + cm.fn)


def write_confusion(matrices: Iterable[ConfusionMatrix], stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CONFUSION_COLUMNS)
    for cm in matrices:
        try:
            recall = f"{detection_rate(cm):.6f}"
        except UndefinedRateError:
            recall = ""
        w.writerow((f"{cm.alpha:g}", cm.tp, cm.fp, cm.fn, cm.tn, recall))


def labels_for(flags: Iterable[DetectionFlag], registry, level: str = "flow") -> dict:
    """Registry labels for every flagged flow (absent investigations count as negatives)."""
    out = {}
    for f in flags:
        lab: InvestigationLabel = registry.label(f.product, f.exporter, level)
        out[(f.product, f.exporter)] = lab
    return out
