"""Inter-annotator agreement between two label files."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from tutoreval.stats import cohens_kappa, percent_agreement

logger = logging.getLogger(__name__)

UNDEFINED_VARIANCE = "undefined-variance"


class AgreementError(ValueError):
    pass


@dataclass
class DimensionAgreement:
    dimension: str
    kappa: float
    percent_agreement: float
    n_items: int


@dataclass
class AgreementReport:
    dimensions: list[DimensionAgreement]
    macro_kappa: float
    n_items: int
    warnings: list[str] = field(default_factory=list)

    def kappa(self, dimension: str) -> float:
        return next(d.kappa for d in self.dimensions if d.dimension == dimension)

    def to_dict(self) -> dict:
        return {
            "dimensions": [d.__dict__ for d in self.dimensions],
            "macro_kappa": self.macro_kappa,
            "n_items": self.n_items,
            "warnings": list(self.warnings),
        }

    def to_markdown(self) -> str:
        lines = ["| Dimension | Cohen's kappa | % agreement | n |", "|---|---:|---:|---:|"]
        for d in self.dimensions:
            lines.append(f"| {d.dimension} | {d.kappa:.3f} | {100 * d.percent_agreement:.2f} | {d.n_items} |")
        lines.append(f"| **macro average** | {self.macro_kappa:.3f} | | |")
        return "\n".join(lines) + "\n"


def load_label_file(path: str | Path) -> dict[str, dict[str, object]]:
    """Flatten an annotation export into {item_id: {dimension: label}}.

    Pedagogy exports (``feedback_id`` + ``labels``) map one item per message;
    engagement exports (``per_sentence``) map one item per sentence with
    ``rel`` and, where defined, ``succ``. A generic ``item_id`` + ``labels``
    record is accepted as well.
    """
    path = Path(path)
    items: dict[str, dict[str, object]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                raise AgreementError(f"{path}:{lineno}: invalid JSON") from None
            if "per_sentence" in rec:
                for s in rec["per_sentence"]:
                    labels = {"rel": s["rel"]}
                    if s.get("succ") is not None:
                        labels["succ"] = s["succ"]
                    items[f"{rec['feedback_id']}#{s['sentence_index']}"] = labels
            else:
                item = rec.get("item_id", rec.get("feedback_id"))
                if item is None or not isinstance(rec.get("labels"), dict):
                    raise AgreementError(f"{path}:{lineno}: expected item_id/feedback_id and labels")
                items[str(item)] = dict(rec["labels"])
    return items


def agreement_report(annotations_a, annotations_b) -> AgreementReport:
    """Per-dimension Cohen's kappa and percent agreement plus the macro average.

    Arguments are label-file paths or already-loaded ``{item: {dim: label}}`` maps.
    """
    a = annotations_a if isinstance(annotations_a, dict) else load_label_file(annotations_a)
    b = annotations_b if isinstance(annotations_b, dict) else load_label_file(annotations_b)
    shared = sorted(set(a) & set(b))
    if not shared:
        raise AgreementError("the two label files share no item ids")
    warnings = []
    if len(shared) != len(a) or len(shared) != len(b):
        msg = f"comparing {len(shared)} shared items ({len(a) - len(shared)} only in A, {len(b) - len(shared)} only in B)"
        logger.warning(msg)
        warnings.append(msg)
    dims: list[str] = []
    for item in shared:
        for d in list(a[item]) + list(b[item]):
            if d not in dims:
                dims.append(d)
    results = []
    for dim in dims:
        pairs = [(a[i][dim], b[i][dim]) for i in shared if dim in a[i] and dim in b[i]]
        if not pairs:
            continue
        la = [p[0] for p in pairs]
        lb = [p[1] for p in pairs]
        if (len(set(la)) == 1) != (len(set(lb)) == 1):
            msg = f"{UNDEFINED_VARIANCE}: one annotator used a single label on {dim}; kappa is 0 by construction"
            logger.warning(msg)
            warnings.append(msg)
        results.append(DimensionAgreement(dim, cohens_kappa(la, lb), percent_agreement(la, lb), len(pairs)))
    macro = sum(r.kappa for r in results) / len(results)
    return AgreementReport(results, macro, len(shared), warnings)
