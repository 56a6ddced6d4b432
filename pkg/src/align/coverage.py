"""
Modality coverage statistics (how unevenly the modalities cover a corpus)
"""

from dataclasses import dataclass
from itertools import combinations
from typing import Dict, Sequence, Tuple

from .records import MultimodalRecord


@dataclass
class CoverageReport:
    total: int
    counts: Dict[str, int]
    pairwise: Dict[Tuple[str, str], int]
    full_intersection: int

    @property
    def full_ratio(self) -> float:
        return self.full_intersection / self.total if self.total else 0.0

    def to_dict(self) -> Dict:
        return {
            "total": self.total,
            "counts": dict(self.counts),
            "pairwise": {f"{a}+{b}": n for (a, b), n in self.pairwise.items()},
            "full_intersection": self.full_intersection,
            "full_ratio": self.full_ratio,
        }


def coverage_stats(records: Sequence[MultimodalRecord], modalities: Sequence[str]) -> CoverageReport:
    counts = {m: sum(1 for r in records if r.has(m)) for m in modalities}
    pairwise = {
        (a, b): sum(1 for r in records if r.has(a) and r.has(b))
        for a, b in combinations(modalities, 2)
    }
    full = sum(1 for r in records if all(r.has(m) for m in modalities))
    return CoverageReport(total=len(records), counts=counts, pairwise=pairwise, full_intersection=full)
