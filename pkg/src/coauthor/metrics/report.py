"""Aggregate metric report and its CLI-facing text rendering."""

from __future__ import annotations

from dataclasses import dataclass, field

from .correction import CorrectionStats
from .rouge import RougeScore


@dataclass
class MetricReport:
    shr: float | None = None
    rouge1: RougeScore | None = None
    rouge2: RougeScore | None = None
    rougeL: RougeScore | None = None
    correction: CorrectionStats | None = None
    inputs: dict[str, str] = field(default_factory=dict)  # input name -> sha256

    def to_dict(self) -> dict:
        return {
            "shr": self.shr,
            "rouge1": list(self.rouge1) if self.rouge1 else None,
            "rouge2": list(self.rouge2) if self.rouge2 else None,
            "rougeL": list(self.rougeL) if self.rougeL else None,
            "correction": self.correction.to_dict() if self.correction else None,
            "inputs": dict(self.inputs),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricReport":
        def triple(key):
            return RougeScore(*data[key]) if data.get(key) else None

        return cls(
            shr=data.get("shr"),
            rouge1=triple("rouge1"),
            rouge2=triple("rouge2"),
            rougeL=triple("rougeL"),
            correction=CorrectionStats.from_dict(data["correction"])
            if data.get("correction")
            else None,
            inputs=dict(data.get("inputs", {})),
        )


def render_report(report: MetricReport) -> str:
    """Structured text rendering with input hashes for reproducibility."""
    lines = ["metric-report"]
    for name, digest in sorted(report.inputs.items()):
        lines.append(f"input {name} sha256={digest}")
    if report.shr is not None:
        lines.append(f"soft-heading-recall {report.shr:.6f}")
    for label, score in (
        ("rouge-1", report.rouge1),
        ("rouge-2", report.rouge2),
        ("rouge-l", report.rougeL),
    ):
        if score is not None:
            lines.append(
                f"{label} precision={score.precision:.6f} "
                f"recall={score.recall:.6f} f1={score.f1:.6f}"
            )
    if report.correction is not None:
        c = report.correction
        lines.append(
            f"correction mode={c.mode} n={c.n} m={c.m} s={c.s} rate={c.rate:.6f}"
        )
    return "\n".join(lines)
