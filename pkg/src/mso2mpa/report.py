"""Check reports: delimited output plus optional rendered figures.

Reports are plain text and TSV so they diff cleanly in CI; rows are sorted
by case key, which keeps byte-identical reruns byte-identical.  Figures are
opt-in (matplotlib, Agg backend) and land next to the TSV.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional


@dataclass(frozen=True)
class CaseResult:
    key: str  # canonical tree form (replayable)
    formula: str
    oracle: bool
    verdict: str  # accept / reject / neither
    rounds: int

    @property
    def agrees(self) -> bool:
        return (self.verdict == "accept") == self.oracle


@dataclass
class CheckReport:
    title: str
    cases: list = field(default_factory=list)

    def add(self, case: CaseResult):
        self.cases.append(case)

    def summary(self) -> dict:
        agree = sum(1 for c in self.cases if c.agrees)
        neither = sum(1 for c in self.cases if c.verdict == "neither")
        return {
            "total": len(self.cases),
            "agree": agree,
            "disagree": len(self.cases) - agree,
            "neither": neither,
        }

    def first_counterexample(self) -> Optional[CaseResult]:
        for case in sorted(self.cases, key=lambda c: (c.formula, c.key)):
            if not case.agrees:
                return case
        return None

    @property
    def ok(self) -> bool:
        return self.summary()["disagree"] == 0


def write_check_report(
    report: CheckReport, out_dir, basename: str, figures: bool = False
) -> list:
    """Write <basename>.tsv and <basename>_summary.txt, plus PNGs if asked."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    tsv_path = out_dir / f"{basename}.tsv"
    lines = ["case\tformula\toracle\tverdict\trounds\tagree"]
    for case in sorted(report.cases, key=lambda c: (c.formula, c.key)):
        lines.append(
            f"{case.key}\t{case.formula}\t{int(case.oracle)}\t{case.verdict}"
            f"\t{case.rounds}\t{int(case.agrees)}"
        )
    tsv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    paths.append(tsv_path)

    summary = report.summary()
    summary_path = out_dir / f"{basename}_summary.txt"
    text = [f"title: {report.title}"]
    for key in ("total", "agree", "disagree", "neither"):
        text.append(f"{key}: {summary[key]}")
    counterexample = report.first_counterexample()
    if counterexample is not None:
        text.append(f"first_counterexample: {counterexample.key}")
        text.append(f"counterexample_formula: {counterexample.formula}")
    summary_path.write_text("\n".join(text) + "\n", encoding="utf-8")
    paths.append(summary_path)

    if figures:
        paths.extend(_render_figures(report, out_dir, basename))
    return paths


def _render_figures(report: CheckReport, out_dir: Path, basename: str) -> list:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    summary = report.summary()

    fig, ax = plt.subplots(figsize=(4.2, 3.0))
    keys = ["agree", "disagree", "neither"]
    ax.bar(keys, [summary[k] for k in keys], color=["#4a7", "#c55", "#aaa"])
    ax.set_ylabel("cases")
    ax.set_title(report.title)
    fig.tight_layout()
    agreement_path = out_dir / f"{basename}_agreement.png"
    fig.savefig(agreement_path)
    plt.close(fig)
    paths.append(agreement_path)

    rounds = [c.rounds for c in report.cases]
    if rounds:
        fig, ax = plt.subplots(figsize=(4.2, 3.0))
        top = max(rounds)
        ax.hist(rounds, bins=range(0, top + 2), color="#47a", rwidth=0.9)
        ax.set_xlabel("rounds to verdict")
        ax.set_ylabel("cases")
        ax.set_title(f"{report.title}: rounds")
        fig.tight_layout()
        rounds_path = out_dir / f"{basename}_rounds.png"
        fig.savefig(rounds_path)
        plt.close(fig)
        paths.append(rounds_path)
    return paths


def write_stage_figure(stats: dict, out_dir, basename: str) -> Optional[Path]:
    """Bar chart of materialized states per pipeline stage."""
    if not stats:
        return None
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stages = list(stats)
    counts = [stats[s]["materialized"] for s in stages]
    fig, ax = plt.subplots(figsize=(4.2, 3.0))
    ax.bar(stages, counts, color="#47a")
    ax.set_ylabel("materialized states")
    ax.set_title("states per stage")
    fig.tight_layout()
    path = out_dir / f"{basename}_stages.png"
    fig.savefig(path)
    plt.close(fig)
    return path
