"""Report figures rendered to files next to the JSON/TSV output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .report import MetricReport


def render_report_figures(report: MetricReport, out_dir: str | Path) -> list[Path]:
    """Write the per-intent and (when present) per-language bar charts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    intents = sorted({i for cells in report.per_intent.values() for i in cells})
    if intents:
        fig, ax = plt.subplots(figsize=(7, 4))
        width = 0.38
        xs = range(len(intents))
        for offset, qtype, color in ((-width / 2, "TCQ", "#31669e"), (width / 2, "TAQ", "#c45a4d")):
            cells = report.per_intent.get(qtype, {})
            values = [cells.get(i, 0.0) for i in intents]
            ax.bar([x + offset for x in xs], values, width, label=qtype, color=color)
        ax.set_xticks(list(xs))
        ax.set_xticklabels(intents)
        ax.set_ylim(0, 1.05)
        ax.set_ylabel(f"nDCG@{report.k}")
        ax.set_title(
            f"{report.retriever or 'retriever'}: overall {report.overall:.3f}, "
            f"gap {report.gap:.3f}"
        )
        ax.legend()
        fig.tight_layout()
        path = out / "ndcg_by_intent.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    if len(report.per_language) > 1:
        langs = sorted(report.per_language)
        fig, ax = plt.subplots(figsize=(7, 4))
        width = 0.38
        xs = range(len(langs))
        for offset, key, label, color in (
            (-width / 2, "tcq_avg", "TCQ", "#31669e"),
            (width / 2, "taq_avg", "TAQ", "#c45a4d"),
        ):
            values = [report.per_language[lang].get(key) or 0.0 for lang in langs]
            ax.bar([x + offset for x in xs], values, width, label=label, color=color)
        ax.set_xticks(list(xs))
        ax.set_xticklabels(langs)
        ax.set_ylim(0, 1.05)
        ax.set_ylabel(f"nDCG@{report.k}")
        ax.set_title("cross-lingual retrieval")
        ax.legend()
        fig.tight_layout()
        path = out / "ndcg_by_language.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    return written
