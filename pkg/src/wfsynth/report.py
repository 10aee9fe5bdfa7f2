"""Write evaluation results: JSON document, CSV tables and PNG figures."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Mapping

from wfsynth.evaluation import EvalResult, Metrics, Rates


def _rows(table: Mapping[Any, Rates], label: str) -> list[dict]:
    return [
        {label: key, "subtasks": r.subtasks, "cases": r.cases,
         "pass_rate": f"{r.pass_rate:.2f}", "resolve_rate": f"{r.resolve_rate:.2f}"}
        for key, r in table.items()
    ]


def write_csv(path: Path, rows: list[dict]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["empty"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _bar_figure(path: Path, table: Mapping[Any, Rates], title: str, xlabel: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = [str(k) for k in table]
    xs = range(len(labels))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(labels) + 2), 3.2))
    ax.bar([x - width / 2 for x in xs], [r.pass_rate for r in table.values()], width, label="%Pas.")
    ax.bar([x + width / 2 for x in xs], [r.resolve_rate for r in table.values()], width, label="%Res.")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels)
    ax.set_ylim(0, 105)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("rate (%)")
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def write_report(out_dir: str | Path, result: EvalResult | None = None, metrics: Metrics | None = None,
                 figures: bool = True) -> dict[str, Path]:
    """Write results.json, per_round.csv, per_domain.csv and (optionally) two PNG figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics = metrics or (result.metrics if result else None)
    if metrics is None:
        raise ValueError("nothing to report")
    doc = result.to_json() if result is not None else {}
    doc["metrics"] = metrics.to_json()
    paths = {"results": out / "results.json", "per_round": out / "per_round.csv", "per_domain": out / "per_domain.csv"}
    paths["results"].write_text(json.dumps(doc, indent=2, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8")
    round_rows = _rows(metrics.by_round, "round")
    o = metrics.overall
    round_rows.append({"round": "all", "subtasks": o.subtasks, "cases": o.cases,
                       "pass_rate": f"{o.pass_rate:.2f}", "resolve_rate": f"{o.resolve_rate:.2f}"})
    write_csv(paths["per_round"], round_rows)
    write_csv(paths["per_domain"], _rows(metrics.by_domain, "domain"))
    if figures:
        paths["round_figure"] = out / "per_round.png"
        paths["domain_figure"] = out / "per_domain.png"
        _bar_figure(paths["round_figure"], metrics.by_round, "Rates by dialogue round", "round")
        _bar_figure(paths["domain_figure"], metrics.by_domain, "Rates by domain", "domain")
    return paths
