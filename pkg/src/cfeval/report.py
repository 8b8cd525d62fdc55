"""Per-explainer score tables, rankings and correlation summaries."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ConfigError
from .metrics import MethodScores
from .rankstats import Ranking, direction_of, kendall_tau, rank, spearman_rho

GOLD_KEY = "ground_truth"
MODE_TAGS = {"discrete": "disc.", "continuous": "cont."}
MULTI_COLUMNS = ("comp_delete", "suff_delete", "dfr_delete", "ces_soft", GOLD_KEY)
_REMOVAL_TAGS = {"delete": "del.", "mask": "mask"}


def row_label(key: str, cf_mode: str = "discrete") -> str:
    tag = MODE_TAGS.get(cf_mode, cf_mode)
    fixed = {
        "validity": "Validity",
        "proximity": "Proximity",
        "ces": f"C ({tag})",
        "validity_soft": "Validity_soft",
        "proximity_soft": "Proximity (soft)",
        "ces_soft": f"C_soft ({tag})",
        GOLD_KEY: "GroundTruth*",
    }
    if key in fixed:
        return fixed[key]
    base, _, mode = key.rpartition("_")
    names = {"comp": "Comp.", "suff": "Suff.", "dfr": "DFR"}
    if base in names:
        return f"{names[base]} ({_REMOVAL_TAGS.get(mode, mode)})"
    return key


def ordinal(r: float) -> str:
    if float(r).is_integer():
        n = int(r)
        suffix = "th" if 10 <= n % 100 <= 20 else {1: "st", 2: "nd", 3: "rd"}.get(n % 10, "th")
        return f"{n}{suffix}"
    return f"{r:g}th"


def metric_rows(
    scores: Mapping[str, Sequence[MethodScores]], gold_fractions: Mapping[str, float] | None = None
) -> dict[str, dict[str, float]]:
    """Flatten per-explainer score bundles into ``metric key -> explainer -> value``."""
    rows: dict[str, dict[str, float]] = {}

    def put(key, name, value):
        rows.setdefault(key, {})[name] = float(value)

    modes = []
    for bundle in scores.values():
        for ms in bundle:
            if ms.removal_mode not in modes:
                modes.append(ms.removal_mode)
    for mode in modes:
        for name, bundle in scores.items():
            for ms in bundle:
                if ms.removal_mode == mode:
                    put(f"comp_{mode}", name, ms.comp)
                    put(f"suff_{mode}", name, ms.suff)
                    put(f"dfr_{mode}", name, ms.dfr)
    for key in ("validity", "proximity", "ces", "validity_soft", "proximity_soft", "ces_soft"):
        for name, bundle in scores.items():
            put(key, name, getattr(bundle[0], key))
    for name, bundle in scores.items():
        gt = gold_fractions[name] if gold_fractions is not None else bundle[0].ground_truth_fraction
        put(GOLD_KEY, name, gt)
    return rows


def rank_table(
    rows: Mapping[str, Mapping[str, float]], gold_key: str = GOLD_KEY
) -> tuple[dict[str, Ranking], dict[str, dict[str, float] | None]]:
    """Rank every directed row and correlate each ranking with the gold row."""
    rankings = {}
    for key, values in rows.items():
        direction = direction_of(key)
        if direction is None:
            continue
        names = list(values)
        rankings[key] = rank([values[n] for n in names], direction, names)
    correlations: dict[str, dict[str, float] | None] = {}
    gold = rankings.get(gold_key)
    for key, r in rankings.items():
        if key == gold_key:
            continue
        if gold is None or len(r.ranks) < 2:
            correlations[key] = None
            continue
        g = [gold.rank_of(n) for n in r.method_names]
        correlations[key] = {"tau": kendall_tau(r.ranks, g), "rho": spearman_rho(r.ranks, g)}
    return rankings, correlations


@dataclass
class EvaluationReport:
    dataset_id: str
    cf_mode: str
    L: int
    explainers: list[str]
    scores: dict[str, list[MethodScores]]
    metrics: dict[str, dict[str, float]]
    rankings: dict[str, Ranking]
    correlations: dict[str, dict[str, float] | None]
    config: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "cf_mode": self.cf_mode,
            "L": self.L,
            "explainers": list(self.explainers),
            "scores": {n: [ms.to_dict() for ms in b] for n, b in self.scores.items()},
            "metrics": self.metrics,
            "rankings": {k: r.to_dict() for k, r in self.rankings.items()},
            "correlations": self.correlations,
            "config": self.config,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        return cls(
            dataset_id=d["dataset_id"],
            cf_mode=d["cf_mode"],
            L=d["L"],
            explainers=list(d["explainers"]),
            scores={n: [MethodScores(**ms) for ms in b] for n, b in d["scores"].items()},
            metrics=d["metrics"],
            rankings={k: Ranking.from_dict(r) for k, r in d["rankings"].items()},
            correlations=d["correlations"],
            config=d.get("config", {}),
            notes=list(d.get("notes", [])),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def build_report(
    scores: Mapping[str, Sequence[MethodScores] | MethodScores],
    gold_fractions: Mapping[str, float] | None = None,
    *,
    dataset_id: str = "",
    cf_mode: str = "discrete",
    L: int = 1,
    config: dict | None = None,
) -> EvaluationReport:
    """Rank each metric in its direction and correlate it with GroundTruth*.

    With a single explainer the correlations are undefined and stored as
    ``None``.
    """
    if not scores:
        raise ValueError("a report needs at least one explainer")
    bundles = {n: ([s] if isinstance(s, MethodScores) else list(s)) for n, s in scores.items()}
    rows = metric_rows(bundles, gold_fractions)
    rankings, correlations = rank_table(rows)
    notes = []
    if len(bundles) < 2:
        notes.append("fewer than two explainers: rank correlations are undefined")
    if cf_mode == "discrete" and any(k.endswith("_mask") for k in rows):
        notes.append("mask-mode erasure on categorical features zeroes the one-hot span (non-standard)")
    return EvaluationReport(
        dataset_id=dataset_id,
        cf_mode=cf_mode,
        L=L,
        explainers=list(bundles),
        scores=bundles,
        metrics=rows,
        rankings=rankings,
        correlations=correlations,
        config=dict(config or {}),
        notes=notes,
    )


# ------------------------------------------------------------------ render


def _cell(report: EvaluationReport, key: str, name: str) -> str:
    text = f"{report.metrics[key][name]:.4f}"
    if key in report.rankings:
        star = "*" if key == GOLD_KEY else ""
        text += f" ({ordinal(report.rankings[key].rank_of(name))}{star})"
    return text


def _md_table(header: list[str], body: list[list[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in body]
    return "\n".join(lines) + "\n"


def table1_markdown(report: EvaluationReport) -> str:
    names = report.explainers
    body = [[row_label(k, report.cf_mode)] + [_cell(report, k, n) for n in names] for k in report.metrics]
    title = f"Scores on {report.dataset_id or 'dataset'} (L={report.L}, counterfactuals: {report.cf_mode})\n\n"
    return title + _md_table(["Metric"] + names, body)


def _fmt_corr(c, key):
    return "n/a" if c is None else f"{c[key]:.4f}"


def table2_markdown(report: EvaluationReport) -> str:
    body = [
        [row_label(k, report.cf_mode), _fmt_corr(c, "tau"), _fmt_corr(c, "rho")]
        for k, c in report.correlations.items()
    ]
    title = f"Agreement with GroundTruth* on {report.dataset_id or 'dataset'}\n\n"
    return title + _md_table(["Metric", "tau", "rho"], body)


def table3_markdown(report: EvaluationReport) -> str:
    """Explainers as rows, a fixed column subset, correlation rows at the bottom."""
    cols = [k for k in MULTI_COLUMNS if k in report.metrics]
    header = ["Method"] + [row_label(k, report.cf_mode) for k in cols]
    body = [[n] + [_cell(report, k, n) for k in cols] for n in report.explainers]
    for stat in ("tau", "rho"):
        body.append([stat] + ["" if k == GOLD_KEY else _fmt_corr(report.correlations.get(k), stat) for k in cols])
    return f"Multi-feature explanations (L={report.L})\n\n" + _md_table(header, body)


def scores_csv(report: EvaluationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "explainer", "value", "rank"])
    for key, values in report.metrics.items():
        for name, value in values.items():
            r = report.rankings[key].rank_of(name) if key in report.rankings else ""
            w.writerow([key, name, repr(value), r])
    return buf.getvalue()


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(report: EvaluationReport, out_dir, formats: Sequence[str] = ("json", "markdown", "csv")) -> list[Path]:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for fmt in formats:
            if fmt == "json":
                files = {"report.json": report.to_json()}
            elif fmt == "markdown":
                files = {"table1.md": table1_markdown(report), "table2.md": table2_markdown(report)}
                if report.L >= 2:
                    files["table3.md"] = table3_markdown(report)
            elif fmt == "csv":
                files = {"scores.csv": scores_csv(report)}
            else:
                raise ConfigError(f"unknown report format {fmt!r}")
            for name, text in files.items():
                atomic_write(out_dir / name, text)
                written.append(out_dir / name)
    except OSError as exc:
        raise ConfigError(f"cannot write report to {out_dir}: {exc}") from None
    return written


def load_report(path) -> EvaluationReport:
    return EvaluationReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
