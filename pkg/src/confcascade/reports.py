"""Delimited and aligned-text report tables for run directories."""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .ledger import CostModel, PhaseTiming, co2_kg, dollars, format_dollars, total_time
from .metrics import FoldScores, TTestVerdict, paired_t_test


def _f(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6f}"


def write_effectiveness(scores: list[FoldScores], path_csv: Path, path_txt: Path) -> None:
    """Per-method fold scores with mean +/- 95% CI; ties vs the best are marked.

    Markers: '*' best mean, '=' statistically tied with the best (paired t,
    95%), blank otherwise.
    """
    k = len(scores[0].values)
    with path_csv.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method"] + [f"fold{i}" for i in range(k)] + ["mean", "ci_half_width"])
        for s in scores:
            w.writerow([s.method] + [_f(v) for v in s.values] + [_f(s.mean), _f(s.ci_half_width)])

    best = max(scores, key=lambda s: s.mean)
    lines = ["Macro-F1 by method (x100, mean +/- 95% CI half-width)", ""]
    width = max(len(s.method) for s in scores) + 2
    for s in scores:
        if s.method == best.method:
            marker = "*"
        else:
            verdict, _ = paired_t_test(list(best.values), list(s.values))
            marker = "=" if verdict is TTestVerdict.TIE else " "
        lines.append(
            f"{s.method:<{width}} {100.0 * s.mean:6.1f} +/- {100.0 * s.ci_half_width:4.1f}  {marker}"
        )
    lines += ["", "* best mean; = statistically tied with best (paired t-test, 95%)"]
    path_txt.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_ttest_matrix(scores: list[FoldScores], path_csv: Path) -> None:
    with path_csv.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method_a", "method_b", "t", "verdict"])
        for i, a in enumerate(scores):
            for b in scores[i + 1:]:
                verdict, t = paired_t_test(list(a.values), list(b.values))
                w.writerow([a.method, b.method, _f(t), verdict.value])


def write_audit(rows: list[dict], path_csv: Path) -> None:
    """Per-fold routed-subset audit; subset Macro-F1 is NA when empty."""
    cols = ["fold", "threshold", "n_total", "n_routed", "pct_routed",
            "macro_f1_routed", "macro_f1_local", "macro_f1_overall"]
    with path_csv.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([
                r["fold"], _f(r["threshold"]), r["n_total"], r["n_routed"],
                f"{r['pct_routed']:.1f}",
                _f(r["macro_f1_routed"]) if r["macro_f1_routed"] is not None else "NA",
                _f(r["macro_f1_local"]) if r["macro_f1_local"] is not None else "NA",
                _f(r["macro_f1_overall"]),
            ])


def write_cost(timings: list[PhaseTiming], cost_model: CostModel, dataset: str,
               method: str, path_csv: Path, path_txt: Path) -> None:
    """Summary CSV (dataset, method, per-fold/total seconds, dollars, kg CO2)
    plus a phase-level detail CSV and an aligned text table."""
    per_fold, grand = total_time(timings)
    folds = sorted(per_fold)
    mean_fold = grand / len(folds) if folds else 0.0
    usd = dollars(grand, cost_model)
    kg = co2_kg(grand, cost_model)

    with path_csv.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "method", "per_fold_seconds", "total_seconds",
                    "dollars", "kg_co2"])
        w.writerow([dataset, method, _f(mean_fold), _f(grand), _f(usd), _f(kg)])

    detail = path_csv.with_name(path_csv.stem + "_phases.csv")
    with detail.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "method", "fold", "phase", "seconds"])
        for t in timings:
            w.writerow([dataset, method, t.fold, t.phase, _f(t.seconds)])

    lines = [
        f"Cost summary for {dataset} / {method}",
        "",
        f"{'fold':<6}{'seconds':>12}",
    ]
    for f in folds:
        lines.append(f"{f:<6}{per_fold[f]:>12.3f}")
    lines += [
        "",
        f"per-fold mean: {mean_fold:.3f} s",
        f"total:         {grand:.3f} s",
        f"dollars:       ${format_dollars(usd)}  (at ${cost_model.dollars_per_hour}/h)",
        f"CO2:           {kg:.4f} kg  (estimate: {cost_model.gpu_power_kw} kW GPU, "
        f"{cost_model.carbon_intensity} kg/kWh, PUE {cost_model.pue})",
    ]
    path_txt.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_sweep(rows: list[dict], path_csv: Path) -> None:
    with path_csv.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "macro_f1", "instances_sent", "pct", "total_time_s"])
        for r in rows:
            sent = r["instances_sent"]
            w.writerow([
                _f(r["threshold"]), _f(r["macro_f1"]),
                str(sent) if isinstance(sent, int) else _f(sent),
                f"{r['pct']:.1f}", _f(r["total_time_s"]),
            ])


def read_sweep(path_csv: Path) -> list[dict]:
    rows = []
    with path_csv.open(encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append({
                "threshold": float(rec["threshold"]),
                "macro_f1": float(rec["macro_f1"]),
                "instances_sent": float(rec["instances_sent"]),
                "pct": float(rec["pct"]),
                "total_time_s": float(rec["total_time_s"]),
            })
    return rows


def read_effectiveness(path_csv: Path) -> list[FoldScores]:
    out = []
    with path_csv.open(encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            values = tuple(float(v) for k, v in rec.items() if k.startswith("fold"))
            out.append(FoldScores(
                method=rec["method"], values=values,
                mean=float(rec["mean"]), ci_half_width=float(rec["ci_half_width"]),
            ))
    return out
