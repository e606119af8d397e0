"""Render tables, the delta chart and summary.json from plain payload dicts.

Rendering is a pure function of the summary payload: the pipeline builds the
payload once and every emitted file is derived from it.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Mapping, Sequence

from tutoreval.perception import ROW_ORDER

MODEL_TITLES = {"pedagogy_only": "Pedagogy-only", "engagement_only": "Engagement-only", "combined": "Combined"}
COVARIATE_TITLES = {"rel_score": "RelScore", "succ_score": "SuccScore", "baseline_tutor": "BaselineTutor"}
METRIC_TITLES = {"rel": "RelScore", "succ": "SuccScore"}


class ReportError(ValueError):
    pass


# -- formatting helpers ------------------------------------------------------------

def format_p(p: float | None, alpha: float = 0.05) -> str:
    if p is None or (isinstance(p, float) and math.isnan(p)):
        return "n/a"
    text = "<.001" if p < 0.001 else f"{p:.3f}"
    return text + ("*" if p < alpha else "")


def stars(p: float | None) -> str:
    if p is None or math.isnan(p):
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def _bold(text: str, on: bool) -> str:
    return f"**{text}**" if on else text


def _csv(rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])
    return buf.getvalue()


def _pct(x: float | None, digits: int) -> str:
    if x is None or math.isnan(x):
        return "n/a"
    return f"{100 * x:.{digits}f}"


# -- tables --------------------------------------------------------------------------

def emit_damr_table(payload: Mapping) -> tuple[str, str]:
    """Per-dimension DAMR for two tutors with Cohen's h and Holm-adjusted Fisher p."""
    tutors = payload.get("tutors") or []
    if len(tutors) != 2:
        raise ReportError(f"DAMR table needs exactly two tutors, got {tutors}")
    a, b = tutors
    md = [f"| Dimension | {a} | {b} | Cohen's h | p |", "|---|---:|---:|---:|---:|"]
    rows = [["dimension", f"damr_{a}", f"damr_{b}", "matched_a", "total_a", "matched_b", "total_b", "cohens_h", "p_raw", "p_holm"]]
    for r in payload["rows"]:
        ra, rb = r["rate_a"], r["rate_b"]
        md.append(
            f"| {r['dimension']} | {_bold(_pct(ra, 2), ra >= rb)} | {_bold(_pct(rb, 2), rb >= ra)} "
            f"| {r['cohens_h']:.3f} | {format_p(r['p_holm'])} |"
        )
        rows.append([r["dimension"], ra, rb, r["matched_a"], r["total_a"], r["matched_b"], r["total_b"], r["cohens_h"], r["p_raw"], r["p_holm"]])
    md.append("")
    md.append("Bold marks the higher rate (both when tied). p: two-sided Fisher exact test, Holm-adjusted across dimensions; * p < 0.05.")
    return "\n".join(md) + "\n", _csv(rows)


def emit_engagement_table(payload: Mapping) -> tuple[str, str]:
    """Per-assignment RelScore / SuccScore mean ± sd (%) with Holm-adjusted Mann-Whitney p."""
    tutors = payload.get("tutors") or []
    if len(tutors) != 2:
        raise ReportError(f"engagement table needs exactly two tutors, got {tutors}")
    a, b = tutors
    md = [f"| Assignment | Metric | {a} | {b} | p |", "|---|---|---:|---:|---:|"]
    rows = [["assignment", "metric", f"mean_{a}", f"sd_{a}", f"n_{a}", f"n_excluded_{a}", f"mean_{b}", f"sd_{b}", f"n_{b}", f"n_excluded_{b}", "U", "p_raw", "p_holm"]]
    for r in payload["rows"]:
        ma, mb = r["mean_a"], r["mean_b"]
        cell_a = f"{_pct(ma, 1)} ± {_pct(r['sd_a'], 1)}"
        cell_b = f"{_pct(mb, 1)} ± {_pct(r['sd_b'], 1)}"
        comparable = ma is not None and mb is not None and not (math.isnan(ma) or math.isnan(mb))
        md.append(
            f"| {r['assignment']} | {METRIC_TITLES.get(r['metric'], r['metric'])} "
            f"| {_bold(cell_a, comparable and ma > mb)} | {_bold(cell_b, comparable and mb > ma)} | {format_p(r['p_holm'])} |"
        )
        rows.append([r["assignment"], r["metric"], ma, r["sd_a"], r["n_a"], r["n_excluded_a"], mb, r["sd_b"], r["n_b"], r["n_excluded_b"], r["U"], r["p_raw"], r["p_holm"]])
    md.append("")
    md.append("Mean ± sd in percent. Bold marks the higher mean. p: two-sided Mann-Whitney U, Holm-adjusted across assignments within each metric; * p < 0.05.")
    return "\n".join(md) + "\n", _csv(rows)


def format_coefficient(beta: float, se: float, p: float) -> str:
    return f"{beta:.3f}{stars(p)} ({se:.3f})"


def emit_regression_table(payload: Mapping) -> tuple[str, str, str]:
    """Coefficient table for the three helpfulness models.

    Returns markdown, the per-coefficient CSV and the per-model CSV.
    """
    if payload.get("skipped"):
        note = f"Regression: skipped: {payload['skipped']}\n"
        return note, _csv([["covariate", "model", "beta", "se", "p", "stars"]]), _csv([["model", "n", "pseudo_r2", "dropped", "error"]])
    models = payload["models"]
    order = [m for m in MODEL_TITLES if m in models]
    present = {c for m in order if models[m]["fit"] for c in models[m]["fit"]["names"]}
    dropped = sorted({c for m in order for c in models[m]["dropped"]}, key=ROW_ORDER.index)
    md = ["| | " + " | ".join(MODEL_TITLES[m] for m in order) + " |", "|---|" + "---:|" * len(order)]
    coef_rows = [["covariate", "model", "beta", "se", "p", "stars"]]
    for cov in ROW_ORDER:
        if cov not in present:
            continue
        cells = []
        for m in order:
            fit = models[m]["fit"]
            if fit and cov in fit["names"]:
                j = fit["names"].index(cov)
                beta, se, p = fit["coefficients"][j], fit["standard_errors"][j], fit["p_values"][j]
                cells.append(format_coefficient(beta, se, p))
                coef_rows.append([cov, m, beta, se, p, stars(p)])
            else:
                cells.append("--")
        md.append(f"| {COVARIATE_TITLES.get(cov, cov)} | " + " | ".join(cells) + " |")
    md.append("| Pseudo R² | " + " | ".join(f"{models[m]['fit']['pseudo_r2']:.3f}" if models[m]["fit"] else "error" for m in order) + " |")
    md.append("| n | " + " | ".join(str(models[m]["n"]) for m in order) + " |")
    md.append("")
    md.append("Log-odds coefficients with standard errors in parentheses; * p < 0.05, ** p < 0.01, *** p < 0.001.")
    for cov in dropped:
        in_models = ", ".join(MODEL_TITLES[m] for m in order if cov in models[m]["dropped"])
        md.append(f"Note: {cov} omitted ({in_models}): no variance in the fitted rows.")
    for m in order:
        if models[m].get("error"):
            md.append(f"Note: {MODEL_TITLES[m]} model failed: {models[m]['error']}")
    model_rows = [["model", "n", "pseudo_r2", "dropped", "error"]]
    for m in order:
        fit = models[m]["fit"]
        model_rows.append([m, models[m]["n"], fit["pseudo_r2"] if fit else None, ";".join(models[m]["dropped"]), models[m].get("error")])
    return "\n".join(md) + "\n", _csv(coef_rows), _csv(model_rows)


# -- delta chart -----------------------------------------------------------------------

PALETTE = ("#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7")


def emit_delta_chart(payload: Mapping, height: int = 320, bar_width: int = 12) -> tuple[str, str]:
    """Grouped bar chart (one group per assignment) of DAMR deltas in points.

    Each bar carries ``data-value``; the root carries ``data-scale`` (px per point)
    and ``data-zero`` (the y of the zero line).
    """
    dims = [d for d in payload["dimensions"] if d not in set(payload.get("omitted", ()))]
    assignments = list(payload["assignments"])
    values = {(c["assignment"], c["dimension"]): c["delta"] for c in payload["cells"]}
    rows = [["assignment", "dimension", "delta_points"]]
    for asg in assignments:
        for d in dims:
            rows.append([asg, d, values[(asg, d)]])
    margin_l, margin_t, gap, legend_h = 50, 20, 24, 18 * len(dims) + 10
    group_w = bar_width * len(dims)
    width = margin_l + len(assignments) * (group_w + gap) + gap
    plot_h = height - 2 * margin_t
    vmax = max([abs(values[(a, d)]) for a in assignments for d in dims] + [0.0])
    scale = (plot_h / 2) / vmax if vmax > 0 else 1.0
    zero = margin_t + plot_h / 2
    total_h = height + legend_h
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{total_h}" viewBox="0 0 {width} {total_h}" '
        f'data-scale="{scale!r}" data-zero="{zero!r}">',
        f'<title>DAMR difference ({payload["tutors"][1]} minus {payload["tutors"][0]}), percentage points</title>',
        f'<line x1="{margin_l}" y1="{zero:.2f}" x2="{width}" y2="{zero:.2f}" stroke="black" stroke-width="1" class="zero-line"/>',
        f'<text x="4" y="{margin_t}" font-size="10">+{vmax:.1f}</text>',
        f'<text x="4" y="{margin_t + plot_h}" font-size="10">-{vmax:.1f}</text>',
    ]
    for i, asg in enumerate(assignments):
        x0 = margin_l + gap + i * (group_w + gap)
        out.append(f'<text x="{x0 + group_w / 2:.2f}" y="{height - 4}" font-size="11" text-anchor="middle">Assignment {asg}</text>')
        for j, d in enumerate(dims):
            v = values[(asg, d)]
            h = abs(v) * scale
            y = zero - h if v > 0 else zero
            out.append(
                f'<rect class="bar" x="{x0 + j * bar_width:.2f}" y="{y:.2f}" width="{bar_width - 1}" height="{h:.2f}" '
                f'fill="{PALETTE[j % len(PALETTE)]}" data-assignment="{asg}" data-dimension="{d}" data-value="{v!r}"/>'
            )
    for j, d in enumerate(dims):
        y = height + 14 + 18 * j
        out.append(f'<rect x="{margin_l}" y="{y - 10}" width="10" height="10" fill="{PALETTE[j % len(PALETTE)]}"/>')
        out.append(f'<text x="{margin_l + 16}" y="{y}" font-size="11">{d}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n", _csv(rows)


# -- distributions ------------------------------------------------------------------------

def emit_distributions_table(payload: Mapping) -> tuple[str, str]:
    md = ["| Tutor | Dimension | Metric | n desired | n undesired | rank-biserial | p (Holm) |", "|---|---|---|---:|---:|---:|---:|"]
    rows = [["test_name", "group", "statistic", "effect_size", "p_raw", "p_holm", "family_id", "n_a", "n_b"]]
    for r in payload["results"]:
        tutor, dim, metric = r["group"].split("/")
        md.append(f"| {tutor} | {dim} | {METRIC_TITLES.get(metric, metric)} | {r['n_a']} | {r['n_b']} | {r['effect_size']:.3f} | {format_p(r['p_holm'])} |")
        rows.append([r[k] for k in rows[0]])
    for e in payload["exclusions"]:
        md.append(f"| {e['tutor']} | {e['dimension']} | {METRIC_TITLES.get(e['metric'], e['metric'])} | | | excluded | {e['reason']} |")
    return "\n".join(md) + "\n", _csv(rows)


# -- summary ----------------------------------------------------------------------------------

def clean_json(obj):
    """Replace NaN/inf with None and tuples with lists so the payload is strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, Mapping):
        return {str(k): clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean_json(v) for v in obj]
    return obj


def dedupe(warnings: Sequence[str]) -> list[str]:
    return list(dict.fromkeys(warnings))


def render(summary: Mapping, out_dir: str | Path) -> dict[str, Path]:
    """Write tables/, figures/ and summary.json for a run summary."""
    out_dir = Path(out_dir)
    (out_dir / "tables").mkdir(parents=True, exist_ok=True)
    (out_dir / "figures").mkdir(parents=True, exist_ok=True)
    summary = clean_json(summary)
    summary["warnings"] = dedupe(summary.get("warnings", []))
    tables = summary["tables"]
    written: dict[str, Path] = {}

    def put(rel: str, text: str) -> None:
        path = out_dir / rel
        path.write_text(text, encoding="utf-8", newline="\n")
        written[rel] = path

    if tables.get("damr"):
        md, c = emit_damr_table(_nan_rows(tables["damr"]))
        put("tables/damr.md", md)
        put("tables/damr.csv", c)
    if tables.get("engagement"):
        md, c = emit_engagement_table(_nan_rows(tables["engagement"]))
        put("tables/engagement.md", md)
        put("tables/engagement.csv", c)
    if tables.get("regression"):
        md, c, mc = emit_regression_table(tables["regression"])
        put("tables/regression.md", md)
        put("tables/regression.csv", c)
        put("tables/regression_models.csv", mc)
    if tables.get("distributions"):
        md, c = emit_distributions_table(tables["distributions"])
        put("tables/distributions.md", md)
        put("tables/distributions.csv", c)
        put("tables/distributions_summary.csv", tables["distributions"]["summary_csv"])
        put("tables/distributions_raw.csv", tables["distributions"]["raw_csv"])
    if tables.get("metrics_csv"):
        put("tables/metrics.csv", tables["metrics_csv"])
    if tables.get("delta"):
        svg, c = emit_delta_chart(tables["delta"])
        put("figures/delta.svg", svg)
        put("tables/delta.csv", c)
    put("summary.json", json.dumps(summary, sort_keys=True, indent=2, ensure_ascii=False) + "\n")
    return written


def _nan_rows(table: Mapping) -> dict:
    # null statistics in the payload render as n/a
    t = dict(table)
    t["rows"] = [{k: (math.nan if v is None and k not in ("assignment", "dimension", "metric") else v) for k, v in r.items()} for r in table["rows"]]
    return t
