"""Report rendering: JSON for machines, Markdown and SVG for humans.

All output is deterministic text (no timestamps, stable key order, repr
floats in JSON, fixed-precision in tables), so identical runs produce
byte-identical files.
"""

import json


def _fmt(v, digits=4):
    return f"{v:.{digits}f}"


def render_json(obj):
    return json.dumps(obj, indent=2) + "\n"


def svg_bar_chart(pairs, title, width=640, bar_height=16, max_bars=None):
    """Horizontal bar chart as standalone SVG text.

    ``pairs`` is a sequence of (label, value); values are scaled to the
    largest absolute value.
    """
    if max_bars is not None:
        pairs = list(pairs)[:max_bars]
    else:
        pairs = list(pairs)
    label_w = 230
    value_w = 70
    plot_w = width - label_w - value_w - 20
    top = 28
    height = top + bar_height * len(pairs) + 10
    peak = max((abs(v) for _, v in pairs), default=0.0)
    scale = plot_w / peak if peak > 0 else 0.0
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="monospace" font-size="11">',
        f'<text x="8" y="16" font-size="13">{title}</text>',
    ]
    for i, (label, value) in enumerate(pairs):
        y = top + i * bar_height
        w = abs(value) * scale
        lines.append(f'<text x="{label_w - 6}" y="{y + 11}" text-anchor="end">{label}</text>')
        lines.append(
            f'<rect x="{label_w}" y="{y + 2}" width="{_fmt(w, 2)}" height="{bar_height - 5}" fill="#4878a8"/>'
        )
        lines.append(f'<text x="{label_w + 4 + float(_fmt(w, 2))}" y="{y + 11}">{value:.6g}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _md_table(headers, rows):
    out = ["| " + " | ".join(headers) + " |", "| " + " | ".join("---" for _ in headers) + " |"]
    for row in rows:
        out.append("| " + " | ".join(str(c) for c in row) + " |")
    return "\n".join(out)


def eval_report_markdown(report):
    """Markdown rendering of an EvalReport."""
    lines = [f"# Evaluation report: {report.method} ({report.scheme})", ""]
    if report.params:
        lines.append("Parameters: " + ", ".join(f"{k}={v}" for k, v in sorted(report.params.items())))
        lines.append("")
    lines.append("## AUC")
    lines.append("")
    rows = [[te.name, f"{_fmt(te.auc_mean)} ± {_fmt(te.auc_sd)}"] for te in report.per_task]
    rows.append(["All tasks", f"{_fmt(report.all_tasks_mean)} ± {_fmt(report.all_tasks_sd)}"])
    lines.append(_md_table(["Task", "AUC (mean ± sd)"], rows))
    lines.append("")
    lines.append("## Confusion matrices (rows: true class, columns: predicted)")
    lines.append("")
    for name, mat in report.confusions.items():
        pos, neg = name.split("_vs_") if "_vs_" in name else ("positive", "negative")
        lines.append(f"### {name}")
        lines.append("")
        lines.append(
            _md_table(
                ["true \\ predicted", pos, neg],
                [[pos, mat[0][0], mat[0][1]], [neg, mat[1][0], mat[1][1]]],
            )
        )
        lines.append("")
    if report.per_subject:
        lines.append("## Per-subject predicted counts")
        lines.append("")
        for name, rows_ in report.per_subject.items():
            pos, neg = name.split("_vs_") if "_vs_" in name else ("positive", "negative")
            lines.append(f"### {name}")
            lines.append("")
            lines.append(
                _md_table(
                    ["Group", "Subject", f"pred. {pos}", f"pred. {neg}"],
                    [[g, s, pp, pn] for (g, s, pp, pn) in rows_],
                )
            )
            lines.append("")
    if report.importance:
        lines.append("## Feature importance (top 10)")
        lines.append("")
        if report.importance.get("c"):
            lines.append("### Shared gate c")
            lines.append("")
            lines.append(_md_table(["Feature", "c"], [[n, f"{v:.6g}"] for n, v in report.importance["c"][:10]]))
            lines.append("")
        for task, ranks in report.importance.get("alpha", {}).items():
            lines.append(f"### |alpha| for {task}")
            lines.append("")
            lines.append(_md_table(["Feature", "|alpha|"], [[n, f"{v:.6g}"] for n, v in ranks[:10]]))
            lines.append("")
    if report.notices:
        lines.append("## Notices")
        lines.append("")
        for n in report.notices:
            lines.append(f"- {n}")
        lines.append("")
    return "\n".join(lines)


def write_eval_report(report, outdir):
    """Write report.json, report.md and SVG charts into ``outdir``."""
    import pathlib

    outdir = pathlib.Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.json").write_text(render_json(report.to_dict()), encoding="utf-8")
    (outdir / "report.md").write_text(eval_report_markdown(report), encoding="utf-8")
    auc_pairs = [(te.name, te.auc_mean) for te in report.per_task] + [("all_tasks", report.all_tasks_mean)]
    (outdir / "auc.svg").write_text(svg_bar_chart(auc_pairs, f"AUC: {report.method} ({report.scheme})"), encoding="utf-8")
    if report.importance:
        if report.importance.get("c"):
            (outdir / "importance_c.svg").write_text(
                svg_bar_chart(report.importance["c"], "Shared feature gate c"), encoding="utf-8"
            )
        for task, ranks in report.importance.get("alpha", {}).items():
            (outdir / f"importance_{task}.svg").write_text(
                svg_bar_chart(ranks, f"|alpha| for {task}"), encoding="utf-8"
            )
    return sorted(p.name for p in outdir.iterdir())


def importance_csv(ranking):
    lines = ["feature,value"]
    for name, value in ranking:
        lines.append(f"{name},{value!r}")
    return "\n".join(lines) + "\n"


def write_importance_report(importance, outdir, prefix="importance"):
    """Write CSV + SVG per importance vector; returns written filenames."""
    import pathlib

    outdir = pathlib.Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    if importance.get("c"):
        (outdir / f"{prefix}_c.csv").write_text(importance_csv(importance["c"]), encoding="utf-8")
        (outdir / f"{prefix}_c.svg").write_text(svg_bar_chart(importance["c"], "Shared feature gate c"), encoding="utf-8")
        written += [f"{prefix}_c.csv", f"{prefix}_c.svg"]
    for task, ranks in importance.get("alpha", {}).items():
        (outdir / f"{prefix}_{task}.csv").write_text(importance_csv(ranks), encoding="utf-8")
        (outdir / f"{prefix}_{task}.svg").write_text(svg_bar_chart(ranks, f"|alpha| for {task}"), encoding="utf-8")
        written += [f"{prefix}_{task}.csv", f"{prefix}_{task}.svg"]
    return written
