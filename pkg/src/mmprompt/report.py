"""Run outputs: JSON records, curve CSVs and self-contained SVG plots."""
from __future__ import annotations

import json
import math
from pathlib import Path

from .experiment import mean_curve
from .metrics import EvalCurves

CURVE_KEYS = ("success", "precision", "lt_pr", "lt_re", "lt_f")


def _fmt(v):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def curve_to_csv(curve: EvalCurves) -> str:
    """``threshold,value`` rows; floats in repr form so parsing gives back the same doubles."""
    lines = [f"# summary,{_fmt(curve.summary)}", "threshold,value"]
    lines += [f"{_fmt(t)},{_fmt(v)}" for t, v in zip(curve.thresholds, curve.values)]
    return "\n".join(lines) + "\n"


def curve_from_csv(text: str) -> EvalCurves:
    summary = None
    ts, vs = [], []
    for line in text.splitlines():
        if not line:
            continue
        if line.startswith("# summary,"):
            summary = float(line.split(",", 1)[1])
            continue
        if line.startswith("#") or line == "threshold,value":
            continue
        t, v = line.split(",")
        ts.append(float(t))
        vs.append(float(v))
    if summary is None:
        raise ValueError("curve CSV lacks its summary line")
    return EvalCurves(tuple(ts), tuple(vs), summary)


def _safe(name):
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


# ---------------------------------------------------------------------------
# SVG

_W, _H = 480, 360
_ML, _MR, _MT, _MB = 56, 16, 28, 44
_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def svg_plot(series, title, xlabel, ylabel, x_max):
    """Line plot of ``series`` = [(label, xs, ys, bold)], y in [0, 1].

    The raw data of every series is embedded as an XML comment so diffs
    of the SVG are reviewable.
    """
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def px(x):
        return _ML + pw * (x / x_max)

    def py(y):
        return _MT + ph * (1.0 - y)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>',
           f'<text x="{_W / 2:.1f}" y="16" text-anchor="middle" font-size="13">{_esc(title)}</text>']
    for label, xs, ys, _ in series:
        pts = ";".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
        out.append(f"<!-- data {_esc(label)}: {pts} -->")
    # axes and grid
    for k in range(6):
        y = k / 5
        out.append(f'<line x1="{_ML}" y1="{py(y):.2f}" x2="{_ML + pw}" y2="{py(y):.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{_ML - 6}" y="{py(y) + 4:.2f}" text-anchor="end">{y:.1f}</text>')
        x = x_max * k / 5
        out.append(f'<line x1="{px(x):.2f}" y1="{_MT}" x2="{px(x):.2f}" y2="{_MT + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{px(x):.2f}" y="{_MT + ph + 16}" text-anchor="middle">{x:g}</text>')
    out.append(f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{_ML + pw / 2:.1f}" y="{_H - 8}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="14" y="{_MT + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {_MT + ph / 2:.1f})">{_esc(ylabel)}</text>')
    for i, (label, xs, ys, bold) in enumerate(series):
        color = "black" if bold else _PALETTE[i % len(_PALETTE)]
        width = 2.0 if bold else 0.8
        opacity = 1.0 if bold else 0.6
        pts = " ".join(f"{px(min(x, x_max)):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="{width}" '
                   f'stroke-opacity="{opacity}" points="{pts}"><title>{_esc(label)}</title></polyline>')
    bold = [s for s in series if s[3]]
    if bold:
        out.append(f'<text x="{_ML + pw - 4}" y="{_MT + 14}" text-anchor="end">{_esc(bold[0][0])}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s):
    return (str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace("--", "- -"))


def svg_data(text):
    """Parse the embedded data comments of an SVG written by :func:`svg_plot`."""
    out = {}
    for line in text.splitlines():
        if line.startswith("<!-- data ") and line.endswith(" -->"):
            label, pts = line[len("<!-- data "):-len(" -->")].rsplit(": ", 1)
            xs, ys = [], []
            for p in pts.split(";"):
                x, y = p.split(",")
                xs.append(float(x))
                ys.append(float(y))
            out[label] = (xs, ys)
    return out


def _plot_key(results, key, title, xlabel, ylabel, x_max):
    series = []
    for r in results:
        if r.status == "ok":
            c = r.curves[key]
            series.append((f"{r.name} ({c.summary:.3f})", c.thresholds, c.values, False))
    mean = mean_curve(results, key)
    if mean is not None:
        ts, vs = mean
        summary = (sum(vs) / len(vs)) if key == "success" else vs[20]
        series.append((f"mean ({summary:.3f})", ts, vs, True))
    return svg_plot(series, title, xlabel, ylabel, x_max)


def write_run(record, results, out_dir):
    """Write run.json, metrics.json (no run_id/timestamp), curves/*.csv and plots/*.svg."""
    out = Path(out_dir)
    (out / "curves").mkdir(parents=True, exist_ok=True)
    (out / "plots").mkdir(parents=True, exist_ok=True)
    dump_json(record.to_dict(), out / "run.json")
    dump_json(record.payload(), out / "metrics.json")
    for r in results:
        if r.status != "ok":
            continue
        for key in CURVE_KEYS:
            (out / "curves" / f"{_safe(r.name)}.{key}.csv").write_text(curve_to_csv(r.curves[key]))
    (out / "plots" / "success.svg").write_text(
        _plot_key(results, "success", "Success plot", "overlap threshold", "success rate", 1.0))
    (out / "plots" / "precision.svg").write_text(
        _plot_key(results, "precision", "Precision plot", "location error threshold (px)", "precision", 50.0))
    return out


def format_table(rows, columns, row_header="setting"):
    """Fixed-width text table: ``rows`` = [(label, {column: value})]."""
    width = max([len(row_header)] + [len(str(label)) for label, _ in rows])
    head = f"{row_header:<{width}}  " + "  ".join(f"{c:>15}" for c in columns)
    lines = [head, "-" * len(head)]
    for label, vals in rows:
        cells = []
        for c in columns:
            v = vals.get(c)
            cells.append(f"{'n/a':>15}" if v is None else f"{v:>15.4f}")
        lines.append(f"{str(label):<{width}}  " + "  ".join(cells))
    return "\n".join(lines) + "\n"
