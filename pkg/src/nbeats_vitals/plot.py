"""Deterministic SVG figure of observed MBP, trends, cutoff and drug intervals."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .preprocess import inverse_scale

WIDTH, HEIGHT = 720, 360
MARGIN = dict(left=60, right=20, top=40, bottom=50)
COLORS = {
    "observed": "#404040",
    "actual-trend": "#1f77b4",
    "forecast-trend": "#d62728",
    "cutoff": "#000000",
    "drug-band": "#2ca02c",
}


def _f(v: float) -> str:
    return f"{v:.2f}"


def _polyline(cls, xs, ys, dash=None):
    pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in zip(xs, ys))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline class="{cls}" points="{pts}" fill="none" '
            f'stroke="{COLORS[cls]}" stroke-width="2"{extra}/>')


def trend_figure(record: dict) -> str:
    """Render one analysis record (as written by the ``analyze`` command).

    Times are shown in hours relative to the cutoff and values in mmHg.
    """
    step = float(record["step_min"])
    cutoff = float(record["cutoff_min"])
    lookback = inverse_scale(record["lookback"])
    horizon = inverse_scale(record["horizon"])
    fc = inverse_scale(record["forecast_trend"])
    ac = inverse_scale(record["actual_trend"])
    n_lb, n_hz = len(lookback), len(horizon)
    t_obs = np.arange(-n_lb, n_hz) * step / 60.0
    t_hz = t_obs[n_lb:]
    observed = np.concatenate([lookback, horizon])

    t_lo, t_hi = float(t_obs[0]), float(n_hz * step / 60.0)
    values = np.concatenate([observed, fc, ac])
    v_lo, v_hi = float(values.min()), float(values.max())
    pad = max(0.05 * (v_hi - v_lo), 1.0)
    v_lo, v_hi = v_lo - pad, v_hi + pad

    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]

    def sx(t):
        return x0 + (np.asarray(t) - t_lo) / (t_hi - t_lo) * (x1 - x0)

    def sy(v):
        return y0 - (np.asarray(v) - v_lo) / (v_hi - v_lo) * (y0 - y1)

    title = f"Patient {record['patient_id']}: observed and forecasted MBP trend"
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for ev in record.get("drug_events", []):
        a = max((ev["start_min"] - cutoff) / 60.0, t_lo)
        b = min((ev["end_min"] - cutoff) / 60.0, t_hi)
        if b <= a:
            continue
        out.append(
            f'<rect class="drug-band" x="{_f(sx(a))}" y="{_f(y1)}" width="{_f(sx(b) - sx(a))}" '
            f'height="{_f(y0 - y1)}" fill="{COLORS["drug-band"]}" fill-opacity="0.2">'
            f'<title>{escape(ev["drug_name"])}</title></rect>'
        )
    out.append(f'<rect class="frame" x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
               f'fill="none" stroke="#808080"/>')
    for k in range(int(np.ceil(t_lo)), int(np.floor(t_hi)) + 1):
        out.append(f'<text x="{_f(sx(k))}" y="{y0 + 16}" text-anchor="middle" font-size="11">{k}</text>')
    for v in np.linspace(v_lo, v_hi, 5):
        out.append(f'<text x="{x0 - 6}" y="{_f(sy(v) + 4)}" text-anchor="end" font-size="11">{v:.0f}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle" '
               f'font-size="12">hours from training cut-off</text>')
    out.append(f'<text x="16" y="{(y0 + y1) / 2:.2f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {(y0 + y1) / 2:.2f})">MBP (mmHg)</text>')

    out.append(_polyline("observed", sx(t_obs), sy(observed)))
    out.append(_polyline("actual-trend", sx(t_hz), sy(ac), dash="6 3"))
    out.append(_polyline("forecast-trend", sx(t_hz), sy(fc)))
    out.append(f'<line class="cutoff" x1="{_f(sx(0.0))}" y1="{_f(y1)}" x2="{_f(sx(0.0))}" '
               f'y2="{_f(y0)}" stroke="{COLORS["cutoff"]}" stroke-dasharray="2 2"/>')

    legend = [("observed", "observed MBP"), ("actual-trend", "actual trend"),
              ("forecast-trend", "forecasted trend"), ("cutoff", "training cut-off")]
    if record.get("drug_events"):
        legend.append(("drug-band", "drug infusion"))
    for i, (cls, label) in enumerate(legend):
        y = y1 + 14 + 14 * i
        out.append(f'<line x1="{x0 + 8}" y1="{y - 4}" x2="{x0 + 28}" y2="{y - 4}" '
                   f'stroke="{COLORS[cls]}" stroke-width="3"/>')
        out.append(f'<text x="{x0 + 34}" y="{y}" font-size="11">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
