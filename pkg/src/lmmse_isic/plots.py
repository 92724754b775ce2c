"""Dependency-free SVG line charts for BER curves and flop counts."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from pathlib import Path
from xml.sax.saxutils import escape

log = logging.getLogger(__name__)

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]
DASHES = ["", "6,4", "2,3", "8,3,2,3"]
W, H = 640, 440
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 40, 55


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def line_chart(series: dict[str, list[tuple[float, float]]], title: str, xlabel: str,
               ylabel: str, logy: bool = False) -> str:
    """Render named (x, y) series. Non-positive y values are dropped on a log axis."""
    pts = {k: [(x, y) for x, y in v if (y > 0 if logy else math.isfinite(y))] for k, v in series.items()}
    xs = [x for v in pts.values() for x, _ in v]
    ys = [y for v in pts.values() for _, y in v]
    if not xs:
        raise ValueError("nothing to plot")
    x0, x1 = min(xs), max(xs)
    if x0 == x1:
        x0, x1 = x0 - 1, x1 + 1
    if logy:
        y0 = math.floor(math.log10(min(ys)))
        y1 = math.ceil(math.log10(max(ys)))
        if y0 == y1:
            y1 += 1
        ty = lambda y: (math.log10(y) - y0) / (y1 - y0)
        yticks = [10.0**e for e in range(y0, y1 + 1)]
    else:
        y0, y1 = min(0.0, min(ys)), max(ys) * 1.05 or 1.0
        ty = lambda y: (y - y0) / (y1 - y0)
        step = 10 ** math.floor(math.log10((y1 - y0) / 4 or 1))
        yticks = [y0 + i * step for i in range(int((y1 - y0) / step) + 1)][:12]
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM
    px = lambda x: LEFT + (x - x0) / (x1 - x0) * pw
    py = lambda y: TOP + (1 - ty(y)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{LEFT + pw / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for yt in yticks:
        yy = py(yt)
        out.append(f'<line x1="{LEFT}" y1="{yy:.2f}" x2="{LEFT + pw}" y2="{yy:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{LEFT - 6}" y="{yy + 4:.2f}" text-anchor="end">{_fmt(yt)}</text>')
    for xt in sorted(set(xs)):
        xx = px(xt)
        out.append(f'<line x1="{xx:.2f}" y1="{TOP + ph}" x2="{xx:.2f}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{xx:.2f}" y="{TOP + ph + 18}" text-anchor="middle">{_fmt(xt)}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{TOP + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {TOP + ph / 2})">{escape(ylabel)}</text>'
    )
    for i, (name, v) in enumerate(pts.items()):
        if not v:
            continue
        color = PALETTE[i % len(PALETTE)]
        dash = DASHES[i % len(DASHES)]
        d = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in sorted(v))
        style = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="2"{style}/>')
        for x, y in v:
            out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{color}"/>')
        ly = TOP + 14 + 18 * i
        out.append(f'<line x1="{W - RIGHT + 12}" y1="{ly}" x2="{W - RIGHT + 40}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"{style}/>')
        out.append(f'<text x="{W - RIGHT + 46}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _prefix(path) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix == ".svg" else p


def emit_plots(records, path) -> list[Path]:
    """Write ``<prefix>_ber.svg`` and, given flop data over several sizes,
    ``<prefix>_flops.svg`` and ``<prefix>_speedup.svg``. Returns the files
    written; insufficient data only logs a warning."""
    prefix = _prefix(path)
    written = []

    curves = defaultdict(list)
    for r in records:
        label = f"{r.scheme} {r.N}x{r.M} {r.order}qam K={r.K}"
        curves[label].append((r.snr_db, r.ber))
    if not any(len(v) >= 2 for v in curves.values()):
        log.warning("BER plot skipped: need at least two SNR points per curve")
    elif not any(b > 0 for v in curves.values() for _, b in v):
        log.warning("BER plot skipped: no bit errors to draw on a log axis")
    else:
        svg = line_chart(curves, "Average uncoded BER", "SNR (dB), SNR = N/sigma2", "BER", logy=True)
        written.append(_write(prefix.parent / f"{prefix.name}_ber.svg", svg))

    per_size = {}
    for r in records:
        if r.flops_per_iter is not None:
            per_size[r.scheme, r.N, r.M, r.K] = r
    sizes = sorted({(n, m) for _, n, m, _ in per_size})
    if len(sizes) >= 2:
        flops = defaultdict(list)
        speed = defaultdict(list)
        for (s, n, m, k), r in sorted(per_size.items()):
            flops[f"{s} per iteration"].append((n, r.flops_per_iter))
            flops[f"{s} init + {k} iter"].append((n, r.flops_init + k * r.flops_per_iter))
        for (s, n, m, k), r in per_size.items():
            other = per_size.get(("alg1", n, m, k))
            if s == "alg2" and other is not None:
                speed["per iteration"].append((n, other.flops_per_iter / r.flops_per_iter))
                tot = lambda q: q.flops_init + k * q.flops_per_iter
                speed[f"init + {k} iterations"].append((n, tot(other) / tot(r)))
        written.append(_write(prefix.parent / f"{prefix.name}_flops.svg",
                              line_chart(flops, "Number of flops", "N", "flops", logy=True)))
        if speed:
            written.append(_write(prefix.parent / f"{prefix.name}_speedup.svg",
                                  line_chart(speed, "Speedup in flops (alg1 / alg2)", "N", "speedup")))
    elif per_size:
        log.warning("flop plots skipped: need flop data for at least two sizes")
    return written


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path
