"""ASCII and SVG renderings of a configuration."""

from __future__ import annotations

from .grid import GridConfig, collinear_triples

POINT = "●"
EMPTY = "."
FLAGGED = "×"


def render_ascii(config: GridConfig, show_violations: bool = False) -> str:
    triples = collinear_triples(config) if show_violations else []
    flagged = {p for t in triples for p in t}
    rows = []
    for r in range(config.n):
        cells = []
        for c in range(config.n):
            if (r, c) in flagged:
                cells.append(FLAGGED)
            elif (r, c) in config:
                cells.append(POINT)
            else:
                cells.append(EMPTY)
        rows.append(" ".join(cells))
    for t in triples:
        rows.append("violation: " + " ".join(f"({r},{c})" for r, c in t))
    return "\n".join(rows) + "\n"


def render_svg(config: GridConfig, show_violations: bool = False, cell: int = 24) -> str:
    n = config.n
    pad = cell // 2
    size = n * cell + 2 * pad

    def centre(r: int, c: int) -> tuple[int, int]:
        return pad + c * cell + cell // 2, pad + r * cell + cell // 2

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
    ]
    for i in range(n + 1):
        x = pad + i * cell
        out.append(f'<line x1="{x}" y1="{pad}" x2="{x}" y2="{size - pad}" stroke="#ccc" stroke-width="1"/>')
        out.append(f'<line x1="{pad}" y1="{x}" x2="{size - pad}" y2="{x}" stroke="#ccc" stroke-width="1"/>')
    if show_violations:
        for t in collinear_triples(config):
            pts = sorted(t)
            (x1, y1), (x2, y2) = centre(*pts[0]), centre(*pts[-1])
            out.append(f'<line class="violation" x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" '
                       f'stroke="red" stroke-width="3" stroke-opacity="0.6"/>')
    for r, c in sorted(config.points):
        x, y = centre(r, c)
        out.append(f'<circle cx="{x}" cy="{y}" r="{cell // 3}" fill="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
