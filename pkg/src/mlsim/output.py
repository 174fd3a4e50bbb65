"""Per-step CSV output and static SVG charts.

CSV bytes are a pure function of the rows: fixed header, rows strictly
ordered by (step, node_id), integers plain and floats in shortest
round-trip decimal form (no locale anywhere).  The charts are
self-contained SVG line plots with no external assets, one file per
metric family.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import ContractError, EmptyData, IoError, ParseError

EPIDEMIC_COLUMNS = ("S", "E", "I", "R")
POLLUTION_COLUMNS = ("total_pollution", "P", "L", "E")

_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
)


@dataclass(frozen=True)
class OutputRow:
    """One (step, node) observation; values align with the column set."""

    step: int
    node_id: int
    values: tuple


def _format_number(value) -> str:
    if isinstance(value, bool):
        raise ContractError(f"boolean in output row: {value!r}")
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def write_csv(rows: list[OutputRow], path: str | Path,
              columns: tuple[str, ...]) -> Path:
    """Write header plus one line per row; deterministic bytes.

    Rows must already be strictly ordered by (step, node_id); anything
    else is a caller bug surfaced as ContractError.
    """
    keys = [(r.step, r.node_id) for r in rows]
    if keys != sorted(set(keys)):
        raise ContractError("rows not strictly ordered by (step, node_id)")
    for r in rows:
        if len(r.values) != len(columns):
            raise ContractError(
                f"row for step {r.step} node {r.node_id} has {len(r.values)} "
                f"values for {len(columns)} columns"
            )
    path = Path(path)
    lines = ["step,node_id," + ",".join(columns)]
    for r in rows:
        cells = [str(r.step), str(r.node_id)]
        cells.extend(_format_number(v) for v in r.values)
        lines.append(",".join(cells))
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv_rows(path: str | Path) -> tuple[tuple[str, ...], list[OutputRow]]:
    """Inverse of write_csv; numbers come back as int where exact."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(str(path), "missing header") from None
    if header[:2] != ["step", "node_id"]:
        raise ParseError(str(path), f"unexpected header {header!r}")
    columns = tuple(header[2:])
    rows = []
    for lineno, cells in enumerate(reader, start=2):
        if len(cells) != len(header):
            raise ParseError(f"{path}:{lineno}", f"expected {len(header)} cells")
        try:
            step, node_id = int(cells[0]), int(cells[1])
            values = tuple(
                int(c) if _is_int(c) else float(c) for c in cells[2:]
            )
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}", str(exc)) from exc
        rows.append(OutputRow(step=step, node_id=node_id, values=values))
    return columns, rows


def _is_int(cell: str) -> bool:
    try:
        int(cell)
        return True
    except ValueError:
        return False


def write_grid_csv(levels, path: str | Path) -> Path:
    """Dump a pollution grid snapshot as a row-major CSV matrix.

    One line per grid row, shortest round-trip decimals, no header.
    """
    path = Path(path)
    lines = [",".join(repr(float(v)) for v in row) for row in levels]
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


# ── SVG line charts ─────────────────────────────────────────────────────

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 62, 16, 34, 46


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def _svg_line_chart(
    path: Path,
    title: str,
    xlabel: str,
    ylabel: str,
    series: list[tuple[str, list[float], list[float]]],
) -> Path:
    """One self-contained line chart; series are (label, xs, ys)."""
    xmax = max((max(xs) for _, xs, _ in series if xs), default=1.0) or 1.0
    ymax = max((max(ys) for _, _, ys in series if ys), default=1.0) or 1.0
    xmin, ymin = 0.0, 0.0

    def px(x: float) -> float:
        return _ML + (x - xmin) / (xmax - xmin) * (_W - _ML - _MR)

    def py(y: float) -> float:
        return _H - _MB - (y - ymin) / (ymax - ymin) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]
    axis_y = _H - _MB
    parts.append(
        f'<line x1="{_ML}" y1="{axis_y}" x2="{_W - _MR}" y2="{axis_y}" '
        'stroke="black" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{axis_y}" '
        'stroke="black" stroke-width="1"/>'
    )
    for tx in _ticks(xmin, xmax):
        parts.append(
            f'<line x1="{px(tx):.2f}" y1="{axis_y}" x2="{px(tx):.2f}" '
            f'y2="{axis_y + 4}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{px(tx):.2f}" y="{axis_y + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{tx:g}</text>'
        )
    for ty in _ticks(ymin, ymax):
        parts.append(
            f'<line x1="{_ML - 4}" y1="{py(ty):.2f}" x2="{_ML}" '
            f'y2="{py(ty):.2f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_ML - 8}" y="{py(ty) + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{ty:g}</text>'
        )
    parts.append(
        f'<text x="{(_ML + _W - _MR) / 2:.1f}" y="{_H - 8}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="12">'
        f"{xlabel}</text>"
    )
    parts.append(
        f'<text x="16" y="{(_MT + axis_y) / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {(_MT + axis_y) / 2:.1f})">{ylabel}</text>'
    )
    for i, (label, xs, ys) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" '
            'stroke-width="1.5"/>'
        )
        ly = _MT + 14 + 16 * i
        parts.append(
            f'<line x1="{_W - _MR - 110}" y1="{ly - 4}" x2="{_W - _MR - 90}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{_W - _MR - 84}" y="{ly}" font-family="sans-serif" '
            f'font-size="11">{label}</text>'
        )
    parts.append("</svg>")
    try:
        path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def emit_svg_plots(csv_path: str | Path, out_dir: str | Path) -> list[Path]:
    """Render the chart family for a run CSV; returns the created paths.

    Epidemic runs produce one infected-versus-time chart per city plus
    one full S/E/I/R chart per city; pollution runs produce the total
    pollution curve and the fleet composition curve.
    """
    columns, rows = read_csv_rows(csv_path)
    if not rows:
        raise EmptyData(f"no data rows in {csv_path}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []

    if columns == EPIDEMIC_COLUMNS:
        node_ids = sorted({r.node_id for r in rows})
        for node in node_ids:
            steps = [float(r.step) for r in rows if r.node_id == node]
            by_label = {
                lab: [float(r.values[k]) for r in rows if r.node_id == node]
                for k, lab in enumerate(EPIDEMIC_COLUMNS)
            }
            created.append(
                _svg_line_chart(
                    out_dir / f"infected_city_{node}.svg",
                    f"Infected over time, city node {node}",
                    "step", "infected",
                    [("I", steps, by_label["I"])],
                )
            )
            created.append(
                _svg_line_chart(
                    out_dir / f"seir_city_{node}.svg",
                    f"Compartments over time, city node {node}",
                    "step", "individuals",
                    [(lab, steps, by_label[lab]) for lab in EPIDEMIC_COLUMNS],
                )
            )
    elif columns == POLLUTION_COLUMNS:
        steps = [float(r.step) for r in rows]
        total = [float(r.values[0]) for r in rows]
        created.append(
            _svg_line_chart(
                out_dir / "pollution_total.svg",
                "Total pollution over time",
                "step", "pollution",
                [("total", steps, total)],
            )
        )
        created.append(
            _svg_line_chart(
                out_dir / "fleet_composition.svg",
                "Fleet composition over time",
                "step", "vehicles",
                [
                    (lab, steps, [float(r.values[k]) for r in rows])
                    for k, lab in enumerate(POLLUTION_COLUMNS)
                    if lab != "total_pollution"
                ],
            )
        )
    else:
        raise ParseError(str(csv_path), f"unrecognized column set {columns!r}")
    return created
