from __future__ import annotations

import json
from io import BytesIO
from pathlib import Path

import pandas as pd
from reportlab.lib import colors
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import getSampleStyleSheet
from reportlab.lib.units import mm
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from .constants import CHARGE_MAP_CSV_HEADER, CONVERGENCE_CSV_HEADER
from .exceptions import OutputError


def convergence_frame(records) -> pd.DataFrame:
    rows = [
        (r.n, r.tile_count, r.capacitance_farads, r.capacitance_normalized, r.assembly_seconds, r.solve_seconds)
        for r in sorted(records, key=lambda r: r.n)
    ]
    return pd.DataFrame(rows, columns=CONVERGENCE_CSV_HEADER)


def charge_map_frame(charge_records) -> pd.DataFrame:
    rows = [(*r.center, r.area, r.charge, r.density) for r in charge_records]
    return pd.DataFrame(rows, columns=CHARGE_MAP_CSV_HEADER)


def _prepare(path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from None
    return path


def write_frame(frame: pd.DataFrame, path) -> Path:
    path = _prepare(path)
    try:
        frame.to_csv(path, index=False, float_format="%.17g")
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from None
    return path


def write_convergence_csv(records, path) -> Path:
    return write_frame(convergence_frame(records), path)


def write_charge_map_csv(charge_records, path) -> Path:
    return write_frame(charge_map_frame(charge_records), path)


def write_json(payload, path) -> Path:
    path = _prepare(path)
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from None
    return path


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def build_run_pdf(*, run, points) -> bytes:
    """One-page report of a recorded run: settings, summary and sweep table."""
    buf = BytesIO()
    styles = getSampleStyleSheet()
    doc = SimpleDocTemplate(
        buf, pagesize=A4,
        leftMargin=15 * mm, rightMargin=15 * mm, topMargin=15 * mm, bottomMargin=15 * mm,
        title=f"Capacitance run {run.pk}",
    )

    story = [
        Paragraph(f"Capacitance run #{run.pk}: {run.get_scenario_display()}", styles["Title"]),
        Paragraph(f"Tiers: {run.tiers} | recorded {run.created_at:%Y-%m-%d %H:%M}", styles["Normal"]),
        Spacer(1, 6 * mm),
    ]

    config_rows = [["Setting", "Value"]] + [[k, _fmt(v)] for k, v in sorted((run.config or {}).items())]
    story.append(_table(config_rows, [60 * mm, 110 * mm]))
    story.append(Spacer(1, 6 * mm))

    summary = run.summary or {}
    scalars = [[k, _fmt(v)] for k, v in sorted(summary.items()) if not isinstance(v, (dict, list))]
    if scalars:
        story.append(Paragraph("Summary", styles["Heading2"]))
        story.append(_table([["Quantity", "Value"]] + scalars, [60 * mm, 110 * mm]))
        story.append(Spacer(1, 6 * mm))

    if points:
        story.append(Paragraph("Convergence", styles["Heading2"]))
        rows = [["tier", "n", "tiles", "C [F]", "C / 4 pi eps0", "assembly [s]", "solve [s]"]]
        for p in points:
            name = f"{p.tier}*" if p.flagged else p.tier
            rows.append([
                name, p.n, p.tiles, _fmt(p.capacitance_farads), _fmt(p.capacitance_normalized),
                f"{p.assembly_seconds:.3f}", f"{p.solve_seconds:.3f}",
            ])
        story.append(_table(rows, None))
        if any(p.flagged for p in points):
            story.append(Spacer(1, 2 * mm))
            story.append(Paragraph("* coarse point-charge results, excluded from plots", styles["Italic"]))

    doc.build(story)
    return buf.getvalue()


def _table(rows, widths):
    table = Table(rows, colWidths=widths, repeatRows=1)
    table.setStyle(TableStyle([
        ("BACKGROUND", (0, 0), (-1, 0), colors.HexColor("#0f172a")),
        ("TEXTCOLOR", (0, 0), (-1, 0), colors.white),
        ("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold"),
        ("FONTSIZE", (0, 0), (-1, -1), 8.5),
        ("GRID", (0, 0), (-1, -1), 0.4, colors.HexColor("#cbd5e1")),
        ("ROWBACKGROUNDS", (0, 1), (-1, -1), [colors.white, colors.HexColor("#f3f4f6")]),
        ("VALIGN", (0, 0), (-1, -1), "MIDDLE"),
    ]))
    return table
