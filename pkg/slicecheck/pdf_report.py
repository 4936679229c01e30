# pdf_report.py
from io import BytesIO
from datetime import datetime, timezone

from reportlab.lib.pagesizes import letter
from reportlab.lib.units import inch
from reportlab.pdfgen import canvas
from reportlab.lib import colors

from slicecheck.intents import Outcome, Verdict
from slicecheck.metrics import MetricsReport

OUTCOME_COLORS = {
    Outcome.HOLDS: colors.green,
    Outcome.VIOLATED: colors.red,
    Outcome.ERROR: colors.orange,
}


def _safe_str(x):
    """
    Safely convert a value to string, avoiding None.
    Args:
        x (Any): The input value to convert.
    Returns:
        str: Empty string if None, otherwise stringified value.
    """
    return "" if x is None else str(x)


def _ratio(x):
    """
    Format phi / psi for display.
    Args:
        x (Fraction | None): Exact ratio.
    Returns:
        str: Four decimals followed by the exact fraction, or "n/a".
    """
    if x is None:
        return "n/a"
    return f"{float(x):.4f} ({x})"


def _witness_line(verdict: Verdict) -> str:
    if verdict.error:
        return verdict.error
    if not verdict.witness:
        return ""
    hops = [f"{v['device']}:{v['table']}" for v in verdict.witness.get("vertices", [])]
    end = (verdict.witness.get("terminal") or {}).get("kind", "")
    return " -> ".join(hops) + (f" [{end}]" if end else "")


def generate_verdict_report_pdf(
    verdicts: dict[str, Verdict], generation: int, report: MetricsReport | None = None
) -> bytes:
    """
    Render one generation's verdicts (and optional metrics) as a PDF.
    Args:
        verdicts (dict[str, Verdict]): Verdicts by intent id.
        generation (int): Generation the verdicts belong to.
        report (MetricsReport, optional): phi / psi and per-checker rows.
    Returns:
        bytes: The binary PDF data.
    """
    buf = BytesIO()
    c = canvas.Canvas(buf, pagesize=letter)
    width, height = letter
    margin = 0.75 * inch
    y = height - margin

    def new_page_if_needed(font="Helvetica", size=10):
        nonlocal y
        if y < 1.25 * inch:
            c.showPage()
            y = height - margin
            c.setFont(font, size)

    # Header
    c.setFont("Helvetica-Bold", 16)
    c.drawString(margin, y, f"Verification report · generation {generation}")
    c.setFillColor(colors.grey)
    c.setFont("Helvetica", 10)
    stamp = datetime.now(timezone.utc).strftime("%Y-%m-%d %H:%M UTC")
    c.drawRightString(width - margin, y - 14, f"Rendered: {stamp}")
    c.setFillColor(colors.black)
    y -= 30

    # Summary counts
    counts = {o: 0 for o in Outcome}
    for v in verdicts.values():
        counts[v.outcome] += 1
    c.setFont("Helvetica-Bold", 12)
    c.drawString(margin, y, "Summary")
    c.setFont("Helvetica", 10)
    y -= 14
    for outcome in Outcome:
        c.setFillColor(OUTCOME_COLORS[outcome])
        c.drawString(margin, y, f"{outcome.value}: {counts[outcome]}")
        y -= 14
    c.setFillColor(colors.black)

    if report is not None:
        c.drawRightString(width - margin, y + 42, f"phi: {_ratio(report.phi)}")
        c.drawRightString(width - margin, y + 28, f"psi: {_ratio(report.psi)}")
        c.drawRightString(width - margin, y + 14, f"method: {_safe_str(report.method)}")

    # Divider
    y -= 6
    c.setStrokeColor(colors.lightgrey)
    c.line(margin, y, width - margin, y)
    y -= 16

    # Verdict table
    c.setFont("Helvetica-Bold", 11)
    c.drawString(margin, y, "Intent")
    c.drawString(margin + 200, y, "Outcome")
    c.drawRightString(width - margin - 60, y, "Tables")
    c.drawRightString(width - margin, y, "Rules")
    y -= 12
    c.line(margin, y, width - margin, y)
    y -= 10
    c.setFont("Helvetica", 10)

    for intent_id, verdict in sorted(verdicts.items()):
        c.drawString(margin, y, _safe_str(intent_id)[:36])
        c.setFillColor(OUTCOME_COLORS[verdict.outcome])
        c.drawString(margin + 200, y, verdict.outcome.value)
        c.setFillColor(colors.black)
        c.drawRightString(width - margin - 60, y, str(verdict.stats.tables_touched))
        c.drawRightString(width - margin, y, str(verdict.stats.rules_modeled))
        y -= 12
        detail = _witness_line(verdict)
        if detail and verdict.outcome != Outcome.HOLDS:
            c.setFillColor(colors.grey)
            c.setFont("Helvetica", 8)
            c.drawString(margin + 12, y, detail[:110])
            c.setFont("Helvetica", 10)
            c.setFillColor(colors.black)
            y -= 12
        y -= 2
        new_page_if_needed()

    # Per-checker table
    if report is not None and report.per_checker:
        y -= 6
        c.setStrokeColor(colors.lightgrey)
        c.line(margin, y, width - margin, y)
        y -= 16
        new_page_if_needed("Helvetica-Bold", 11)
        c.setFont("Helvetica-Bold", 11)
        c.drawString(margin, y, "Checker")
        c.drawRightString(width - margin - 140, y, "Modeled")
        c.drawRightString(width - margin - 60, y, "Traversed")
        c.drawRightString(width - margin, y, "Peak tables")
        y -= 14
        c.setFont("Helvetica", 10)
        for row in report.per_checker:
            c.drawString(margin, y, str(row.checker))
            c.drawRightString(width - margin - 140, y, str(row.rules_modeled))
            c.drawRightString(width - margin - 60, y, str(row.rules_traversed))
            c.drawRightString(width - margin, y, str(row.peak_tables))
            y -= 14
            new_page_if_needed()

    c.setFillColor(colors.grey)
    c.setFont("Helvetica", 9)
    c.drawString(margin, 0.6 * inch, "Generated by slicecheck")
    c.setFillColor(colors.black)

    c.showPage()
    c.save()
    pdf_bytes = buf.getvalue()
    buf.close()
    return pdf_bytes
