from fractions import Fraction

from slicecheck.intents import Outcome, Verdict, VerdictStats
from slicecheck.metrics import CheckerMetrics, MetricsReport
from slicecheck.pdf_report import _ratio, _witness_line, generate_verdict_report_pdf

WITNESS = {
    "vertices": [
        {"device": "a", "table": "fwd", "packet_set": [[]], "rewritten": False},
        {"device": "b", "table": "fwd", "packet_set": [[]], "rewritten": False},
    ],
    "terminal": {"kind": "Dropped"},
}


def verdicts(n):
    out = {}
    for k in range(n):
        outcome = [Outcome.HOLDS, Outcome.VIOLATED, Outcome.ERROR][k % 3]
        out[f"intent-{k}"] = Verdict(
            f"intent-{k}",
            outcome,
            witness=WITNESS if outcome == Outcome.VIOLATED else None,
            stats=VerdictStats(3, 7, 11),
            error="PathLengthExceeded: too long" if outcome == Outcome.ERROR else "",
            error_kind="PathLengthExceeded" if outcome == Outcome.ERROR else "",
        )
    return out


def test_pdf_bytes():
    pdf = generate_verdict_report_pdf(verdicts(3), 1)
    assert pdf.startswith(b"%PDF")
    assert pdf.rstrip().endswith(b"%%EOF")


def test_pdf_with_metrics_and_many_rows():
    report = MetricsReport(
        phi=Fraction(184, 27),
        psi=Fraction(5, 2),
        per_checker=[CheckerMetrics(i, 10 * i, 20 * i, i) for i in range(4)],
    )
    short = generate_verdict_report_pdf(verdicts(3), 2, report)
    long = generate_verdict_report_pdf(verdicts(120), 2, report)
    assert long.startswith(b"%PDF")
    assert len(long) > len(short)


def test_pdf_without_verdicts():
    assert generate_verdict_report_pdf({}, 0).startswith(b"%PDF")


def test_witness_line():
    v = verdicts(3)
    assert _witness_line(v["intent-1"]) == "a:fwd -> b:fwd [Dropped]"
    assert _witness_line(v["intent-2"]) == "PathLengthExceeded: too long"
    assert _witness_line(v["intent-0"]) == ""


def test_ratio_formatting():
    assert _ratio(None) == "n/a"
    assert _ratio(Fraction(5, 2)) == "2.5000 (5/2)"
