import argparse
import logging
from io import BytesIO

from flask import Flask, jsonify, request, send_file

from slicecheck.cluster import ResultsStore
from slicecheck.config import Settings
from slicecheck.dpa import DpaStore
from slicecheck.errors import NotFound, SliceCheckError
from slicecheck.intents import parse_intent, verify
from slicecheck.metrics import report_from_results
from slicecheck.pdf_report import generate_verdict_report_pdf
from slicecheck.slicing import SliceContext

# Use ONLY these helpers for registry access
from slicecheck.intent_store import (
    create_connection,
    close_connection,
    get_intent,
    intent_documents,
    register_intent,
)

logger = logging.getLogger(__name__)

app = Flask(__name__)
settings = Settings.from_env()
app.config["STORE_ROOT"] = settings.store_root
app.config["RESULTS_ROOT"] = settings.results_root
app.config["DB_FILE"] = settings.db_file
app.config["MAX_HOPS"] = settings.max_hops

# ---------------------- Helpers ----------------------


def _fail(e: Exception, status: int = 400):
    """
    JSON error body for an API failure.
    Args:
        e (Exception): The error to report.
        status (int): HTTP status, 404 for NotFound regardless of the argument.
    Returns:
        tuple: (Response, status)
    """
    if isinstance(e, NotFound):
        status = 404
    return jsonify({"ok": False, "error": str(e), "kind": type(e).__name__}), status


def _results() -> ResultsStore:
    return ResultsStore(app.config["RESULTS_ROOT"])


def _request_json():
    data = request.get_json(silent=True)
    if data is None:
        raise SliceCheckError("request body must be JSON")
    return data


# ---------------------- Routes ----------------------


@app.route("/health")
def health():
    return jsonify({"ok": True})


@app.route("/intents", methods=["GET", "POST"])
def intents():
    """
    GET lists the registered intent documents; POST registers one (or a list of) intents.
    Returns:
        Response: {"ok": true, "intents": [...]} or {"ok": true, "registered": [...]}.
    """
    conn = create_connection(app.config["DB_FILE"])
    try:
        if request.method == "GET":
            return jsonify({"ok": True, "intents": intent_documents(conn)})
        try:
            data = _request_json()
            docs = data if isinstance(data, list) else [data]
            specs = [parse_intent(d) for d in docs]
        except SliceCheckError as e:
            return _fail(e)
        registered = [s.id for s in specs if register_intent(conn, s)]
        return jsonify({"ok": True, "registered": registered}), 201
    finally:
        close_connection(conn)


@app.route("/verify", methods=["POST"])
def verify_now():
    """
    On-demand verification of one intent against the current store. The body is an intent
    document, or {"intent_id": ...} naming a registered one.
    Returns:
        Response: {"ok": true, "verdict": {...}, "rules_modeled": int}
    """
    try:
        data = _request_json()
        if isinstance(data, dict) and set(data) == {"intent_id"}:
            conn = create_connection(app.config["DB_FILE"])
            try:
                intent = get_intent(conn, data["intent_id"])
            finally:
                close_connection(conn)
        else:
            intent = parse_intent(data)
        store = DpaStore(app.config["STORE_ROOT"])
        ctx = SliceContext(store, max_hops=app.config["MAX_HOPS"])
        verdict = verify(intent, ctx)
    except SliceCheckError as e:
        return _fail(e)
    return jsonify(
        {
            "ok": True,
            "verdict": verdict.to_json(),
            "rules_modeled": ctx.rules_modeled_for(intent.id),
        }
    )


@app.route("/verdicts/<int:generation>")
def verdicts(generation: int):
    try:
        found = _results().verdicts(generation)
    except SliceCheckError as e:
        return _fail(e)
    body = {i: v.to_json() for i, v in found.items()}
    return jsonify({"ok": True, "generation": generation, "verdicts": body})


@app.route("/verdicts/<int:generation>/<intent_id>")
def verdict(generation: int, intent_id: str):
    try:
        found = _results().read_verdict(generation, intent_id)
    except SliceCheckError as e:
        return _fail(e)
    return jsonify({"ok": True, "verdict": found.to_json()})


@app.route("/report.pdf")
def report_pdf():
    """
    Stream the verdict report of one generation (?generation=N, latest by default).
    Returns:
        Response: PDF file download, or a 404 JSON body when there is nothing to report.
    """
    results = _results()
    generations = results.generations()
    if not generations:
        return _fail(NotFound("no verdicts yet"))
    generation = request.args.get("generation", type=int) or generations[-1]
    try:
        metrics = report_from_results(results, generation)
        pdf_bytes = generate_verdict_report_pdf(results.verdicts(generation), generation, metrics)
    except SliceCheckError as e:
        return _fail(e)

    return send_file(
        BytesIO(pdf_bytes),
        mimetype="application/pdf",
        as_attachment=True,
        download_name=f"generation_{generation}_report.pdf",
    )


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="slicecheck HTTP API")
    parser.add_argument(
        "--host", type=str, default="127.0.0.1", help="Host to run the Flask app on"
    )
    parser.add_argument("--port", type=int, default=5000, help="Port to run the Flask app on")
    return parser.parse_args()


if __name__ == "__main__":
    args = parse_args()
    app.run(host=args.host, port=args.port, debug=True)
