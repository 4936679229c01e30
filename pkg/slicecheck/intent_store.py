# intent_store.py
"""SQLite registry of configured intents; the orchestrator reads its intent list from here."""
import json
import logging
import sqlite3

from slicecheck.errors import IoFailure, NotFound
from slicecheck.intents import IntentSpec, parse_intent

logger = logging.getLogger(__name__)

SCHEMA = """
CREATE TABLE IF NOT EXISTS intents (
    intent_id TEXT PRIMARY KEY,
    type_code INTEGER NOT NULL,
    document TEXT NOT NULL,
    registered_at TEXT NOT NULL DEFAULT (datetime('now'))
)
"""


def create_connection(db_file: str):
    """
    Open the registry database, creating the intents table when it is missing.
    Args:
        db_file (str): Path to the SQLite database file (":memory:" works too).
    Returns:
        sqlite3.Connection: Open connection.
    Raises:
        IoFailure: If the database cannot be opened.
    """
    try:
        conn = sqlite3.connect(db_file)
        conn.execute(SCHEMA)
        conn.commit()
    except sqlite3.Error as e:
        raise IoFailure(f"cannot open intent registry {db_file}: {e}", path=str(db_file))
    return conn


def close_connection(conn):
    if conn:
        conn.close()


def execute_query(conn, query: str, params=()):
    """
    Execute a single SQL statement and commit.
    Returns:
        sqlite3.Cursor | None: Cursor on success, None if the statement failed (logged).
    """
    try:
        cur = conn.cursor()
        cur.execute(query, params)
        conn.commit()
        return cur
    except sqlite3.Error as e:
        logger.error("Registry query failed: %s", e)
        return None


def fetch_all(conn, query: str, params=()):
    cur = execute_query(conn, query, params)
    if cur:
        return cur.fetchall()
    return []


def fetch_one(conn, query: str, params=()):
    cur = execute_query(conn, query, params)
    if cur:
        return cur.fetchone()
    return None


# ---------------------- Registry ----------------------


def register_intent(conn, intent: IntentSpec) -> bool:
    """Insert or replace an intent; returns False when the write failed."""
    cur = execute_query(
        conn,
        "INSERT OR REPLACE INTO intents (intent_id, type_code, document) VALUES (?, ?, ?)",
        (intent.id, intent.type_code, intent.canonical()),
    )
    return cur is not None


def remove_intent(conn, intent_id: str) -> bool:
    cur = execute_query(conn, "DELETE FROM intents WHERE intent_id = ?", (intent_id,))
    return cur is not None and cur.rowcount > 0


def get_intent(conn, intent_id: str) -> IntentSpec:
    row = fetch_one(conn, "SELECT document FROM intents WHERE intent_id = ?", (intent_id,))
    if row is None:
        raise NotFound(f"intent {intent_id} is not registered", intent=intent_id)
    return parse_intent(row[0])


def list_intents(conn) -> list[IntentSpec]:
    """All registered intents, ordered by id."""
    rows = fetch_all(conn, "SELECT document FROM intents ORDER BY intent_id")
    return [parse_intent(r[0]) for r in rows]


def intent_documents(conn) -> list[dict]:
    rows = fetch_all(conn, "SELECT document FROM intents ORDER BY intent_id")
    return [json.loads(r[0]) for r in rows]
