# metrics.py
"""
Rule duplication (phi) and rule reuse (psi), plus the per-checker / per-intent tables that
`bench` and `report` print.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import pandas as pd

from slicecheck.baselines import MethodRun
from slicecheck.cluster import ClusterResult, ResultsStore
from slicecheck.errors import DivisionByZero
from slicecheck.intents import Verdict

logger = logging.getLogger(__name__)


def _exact(value) -> Fraction:
    # floats go through str so 827048.125 stays exact
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


def compute_phi(per_slice_rule_counts: Iterable, total_rules) -> Fraction:
    """
    Rule duplication factor: rules summed over every slice divided by the rules in the network.
    Args:
        per_slice_rule_counts (Iterable): Rules modeled in each slice.
        total_rules: Rules in the whole network.
    Returns:
        Fraction: 1 when every rule sits in exactly one slice.
    Raises:
        DivisionByZero: If total_rules is not positive.
    """
    total = _exact(total_rules)
    if total <= 0:
        raise DivisionByZero("phi needs a positive rule total", total_rules=str(total_rules))
    return sum((_exact(c) for c in per_slice_rule_counts), Fraction(0)) / total


def phi_from_average(average, slices: int, total_rules) -> Fraction:
    """phi from a published per-slice average and slice count."""
    return compute_phi([_exact(average) * slices], total_rules)


def compute_psi(traversed: Iterable, modeled: Iterable) -> Fraction:
    """
    Rule reuse rate: traversals summed over checkers divided by rules modeled over checkers.
    Raises:
        DivisionByZero: If no checker models a rule.
    """
    rules = sum((_exact(m) for m in modeled), Fraction(0))
    if rules <= 0:
        raise DivisionByZero("psi needs at least one modeled rule")
    return sum((_exact(t) for t in traversed), Fraction(0)) / rules


def recount_traversals(results: ResultsStore, generation: int | None = None) -> dict[int, int]:
    """Traversal events per checker in one generation, counted from the raw logs."""
    return {checker: len(events) for checker, events in results.traversals(generation).items()}


# ---------------------- Report ----------------------


@dataclass
class CheckerMetrics:
    checker: int
    rules_modeled: int
    rules_traversed: int
    peak_tables: int = 0

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class IntentMetrics:
    intent_id: str
    outcome: str
    tables_touched: int
    rules_modeled: int
    steps: int
    error: str = ""

    @classmethod
    def from_verdict(cls, verdict: Verdict) -> "IntentMetrics":
        return cls(
            verdict.intent_id,
            verdict.outcome.value,
            verdict.stats.tables_touched,
            verdict.stats.rules_modeled,
            verdict.stats.steps,
            verdict.error_kind,
        )

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class MetricsReport:
    phi: Fraction | None = None
    psi: Fraction | None = None
    per_checker: list[CheckerMetrics] = field(default_factory=list)
    per_intent: list[IntentMetrics] = field(default_factory=list)
    method: str = "scylla"

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "phi": float(self.phi) if self.phi is not None else None,
            "psi": float(self.psi) if self.psi is not None else None,
            "exact": {
                "phi": str(self.phi) if self.phi is not None else None,
                "psi": str(self.psi) if self.psi is not None else None,
            },
            "per_checker": [c.to_json() for c in self.per_checker],
            "per_intent": [i.to_json() for i in self.per_intent],
        }

    def checker_frame(self) -> pd.DataFrame:
        columns = ["checker", "rules_modeled", "rules_traversed", "peak_tables"]
        return pd.DataFrame([c.to_json() for c in self.per_checker], columns=columns)

    def intent_frame(self) -> pd.DataFrame:
        columns = ["intent_id", "outcome", "tables_touched", "rules_modeled", "steps", "error"]
        return pd.DataFrame([i.to_json() for i in self.per_intent], columns=columns)


def _psi_or_none(traversed: list[int], modeled: list[int]) -> Fraction | None:
    try:
        return compute_psi(traversed, modeled)
    except DivisionByZero:
        logger.warning("No rules modeled; psi left empty")
        return None


def report_from_cluster(
    result: ClusterResult, results: ResultsStore | None = None
) -> MetricsReport:
    """
    Metrics of the last generation of a cluster run. With a results store the traversal counts
    come from its raw logs instead of the checker statistics. psi is per generation: traversals
    of that generation over the rules modeled at its end.
    """
    recount = recount_traversals(results, result.generations) if results is not None else {}
    per_checker = [
        CheckerMetrics(
            s.checker,
            s.rules_modeled,
            recount.get(s.checker, s.traversals),
            s.peak_tables,
        )
        for s in result.checker_stats
    ]
    psi = _psi_or_none(
        [c.rules_traversed for c in per_checker], [c.rules_modeled for c in per_checker]
    )
    intents = [IntentMetrics.from_verdict(v) for v in result.verdicts.values()]
    return MetricsReport(psi=psi, per_checker=per_checker, per_intent=intents)


def report_from_run(run: MethodRun) -> MetricsReport:
    """Metrics of the last round of a baseline run; phi only for libra, whose slices are blocks."""
    if not run.rounds:
        return MetricsReport(method=run.method)
    last = run.rounds[-1]
    phi = None
    if last.slice_rules and run.total_rules > 0:
        phi = compute_phi(last.slice_rules, run.total_rules)
    checker = CheckerMetrics(0, last.rules_modeled, last.traversals)
    psi = _psi_or_none([last.traversals], [last.rules_modeled])
    intents = [IntentMetrics.from_verdict(v) for _, v in sorted(last.verdicts.items())]
    return MetricsReport(phi, psi, [checker], intents, method=run.method)


def report_from_results(results: ResultsStore, generation: int) -> MetricsReport:
    """Rebuild a cluster report from what the checkers left in the results store."""
    recount = recount_traversals(results, generation)
    per_checker = [
        CheckerMetrics(
            s["checker"],
            s.get("rules_modeled", 0),
            recount.get(s["checker"], s.get("traversals", 0)),
            s.get("peak_tables", 0),
        )
        for s in results.checker_stats()
    ]
    psi = _psi_or_none(
        [c.rules_traversed for c in per_checker], [c.rules_modeled for c in per_checker]
    )
    intents = [IntentMetrics.from_verdict(v) for v in results.verdicts(generation).values()]
    return MetricsReport(psi=psi, per_checker=per_checker, per_intent=intents)
