# cli.py
"""
Command line front end: `slicecheck gen | ingest | verify | run | loopcheck | bench | report`.

Every failure is printed to stderr as one JSON object (`{"error", "message", "detail"}`);
the exit status is 2 for slicecheck errors and 1 for anything else.
"""
import json
import logging
import time
from pathlib import Path

import click

from slicecheck.baselines import METHODS, RUNNERS
from slicecheck.cluster import ResultsStore, preprocess, read_intents, run_cluster
from slicecheck.config import DEFAULT_LIBRA_BLOCKS, SCHEMES, ClusterConfig, Settings
from slicecheck.dpa import DpaStore
from slicecheck.errors import NotFound, SliceCheckError
from slicecheck.generator import Fault, GenSpec, gen_updates, generate, generate_intents
from slicecheck.intents import load_intents, verify
from slicecheck.loop_detect import detect_loops_distributed, partition
from slicecheck.metrics import report_from_cluster, report_from_results, report_from_run
from slicecheck.pdf_report import generate_verdict_report_pdf
from slicecheck.slicing import SliceContext, garbage_collect, handle_update

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _emit(obj) -> None:
    click.echo(json.dumps(obj, indent=2, sort_keys=True, default=str))


def _error_json(e: Exception) -> str:
    if isinstance(e, SliceCheckError):
        body = e.to_dict()
    else:
        body = {"error": type(e).__name__, "message": str(e), "detail": {}}
    return json.dumps(body, sort_keys=True, default=str)


class _Group(click.Group):
    """Turns uncaught errors into machine-readable stderr output and an exit status."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (click.exceptions.Exit, click.exceptions.Abort, click.ClickException):
            raise
        except SliceCheckError as e:
            click.echo(_error_json(e), err=True)
            ctx.exit(2)
        except Exception as e:
            logger.debug("Unexpected failure", exc_info=True)
            click.echo(_error_json(e), err=True)
            ctx.exit(1)


@click.group(cls=_Group)
@click.option("--log-level", default=None, help="Overrides SLICECHECK_LOG_LEVEL.")
@click.option("--store", "store_root", default=None, help="DPA store directory.")
@click.option("--results", "results_root", default=None, help="Results store directory.")
@click.pass_context
def cli(ctx, log_level, store_root, results_root):
    settings = Settings.from_env()
    if store_root:
        settings.store_root = store_root
    if results_root:
        settings.results_root = results_root
    level = (log_level or settings.log_level).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT)
    ctx.obj = settings


# ---------------------- gen ----------------------


@cli.command()
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--spec", "spec_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--family", default="leaf-spine")
@click.option("--leaves", default=2, type=int)
@click.option("--spines", default=2, type=int)
@click.option("--pods", default=1, type=int)
@click.option("--hosts-per-leaf", default=2, type=int)
@click.option("--overlay", default="none")
@click.option("--segments", default=1, type=int)
@click.option("--acl-density", default=0.0, type=float)
@click.option("--seed", default=0, type=int)
@click.option("--fault", "faults", multiple=True, help='e.g. "loop(3)" or "acl_hole(a,b)".')
@click.option("--intents", "intent_count", default=None, type=int, help="Sample this many.")
@click.option("--updates", "update_count", default=0, type=int)
def gen(out_dir, spec_file, intent_count, update_count, **options):
    """Generate a snapshot, its ground-truth manifest, intents and optionally updates."""
    if spec_file:
        spec = GenSpec.from_json(json.loads(Path(spec_file).read_text(encoding="utf-8")))
    else:
        options["faults"] = tuple(Fault.from_json(f) for f in options["faults"])
        spec = GenSpec(**options)
    snapshot = generate(spec, out_dir)
    manifest = json.loads((snapshot / "manifest.json").read_text(encoding="utf-8"))
    intents = generate_intents(manifest, intent_count, spec.seed)
    intents_file = snapshot / "intents.json"
    intents_file.write_text(
        json.dumps([i.to_json() for i in intents], indent=2, sort_keys=True), encoding="utf-8"
    )
    updates = []
    if update_count:
        updates = gen_updates(snapshot, update_count, spec.seed, snapshot / "updates")
    _emit(
        {
            "snapshot": str(snapshot),
            "intents": str(intents_file),
            "intent_count": len(intents),
            "faults": manifest["faults"],
            "updates": [u.to_json() for u in updates],
        }
    )


# ---------------------- ingest ----------------------


@cli.command()
@click.argument("snapshot", type=click.Path(exists=True, file_okay=False))
@click.option("--generation", default=1, type=int)
@click.pass_obj
def ingest(settings, snapshot, generation):
    """Load a snapshot into the store and print the semantic update it caused."""
    store = DpaStore(settings.store_root)
    msg = preprocess(snapshot, store, generation)
    _emit(msg.to_json() if msg is not None else {"updated_device_ids": [], "generation": None})


# ---------------------- verify ----------------------


def _verify_round(intents, ctx, store) -> list[dict]:
    total = store.total_rules()
    out = []
    for intent in intents:
        verdict = verify(intent, ctx)
        out.append(
            {
                "verdict": verdict.to_json(),
                "rules_modeled": ctx.rules_modeled_for(intent.id),
                "total_rules": total,
            }
        )
    return out


@cli.command("verify")
@click.option("--intent", "intent_file", required=True, type=click.Path(exists=True))
@click.option("--snapshot", type=click.Path(exists=True, file_okay=False))
@click.option("--watch", is_flag=True, help="Keep re-ingesting the snapshot and recheck.")
@click.option("--interval", default=2.0, type=float)
@click.option("--rounds", default=0, type=int, help="Stop watching after this many polls.")
@click.pass_obj
def verify_cmd(settings, intent_file, snapshot, watch, interval, rounds):
    """On-demand verification of the intents in one file; only their slices are built."""
    if watch and not snapshot:
        raise click.UsageError("--watch needs --snapshot")
    store = DpaStore(settings.store_root)
    generation = 1
    if snapshot:
        preprocess(snapshot, store, generation)
    intents = load_intents(intent_file)
    ctx = SliceContext(store, max_hops=settings.max_hops)
    _emit(_verify_round(intents, ctx, store))
    if not watch:
        return
    polls = 0
    while not rounds or polls < rounds:
        time.sleep(interval)
        polls += 1
        msg = preprocess(snapshot, store, generation + 1)
        if msg is None:
            continue
        generation = msg.generation
        ctx.topology = store.load_topology()
        rechecks = handle_update(ctx, msg.updated_device_ids)
        if msg.full:
            rechecks = ctx.registered()
        stale = [i for i in intents if i.id in rechecks]
        logger.info("Generation %d: %d intents to recheck", generation, len(stale))
        if stale:
            _emit({"generation": generation, "verdicts": _verify_round(stale, ctx, store)})
        garbage_collect(ctx)


# ---------------------- run ----------------------


@cli.command()
@click.option("--config", "config_file", required=True, type=click.Path(exists=True))
@click.option("--checkers", default=None, type=int)
@click.option("--scheme", default=None, type=click.Choice(SCHEMES))
@click.option("--mode", default=None, type=click.Choice(["in-process", "ipc"]))
def run(config_file, checkers, scheme, mode):
    """Replay the configured snapshots through the checker cluster."""
    config = ClusterConfig.from_file(config_file)
    overrides = {"n_checkers": checkers, "scheme": scheme, "mode": mode}
    config = ClusterConfig.from_dict(
        dict(config.__dict__, **{k: v for k, v in overrides.items() if v is not None})
    )
    result = run_cluster(config)
    report = report_from_cluster(result, ResultsStore(config.results_root))
    _emit(
        {
            "generations": result.generations,
            "verdicts": {i: v.outcome.value for i, v in result.verdicts.items()},
            "checkers": [s.to_json() for s in result.checker_stats],
            "metrics": report.to_json(),
        }
    )


# ---------------------- loopcheck ----------------------


@cli.command()
@click.option("--snapshot", type=click.Path(exists=True, file_okay=False))
@click.option("-k", "--segments", "k", default=1, type=int)
@click.option(
    "--partition", "scheme", default="sparsest", type=click.Choice(["random", "sparsest"])
)
@click.option("--mode", default="superstep", type=click.Choice(["superstep", "free"]))
@click.option("--seed", default=0, type=int)
@click.option("--no-boundaries", is_flag=True, help="Seed only from topology entry points.")
@click.pass_obj
def loopcheck(settings, snapshot, k, scheme, mode, seed, no_boundaries):
    """Distributed loop detection over k segments."""
    store = DpaStore(snapshot or settings.store_root)
    topology = store.load_topology()
    segments = partition(topology, k, scheme, seed)
    result = detect_loops_distributed(
        segments,
        store,
        topology,
        mode=mode,
        seed_boundaries=not no_boundaries,
        max_hops=settings.max_hops,
    )
    _emit(result.to_json())


# ---------------------- bench ----------------------


@cli.command()
@click.option("--method", "methods", multiple=True, type=click.Choice(METHODS))
@click.option("--snapshot", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--update", "updates", multiple=True, type=click.Path(exists=True))
@click.option("--intents", "intent_file", required=True, type=click.Path(exists=True))
@click.option("--libra-blocks", default=DEFAULT_LIBRA_BLOCKS, type=int)
@click.option("--work", "work_dir", default="bench", type=click.Path(file_okay=False))
@click.pass_obj
def bench(settings, methods, snapshot, updates, intent_file, libra_blocks, work_dir):
    """Replay the same snapshots through each method and compare verdicts and metrics."""
    intents = read_intents(intent_file)
    snapshots = [snapshot, *updates]
    out = {}
    runs = {}
    for method in methods or METHODS:
        options = {"block_count": libra_blocks} if method == "libra" else {}
        runs[method] = RUNNERS[method](
            Path(work_dir) / method, snapshots, intents, max_hops=settings.max_hops, **options
        )
        out[method] = dict(
            report_from_run(runs[method]).to_json(), rounds=runs[method].to_json()["rounds"]
        )
    outcomes = [r.outcomes() for r in runs.values()]
    _emit({"methods": out, "agree": all(o == outcomes[0] for o in outcomes)})


# ---------------------- report ----------------------


@cli.command()
@click.option("--generation", default=None, type=int, help="Defaults to the latest.")
@click.option("--format", "fmt", default="json", type=click.Choice(["json", "csv", "pdf"]))
@click.option("--out", "out_file", default=None, type=click.Path(dir_okay=False))
@click.pass_obj
def report(settings, generation, fmt, out_file):
    """Render verdict and metrics tables from the results store."""
    results = ResultsStore(settings.results_root)
    generations = results.generations()
    if not generations:
        raise NotFound(f"{settings.results_root} holds no verdicts")
    generation = generation if generation is not None else generations[-1]
    metrics = report_from_results(results, generation)
    if fmt == "json":
        text = json.dumps(metrics.to_json(), indent=2, sort_keys=True)
    elif fmt == "csv":
        text = metrics.intent_frame().to_csv(index=False)
        text += "\n" + metrics.checker_frame().to_csv(index=False)
    else:
        if not out_file:
            raise click.UsageError("--format pdf needs --out")
        data = generate_verdict_report_pdf(results.verdicts(generation), generation, metrics)
        Path(out_file).write_bytes(data)
        _emit({"pdf": out_file, "bytes": len(data)})
        return
    if out_file:
        Path(out_file).write_text(text, encoding="utf-8")
    else:
        click.echo(text)


def main():
    cli(prog_name="slicecheck")


if __name__ == "__main__":
    main()
