"""Command line front-end.

Exit codes: 0 success, 1 usage error, 2 run failure.
"""
from __future__ import annotations

import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import click

from .errors import InvalidQuery, PopPathError
from .harness import (
    BACKENDS,
    MODES,
    RunConfig,
    cache_ops,
    lint_dataset,
    make_backend,
    read_config_file,
    run_eval,
    score,
)
from .llm.client import ChatEndpointConfig
from .orchestrator import Pipeline, Trace
from .synthetic import PRESETS, SyntheticConfig, generate_dataset, write_dataset
from .trajectory import Query, build_graph, format_route, load_dataset

EXIT_USAGE = 1
EXIT_FAILURE = 2


def _build_config(opts: dict) -> RunConfig:
    base = read_config_file(opts["config"]) if opts.get("config") else {}
    endpoint_kw = dict(base.pop("endpoint", {}))
    if opts.get("model") is not None:
        endpoint_kw["model"] = opts["model"]
    if opts.get("temperature") is not None:
        endpoint_kw["temperature"] = opts["temperature"]
    if opts.get("base_url") is not None:
        endpoint_kw["base_url"] = opts["base_url"]
    overrides = {
        "datasets": list(opts["dataset"]) if opts.get("dataset") else None,
        "backend": opts.get("backend"),
        "k": opts.get("k"),
        "directed": opts.get("directed"),
        "limit": opts.get("limit"),
        "seed": opts.get("seed"),
        "parallelism": opts.get("parallelism"),
        "out_dir": opts.get("out"),
        "cache_dir": opts.get("cache_dir"),
        "rank_context": opts.get("rank_context"),
        "modes": (opts["mode"],) if opts.get("mode") else None,
    }
    for key, value in overrides.items():
        if value is not None:
            base[key] = value
    base["endpoint"] = ChatEndpointConfig(**endpoint_kw)
    return RunConfig(**base)


def common_options(f):
    opts = [
        click.option("--config", type=click.Path(exists=True, dir_okay=False), help="INI config file; flags win."),
        click.option("--backend", type=click.Choice(BACKENDS), default=None),
        click.option("--model", default=None, help="Chat model id (llm backend)."),
        click.option("--base-url", default=None, help="Chat-completion endpoint base URL."),
        click.option("--temperature", type=float, default=None),
        click.option("--k", type=int, default=None, help="Paths generated by synthesis."),
        click.option("--directed/--undirected", default=None),
        click.option("--seed", type=int, default=None),
        click.option("--cache-dir", type=click.Path(file_okay=False), default=None),
        click.option("--rank-context", type=click.Choice(["full", "filtered"]), default=None),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def cli(verbose):
    """Popular-path queries over historical trajectories."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@cli.command("eval")
@click.option("--dataset", multiple=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(MODES), default=None, help="Default: both modes.")
@click.option("--limit", type=int, default=None, help="Seeded sample size per dataset and mode.")
@click.option("--parallelism", type=int, default=None)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@common_options
def eval_cmd(**opts):
    """Run the full protocol and write CSV/JSON reports."""
    config = _build_config(opts)
    if not config.datasets:
        raise click.UsageError("at least one --dataset is required")
    outcome = run_eval(config)
    for agg in outcome.aggregates:
        f1 = "-" if agg["f1"] is None else f"{agg['f1']:.3f}"
        tr = "-" if agg["traversability"] is None else f"{agg['traversability']:.3f}"
        click.echo(f"{agg['dataset']:<16} {agg['mode']:<8} n={agg['queries']:<5} "
                   f"failed={agg['failed']:<4} f1={f1} traversability={tr} "
                   f"tokens/query={agg['prompt_tokens'] + agg['completion_tokens']:.0f}")
    for name, mode, why in outcome.skipped:
        click.echo(f"{name:<16} {mode:<8} skipped ({why})")
    for path in outcome.files:
        click.echo(f"wrote {path}")
    return EXIT_FAILURE if outcome.total_failure else 0


@cli.command("query")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--source", "-s", type=int, required=True)
@click.option("--destination", "-d", type=int, required=True)
@common_options
def query_cmd(dataset, source, destination, **opts):
    """Answer a single <source, destination> query."""
    config = _build_config(opts)
    ds = load_dataset(dataset)
    try:
        q = Query(source, destination).validate(ds)
    except InvalidQuery as exc:
        raise click.UsageError(str(exc)) from None
    graph = build_graph(ds, config.directed)
    backend = make_backend(config, ds, graph)
    pipeline = Pipeline(backend, ds, graph, k=config.k, rank_context=config.rank_context)
    result = score(pipeline.run_query(q), ds, graph)
    m = result.metrics
    click.echo(json.dumps({
        "source": source,
        "destination": destination,
        "stage": result.stage,
        "route": format_route(result.route),
        "candidates": [format_route(r) for r in result.candidates],
        "f1": m.f1 if m else None,
        "traversability": m.traversability if m else None,
        "prompt_tokens": result.total_usage.prompt_tokens,
        "completion_tokens": result.total_usage.completion_tokens,
        "flags": list(result.flags),
    }, indent=2))
    return 0


@cli.command("rank")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--what", type=click.Choice(["poi", "edge", "both"]), default="both")
@common_options
def rank_cmd(dataset, what, **opts):
    """Dump POI and/or edge popularity rankings."""
    config = _build_config(opts)
    ds = load_dataset(dataset)
    graph = build_graph(ds, config.directed)
    backend = make_backend(config, ds, graph)
    trace = Trace()
    out = {}
    if what in ("poi", "both"):
        out["poi_rank"] = [[p, f] for p, f in backend.rank_pois(ds, graph, trace).entries]
    if what in ("edge", "both"):
        out["edge_rank"] = [[list(e), f] for e, f in backend.rank_edges(ds, graph, trace).entries]
    click.echo(json.dumps(out))
    return 0


@cli.command("synth")
@click.option("--preset", type=click.Choice(sorted(PRESETS)), default=None)
@click.option("--nodes", type=int, default=None)
@click.option("--density", type=float, default=None)
@click.option("--routes", type=int, default=None)
@click.option("--pivotal", type=int, default=None)
@click.option("--adherence", type=float, default=None)
@click.option("--seed", type=int, default=0)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def synth_cmd(preset, nodes, density, routes, pivotal, adherence, seed, out):
    """Generate a synthetic trajectory file plus a .stats.json sidecar."""
    base = PRESETS[preset] if preset else None
    kw = {}
    if base is not None:
        kw = {f.name: getattr(base, f.name) for f in fields(SyntheticConfig)}
    for key, value in (("n_nodes", nodes), ("target_density", density),
                       ("n_trajectories", routes), ("n_pivotal", pivotal),
                       ("adherence", adherence)):
        if value is not None:
            kw[key] = value
    missing = [k for k in ("n_nodes", "target_density", "n_trajectories") if k not in kw]
    if missing:
        raise click.UsageError("give --preset or all of --nodes, --density, --routes")
    if base is not None and nodes is not None and pivotal is None:
        kw["n_pivotal"] = None
    kw["rng_seed"] = seed
    config = SyntheticConfig(**kw)
    dataset, stats, _ = generate_dataset(config, name=Path(out).stem)
    path, sidecar = write_dataset(dataset, stats, out)
    click.echo(f"wrote {path} ({len(dataset)} trajectories, {stats.unique_pairs} unique pairs, "
               f"density {stats.density:.3f}, adherence {stats.highway_adherence:.3f})")
    click.echo(f"wrote {sidecar}")
    return 0


@cli.command("cache")
@click.argument("action", type=click.Choice(["stats", "clear", "export", "import"]))
@click.option("--cache-dir", required=True, type=click.Path(file_okay=False))
@click.option("--archive", type=click.Path(dir_okay=False), default=None)
def cache_cmd(action, cache_dir, archive):
    """Inspect or move the response cache."""
    if action in ("export", "import") and archive is None:
        raise click.UsageError(f"{action} needs --archive")
    click.echo(json.dumps(cache_ops(action, cache_dir, archive)))
    return 0


@cli.command("validate")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
def validate_cmd(dataset):
    """Lint a trajectory file."""
    report = lint_dataset(Path(dataset).read_text(encoding="utf-8"))
    click.echo(json.dumps(report, indent=2))
    return 0


def main(argv=None):
    try:
        code = cli.main(args=argv, prog_name="poppath", standalone_mode=False)
    except click.exceptions.Exit as exc:
        code = exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        code = EXIT_USAGE
    except click.UsageError as exc:
        exc.show()
        code = EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        code = EXIT_USAGE
    except (PopPathError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        code = EXIT_FAILURE
    sys.exit(code or 0)


if __name__ == "__main__":
    main()
