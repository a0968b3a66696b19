"""Evaluation protocol: query enumeration, batch runs, scoring and reports."""
from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import random
import tarfile
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import kernels
from .errors import MissingCacheDir, NoEligibleQueries, PopPathError
from .llm.client import ChatClient, ChatEndpointConfig
from .metrics import MetricReport, aggregate, evaluate
from .orchestrator import GENERATE, SEARCH, OracleBackend, Pipeline, QueryResult, with_metrics
from .trajectory import (
    Query,
    TrajectoryDataset,
    TrajectoryGraph,
    build_graph,
    ground_truth_route,
    load_dataset,
)

logger = logging.getLogger(__name__)

MODES = (SEARCH, GENERATE)
BACKENDS = ("oracle", "llm", "stub")
CSV_COLUMNS = ["dataset", "source", "destination", "stage", "f1", "traversability",
               "prompt_tokens", "completion_tokens", "latency_ms", "backend", "flags"]
AGGREGATE_COLUMNS = ["dataset", "mode", "backend", "queries", "failed", "f1", "traversability",
                     "prompt_tokens", "completion_tokens", "latency_ms"]


def search_pairs(dataset: TrajectoryDataset) -> List[Tuple[int, int]]:
    """Ordered pairs (s, d) where s precedes d in at least one trajectory."""
    index = dataset.poi_index
    _, offsets = dataset.flat
    m = kernels.precedence_matrix(dataset.dense_flat, offsets, len(index))
    rows, cols = m.nonzero()
    return sorted((index[i], index[j]) for i, j in zip(rows.tolist(), cols.tolist()))


def generate_pairs(dataset: TrajectoryDataset, graph: TrajectoryGraph) -> List[Tuple[int, int]]:
    """Pairs with no historical subpath whose destination is still reachable."""
    searchable = set(search_pairs(dataset))
    out = []
    for s in dataset.poi_index:
        for d in sorted(graph.reachable_from(s)):
            if d != s and (s, d) not in searchable:
                out.append((s, d))
    return out


def enumerate_queries(dataset: TrajectoryDataset, graph: TrajectoryGraph, mode: str = SEARCH,
                      limit: Optional[int] = None, seed: int = 0) -> List[Query]:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    pairs = search_pairs(dataset) if mode == SEARCH else generate_pairs(dataset, graph)
    if limit is not None:
        if limit < 0:
            raise ValueError("limit must be non-negative")
        if limit < len(pairs):
            pairs = sorted(random.Random(seed).sample(pairs, limit))
    if not pairs:
        raise NoEligibleQueries(mode)
    return [Query(s, d) for s, d in pairs]


def score(result: QueryResult, dataset: TrajectoryDataset, graph: TrajectoryGraph) -> QueryResult:
    """Attach metrics: F1 against the canonical popular path for SEARCH
    queries, Traversability always. F1 stays blank when no ground truth exists."""
    if not result.ok:
        return result
    truth = ground_truth_route(dataset, graph, result.query)
    return with_metrics(result, evaluate(result.route, graph, truth))


@dataclass
class RunConfig:
    datasets: List[str] = field(default_factory=list)
    backend: str = "oracle"
    endpoint: ChatEndpointConfig = field(default_factory=ChatEndpointConfig)
    directed: bool = True
    k: int = 3
    rank_context: str = "full"
    parallelism: int = 1
    out_dir: str = "reports"
    seed: int = 0
    modes: Tuple[str, ...] = MODES
    limit: Optional[int] = None
    cache_dir: Optional[str] = None
    view: str = "compact"
    run_id: Optional[str] = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        for m in self.modes:
            if m not in MODES:
                raise ValueError(f"unknown mode {m!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.run_id is None:
            self.run_id = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")

    def public(self) -> dict:
        """Config echo for reports; holds the credential variable name only."""
        out = asdict(self)
        out["modes"] = list(self.modes)
        return out


_RUN_KEYS = {
    "backend": str, "k": int, "rank_context": str, "parallelism": int, "out_dir": str,
    "seed": int, "limit": int, "cache_dir": str, "view": str,
}
_ENDPOINT_KEYS = {
    "base_url": str, "model": str, "temperature": float, "timeout": float,
    "max_retries": int, "api_key_env": str,
}


def read_config_file(path) -> dict:
    """Flat INI file with ``[run]`` and ``[endpoint]`` sections; returns
    keyword arguments for :class:`RunConfig`."""
    parser = configparser.ConfigParser()
    if not parser.read(path, encoding="utf-8"):
        raise FileNotFoundError(path)
    out: dict = {}
    if parser.has_section("run"):
        sec = parser["run"]
        for key, conv in _RUN_KEYS.items():
            if key in sec:
                out[key] = conv(sec[key])
        if "directed" in sec:
            out["directed"] = sec.getboolean("directed")
        if "datasets" in sec:
            out["datasets"] = [p.strip() for p in sec["datasets"].split(",") if p.strip()]
        if "modes" in sec:
            out["modes"] = tuple(m.strip() for m in sec["modes"].split(",") if m.strip())
    if parser.has_section("endpoint"):
        sec = parser["endpoint"]
        out["endpoint"] = {key: conv(sec[key]) for key, conv in _ENDPOINT_KEYS.items() if key in sec}
    return out


def make_backend(config: RunConfig, dataset: TrajectoryDataset, graph: TrajectoryGraph):
    from .llm.backend import LLMBackend

    if config.backend == "oracle":
        return OracleBackend()
    if config.backend == "stub":
        from .llm.stub import OracleResponder, oracle_transport

        endpoint = replace(config.endpoint, model="oracle-stub", base_url="http://stub.local/v1")
        client = ChatClient(endpoint, cache_dir=config.cache_dir,
                            transport=oracle_transport(OracleResponder(dataset, graph, config.k)))
        return LLMBackend(client, name="stub", view=config.view)
    client = ChatClient(config.endpoint, cache_dir=config.cache_dir)
    return LLMBackend(client, name=f"llm:{config.endpoint.model}", view=config.view)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def result_row(dataset_name: str, r: QueryResult) -> dict:
    usage = r.total_usage
    m = r.metrics or MetricReport()
    flags = list(r.flags) + (["error"] if not r.ok else [])
    return {
        "dataset": dataset_name,
        "source": r.query.source,
        "destination": r.query.destination,
        "stage": r.stage or "",
        "f1": m.f1,
        "traversability": m.traversability,
        "prompt_tokens": usage.prompt_tokens,
        "completion_tokens": usage.completion_tokens,
        "latency_ms": round(r.latency_ms, 3),
        "backend": r.backend,
        "flags": ";".join(flags),
    }


def aggregate_row(dataset_name: str, mode: str, backend: str, results: Sequence[QueryResult]) -> dict:
    scored = [r.metrics for r in results if r.ok and r.metrics is not None]
    agg = aggregate(scored) if scored else MetricReport()
    n = len(results)
    return {
        "dataset": dataset_name,
        "mode": mode,
        "backend": backend,
        "queries": n,
        "failed": sum(1 for r in results if not r.ok),
        "f1": agg.f1,
        "traversability": agg.traversability,
        "prompt_tokens": sum(r.total_usage.prompt_tokens for r in results) / n if n else None,
        "completion_tokens": sum(r.total_usage.completion_tokens for r in results) / n if n else None,
        "latency_ms": round(sum(r.latency_ms for r in results) / n, 3) if n else None,
    }


def _write_csv(path: Path, columns: Sequence[str], rows: Sequence[dict]):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row[k]) for k in columns})
    path.write_text(buf.getvalue(), encoding="utf-8")


@dataclass
class EvalOutcome:
    files: List[Path] = field(default_factory=list)
    results: Dict[Tuple[str, str], List[QueryResult]] = field(default_factory=dict)
    aggregates: List[dict] = field(default_factory=list)
    skipped: List[Tuple[str, str, str]] = field(default_factory=list)

    @property
    def total_failure(self) -> bool:
        every = [r for rs in self.results.values() for r in rs]
        return not every or all(not r.ok for r in every)


def evaluate_dataset(config: RunConfig, dataset: TrajectoryDataset, mode: str,
                     backend=None, graph: Optional[TrajectoryGraph] = None) -> List[QueryResult]:
    graph = graph if graph is not None else build_graph(dataset, config.directed)
    queries = enumerate_queries(dataset, graph, mode, config.limit, config.seed)
    backend = backend if backend is not None else make_backend(config, dataset, graph)
    pipeline = Pipeline(backend, dataset, graph, k=config.k, rank_context=config.rank_context)
    results = pipeline.run_batch(queries, config.parallelism)
    return [score(r, dataset, graph) for r in results]


def run_eval(config: RunConfig, datasets: Optional[Sequence[TrajectoryDataset]] = None) -> EvalOutcome:
    """Run every dataset x mode, write per-query CSV + JSON and one aggregate CSV."""
    if datasets is None:
        datasets = [load_dataset(p) for p in config.datasets]
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outcome = EvalOutcome()
    backend_label = config.backend if config.backend != "llm" else f"llm-{config.endpoint.model}"
    for dataset in datasets:
        graph = build_graph(dataset, config.directed)
        backend = make_backend(config, dataset, graph)
        for mode in config.modes:
            try:
                results = evaluate_dataset(config, dataset, mode, backend, graph)
            except NoEligibleQueries as exc:
                logger.info("%s/%s skipped: %s", dataset.name, mode, exc)
                outcome.skipped.append((dataset.name, mode, str(exc)))
                continue
            outcome.results[(dataset.name, mode)] = results
            rows = [result_row(dataset.name, r) for r in results]
            agg = aggregate_row(dataset.name, mode, backend.name, results)
            outcome.aggregates.append(agg)
            stem = f"{dataset.name}_{backend_label}_{mode}_{config.run_id}".replace("/", "-").replace(":", "-")
            csv_path = out_dir / f"{stem}.csv"
            _write_csv(csv_path, CSV_COLUMNS, rows)
            json_path = out_dir / f"{stem}.json"
            payload = {
                "run_id": config.run_id,
                "config": config.public(),
                "dataset": dataset.name,
                "mode": mode,
                "rows": rows,
                "aggregate": agg,
                "token_totals": {
                    "prompt_tokens": sum(r["prompt_tokens"] for r in rows),
                    "completion_tokens": sum(r["completion_tokens"] for r in rows),
                },
                "errors": [{"source": r.query.source, "destination": r.query.destination,
                            "error": r.error} for r in results if not r.ok],
            }
            json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
            outcome.files.extend([csv_path, json_path])
    if outcome.aggregates:
        agg_path = out_dir / f"aggregate_{backend_label}_{config.run_id}.csv".replace(":", "-")
        _write_csv(agg_path, AGGREGATE_COLUMNS, outcome.aggregates)
        outcome.files.append(agg_path)
    return outcome


# cache maintenance

def _entries(cache_dir: Path) -> List[Path]:
    return sorted(p for p in cache_dir.glob("*.json") if not p.name.startswith("."))


def cache_ops(subcommand: str, cache_dir, archive=None) -> dict:
    """``stats``, ``clear``, ``export`` (to a .tar.gz) or ``import`` (from one)."""
    cache_dir = Path(cache_dir)
    if subcommand == "stats":
        if not cache_dir.is_dir():
            raise MissingCacheDir(str(cache_dir))
        entries = _entries(cache_dir)
        return {"entries": len(entries), "bytes": sum(p.stat().st_size for p in entries)}
    if subcommand == "clear":
        if not cache_dir.is_dir():
            return {"removed": 0}
        entries = _entries(cache_dir)
        for p in entries:
            p.unlink()
        return {"removed": len(entries)}
    if subcommand == "export":
        if not cache_dir.is_dir():
            raise MissingCacheDir(str(cache_dir))
        if archive is None:
            raise ValueError("export needs an archive path")
        entries = _entries(cache_dir)
        with tarfile.open(archive, "w:gz") as tar:
            for p in entries:
                tar.add(p, arcname=p.name)
        return {"exported": len(entries), "archive": str(archive)}
    if subcommand == "import":
        if archive is None:
            raise ValueError("import needs an archive path")
        cache_dir.mkdir(parents=True, exist_ok=True)
        count = 0
        with tarfile.open(archive, "r:gz") as tar:
            for member in tar.getmembers():
                name = Path(member.name).name
                if not member.isfile() or not name.endswith(".json"):
                    continue
                data = tar.extractfile(member).read()
                (cache_dir / name).write_bytes(data)
                count += 1
        return {"imported": count}
    raise ValueError(f"unknown cache subcommand {subcommand!r}")


def lint_dataset(text: str) -> dict:
    """Parse ``text`` and report structural facts worth a warning."""
    from .trajectory import parse_dataset

    dataset = parse_dataset(text)
    collapsed = 0
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        toks = [t.strip() for t in line.split("->")] if "->" in line else line.replace(",", " ").split()
        if any(a == b for a, b in zip(toks, toks[1:])):
            collapsed += 1
    graph = build_graph(dataset)
    warnings = []
    singles = sum(1 for t in dataset.trajectories if len(t) == 1)
    if singles:
        warnings.append(f"{singles} single-POI trajectories contribute no segments")
    if collapsed:
        warnings.append(f"{collapsed} trajectories had consecutive repeats collapsed")
    return {
        "trajectories": len(dataset),
        "pois": len(dataset.poi_universe),
        "segments": len(graph.segment_freq),
        "search_pairs": len(search_pairs(dataset)),
        "collapsed_lines": collapsed,
        "single_poi_trajectories": singles,
        "warnings": warnings,
    }
