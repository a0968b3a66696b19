import csv
import json

import pytest

from poppath.cli import main
from poppath.errors import MissingCacheDir, NoEligibleQueries
from poppath.harness import (
    AGGREGATE_COLUMNS,
    CSV_COLUMNS,
    RunConfig,
    cache_ops,
    enumerate_queries,
    lint_dataset,
    read_config_file,
    run_eval,
)
from poppath.synthetic import SyntheticConfig, generate_dataset, write_dataset
from poppath.trajectory import TrajectoryDataset, build_graph, format_dataset, parse_dataset

SMALL = parse_dataset("""\
1 -> 2 -> 3 -> 4
1 -> 5 -> 4
2 -> 6
6 -> 8
5 -> 2
3 -> 7
9 -> 10
""", name="small")


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def strip_latency(rows):
    return [{k: v for k, v in row.items() if k != "latency_ms"} for row in rows]


def run_cli(*args):
    with pytest.raises(SystemExit) as info:
        main(list(args))
    return info.value.code


@pytest.fixture(scope="module")
def synthetic_file(tmp_path_factory):
    ds, stats, _ = generate_dataset(SyntheticConfig(10, 0.4, 120, rng_seed=2), name="syn")
    path, _ = write_dataset(ds, stats, tmp_path_factory.mktemp("data") / "syn.txt")
    return path


def test_enumerate_single_trajectory():
    ds = TrajectoryDataset(((1, 2, 3),))
    g = build_graph(ds)
    assert [tuple(q) for q in enumerate_queries(ds, g, "search")] == [(1, 2), (1, 3), (2, 3)]
    with pytest.raises(NoEligibleQueries):
        enumerate_queries(ds, g, "generate")
    with pytest.raises(NoEligibleQueries):
        enumerate_queries(ds, g, "search", limit=0)


def test_enumerate_modes_are_disjoint():
    g = build_graph(SMALL)
    search = {tuple(q) for q in enumerate_queries(SMALL, g, "search")}
    generate = {tuple(q) for q in enumerate_queries(SMALL, g, "generate")}
    assert not search & generate
    assert (1, 8) in generate and (9, 1) not in search | generate and (1, 9) not in generate
    sample = enumerate_queries(SMALL, g, "search", limit=4, seed=3)
    assert sample == enumerate_queries(SMALL, g, "search", limit=4, seed=3)
    assert len(sample) == 4


def test_reports_are_consistent(tmp_path):
    out = run_eval(RunConfig(out_dir=str(tmp_path), run_id="r1"), [SMALL])
    names = sorted(p.name for p in out.files)
    assert names == ["aggregate_oracle_r1.csv", "small_oracle_generate_r1.csv",
                     "small_oracle_generate_r1.json", "small_oracle_search_r1.csv",
                     "small_oracle_search_r1.json"]
    rows = read_rows(tmp_path / "small_oracle_search_r1.csv")
    assert list(rows[0]) == CSV_COLUMNS
    payload = json.loads((tmp_path / "small_oracle_search_r1.json").read_text())
    assert len(payload["rows"]) == len(rows)
    for csv_row, json_row in zip(rows, payload["rows"]):
        assert float(csv_row["f1"]) == json_row["f1"]
        assert int(csv_row["source"]) == json_row["source"]
    f1s = [float(r["f1"]) for r in rows]
    agg = {r["mode"]: r for r in read_rows(tmp_path / "aggregate_oracle_r1.csv")}
    assert list(agg["search"]) == AGGREGATE_COLUMNS
    assert float(agg["search"]["f1"]) == pytest.approx(sum(f1s) / len(f1s))
    assert float(agg["search"]["f1"]) == 1.0
    assert float(agg["generate"]["traversability"]) == 1.0
    assert agg["generate"]["f1"] == ""
    assert payload["token_totals"] == {"prompt_tokens": 0, "completion_tokens": 0}


def test_failed_queries_are_recorded(tmp_path):
    # an unreachable pair is never enumerated, so force one through a custom backend
    from poppath.orchestrator import OracleBackend

    class Broken(OracleBackend):
        def select(self, candidates, ranking, trace):
            raise RuntimeError("boom")

    from poppath import harness

    cfg = RunConfig(out_dir=str(tmp_path), run_id="x", modes=("search",))
    results = harness.evaluate_dataset(cfg, SMALL, "search", Broken())
    assert results and all(not r.ok for r in results)
    row = harness.result_row("small", results[0])
    assert row["flags"] == "error" and row["f1"] is None


def test_stub_backend_matches_oracle_and_replays(tmp_path, synthetic_file):
    cache = tmp_path / "cache"
    common = dict(datasets=[str(synthetic_file)], limit=15, seed=1)
    oracle = run_eval(RunConfig(out_dir=str(tmp_path / "o"), run_id="a", **common))
    stub = run_eval(RunConfig(backend="stub", cache_dir=str(cache), out_dir=str(tmp_path / "s"),
                              run_id="a", parallelism=4, **common))
    for key, results in oracle.results.items():
        assert [r.signature() for r in results] == [r.signature() for r in stub.results[key]]
    warm = run_eval(RunConfig(backend="stub", cache_dir=str(cache), out_dir=str(tmp_path / "w"),
                              run_id="a", **common))
    for mode in ("search", "generate"):
        first = read_rows(tmp_path / "s" / f"syn_stub_{mode}_a.csv")
        second = read_rows(tmp_path / "w" / f"syn_stub_{mode}_a.csv")
        assert strip_latency(first) == strip_latency(second)
        assert any(int(r["prompt_tokens"]) > 0 for r in first)
    assert warm.aggregates[0]["f1"] == 1.0


def test_cache_ops(tmp_path, synthetic_file):
    cache = tmp_path / "cache"
    with pytest.raises(MissingCacheDir):
        cache_ops("stats", cache)
    cfg = RunConfig(backend="stub", cache_dir=str(cache), datasets=[str(synthetic_file)],
                    limit=3, out_dir=str(tmp_path / "r"), run_id="c", modes=("search",))
    run_eval(cfg)
    stats = cache_ops("stats", cache)
    assert stats["entries"] > 0 and stats["bytes"] > 0
    archive = tmp_path / "cache.tar.gz"
    assert cache_ops("export", cache, archive)["exported"] == stats["entries"]
    assert cache_ops("clear", cache)["removed"] == stats["entries"]
    assert cache_ops("stats", cache)["entries"] == 0
    assert cache_ops("import", cache, archive)["imported"] == stats["entries"]
    replay = RunConfig(**{**cfg.__dict__, "out_dir": str(tmp_path / "r2")})
    before = read_rows(tmp_path / "r" / "syn_stub_search_c.csv")
    run_eval(replay)
    assert strip_latency(before) == strip_latency(read_rows(tmp_path / "r2" / "syn_stub_search_c.csv"))


def test_config_file(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\nbackend = stub\nk = 2\ndirected = false\nmodes = search\n"
                   "[endpoint]\nmodel = m\ntemperature = 0.2\n")
    cfg = read_config_file(ini)
    assert cfg["backend"] == "stub" and cfg["k"] == 2 and cfg["directed"] is False
    assert cfg["modes"] == ("search",) and cfg["endpoint"] == {"model": "m", "temperature": 0.2}


def test_lint():
    report = lint_dataset("1 -> 1 -> 2\n7\n")
    assert report["trajectories"] == 2 and report["collapsed_lines"] == 1
    assert report["single_poi_trajectories"] == 1 and len(report["warnings"]) == 2


def test_cli_eval_and_exit_codes(tmp_path, synthetic_file, capsys):
    out = tmp_path / "rep"
    assert run_cli("eval", "--dataset", str(synthetic_file), "--limit", "5", "--out", str(out)) == 0
    assert any(p.name.startswith("aggregate_oracle_") for p in out.iterdir())
    assert run_cli("eval") == 1
    assert run_cli("eval", "--no-such-flag") == 1
    assert run_cli("query", "--dataset", str(synthetic_file), "-s", "1", "-d", "1") == 1
    assert run_cli("query", "--dataset", str(synthetic_file), "-s", "1", "-d", "404") == 1


def test_cli_flags_override_config(tmp_path, synthetic_file, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text(f"[run]\nbackend = stub\nout_dir = {tmp_path / 'from_ini'}\nlimit = 2\n")
    code = run_cli("eval", "--config", str(ini), "--dataset", str(synthetic_file),
                   "--backend", "oracle", "--out", str(tmp_path / "from_flag"), "--mode", "search")
    assert code == 0
    files = sorted(p.name for p in (tmp_path / "from_flag").iterdir())
    assert len(files) == 3 and all("oracle" in f for f in files)
    assert not (tmp_path / "from_ini").exists()


def test_cli_total_failure(tmp_path):
    lonely = tmp_path / "lonely.txt"
    lonely.write_text("1 -> 2\n")
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[endpoint]\nbase_url = http://127.0.0.1:9/v1\nmax_retries = 0\ntimeout = 1\n")
    code = run_cli("eval", "--dataset", str(lonely), "--backend", "llm", "--config", str(cfg),
                   "--out", str(tmp_path / "o"))
    assert code == 2


def test_cli_other_commands(tmp_path, synthetic_file, capsys):
    assert run_cli("query", "--dataset", str(synthetic_file), "-s", "0", "-d", "1") in (0, 2)
    capsys.readouterr()
    assert run_cli("rank", "--dataset", str(synthetic_file), "--what", "poi") == 0
    ranks = json.loads(capsys.readouterr().out)
    assert set(ranks) == {"poi_rank"}
    assert run_cli("validate", "--dataset", str(synthetic_file)) == 0
    capsys.readouterr()
    out = tmp_path / "gen.txt"
    assert run_cli("synth", "--nodes", "8", "--density", "0.5", "--routes", "30", "--out", str(out)) == 0
    assert len(parse_dataset(out.read_text())) == 30
    assert run_cli("synth", "--nodes", "8", "--out", str(out)) == 1
    assert run_cli("cache", "export", "--cache-dir", str(tmp_path)) == 1
    assert run_cli("cache", "stats", "--cache-dir", str(tmp_path / "missing")) == 2
