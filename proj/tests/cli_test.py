"""End-to-end checks for the setret command-line tool.

Run as: python3 cli_test.py /path/to/setret
"""

import csv
import io
import json
import math
import random
import subprocess
import sys
import tempfile
from pathlib import Path

BIN = Path(sys.argv[1]).resolve()
FAILURES = []


def run(*args, expect=0, cwd=None):
    proc = subprocess.run([str(BIN)] + [str(a) for a in args], capture_output=True,
                          text=True, cwd=cwd)
    if expect is not None and proc.returncode != expect:
        raise AssertionError(
            f"{' '.join(map(str, args))}\nexpected exit {expect}, got {proc.returncode}\n"
            f"stdout: {proc.stdout}\nstderr: {proc.stderr}")
    return proc


def check(name, fn):
    try:
        fn()
        print(f"[ok] {name}")
    except Exception as exc:  # noqa: BLE001 - report and continue
        FAILURES.append(name)
        print(f"[FAIL] {name}: {exc}")


def read_jsonl(path):
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


tmp = Path(tempfile.mkdtemp(prefix="setret_cli_"))
inst = tmp / "inst"
synth_args = ["--seed", 5, "--d", 8, "--n-candidates", 12, "--n-queries", 6,
              "--k-captions", 3, "--m-augmentations", 4]


def test_synth():
    out = run("synth", "--out", inst, *synth_args).stdout
    assert "candidates=30" in out and "queries=6" in out, out
    for name in ("embeddings.bank", "candidates.jsonl", "queries.jsonl", "labels.jsonl"):
        assert (inst / name).exists(), f"missing {name}"
    # Deterministic across runs: identical bytes.
    inst2 = tmp / "inst2"
    run("synth", "--out", inst2, *synth_args)
    for name in ("embeddings.bank", "candidates.jsonl", "queries.jsonl", "labels.jsonl"):
        assert (inst / name).read_bytes() == (inst2 / name).read_bytes(), name


def test_retrieve_modes():
    for mode in ("ct", "ot", "cosine_mean"):
        out = tmp / f"rank_{mode}.jsonl"
        run("retrieve", "--db", inst / "candidates.jsonl", "--queries",
            inst / "queries.jsonl", "--out", out, "--k", "1,5", "--mode", mode)
        rows = read_jsonl(out)
        assert len(rows) == 6, f"{mode}: {len(rows)} rankings"
        for row in rows:
            assert len(row["candidates"]) == 5
            assert row["distances"] == sorted(row["distances"])
            assert all(s > 0 for s in row["scores"])
            assert sum(row["scores"]) <= 1.0 + 1e-9
            assert row["pool_size"] == 30
    ct = read_jsonl(tmp / "rank_ct.jsonl")
    cos = read_jsonl(tmp / "rank_cosine_mean.jsonl")
    assert ct[0]["distances"] != cos[0]["distances"], "modes should differ"


def test_retrieve_worker_determinism():
    a = tmp / "rank_w1.jsonl"
    b = tmp / "rank_w4.jsonl"
    run("retrieve", "--db", inst / "candidates.jsonl", "--queries",
        inst / "queries.jsonl", "--out", a, "--k", "1,5", "--workers", 1)
    run("retrieve", "--db", inst / "candidates.jsonl", "--queries",
        inst / "queries.jsonl", "--out", b, "--k", "1,5", "--workers", 4)
    assert a.read_bytes() == b.read_bytes(), "worker count changed output"


def test_missing_delta():
    bare = tmp / "bare_queries.jsonl"
    bare.write_text(
        '{"id": "q0", "bank": "inst/embeddings.bank", "caption_rows": [0, 1]}\n')
    proc = run("retrieve", "--db", inst / "candidates.jsonl", "--queries", bare,
               "--out", tmp / "nope.jsonl", expect=1, cwd=tmp)
    assert "MissingDelta" in proc.stderr, proc.stderr
    run("retrieve", "--db", inst / "candidates.jsonl", "--queries", bare, "--out",
        tmp / "bare_rank.jsonl", "--no-transition", cwd=tmp)


def test_eval():
    proc = run("eval", "--rankings", tmp / "rank_ct.jsonl", "--labels",
               inst / "labels.jsonl", "--k", "1,5")
    assert "recall@1" in proc.stdout and "map@5" in proc.stdout, proc.stdout

    proc = run("eval", "--rankings", tmp / "rank_ct.jsonl", "--labels",
               inst / "labels.jsonl", "--k", "1,5", "--format", "jsonl")
    rows = [json.loads(line) for line in proc.stdout.splitlines() if line.strip()]
    by_key = {(r["metric"], r["k"]): r for r in rows}
    assert by_key[("recall@1", 1)]["n_queries"] == 6
    assert 0.0 <= by_key[("recall@1", 1)]["value"] <= 1.0

    proc = run("eval", "--rankings", tmp / "rank_ct.jsonl", "--labels",
               inst / "labels.jsonl", "--k", "1", "--format", "csv")
    reader = csv.reader(io.StringIO(proc.stdout))
    header = next(reader)
    assert header == ["run", "metric", "k", "value", "n_queries"], header

    # Two runs -> per-run rows plus mean rows.
    proc = run("eval", "--rankings", tmp / "rank_ct.jsonl", "--rankings",
               tmp / "rank_cosine_mean.jsonl", "--labels", inst / "labels.jsonl",
               "--k", "1", "--format", "jsonl", "--seed", 7, "--seed", 8)
    rows = [json.loads(line) for line in proc.stdout.splitlines() if line.strip()]
    runs = {r["run"] for r in rows}
    assert runs == {"7", "8", "mean"}, runs
    per_seed = [r["value"] for r in rows if r["metric"] == "recall@1" and r["run"] != "mean"]
    mean = [r["value"] for r in rows if r["metric"] == "recall@1" and r["run"] == "mean"]
    assert abs(mean[0] - sum(per_seed) / 2) < 1e-12


def test_eval_missing_label():
    labels = tmp / "short_labels.jsonl"
    with open(inst / "labels.jsonl", encoding="utf-8") as f:
        lines = [line for line in f if line.strip()]
    labels.write_text("".join(lines[:-1]))
    proc = run("eval", "--rankings", tmp / "rank_ct.jsonl", "--labels", labels,
               "--k", "1", expect=1)
    assert "MissingTruth" in proc.stderr, proc.stderr


def test_eval_random_baseline():
    # Shuffled rankings over n=100 candidates with one positive: R@1 should sit
    # near 1/100 (binomial 3-sigma band around 0.01 over 300 queries).
    rng = random.Random(0)
    n, n_queries = 100, 300
    cand = [f"c{i:03d}" for i in range(n)]
    rank_path = tmp / "random_rank.jsonl"
    label_path = tmp / "random_labels.jsonl"
    with open(rank_path, "w", encoding="utf-8") as rf, \
         open(label_path, "w", encoding="utf-8") as lf:
        for qi in range(n_queries):
            order = cand[:]
            rng.shuffle(order)
            dists = sorted(rng.random() for _ in range(n))
            rf.write(json.dumps({
                "query_id": f"q{qi}", "candidates": order, "distances": dists,
                "scores": [1.0 / n] * n, "pool_size": n}) + "\n")
            lf.write(json.dumps({
                "query_id": f"q{qi}", "positives": [rng.choice(cand)]}) + "\n")
    proc = run("eval", "--rankings", rank_path, "--labels", label_path, "--k", "1",
               "--format", "jsonl")
    value = json.loads(proc.stdout.splitlines()[0])["value"]
    p = 1.0 / n
    sigma = math.sqrt(p * (1 - p) / n_queries)
    assert abs(value - p) <= 3 * sigma, f"R@1={value}, expected ~{p} +/- {3 * sigma}"


def test_ablate_alpha_sweep():
    proc = run("ablate", "--synth", *synth_args, "--alpha", "0,0.45,1", "--k", "1")
    reader = csv.DictReader(io.StringIO(proc.stdout))
    rows = list(reader)
    assert len(rows) == 6, f"{len(rows)} rows"  # 3 alphas x (recall, map)
    assert {r["alpha"] for r in rows} == {"0.0", "0.45", "1.0"}
    assert all(r["seed"] == "5" for r in rows)


def test_ablate_grid():
    proc = run("ablate", "--synth", *synth_args, "--mode", "ct,cosine_mean",
               "--transition", "on,off", "--k", "1")
    rows = list(csv.DictReader(io.StringIO(proc.stdout)))
    combos = {(r["mode"], r["transition"]) for r in rows}
    assert len(combos) == 4, combos
    assert len(rows) == 8  # 4 combos x 2 metrics


def test_ablate_k_prime():
    proc = run("ablate", "--synth", *synth_args, "--k-prime", "1,3", "--m-prime",
               "2,4", "--k", "1")
    rows = list(csv.DictReader(io.StringIO(proc.stdout)))
    assert {(r["k_prime"], r["m_prime"]) for r in rows} == \
        {("1", "2"), ("1", "4"), ("3", "2"), ("3", "4")}
    proc = run("ablate", "--synth", *synth_args, "--k-prime", "9", "--k", "1",
               expect=1)
    assert "InvalidArgument" in proc.stderr


def test_ingest():
    src = tmp / "vecs.csv"
    src.write_text("1.0, 2.0, 3.0\n4 5 6\n7,8,9\n10,11,12\n")
    proc = run("ingest", src, "--bank", tmp / "vecs.bank", "--manifest",
               tmp / "vecs_manifest.jsonl", "--set-size", 2)
    assert "dim=3 rows=4" in proc.stdout, proc.stdout
    rows = read_jsonl(tmp / "vecs_manifest.jsonl")
    assert [r["id"] for r in rows] == ["item_0000", "item_0001"]
    assert rows[0]["rows"] == [0, 1]

    empty = tmp / "empty.csv"
    empty.write_text("\n\n")
    proc = run("ingest", empty, "--bank", tmp / "e.bank", expect=1)
    assert "no rows" in proc.stderr, proc.stderr

    ragged = tmp / "ragged.csv"
    ragged.write_text("1,2,3\n4,5,6\n7,8\n")
    proc = run("ingest", ragged, "--bank", tmp / "r.bank", expect=1)
    assert ":3:" in proc.stderr, proc.stderr


def test_config_precedence():
    cfg = tmp / "cfg.ini"
    cfg.write_text("alpha=1.0\n")
    common = ["retrieve", "--db", inst / "candidates.jsonl", "--queries",
              inst / "queries.jsonl", "--k", "1,5"]
    run(*common, "--out", tmp / "r_cfg.jsonl", "--config", cfg)
    run(*common, "--out", tmp / "r_flag.jsonl", "--config", cfg, "--alpha", "0.0")
    run(*common, "--out", tmp / "r_a0.jsonl", "--alpha", "0.0")
    run(*common, "--out", tmp / "r_a1.jsonl", "--alpha", "1.0")
    assert (tmp / "r_flag.jsonl").read_bytes() == (tmp / "r_a0.jsonl").read_bytes(), \
        "flag did not win over config"
    assert (tmp / "r_cfg.jsonl").read_bytes() == (tmp / "r_a1.jsonl").read_bytes(), \
        "config value was not applied"
    assert (tmp / "r_cfg.jsonl").read_bytes() != (tmp / "r_a0.jsonl").read_bytes()


def test_bench():
    proc = run("bench", "--n", 60, "--d", 16, "--k-captions", 3,
               "--m-augmentations", 4, "--n-queries", 3, "--workers", 2,
               "--format", "jsonl")
    row = json.loads(proc.stdout.splitlines()[0])
    assert row["deterministic"] == "yes"
    assert row["mean_s"] > 0 and row["p95_s"] >= row["p50_s"] >= 0
    assert row["n_candidates"] == 60 and row["workers"] == 2


check("synth writes a deterministic instance", test_synth)
check("retrieve produces rankings in all three modes", test_retrieve_modes)
check("retrieve output is independent of worker count", test_retrieve_worker_determinism)
check("use-transition without delta fails with MissingDelta", test_missing_delta)
check("eval reports per-run and mean metrics", test_eval)
check("eval fails on a missing label", test_eval_missing_label)
check("eval random baseline sits at 1/n", test_eval_random_baseline)
check("ablate sweeps alpha", test_ablate_alpha_sweep)
check("ablate produces the transition x mode grid", test_ablate_grid)
check("ablate subsamples captions and augmentations", test_ablate_k_prime)
check("ingest parses CSV and rejects bad input", test_ingest)
check("config file applies and flags win", test_config_precedence)
check("bench reports latency and determinism", test_bench)

if FAILURES:
    print(f"\n{len(FAILURES)} CLI check(s) failed: {', '.join(FAILURES)}")
    sys.exit(1)
print("\nall CLI checks passed")
