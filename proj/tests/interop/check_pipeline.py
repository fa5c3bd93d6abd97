"""End-to-end check of the CLI files a Python consumer reads and writes.

Usage: check_pipeline.py <numalab-cli> <scratch-dir>
"""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np

cli, work = sys.argv[1], Path(sys.argv[2])
shutil.rmtree(work, ignore_errors=True)
work.mkdir(parents=True)
store = work / "store.jsonl"
tokens = work / "tokens"
failures = []


def run(*args, expect=0):
    r = subprocess.run([cli, *args], capture_output=True, text=True)
    if r.returncode != expect:
        failures.append(f"{' '.join(args[:2])}: exit {r.returncode}, wanted {expect}\n{r.stderr}")
    return r


def check(cond, what):
    if not cond:
        failures.append(what)


common = ["--slices", "4", "--queries", "5000", "--records", "5000"]
run("collect", "--topologies", "tiny-2n4c", "--workloads", "rw50", "--random", "24", "--store", str(store), "--quiet",
    *common)
run("dataset", "tokenize", "--in", str(store), "--topology", "tiny-2n4c", "--out", str(tokens))

records = {}
for line in store.read_text().splitlines():
    t = json.loads(line)
    records[t["id"]] = t

# Normalization sidecar against a numpy recomputation over every SnThread row.
norm = json.loads(Path(str(store) + ".norm.json").read_text())
rows = np.array([row for t in records.values() if t["policy"]["kind"] == "SnThread"
                 for row in t["snapshot"]["per_slice_counters"]], dtype=np.float64)
check(norm["rows"] == len(rows), "norm row count")
check(np.allclose(norm["mean"], rows.mean(axis=0), rtol=1e-12, atol=0), "norm mean")
check(np.allclose(norm["std"], rows.std(axis=0), rtol=1e-9, atol=1e-9), "norm std")
check(json.loads((tokens / "norm.json").read_text()) == norm, "exported norm.json differs from the sidecar")
mean = np.array(norm["mean"])
std = np.where(np.array(norm["std"]) == 0, 1.0, np.array(norm["std"]))

manifest = json.loads((tokens / "manifest.json").read_text())
entries = manifest["trajectories"]
check(len(entries) == sum(t["policy"]["kind"] == "SnThread" for t in records.values()), "manifest size")


def tile_of(core, cols):
    r, c = divmod(core, cols)
    return r * cols + (c if r % 2 == 0 else cols - 1 - c)


for e in entries:
    t = records[e["id"]]
    d = tokens / e["dir"]
    T, R, C, H = e["steps"], e["rows"], e["cols"], e["features"]
    arrays = {n: np.load(d / f"{n}.npy") for n in
              ("view_mask", "position_mask", "machine_view", "actions", "rewards", "rtg", "meta")}
    for n, a in arrays.items():
        check(a.dtype == np.float32, f"{n} dtype {a.dtype}")
    check(arrays["machine_view"].shape == (T, R, C, H), "machine_view shape")
    check(e["tokens"] == 3 * T + 1, "token count")
    assignment = t["policy"]["assignment"]
    check(list(arrays["actions"].astype(int)) == assignment, "actions")
    rewards = np.array(t["snapshot"]["per_slice_throughput"])
    check(np.array_equal(arrays["rewards"], rewards.astype(np.float32)), "rewards")
    rtg = t["throughput"] - np.concatenate([[0.0], np.cumsum(rewards)[:-1]])
    check(np.allclose(arrays["rtg"], rtg, rtol=1e-6), "rtg")

    counters = (np.array(t["snapshot"]["per_slice_counters"], dtype=np.float64) - mean) / std
    view = np.zeros(R * C)
    mv = np.zeros((R * C, H))
    for step in range(T):
        check(np.array_equal(arrays["view_mask"][step].reshape(-1), view), f"view mask step {step}")
        check(np.allclose(arrays["machine_view"][step].reshape(R * C, H), mv, rtol=1e-5, atol=1e-4),
              f"machine view step {step}")
        tile = tile_of(assignment[step], C)
        view[tile] = 1
        mv[tile] += counters[step]

# Policy JSON as a learned component would write it, evaluated against the stored baselines.
best = max((t for t in records.values() if t["policy"]["kind"] == "SnThread"), key=lambda t: t["throughput"])
policy = {"kind": "SnThread", "strategy": "learned", "seed": 7, "assignment": best["policy"]["assignment"]}
(work / "learned.json").write_text(json.dumps(policy))
r = run("evaluate", "--policy", str(work / "learned.json"), "--store", str(store), "--assert", "--min-ratio", "1.0",
        "--no-append", *common)
check("learned wins" in r.stdout, f"evaluate output: {r.stdout!r}")
run("evaluate", "--policy", str(work / "learned.json"), "--store", str(store), "--assert", "--min-ratio", "100",
    "--no-append", *common, expect=2)

run("policy", "--strategy", "spread", "--slices", "4", "--out", str(work / "spread.json"))
spread = json.loads((work / "spread.json").read_text())
check(spread["kind"] == "SnThread" and len(spread["assignment"]) == 4, "policy file")

report = run("report", "--store", str(store), "--out", str(work / "report.csv"))
check(report.stdout.startswith("context,policy,learned,runs,throughput,normalized,flag"), "report header")

for f in failures:
    print("FAIL:", f)
print(f"{len(entries)} exported trajectories checked, {len(failures)} failures")
shutil.rmtree(work, ignore_errors=True)
sys.exit(1 if failures else 0)
