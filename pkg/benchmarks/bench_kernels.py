"""Compare the compiled kernels with the pure-Python fallback.

Kernel calls are timed in-process against both modules. Whole-metric
timings run in a child interpreter per backend so that the backend is
chosen at import, as in normal use.

    python3 benchmarks/bench_kernels.py --sentences 60 --repeat 3
"""
from __future__ import annotations

import argparse
import json
import os
import random
import subprocess
import sys
import timeit

from simulact._kernels import _pykernels

try:
    from simulact._kernels import _ckernels
except ImportError:
    _ckernels = None

METRIC_SNIPPET = """
import json, random, sys, timeit
from simulact import quality as q
from simulact._kernels import BACKEND
rng = random.Random({seed})
vocab = [f"w{{i}}" for i in range(40)]
pairs = []
for _ in range({sentences}):
    ref = [rng.choice(vocab) for _ in range(rng.randint(8, 20))]
    hyp = ref[:]
    for _ in range(rng.randint(0, 6)):
        i, j = rng.randrange(len(hyp)), rng.randrange(len(hyp))
        hyp[i], hyp[j] = hyp[j], rng.choice(vocab)
    pairs.append((hyp, ref))
hyps, refs = zip(*pairs)
out = {{"backend": BACKEND}}
out["bleu"] = min(timeit.repeat(lambda: q.corpus_bleu(hyps, refs), number=1, repeat={repeat}))
out["chrf"] = min(timeit.repeat(lambda: q.chrf([" ".join(h) for h in hyps], [" ".join(r) for r in refs]),
                                number=1, repeat={repeat}))
out["ter"] = min(timeit.repeat(lambda: q.ter_report(hyps, refs), number=1, repeat={repeat}))
print(json.dumps(out))
"""


def _random_pair(rng, n):
    ref = [rng.randrange(30) for _ in range(n)]
    hyp = [x if rng.random() < 0.7 else rng.randrange(30) for x in ref]
    return hyp, ref


def kernel_timings(rng, repeat):
    pairs = [_random_pair(rng, rng.randint(8, 24)) for _ in range(40)]
    calls = {
        "edit_distance": lambda m: [m.edit_distance(h, r) for h, r in pairs],
        "ngram_stats": lambda m: [m.ngram_stats(h, r, 4) for h, r in pairs],
        "shift_candidates": lambda m: [m.shift_candidates(h, r, 10, 10) for h, r in pairs],
    }
    rows = []
    for name, fn in calls.items():
        py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=repeat))
        c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=repeat)) if _ckernels else None
        rows.append((name, py, c))
    return rows


def metric_timings(sentences, repeat, seed):
    code = METRIC_SNIPPET.format(sentences=sentences, repeat=repeat, seed=seed)
    results = {}
    for flag in ("1", "0"):
        env = {**os.environ, "SIMULACT_PURE_PYTHON": flag}
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        data = json.loads(res.stdout)
        results[data.pop("backend")] = data
    return results


def _ratio(py, c):
    return f"{py / c:6.1f}x" if c else "   n/a"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sentences", type=int, default=60, help="corpus size for metric timings")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=13)
    args = ap.parse_args(argv)

    print(f"{'kernel':<20}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for name, py, c in kernel_timings(random.Random(args.seed), args.repeat):
        cs = f"{c:12.4f}" if c is not None else f"{'n/a':>12}"
        print(f"{name:<20}{py:12.4f}{cs}{_ratio(py, c):>10}")

    metrics = metric_timings(args.sentences, args.repeat, args.seed)
    py, c = metrics.get("python", {}), metrics.get("cython", {})
    print(f"\n{'metric':<20}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for name in ("bleu", "chrf", "ter"):
        cs = f"{c[name]:12.4f}" if name in c else f"{'n/a':>12}"
        print(f"{name:<20}{py[name]:12.4f}{cs}{_ratio(py[name], c.get(name)):>10}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
