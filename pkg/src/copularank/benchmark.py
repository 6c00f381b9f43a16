"""Timing harness comparing the compiled kernels against the pure-Python
fallback on the package's hot paths."""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from ._backend import available_backends, get_kernels


@dataclass
class BenchmarkRow:
    name: str
    backend: str
    seconds: float
    work: str


def _time(fn, repeat: int = 1) -> float:
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_benchmarks(
    n: int = 7, rows: int = 200_000, chain_steps: int = 100_000, seed: int = 0
) -> list[BenchmarkRow]:
    """Time each kernel on each available backend with identical inputs."""
    out: list[BenchmarkRow] = []
    rng = np.random.default_rng(seed)

    u = rng.random((rows, n))
    v = rng.random((rows, n))
    theta = 0.6

    # uniform-chain and gibbs inputs on a fixed incomplete ranking
    m = 3
    star_pos = np.asarray([1, 3, 4], dtype=np.int64)
    sstar0 = np.asarray([1, 0, 2], dtype=np.int64)
    free_pos = np.asarray([i for i in range(n) if i not in set(star_pos.tolist())], dtype=np.int64)
    s_init = np.asarray(_compatible_start(n, star_pos, sstar0), dtype=np.int64)
    u3 = rng.random((chain_steps, 3))
    u7 = rng.random((chain_steps, 7))
    ex = rng.standard_exponential((chain_steps, 2, n + 1))
    w_init = rng.standard_exponential(n + 1)
    w_init /= w_init.sum()

    dj_subsets = [
        (j, idx)
        for j in range(1, n)
        for idx in itertools.combinations(range(n), j)
    ]

    for backend in available_backends():
        k = get_kernels(backend)

        def bench_dj():
            for j, idx in dj_subsets:
                k.dj_sum_int(n, j, np.asarray(idx, dtype=np.int64))

        out.append(
            BenchmarkRow(
                "coefficient-sums", backend, _time(bench_dj), f"all subsets, n={n}"
            )
        )

        out.append(
            BenchmarkRow(
                "fgm-row-products",
                backend,
                _time(lambda: k.fgm_prod_rows(u, v, theta), repeat=3),
                f"{rows} rows x {n}",
            )
        )
        out.append(
            BenchmarkRow(
                "gaussian-row-products",
                backend,
                _time(lambda: k.gauss_prod_rows(u, v, theta), repeat=3),
                f"{rows} rows x {n}",
            )
        )

        def bench_compat():
            s = s_init.copy()
            codes = np.empty(chain_steps, dtype=np.int64)
            k.compat_chain_chunk(s, star_pos, sstar0, free_pos, u3, codes)

        out.append(
            BenchmarkRow(
                "uniform-chain", backend, _time(bench_compat), f"{chain_steps} steps, n={n}"
            )
        )

        def bench_gibbs():
            s = s_init.copy()
            w1 = w_init.copy()
            w2 = w_init.copy()
            from ._kernels_py import _joint_prod

            fstate = np.array([0.3, _joint_prod(w1, w2, s, 0.3, 0), 0.5])
            codes = np.empty(chain_steps, dtype=np.int64)
            thetas = np.empty(chain_steps, dtype=np.float64)
            acc = np.zeros(6, dtype=np.int64)
            k.gibbs_chunk(
                s, w1, w2, fstate, star_pos, sstar0, free_pos,
                0, 0.1, 0, 0, lambda t: 0.5, u7, ex, codes, thetas, acc,
            )

        out.append(
            BenchmarkRow(
                "gibbs-sampler", backend, _time(bench_gibbs), f"{chain_steps} steps, n={n}"
            )
        )

    return out


def _compatible_start(n: int, star_pos: np.ndarray, sstar0: np.ndarray) -> list[int]:
    vals = list(range(n))
    block = sorted(vals[p] for p in star_pos)
    for k, p in enumerate(star_pos):
        vals[p] = block[sstar0[k]]
    return vals


def speedups(rows: list[BenchmarkRow]) -> dict[str, float]:
    """python-seconds / compiled-seconds per kernel, when both ran."""
    by_name: dict[str, dict[str, float]] = {}
    for r in rows:
        by_name.setdefault(r.name, {})[r.backend] = r.seconds
    return {
        name: t["python"] / t["compiled"]
        for name, t in by_name.items()
        if "python" in t and "compiled" in t and t["compiled"] > 0
    }
