"""Command-line surface: seeded, file-based workflows over all engines.

Every output file starts with a comment header (or a meta object, for JSON)
recording the version, the full command line, the backend, and the seed, so
results are attributable and reruns are byte-identical.
"""
from __future__ import annotations

import csv
import json
import math
import os
import sys

import click
import numpy as np

__all__ = ["main", "main_with_exit_codes"]

from . import __version__
from ._backend import BACKEND
from .benchmark import run_benchmarks, speedups
from .chains import (
    AnnealConfig,
    Unconstrained,
    anneal,
    gibbs_run,
    tv_empirical,
)
from .copula import check_symmetries, fgm_model, gaussian_model, model_from_tag
from .exact import (
    exact_predictive,
    exact_rank_likelihood,
    marginal_over_group,
    rank_likelihood_poly,
)
from .perm import (
    IncompleteRanking,
    Permutation,
    anti_identity,
    identity,
    kendall_distance,
)
from .priors import JeffreysPrior, TransformedBetaPrior, jeffreys_fisher_info, parse_prior, tv_distance
from .recommender import (
    EngineConfig,
    evaluate as run_evaluate,
    fit_prior_from_ratings,
    ingest_ratings,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _default_threads() -> int:
    return int(os.environ.get("COPULARANK_THREADS", "1"))


def _header_lines(seed) -> list[str]:
    cmd = " ".join(sys.argv[1:])
    return [
        f"# copularank {__version__}",
        f"# backend: {BACKEND}",
        f"# command: {cmd}",
        f"# seed: {seed}",
    ]


def _write_csv(path, seed, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        for line in _header_lines(seed):
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)


def _write_json(path, seed, payload: dict) -> None:
    meta = {
        "version": __version__,
        "backend": BACKEND,
        "command": " ".join(sys.argv[1:]),
        "seed": seed,
    }
    with open(path, "w") as fh:
        json.dump({"meta": meta, **payload}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_instance(n, sstar, mstar):
    if (sstar is None) != (mstar is None):
        raise click.UsageError("--sstar and --mstar must be given together")
    if sstar is None:
        return Unconstrained(n)
    return IncompleteRanking(
        Permutation.parse(sstar), tuple(int(t) for t in mstar.split(",")), n
    )


@click.group()
@click.version_option(version=__version__)
def main():
    """Rank prediction from an expert ranking and a partial user ranking."""


@main.command("exact-predict")
@click.option("--n", type=int, required=True, help="Number of objects.")
@click.option("--sstar", default=None, help="Sub-permutation, e.g. 2,1,3.")
@click.option("--mstar", default=None, help="Ranked positions, e.g. 2,4,5.")
@click.option("--prior", "prior_spec", default="jeffreys", show_default=True)
@click.option("--cap", type=int, default=1_000_000, show_default=True,
              help="Enumeration cap on n!/m!.")
@click.option("--out", type=click.Path(), default="predictive.csv", show_default=True)
def exact_predict(n, sstar, mstar, prior_spec, cap, out):
    """Exact FGM predictive distribution over the compatible rankings.

    Without --sstar/--mstar the full marginal over S_n is emitted instead.
    """
    prior = parse_prior(prior_spec)
    inst = _parse_instance(n, sstar, mstar)
    if isinstance(inst, Unconstrained):
        pred = marginal_over_group(n, prior)
    else:
        pred = exact_predictive(inst, prior, cap=cap)
    mode = pred.mode()
    mode_set = set(pred.modes)
    rows = [
        (str(s), float(p), kendall_distance(s, mode), int(s in mode_set))
        for s, p in zip(pred.support, pred.probabilities)
    ]
    _write_csv(out, "-", ["permutation", "probability", "kendall_to_mode", "is_mode"], rows)
    click.echo(f"modes: {'; '.join(str(m) for m in pred.modes)}")
    click.echo(f"wrote {len(rows)} rows to {out}")


@main.command("mc-likelihood")
@click.option("--model", "model_tag", default="fgm", show_default=True)
@click.option("--theta", type=float, required=True)
@click.option("--s", "s_text", required=True, help="Permutation, e.g. 2,1,3.")
@click.option("--k", "--K", "draws", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=None)
@click.option("--out", type=click.Path(), default=None, help="Optional CSV destination.")
def mc_likelihood(model_tag, theta, s_text, draws, seed, threads, out):
    """Monte Carlo rank-likelihood estimate: mean, standard error, draws."""
    from .montecarlo import mc_rank_likelihood

    model = model_from_tag(model_tag)
    s = Permutation.parse(s_text)
    est = mc_rank_likelihood(
        s, theta, model, draws, seed, workers=threads or _default_threads()
    )
    line = f"{est.mean!r},{est.standard_error!r},{est.draws}"
    if out:
        _write_csv(out, seed, ["mean", "se", "K"], [(est.mean, est.standard_error, est.draws)])
    click.echo(line)


@main.command("anneal")
@click.option("--n", type=int, required=True)
@click.option("--sstar", default=None)
@click.option("--mstar", default=None)
@click.option("--model", "model_tag", default="fgm", show_default=True)
@click.option("--prior", "prior_spec", default="jeffreys", show_default=True)
@click.option("--iters", type=int, default=100_000, show_default=True)
@click.option("--k", "--K", "inner_draws", type=int, default=100, show_default=True,
              help="Monte Carlo draws per proposal estimate.")
@click.option("--scale", type=float, default=None, help="Energy scale (default n!).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--trace", "trace_path", type=click.Path(), default="anneal_trace.csv",
              show_default=True)
@click.option("--summary", "summary_path", type=click.Path(), default="anneal_summary.json",
              show_default=True)
def anneal_cmd(n, sstar, mstar, model_tag, prior_spec, iters, inner_draws, scale,
               seed, trace_path, summary_path):
    """Simulated annealing toward the predictive mode."""
    model = model_from_tag(model_tag)
    prior = parse_prior(prior_spec)
    inst = _parse_instance(n, sstar, mstar)
    cfg = AnnealConfig(iters=iters, inner_draws=inner_draws, scale=scale)
    res = anneal(inst, model, prior, cfg, rng=seed)
    rows = (
        (it, str(p), float(e), kendall_distance(p, res.best))
        for it, p, e in res.trace_rows()
    )
    _write_csv(
        trace_path, seed,
        ["iter", "permutation", "energy_or_theta", "kendall_to_best"], rows,
    )
    _write_json(
        summary_path, seed,
        {
            "best": str(res.best),
            "best_energy": res.best_energy,
            "accept_rate": res.accept_rate,
            "iters": iters,
            "inner_draws": inner_draws,
        },
    )
    click.echo(f"best: {res.best} (energy {res.best_energy:.6g})")


@main.command("sample-predictive")
@click.option("--n", type=int, required=True)
@click.option("--sstar", default=None)
@click.option("--mstar", default=None)
@click.option("--model", "model_tag", default="fgm", show_default=True)
@click.option("--prior", "prior_spec", default="jeffreys", show_default=True)
@click.option("--variant", type=click.Choice(["mhi", "mhrw"]), default="mhi",
              show_default=True)
@click.option("--steps", "--N", type=int, default=1_000_000, show_default=True)
@click.option("--eps", type=float, default=0.1, show_default=True,
              help="Half-width of the parameter proposal window.")
@click.option("--g", "mixing", type=click.Choice(["uniform", "beta_n1"]),
              default="uniform", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--checkpoint-interval", type=int, default=0,
              help="Record TV-to-exact every this many steps (FGM only).")
@click.option("--occupancy", "occupancy_path", type=click.Path(),
              default="occupancy.csv", show_default=True)
@click.option("--trace", "trace_path", type=click.Path(), default=None,
              help="Optional per-step theta trace CSV.")
@click.option("--summary", "summary_path", type=click.Path(),
              default="predictive_summary.json", show_default=True)
@click.option("--exact-cap", type=int, default=100_000, show_default=True,
              help="Largest compatible set for which the exact oracle is computed.")
def sample_predictive(n, sstar, mstar, model_tag, prior_spec, variant, steps, eps,
                      mixing, seed, checkpoint_interval, occupancy_path, trace_path,
                      summary_path, exact_cap):
    """Metropolis-within-Gibbs sampling of the predictive distribution."""
    model = model_from_tag(model_tag)
    prior = parse_prior(prior_spec)
    inst = _parse_instance(n, sstar, mstar)

    exact = None
    if model.family == "fgm" and not isinstance(inst, Unconstrained):
        if inst.cardinality() <= exact_cap:
            exact = exact_predictive(inst, prior, cap=exact_cap)
    checkpoints = None
    if checkpoint_interval > 0:
        if exact is None:
            raise click.UsageError(
                "--checkpoint-interval needs the exact oracle (FGM, small instance)"
            )
        checkpoints = list(range(checkpoint_interval, steps + 1, checkpoint_interval))

    res = gibbs_run(
        inst, model, prior, variant=variant, steps=steps, eps=eps, g=mixing,
        rng=seed, exact=exact, checkpoints=checkpoints,
    )
    freq = res.occupancy.frequencies()
    rows = [
        (str(p), c, freq[p])
        for p, c in sorted(res.occupancy.counts.items(), key=lambda kv: kv[0].values)
    ]
    _write_csv(occupancy_path, seed, ["permutation", "count", "freq"], rows)
    if trace_path:
        _write_csv(
            trace_path, seed, ["iter", "permutation", "energy_or_theta"],
            ((t + 1, "", float(th)) for t, th in enumerate(res.theta_trace)),
        )
    mode_set = [str(p) for p in res.occupancy.counts
                if res.occupancy.counts[p] == max(res.occupancy.counts.values())]
    payload = {
        "variant": variant,
        "steps": steps,
        "distinct_states": len(res.occupancy.counts),
        "empirical_modes": sorted(mode_set),
        "accept": {k: list(v) for k, v in res.accept.items()},
    }
    if exact is not None:
        payload["exact_modes"] = [str(m) for m in exact.modes]
        payload["tv_to_exact"] = tv_empirical(res.occupancy, exact)
        payload["tv_checkpoints"] = [[s, t] for s, t in res.tv_checkpoints]
    _write_json(summary_path, seed, payload)
    click.echo(f"visited {len(res.occupancy.counts)} states in {steps} steps")
    if exact is not None:
        click.echo(f"TV to exact predictive: {payload['tv_to_exact']:.4f}")


@main.command("benchmark")
@click.option("--n", type=int, default=7, show_default=True)
@click.option("--rows", type=int, default=200_000, show_default=True)
@click.option("--steps", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default="benchmark.csv", show_default=True)
def benchmark_cmd(n, rows, steps, seed, out):
    """Time the hot kernels on every available backend."""
    results = run_benchmarks(n=n, rows=rows, chain_steps=steps, seed=seed)
    _write_csv(
        out, seed, ["kernel", "backend", "seconds", "work"],
        [(r.name, r.backend, r.seconds, r.work) for r in results],
    )
    for r in results:
        click.echo(f"{r.name:24s} {r.backend:9s} {r.seconds * 1e3:10.2f} ms  ({r.work})")
    for name, ratio in speedups(results).items():
        click.echo(f"speedup {name}: {ratio:.1f}x")


@main.command("fit-prior")
@click.option("--ratings", "ratings_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), default=None)
def fit_prior(ratings_path, out):
    """Fit the transformed-Beta prior from a ratings file; emits alpha,beta."""
    matrix = ingest_ratings(ratings_path)
    alpha, beta = fit_prior_from_ratings(matrix)
    if out:
        _write_csv(out, "-", ["alpha", "beta"], [(alpha, beta)])
    click.echo(f"{alpha!r},{beta!r}")


@main.command("evaluate")
@click.option("--ratings", "ratings_path", type=click.Path(exists=True), required=True)
@click.option("--proportions", default="0.1,0.25,0.5", show_default=True)
@click.option("--repetitions", type=int, default=3, show_default=True)
@click.option("--engine", type=click.Choice(["auto", "exact", "anneal", "gibbs-mode"]),
              default="auto", show_default=True)
@click.option("--model", "model_tag", default="fgm", show_default=True)
@click.option("--prior", "prior_spec", default="jeffreys", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=None)
@click.option("--n-users", type=int, default=None,
              help="Keep only this many of the most active users.")
@click.option("--n-items", type=int, default=None,
              help="Keep only this many of the most rated items.")
@click.option("--anneal-iters", type=int, default=2000, show_default=True)
@click.option("--anneal-k", type=int, default=50, show_default=True)
@click.option("--out-dir", type=click.Path(), default=".", show_default=True)
def evaluate_cmd(ratings_path, proportions, repetitions, engine, model_tag, prior_spec,
                 seed, threads, n_users, n_items, anneal_iters, anneal_k, out_dir):
    """Holdout evaluation: report.json, boxplot.csv, and curve.csv."""
    matrix = ingest_ratings(ratings_path)
    matrix = _densest_submatrix(matrix, n_users, n_items)
    props = tuple(float(t) for t in proportions.split(","))
    cfg = EngineConfig(
        engine=engine,
        anneal=AnnealConfig(iters=anneal_iters, inner_draws=anneal_k),
    )
    report = run_evaluate(
        matrix, props, repetitions, cfg, model_from_tag(model_tag),
        parse_prior(prior_spec), seed, workers=threads or _default_threads(),
    )
    os.makedirs(out_dir, exist_ok=True)
    _write_json(os.path.join(out_dir, "report.json"), seed, report.to_json_dict())
    _write_csv(
        os.path.join(out_dir, "boxplot.csv"), seed, ["p", "k", "d"],
        [
            (p, k + 1, report.d_pk[i, k])
            for i, p in enumerate(report.proportions)
            for k in range(report.repetitions)
        ],
    )
    _write_csv(
        os.path.join(out_dir, "curve.csv"), seed, ["p", "dbar"],
        [(p, d) for p, d in zip(report.proportions, report.d_bar)],
    )
    for p, d in zip(report.proportions, report.d_bar):
        click.echo(f"p={p:g}: mean Kendall distance {d:.3f}")


def _densest_submatrix(matrix, n_users, n_items):
    from .recommender import RatingsMatrix

    users, items = matrix.users, matrix.items
    if n_items is not None:
        by_count = sorted(
            items, key=lambda i: (-sum(1 for (u, j) in matrix.ratings if j == i), i)
        )
        items = tuple(sorted(by_count[:n_items]))
    if n_users is not None:
        item_set = set(items)
        by_count = sorted(
            users,
            key=lambda u: (
                -sum(1 for (v, j) in matrix.ratings if v == u and j in item_set), u
            ),
        )
        users = tuple(sorted(by_count[:n_users]))
    keep_u, keep_i = set(users), set(items)
    ratings = {
        (u, i): v for (u, i), v in matrix.ratings.items() if u in keep_u and i in keep_i
    }
    return RatingsMatrix(users, items, ratings)


@main.command("diagnostics")
@click.option("--check", "check_name",
              type=click.Choice(["symmetries", "copula", "normalization", "priors"]),
              required=True)
@click.option("--n", type=int, default=4, show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="CSV destination (required for --check priors).")
def diagnostics(check_name, n, out):
    """Numerical verification tables for the model's identities."""
    if check_name == "symmetries":
        rows, ok = _check_symmetry_identities(n)
        cols = ["identity", "max_violation", "pass"]
    elif check_name == "copula":
        rows = []
        ok = True
        for model in (fgm_model(), gaussian_model()):
            rep = check_symmetries(model)
            rows.append((f"{model.family} exchangeable", rep.max_exchange_violation,
                         int(rep.max_exchange_violation <= rep.tolerance)))
            rows.append((f"{model.family} sign-flip", rep.max_sign_flip_violation,
                         int(rep.max_sign_flip_violation <= rep.tolerance)))
            ok = ok and rep.passed
        cols = ["identity", "max_violation", "pass"]
    elif check_name == "normalization":
        rows, ok = _check_normalization(n)
        cols = ["check", "max_violation", "pass"]
    else:
        if not out:
            raise click.UsageError("--check priors needs --out PREFIX for its curves")
        _emit_prior_curves(out)
        click.echo(f"wrote {out}.jeffreys.csv and {out}.tv.csv")
        return
    for row in rows:
        click.echo(f"{row[0]:40s} {row[1]:12.3e} {'pass' if row[2] else 'FAIL'}")
    if out:
        _write_csv(out, "-", cols, rows)
    if not ok:
        raise click.ClickException("diagnostics failed")


def _check_symmetry_identities(n):
    import itertools

    thetas = np.linspace(-1.0, 1.0, 9)
    a = anti_identity(n)
    worst = {}
    for vals in itertools.permutations(range(1, n + 1)):
        s = Permutation(vals)
        base = rank_likelihood_poly(s)
        for i in (0, 1):
            for j in (0, 1):
                for k in (-1, 1):
                    image = s if k == 1 else s.inverse()
                    if i:
                        image = a.compose(image)
                    if j:
                        image = image.compose(a)
                    sign = -1.0 if (i + j) % 2 else 1.0
                    poly_img = rank_likelihood_poly(image)
                    v = max(
                        abs(base.evaluate(t) - poly_img.evaluate(sign * t))
                        for t in thetas
                    )
                    key = f"P(s|t)=P(a^{i} s^{k} a^{j}|{'-' if sign < 0 else '+'}t)"
                    worst[key] = max(worst.get(key, 0.0), v)
    rows = [(k, v, int(v < 1e-10)) for k, v in sorted(worst.items())]
    return rows, all(r[2] for r in rows)


def _check_normalization(n_max):
    import itertools

    rows = []
    for n in range(2, n_max + 1):
        perms = [Permutation(p) for p in itertools.permutations(range(1, n + 1))]
        polys = [rank_likelihood_poly(s) for s in perms]
        worst_total = max(
            abs(sum(p.evaluate(t) for p in polys) - 1.0)
            for t in (-1.0, -0.5, 0.0, 0.5, 1.0)
        )
        rows.append((f"sum_s P_theta(S=s) = 1, n={n}", worst_total, int(worst_total < 1e-10)))
        worst_c0 = max(abs(p.coeffs[0] - 1.0 / math.factorial(n)) for p in polys)
        rows.append((f"c_0 = 1/n!, n={n}", worst_c0, int(worst_c0 == 0.0)))
        worst_cj = max(
            abs(sum(p.coeffs[j] for p in polys)) for j in range(1, n)
        )
        rows.append((f"sum_s c_j(s) = 0, n={n}", worst_cj, int(worst_cj < 1e-10)))
    return rows, all(r[2] for r in rows)


def _emit_prior_curves(prefix):
    jp = JeffreysPrior()
    grid = np.linspace(-1.0, 1.0, 401)
    dens = jp.density(grid)
    _write_csv(f"{prefix}.jeffreys.csv", "-", ["theta", "density"],
               zip(grid.tolist(), np.asarray(dens).tolist()))
    alphas = np.arange(0.1, 3.0001, 0.02)
    rows = []
    for a in alphas:
        rows.append((float(a), tv_distance(jp, TransformedBetaPrior(float(a), float(a)))))
    _write_csv(f"{prefix}.tv.csv", "-", ["alpha", "tv"], rows)


def main_with_exit_codes() -> int:
    try:
        main.main(standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return EXIT_RUNTIME
    except click.exceptions.Abort:
        return EXIT_RUNTIME
    except Exception as exc:  # runtime failure: report, exit 1
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main_with_exit_codes())
