"""End-to-end pipeline: ratings ingestion, expert-order derivation,
tie-breaking, holdout evaluation with Kendall metrics, and the two-stage
top-n' shortcut.

Throughout, items are re-indexed in the expert's best-to-worst order, so the
expert ranking is the identity and a user's ranking is directly the rank
statistic fed to the engines.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .chains import AnnealConfig, Unconstrained, anneal, gibbs_run
from .copula import CopulaModel, gaussian_model
from .exact import exact_predictive
from .perm import (
    IncompleteRanking,
    Permutation,
    induced_subranking,
    kendall_distance,
    random_compatible,
    rank_of,
)
from .priors import Prior, TransformedBetaPrior


class MalformedRatingsError(ValueError):
    """A ratings file line could not be parsed."""


@dataclass
class RatingsMatrix:
    users: tuple[int, ...]
    items: tuple[int, ...]
    ratings: dict[tuple[int, int], float]

    def items_rated_by(self, user: int, within: Sequence[int] | None = None) -> list[int]:
        pool = self.items if within is None else within
        return [i for i in pool if (user, i) in self.ratings]

    def rating(self, user: int, item: int) -> float:
        return self.ratings[(user, item)]


def ingest_ratings(path) -> RatingsMatrix:
    """Parse a ratings file.

    Two formats: MovieLens u.data (tab-separated ``user item rating
    timestamp``) and CSV ``user,item,rating`` (an initial non-numeric header
    line is skipped).  Malformed lines fail fast with their line number.
    """
    path = Path(path)
    ratings: dict[tuple[int, int], float] = {}
    users: set[int] = set()
    items: set[int] = set()
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split("\t") if "\t" in line else line.split(",")
            if lineno == 1 and not _numeric(fields[0]):
                continue  # header
            if len(fields) not in (3, 4):
                raise MalformedRatingsError(
                    f"{path}:{lineno}: expected 3 or 4 fields, found {len(fields)}"
                )
            try:
                user = int(fields[0])
                item = int(fields[1])
                value = float(fields[2])
            except ValueError as exc:
                raise MalformedRatingsError(f"{path}:{lineno}: {exc}") from exc
            if not math.isfinite(value):
                raise MalformedRatingsError(f"{path}:{lineno}: non-finite rating")
            ratings[(user, item)] = value
            users.add(user)
            items.add(item)
    return RatingsMatrix(tuple(sorted(users)), tuple(sorted(items)), ratings)


def _numeric(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


@dataclass(frozen=True)
class ExpertOrder:
    """Items sorted best to worst by mean rating; ties broken by ascending id."""

    items: tuple[int, ...]
    mean_ratings: dict[int, float] = field(compare=False)

    def position(self, item: int) -> int:
        return self.items.index(item) + 1


def derive_expert(matrix: RatingsMatrix, item_subset: Sequence[int] | None = None) -> ExpertOrder:
    items = tuple(item_subset) if item_subset is not None else matrix.items
    wanted = set(items)
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for (_, item), value in matrix.ratings.items():
        if item in wanted:
            sums[item] = sums.get(item, 0.0) + value
            counts[item] = counts.get(item, 0) + 1
    missing = [i for i in items if i not in counts]
    if missing:
        raise ValueError(f"items with no ratings: {missing}")
    means = {i: sums[i] / counts[i] for i in items}
    order = tuple(sorted(items, key=lambda i: (-means[i], i)))
    return ExpertOrder(order, means)


def user_ranking(
    matrix: RatingsMatrix, user: int, items: Sequence[int], expert: ExpertOrder
) -> Permutation:
    """The user's ranking of ``items`` in the expert-order coordinate system.

    Items are laid out best-to-worst by the expert (so the expert's ranking is
    the identity); the returned permutation gives each one its rank under the
    user's ratings, best = 1, with rating ties resolved by the expert order.
    """
    rated = [i for i in items if (user, i) in matrix.ratings]
    if not rated:
        raise ValueError(f"user {user} has no ratings among the given items")
    expert_sorted = [i for i in expert.items if i in set(rated)]
    # stable sort: rating ties keep the expert's relative order
    user_sorted = sorted(expert_sorted, key=lambda i: -matrix.rating(user, i))
    pos = {item: k + 1 for k, item in enumerate(user_sorted)}
    return Permutation(tuple(pos[item] for item in expert_sorted))


def holdout_split(
    truth: Permutation, proportion: float, rng: np.random.Generator
) -> tuple[IncompleteRanking, Permutation]:
    """Keep a random subset of a user's ranked objects.

    The kept count is max(1, round(p * n)) with half-up rounding, clamped to
    n - 1 so at least one object is held out.  Returns the kept incomplete
    ranking together with the full truth for scoring.
    """
    if not 0.0 < proportion < 1.0:
        raise ValueError("proportion must lie strictly between 0 and 1")
    n = len(truth)
    if n < 2:
        raise ValueError("need at least two ranked objects to split")
    m = max(1, int(math.floor(proportion * n + 0.5)))
    m = min(m, n - 1)
    keep = np.sort(rng.choice(n, size=m, replace=False) + 1)
    kept = IncompleteRanking(
        induced_subranking(truth, keep), tuple(int(i) for i in keep), n
    )
    return kept, truth


@dataclass(frozen=True)
class EngineConfig:
    """Which engine predicts, and its knobs.

    'auto' uses the exact FGM predictive when the compatible set is small
    enough, otherwise simulated annealing.
    """

    engine: str = "auto"
    exact_cap: int = 1_000_000
    anneal: AnnealConfig = field(default_factory=AnnealConfig)
    gibbs_steps: int = 50_000
    gibbs_variant: str = "mhi"
    gibbs_eps: float = 0.1

    def resolve(self, inc: IncompleteRanking, model: CopulaModel) -> str:
        if self.engine != "auto":
            return self.engine
        if model.family == "fgm" and inc.cardinality() <= self.exact_cap:
            return "exact"
        return "anneal"


def predict_user(
    kept: IncompleteRanking,
    cfg: EngineConfig,
    model: CopulaModel,
    prior: Prior,
    rng: np.random.Generator,
) -> Permutation:
    """Full predicted ranking of all n objects from the kept partial ranking
    (expert coordinates, so the result is the predicted rank statistic)."""
    engine = cfg.resolve(kept, model)
    if engine == "exact":
        if model.family != "fgm":
            raise ValueError("the exact engine requires the FGM family")
        return exact_predictive(kept, prior, cap=cfg.exact_cap).mode()
    if engine == "anneal":
        return anneal(kept, model, prior, cfg.anneal, rng).best
    if engine == "gibbs-mode":
        res = gibbs_run(
            kept,
            model,
            prior,
            variant=cfg.gibbs_variant,
            steps=cfg.gibbs_steps,
            eps=cfg.gibbs_eps,
            rng=rng,
        )
        return res.occupancy.argmax()
    raise ValueError(f"unknown engine {engine!r}")


@dataclass
class EvalReport:
    """Holdout evaluation results: d(p, k) means and their per-user parts."""

    proportions: tuple[float, ...]
    repetitions: int
    d_pk: np.ndarray  # (len(proportions), repetitions)
    per_user: dict[tuple[float, int], list[tuple[int, int]]]

    @property
    def d_bar(self) -> np.ndarray:
        return self.d_pk.mean(axis=1)

    def to_json_dict(self) -> dict:
        return {
            "proportions": list(self.proportions),
            "repetitions": self.repetitions,
            "d_pk": {
                f"{p:g}": self.d_pk[i].tolist() for i, p in enumerate(self.proportions)
            },
            "d_bar": {f"{p:g}": float(v) for p, v in zip(self.proportions, self.d_bar)},
        }


def evaluate(
    matrix: RatingsMatrix,
    proportions: Sequence[float],
    repetitions: int,
    cfg: EngineConfig,
    model: CopulaModel,
    prior: Prior,
    seed: int,
    items: Sequence[int] | None = None,
    workers: int = 1,
) -> EvalReport:
    """Split, predict, and score every user at every proportion.

    Deterministic for a fixed (seed, config): each (proportion, repetition,
    user) cell draws from its own spawned stream, so worker count never
    changes the result.
    """
    if repetitions < 1:
        raise ValueError("need at least one repetition")
    expert = derive_expert(matrix, items)
    universe = expert.items
    user_truths: dict[int, Permutation] = {}
    for user in matrix.users:
        rated = matrix.items_rated_by(user, universe)
        if len(rated) < 2:
            raise ValueError(f"user {user} has fewer than 2 rated items")
        user_truths[user] = user_ranking(matrix, user, rated, expert)

    users = list(matrix.users)
    d_pk = np.zeros((len(proportions), repetitions))
    per_user: dict[tuple[float, int], list[tuple[int, int]]] = {}

    def one_cell(p_idx: int, k: int, u_idx: int) -> tuple[int, int]:
        user = users[u_idx]
        rng = np.random.default_rng(
            np.random.SeedSequence(seed, spawn_key=(p_idx, k, u_idx))
        )
        kept, truth = holdout_split(user_truths[user], proportions[p_idx], rng)
        pred = predict_user(kept, cfg, model, prior, rng)
        return user, kendall_distance(pred, truth)

    for p_idx, p in enumerate(proportions):
        for k in range(repetitions):
            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    cells = list(
                        pool.map(lambda u: one_cell(p_idx, k, u), range(len(users)))
                    )
            else:
                cells = [one_cell(p_idx, k, u) for u in range(len(users))]
            cells.sort(key=lambda t: t[0])
            per_user[(p, k + 1)] = cells
            d_pk[p_idx, k] = float(np.mean([d for _, d in cells]))

    return EvalReport(tuple(proportions), repetitions, d_pk, per_user)


def top_nprime(
    kept: IncompleteRanking,
    n_prime: int,
    cfg: EngineConfig,
    model: CopulaModel,
    prior: Prior,
    rng: np.random.Generator,
    stage1_steps: int = 20_000,
    selection: str = "mean-rank",
) -> tuple[Permutation, tuple[int, ...]]:
    """Two-stage prediction of the user's best n' objects.

    Stage 1 samples the full predictive; objects are scored by occupancy-
    weighted mean rank ('mean-rank', default) or by how often they land in
    the top n' positions ('top-count').  Stage 2 reruns the engine on the
    instance restricted to the selected objects.  Returns the reduced
    prediction and the selected expert coordinates (ascending).
    """
    n = kept.n
    if not 1 <= n_prime < n:
        raise ValueError(f"need 1 <= n' < n, got n'={n_prime}, n={n}")
    res = gibbs_run(kept, model, prior, steps=stage1_steps, rng=rng)
    freqs = res.occupancy.frequencies()
    if selection == "mean-rank":
        score = {
            i: sum(f * s.values[i - 1] for s, f in freqs.items()) for i in range(1, n + 1)
        }
        chosen = sorted(sorted(score), key=lambda i: (score[i], i))[:n_prime]
    elif selection == "top-count":
        score = {
            i: -sum(f for s, f in freqs.items() if s.values[i - 1] <= n_prime)
            for i in range(1, n + 1)
        }
        chosen = sorted(sorted(score), key=lambda i: (score[i], i))[:n_prime]
    else:
        raise ValueError("selection must be 'mean-rank' or 'top-count'")
    chosen = tuple(sorted(chosen))

    pos_in_reduced = {coord: j + 1 for j, coord in enumerate(chosen)}
    surviving = [i for i in kept.indices if i in pos_in_reduced]
    m_prime = len(surviving)
    if m_prime == n_prime:
        # the kept data already determines the reduced ranking
        sub = _restrict_pattern(kept, surviving)
        vals = [0] * n_prime
        for j, coord in enumerate(surviving):
            vals[pos_in_reduced[coord] - 1] = sub.values[j]
        return Permutation(tuple(vals)), chosen
    if m_prime == 0:
        reduced: IncompleteRanking | Unconstrained = Unconstrained(n_prime)
    else:
        reduced = IncompleteRanking(
            _restrict_pattern(kept, surviving),
            tuple(pos_in_reduced[c] for c in surviving),
            n_prime,
        )
    if isinstance(reduced, Unconstrained):
        pred = anneal(reduced, model, prior, cfg.anneal, rng).best
    else:
        pred = predict_user(reduced, cfg, model, prior, rng)
    return pred, chosen


def _restrict_pattern(kept: IncompleteRanking, surviving: Sequence[int]) -> Permutation:
    """Relative ranking of the surviving kept objects among themselves."""
    positions = [kept.indices.index(c) + 1 for c in surviving]
    return induced_subranking(kept.sub_perm, positions)


def fit_prior_from_ratings(
    matrix: RatingsMatrix, items: Sequence[int] | None = None
) -> tuple[float, float]:
    """Fit the transformed-Beta prior on the copula parameter from data.

    Per-user Kendall's tau against the expert order is mapped through
    rho = sin(tau pi / 2); the Beta shape parameters are then matched to the
    mean and variance of the rho sample (method of moments).
    """
    expert = derive_expert(matrix, items)
    taus = []
    for user in matrix.users:
        rated = matrix.items_rated_by(user, expert.items)
        if len(rated) < 2:
            continue
        s = user_ranking(matrix, user, rated, expert)
        n_u = len(s)
        d = kendall_distance(s, Permutation.identity(n_u))
        taus.append(1.0 - 2.0 * d / math.comb(n_u, 2))
    if len(taus) < 2:
        raise ValueError("need at least two users with 2+ rated items")
    rho = np.sin(np.asarray(taus) * math.pi / 2.0)
    t = (rho + 1.0) / 2.0
    m1 = float(np.mean(t))
    v = float(np.var(t, ddof=1))
    if v <= 0 or not 0 < m1 < 1:
        raise ValueError("degenerate rho sample; cannot fit a Beta prior")
    c = m1 * (1.0 - m1) / v - 1.0
    if c <= 0:
        raise ValueError("rho sample variance too large for a Beta fit")
    return m1 * c, (1.0 - m1) * c


@dataclass
class SyntheticBenchmark:
    """Paired comparison of the engine against uniform-random completion."""

    method_distances: np.ndarray
    baseline_distances: np.ndarray

    @property
    def mean_method(self) -> float:
        return float(self.method_distances.mean())

    @property
    def mean_baseline(self) -> float:
        return float(self.baseline_distances.mean())

    def difference_se(self) -> float:
        diff = self.baseline_distances - self.method_distances
        return float(diff.std(ddof=1) / math.sqrt(diff.size))

    @property
    def separation_sigmas(self) -> float:
        return (self.mean_baseline - self.mean_method) / self.difference_se()


def synthetic_benchmark(
    rho: float,
    n_items: int,
    m_keep: int,
    n_users: int,
    repetitions: int,
    seed: int,
    cfg: EngineConfig | None = None,
    model: CopulaModel | None = None,
    prior: Prior | None = None,
    workers: int = 1,
) -> SyntheticBenchmark:
    """Latent Gaussian-copula users: grades for expert and user are correlated
    normals, the expert ranking is observed in full, a random subset of the
    user ranking is kept, and the engine's Kendall distance to the hidden
    truth is compared with a uniformly random compatible completion."""
    cfg = cfg or EngineConfig(engine="anneal", anneal=AnnealConfig(iters=600, inner_draws=40))
    model = model or gaussian_model()
    prior = prior or TransformedBetaPrior(6.0, 2.0)

    def one(job: tuple[int, int]) -> tuple[int, int]:
        rep, u_idx = job
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep, u_idx)))
        z1 = rng.standard_normal(n_items)
        z2 = rho * z1 + math.sqrt(1.0 - rho * rho) * rng.standard_normal(n_items)
        r_x = rank_of(z1)
        r_y = rank_of(z2)
        truth = r_y.compose(r_x.inverse())
        keep = np.sort(rng.choice(n_items, size=m_keep, replace=False) + 1)
        kept = IncompleteRanking(
            induced_subranking(truth, keep), tuple(int(i) for i in keep), n_items
        )
        pred = predict_user(kept, cfg, model, prior, rng)
        base = random_compatible(kept, rng)
        return kendall_distance(pred, truth), kendall_distance(base, truth)

    jobs = [(rep, u) for rep in range(repetitions) for u in range(n_users)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(one, jobs))
    else:
        pairs = [one(j) for j in jobs]
    method = np.asarray([a for a, _ in pairs], dtype=np.float64)
    base = np.asarray([b for _, b in pairs], dtype=np.float64)
    return SyntheticBenchmark(method, base)
