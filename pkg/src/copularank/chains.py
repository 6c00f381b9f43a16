"""The three samplers: a uniform chain on compatible rankings, simulated
annealing for the predictive mode, and a Metropolis-within-Gibbs sampler for
the full predictive distribution, plus total-variation diagnostics.

All randomness flows from one explicit seed or Generator per chain; the
chunked steppers consume pre-drawn random blocks through the kernel backend,
so a fixed seed gives the same trajectory on either backend.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence, Union

import numpy as np
from scipy import special

from . import _kernels_py
from ._backend import kernels
from .copula import CopulaModel
from .exact import ExactPredictive
from .perm import IncompleteRanking, Permutation, is_compatible, random_compatible
from .priors import Prior, TransformedBetaPrior
from .montecarlo import sample_spacings

DEFAULT_CHUNK = 16384
# Lehmer codes of states are tracked in int64, which caps occupancy-tracked
# chains at 20 objects (20! < 2^63); annealing has no such cap.
MAX_OCCUPANCY_N = 20


@dataclass(frozen=True)
class Unconstrained:
    """No ranked subset: the chain moves over all of S_n (the m = 0 case)."""

    n: int

    @property
    def m(self) -> int:
        return 0


Instance = Union[IncompleteRanking, Unconstrained]


@dataclass
class ChainState:
    """Gibbs sampler state: a compatible ranking, two spacings vectors, and
    the copula parameter."""

    s: Permutation
    w1: np.ndarray
    w2: np.ndarray
    theta: float


@dataclass(frozen=True)
class AnnealConfig:
    """Simulated-annealing controls.

    scale multiplies the energy difference (raw probabilities are O(1/n!) and
    would vanish under the log schedule); None means n!.  reestimate=True
    redraws the incumbent's estimate every iteration instead of carrying the
    value from its acceptance step.
    """

    iters: int = 100_000
    inner_draws: int = 100
    scale: float | None = None
    reestimate: bool = False

    def __post_init__(self):
        if self.iters < 1 or self.inner_draws < 1:
            raise ValueError("iters and inner_draws must be >= 1")
        if self.scale is not None and self.scale <= 0:
            raise ValueError("scale must be positive")


@dataclass
class OccupancyTable:
    """Visit counts per ranking."""

    counts: dict[Permutation, int]
    total: int

    def frequencies(self) -> dict[Permutation, float]:
        return {p: c / self.total for p, c in self.counts.items()}

    def merge(self, other: "OccupancyTable") -> "OccupancyTable":
        counts = dict(self.counts)
        for p, c in other.counts.items():
            counts[p] = counts.get(p, 0) + c
        return OccupancyTable(counts, self.total + other.total)

    def argmax(self) -> Permutation:
        top = max(self.counts.values())
        return min(p for p, c in self.counts.items() if c == top)


def tv_empirical(p_hat: OccupancyTable, p: ExactPredictive) -> float:
    """TV(p_hat, p) = half the L1 distance, unvisited rankings counting as 0."""
    freqs = p_hat.frequencies()
    acc = 0.0
    for s, prob in zip(p.support, p.probabilities):
        acc += abs(freqs.pop(s, 0.0) - float(prob))
    acc += sum(freqs.values())  # empirical mass off the exact support
    return 0.5 * acc


def tv_tables(a: OccupancyTable, b: OccupancyTable) -> float:
    """Total variation distance between two empirical occupancy tables."""
    fa = a.frequencies()
    fb = b.frequencies()
    keys = set(fa) | set(fb)
    return 0.5 * sum(abs(fa.get(k, 0.0) - fb.get(k, 0.0)) for k in keys)


# ---------------------------------------------------------------------------
# Instance plumbing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Arrays:
    n: int
    star_pos: np.ndarray  # 0-based positions of the ranked block
    sstar0: np.ndarray  # 0-based pattern ranks
    free_pos: np.ndarray


def _instance_arrays(inc: Instance) -> _Arrays:
    if isinstance(inc, Unconstrained):
        if inc.n < 2:
            raise ValueError("need at least two objects")
        return _Arrays(
            inc.n,
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.arange(inc.n, dtype=np.int64),
        )
    star = np.asarray(inc.indices, dtype=np.int64) - 1
    free = np.asarray([i - 1 for i in inc.free_indices()], dtype=np.int64)
    pattern = np.asarray(inc.sub_perm.values, dtype=np.int64) - 1
    return _Arrays(inc.n, star, pattern, free)


def _initial_ranking(inc: Instance, rng: np.random.Generator) -> Permutation:
    if isinstance(inc, Unconstrained):
        return Permutation.from_zero_based(rng.permutation(inc.n))
    return random_compatible(inc, rng)


def _check_member(s: Permutation, inc: Instance) -> bool:
    return True if isinstance(inc, Unconstrained) else is_compatible(s, inc)


def _lehmer_of(p: Permutation) -> int:
    return _kernels_py._lehmer_code(p.zero_based())


def _perm_of_code(code: int, n: int) -> Permutation:
    return Permutation.from_zero_based(_kernels_py.lehmer_decode(code, n))


# ---------------------------------------------------------------------------
# Uniform chain on compatible rankings
# ---------------------------------------------------------------------------


def compat_step(s: Permutation, inc: Instance, rng: np.random.Generator) -> Permutation:
    """One move of the uniform chain: swap two values outside the ranked
    block, or pull one ranked value out and re-sort the block to restore its
    pattern (equal probability when both are available)."""
    if not _check_member(s, inc):
        raise ValueError("current state is not compatible with the instance")
    arr = _instance_arrays(inc)
    s0 = s.zero_based()
    u = rng.random(3)
    _kernels_py._apply_compat_move(s0, arr.star_pos, arr.sstar0, arr.free_pos, u[0], u[1], u[2])
    return Permutation.from_zero_based(s0)


def compat_chain(
    inc: Instance,
    steps: int,
    rng,
    start: Permutation | None = None,
    chunk_size: int = 65536,
) -> OccupancyTable:
    """Run the uniform chain and return the occupancy table over all steps."""
    rng = np.random.default_rng(rng)
    arr = _instance_arrays(inc)
    if arr.n > MAX_OCCUPANCY_N:
        raise ValueError(f"occupancy tracking supports n <= {MAX_OCCUPANCY_N}")
    state = start if start is not None else _initial_ranking(inc, rng)
    if not _check_member(state, inc):
        raise ValueError("start state is not compatible with the instance")
    s0 = state.zero_based()
    counts: dict[int, int] = {}
    done = 0
    while done < steps:
        t = min(chunk_size, steps - done)
        u3 = rng.random((t, 3))
        codes = np.empty(t, dtype=np.int64)
        kernels.compat_chain_chunk(s0, arr.star_pos, arr.sstar0, arr.free_pos, u3, codes)
        uniq, cnt = np.unique(codes, return_counts=True)
        for code, c in zip(uniq.tolist(), cnt.tolist()):
            counts[code] = counts.get(code, 0) + c
        done += t
    table = {_perm_of_code(code, arr.n): c for code, c in counts.items()}
    assert all(_check_member(p, inc) for p in table)
    return OccupancyTable(table, steps)


# ---------------------------------------------------------------------------
# Joint density and the instrumental proposal
# ---------------------------------------------------------------------------


def joint_density(state: ChainState, model: CopulaModel, prior: Prior) -> float:
    """f(s, w1, w2, theta) = n! prod_i c_theta(U_i, V_{s(i)}) pi(theta), with
    U, V the prefix sums of the spacings."""
    n = len(state.s)
    prod = _kernels_py._joint_prod(
        state.w1, state.w2, state.s.zero_based(), state.theta, model.family_id
    )
    return math.factorial(n) * prod * float(prior.density(state.theta))


def joint_ratio_incremental(
    state: ChainState, s_new: Permutation, model: CopulaModel
) -> float:
    """f(s_new,...)/f(s,...) touching only the positions where the rankings
    differ."""
    v = np.cumsum(state.w2)[:-1]
    u = np.cumsum(state.w1)[:-1]
    s_old0 = state.s.zero_based()
    s_new0 = s_new.zero_based()
    ratio = 1.0
    for i in np.flatnonzero(s_old0 != s_new0):
        ratio *= model.density(u[i], v[s_new0[i]], state.theta) / model.density(
            u[i], v[s_old0[i]], state.theta
        )
    return ratio


def instrumental_sample(
    w0: np.ndarray, g: str, rng: np.random.Generator
) -> np.ndarray:
    """Draw W = (1 - L) w0 + L W' with W' ~ Dirichlet(1,...,1) and L ~ g on
    (0,1); w0 and the result are full spacings vectors (n+1 entries)."""
    w0 = np.asarray(w0, dtype=np.float64)
    n = w0.size - 1
    if np.any(w0 <= 0.0):
        raise ValueError("w0 must be strictly interior")
    lam = _draw_mixing(g, n, rng)
    return (1.0 - lam) * w0 + lam * sample_spacings(n, rng)


def _draw_mixing(g: str, n: int, rng: np.random.Generator) -> float:
    if g == "uniform":
        return float(rng.random())
    if g == "beta_n1":
        return float(rng.random() ** (1.0 / n))
    raise ValueError(f"unknown mixing density {g!r}; choose 'uniform' or 'beta_n1'")


def instrumental_density(w: np.ndarray, w0: np.ndarray, g: str = "uniform") -> float:
    """Density of the convex-combination proposal at w given w0.

    q(w | w0) = n! * integral over (1 - delta, 1) of lambda^(-n) g(lambda),
    with delta the smallest coordinate ratio w_i / w0_i.  At w = w0 the
    integral diverges for the uniform mixing density and +inf is returned;
    the proposal is almost surely distinct from w0, so the value never enters
    a Hastings ratio.
    """
    w = np.asarray(w, dtype=np.float64)
    w0 = np.asarray(w0, dtype=np.float64)
    if w.shape != w0.shape:
        raise ValueError("w and w0 must have the same length")
    if np.any(w <= 0.0) or np.any(w0 <= 0.0):
        raise ValueError("boundary input: spacings must be strictly positive")
    n = w.size - 1
    delta = float(np.min(w / w0))
    if delta >= 1.0:
        return math.inf
    gtag = {"uniform": 0, "beta_n1": 1}[g]
    return math.factorial(n) * _kernels_py._instr_integral(delta, n, gtag)


# ---------------------------------------------------------------------------
# Simulated annealing for the predictive mode
# ---------------------------------------------------------------------------


@dataclass
class AnnealResult:
    best: Permutation
    best_energy: float
    codes: np.ndarray  # Lehmer code of the current state, per iteration
    energies: np.ndarray  # estimate attached to the current state
    n: int
    accept_rate: float

    def trace_rows(self) -> Iterator[tuple[int, Permutation, float]]:
        cache: dict[int, Permutation] = {}
        for t, (code, e) in enumerate(zip(self.codes.tolist(), self.energies), start=1):
            p = cache.get(code)
            if p is None:
                p = cache[code] = _perm_of_code(code, self.n)
            yield t, p, float(e)

    def state_at(self, t: int) -> Permutation:
        return _perm_of_code(int(self.codes[t - 1]), self.n)


def anneal(
    inc: Instance,
    model: CopulaModel,
    prior: Prior,
    cfg: AnnealConfig | None = None,
    rng=None,
    energy: Callable[[Permutation], float] | None = None,
) -> AnnealResult:
    """Search for the predictive mode by annealed Metropolis moves.

    Proposals come from the uniform compatible chain; each proposal's
    predictive probability is estimated by inner_draws fresh (spacings, theta)
    draws, and acceptance uses exp(scale * (new - cur) / T_t) with
    T_t = 1/log(t + 1).  An ``energy`` callable replaces the Monte Carlo
    estimate (used to validate the schedule against the exact oracle).
    """
    cfg = cfg or AnnealConfig()
    rng = np.random.default_rng(rng)
    arr = _instance_arrays(inc)
    n = arr.n
    scale = cfg.scale if cfg.scale is not None else float(math.factorial(min(n, 20)))
    inv_nfact = 1.0 / math.factorial(n)

    def estimate_mc(s0: np.ndarray) -> float:
        thetas = np.asarray(prior.sample(rng, cfg.inner_draws), dtype=np.float64)
        e = rng.standard_exponential((cfg.inner_draws, 2, n + 1))
        w = e / e.sum(axis=2, keepdims=True)
        u = np.cumsum(w[:, 0, :-1], axis=1)
        v = np.cumsum(w[:, 1, :-1], axis=1)
        vals = model.prod_rows(u, v[:, s0], thetas)
        return float(vals.mean()) * inv_nfact

    if energy is None:
        estimate = estimate_mc
    else:
        estimate = lambda s0: float(energy(Permutation.from_zero_based(s0)))

    s0 = _initial_ranking(inc, rng).zero_based()
    cur_e = estimate(s0)
    best_code = _kernels_py._lehmer_code(s0)
    best_e = cur_e
    codes = np.empty(cfg.iters, dtype=np.int64)
    energies = np.empty(cfg.iters, dtype=np.float64)
    cur_code = best_code
    accepted = 0

    s_prop = np.empty(n, dtype=np.int64)
    for t in range(1, cfg.iters + 1):
        s_prop[:] = s0
        u = rng.random(3)
        _kernels_py._apply_compat_move(
            s_prop, arr.star_pos, arr.sstar0, arr.free_pos, u[0], u[1], u[2]
        )
        new_e = estimate(s_prop)
        if new_e > best_e:
            best_e = new_e
            best_code = _kernels_py._lehmer_code(s_prop)
        if cfg.reestimate:
            cur_e = estimate(s0)
            if cur_e > best_e:
                best_e = cur_e
                best_code = cur_code
        temperature = 1.0 / math.log(t + 1.0)
        arg = scale * (new_e - cur_e) / temperature
        if arg >= 0.0 or rng.random() < math.exp(arg):
            s0[:] = s_prop
            cur_e = new_e
            cur_code = _kernels_py._lehmer_code(s0)
            accepted += 1
        codes[t - 1] = cur_code
        energies[t - 1] = cur_e

    return AnnealResult(
        _perm_of_code(best_code, n), best_e, codes, energies, n, accepted / cfg.iters
    )


# ---------------------------------------------------------------------------
# Metropolis-within-Gibbs over (S, W1, W2, theta)
# ---------------------------------------------------------------------------


@dataclass
class GibbsResult:
    occupancy: OccupancyTable
    theta_trace: np.ndarray
    final_state: ChainState
    accept: dict[str, tuple[int, int]]  # move -> (proposed, accepted)
    tv_checkpoints: list[tuple[int, float]] = field(default_factory=list)


def _fast_scalar_pdf(prior: Prior) -> Callable[[float], float]:
    """Scalar prior density for the chain's parameter move.

    Transformed-Beta priors get the closed form; other priors are tabulated
    on a dense grid (linear interpolation, relative error well below every
    Monte Carlo tolerance in this package).
    """
    if isinstance(prior, TransformedBetaPrior):
        a, b = prior.alpha, prior.beta
        log_norm = special.betaln(a, b) + math.log(2.0)

        def pdf(theta: float) -> float:
            t = (theta + 1.0) / 2.0
            if t < 1e-300:
                t = 1e-300
            omt = 1.0 - t
            if omt < 1e-300:
                omt = 1e-300
            return math.exp((a - 1.0) * math.log(t) + (b - 1.0) * math.log(omt) - log_norm)

        return pdf

    lo, hi = prior.support
    grid = np.linspace(lo, hi, 8193)
    dens = np.asarray(prior.density(grid), dtype=np.float64)

    def pdf(theta: float) -> float:
        return float(np.interp(theta, grid, dens))

    return pdf


_VARIANTS = {"mhi": 0, "mhrw": 1}
_MIXING = {"uniform": 0, "beta_n1": 1}


def gibbs_run(
    inc: Instance,
    model: CopulaModel,
    prior: Prior,
    variant: str = "mhi",
    steps: int = 1_000_000,
    eps: float = 0.1,
    g: str = "uniform",
    rng=None,
    exact: ExactPredictive | None = None,
    checkpoints: Sequence[int] | None = None,
    chunk_size: int = DEFAULT_CHUNK,
) -> GibbsResult:
    """Sample the predictive distribution of the compatible rankings.

    Each step picks uniformly among a permutation Metropolis move, a simplex
    update (variant 'mhi': independent Dirichlet proposal; 'mhrw': the
    convex-combination random walk with mixing density g and its Hastings
    correction), and a windowed random walk of half-width eps on the copula
    parameter.  Occupancy frequencies over all N steps estimate the
    predictive probabilities; when ``exact`` is given, the total variation
    distance to it is recorded at the requested checkpoint step counts.
    """
    if variant not in _VARIANTS:
        raise ValueError(f"variant must be one of {sorted(_VARIANTS)}")
    if g not in _MIXING:
        raise ValueError(f"mixing density must be one of {sorted(_MIXING)}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    rng = np.random.default_rng(rng)
    arr = _instance_arrays(inc)
    n = arr.n
    if n > MAX_OCCUPANCY_N:
        raise ValueError(f"occupancy tracking supports n <= {MAX_OCCUPANCY_N}")

    start = _initial_ranking(inc, rng)
    s0 = start.zero_based()
    w1 = sample_spacings(n, rng)
    w2 = sample_spacings(n, rng)
    theta = float(prior.sample(rng))
    pdf = _fast_scalar_pdf(prior)
    fstate = np.array(
        [
            theta,
            _kernels_py._joint_prod(w1, w2, s0, theta, model.family_id),
            pdf(theta),
        ],
        dtype=np.float64,
    )
    acc = np.zeros(6, dtype=np.int64)
    theta_trace = np.empty(steps, dtype=np.float64)
    counts: dict[int, int] = {}

    exact_by_code: dict[int, float] = {}
    if exact is not None:
        exact_by_code = {
            _lehmer_of(p): float(pr) for p, pr in zip(exact.support, exact.probabilities)
        }
    pending = sorted(int(c) for c in checkpoints) if checkpoints else []
    if pending and exact is None:
        raise ValueError("checkpoints require the exact predictive distribution")
    tvs: list[tuple[int, float]] = []

    done = 0
    while done < steps:
        t = min(chunk_size, steps - done)
        if pending:
            t = min(t, pending[0] - done)
        u7 = rng.random((t, 7))
        ex = rng.standard_exponential((t, 2, n + 1))
        codes = np.empty(t, dtype=np.int64)
        kernels.gibbs_chunk(
            s0,
            w1,
            w2,
            fstate,
            arr.star_pos,
            arr.sstar0,
            arr.free_pos,
            model.family_id,
            eps,
            _VARIANTS[variant],
            _MIXING[g],
            pdf,
            u7,
            ex,
            codes,
            theta_trace[done : done + t],
            acc,
        )
        uniq, cnt = np.unique(codes, return_counts=True)
        for code, c in zip(uniq.tolist(), cnt.tolist()):
            counts[code] = counts.get(code, 0) + c
        done += t
        if pending and done == pending[0]:
            pending.pop(0)
            l1 = sum(
                abs(counts.get(code, 0) / done - pr) for code, pr in exact_by_code.items()
            )
            l1 += sum(
                c / done for code, c in counts.items() if code not in exact_by_code
            )
            tvs.append((done, 0.5 * l1))

    table = {_perm_of_code(code, n): c for code, c in counts.items()}
    assert all(_check_member(p, inc) for p in table)
    final = ChainState(
        Permutation.from_zero_based(s0), w1.copy(), w2.copy(), float(fstate[0])
    )
    accept = {
        "perm": (int(acc[0]), int(acc[1])),
        "simplex": (int(acc[2]), int(acc[3])),
        "theta": (int(acc[4]), int(acc[5])),
    }
    return GibbsResult(OccupancyTable(table, steps), theta_trace, final, accept, tvs)
