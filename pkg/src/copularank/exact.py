"""Exact FGM rank-likelihood polynomials, marginal and predictive
distributions, and exact modes.

P_theta(S = s) is a polynomial of degree n-1 in theta whose coefficients are
pairings of simplex integrals d_j over index subsets; everything stochastic in
this package is validated against the values computed here.
"""
from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from ._backend import kernels
from . import perm as permmod
from .perm import (
    EnumerationCapError,
    IncompleteRanking,
    Permutation,
    enumerate_compatible,
)
from .priors import MomentTable, Prior

DEFAULT_POLY_CAP = 8
# (n+1)^j terms per coefficient; n = 9 tops out at 1e8
DEFAULT_TERM_CAP = 200_000_000

MODE_REL_TOL = 1e-10


class ComputeCapError(RuntimeError):
    """An exact computation would exceed its configured term budget."""


_d_cache: dict[tuple[int, int, tuple[int, ...]], float] = {}
_d_lock = threading.Lock()


def d_coefficient(
    n: int, j: int, indices: Sequence[int], term_cap: int = DEFAULT_TERM_CAP
) -> float:
    """The simplex integral d_j(i_1..i_j) for strictly increasing 1-based indices.

    Exact alternating sum over (n+1)^j terms with multinomial factorial
    weights, divided by (n+j)!.  Values are memoised by (n, j, sorted indices);
    the integral is symmetric in its arguments so sorting loses nothing.
    """
    idx = tuple(sorted(int(i) for i in indices))
    if len(idx) != j or j < 1 or j > n - 1:
        raise ValueError(f"need 1 <= j <= n-1 indices, got {indices} for j={j}")
    if len(set(idx)) != j or idx[0] < 1 or idx[-1] > n:
        raise ValueError(f"indices must be distinct and within 1..{n}: {indices}")
    if (n + 1) ** j > term_cap:
        raise ComputeCapError(
            f"(n+1)^j = {(n + 1) ** j} terms exceeds the cap of {term_cap}"
        )
    key = (n, j, idx)
    hit = _d_cache.get(key)
    if hit is not None:
        return hit
    num = kernels.dj_sum_int(n, j, np.asarray(idx, dtype=np.int64) - 1)
    val = float(num) / float(math.factorial(n + j))
    with _d_lock:
        _d_cache[key] = val
    return val


def d_coefficient_fraction(n: int, j: int, indices: Sequence[int]) -> Fraction:
    """Exact-rational d_j, for cross-checking the floating-point table."""
    idx = tuple(sorted(int(i) for i in indices))
    num = kernels.dj_sum_int(n, j, np.asarray(idx, dtype=np.int64) - 1)
    return Fraction(int(num), math.factorial(n + j))


@dataclass(frozen=True)
class RankLikelihoodPolynomial:
    """Coefficients c_0..c_{n-1} of theta -> P_theta(S = s); c_n vanishes."""

    n: int
    coeffs: tuple[float, ...]

    def evaluate(self, theta: float) -> float:
        theta = float(theta)
        if not -1.0 <= theta <= 1.0:
            raise ValueError(f"theta must lie in [-1, 1], got {theta}")
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * theta + c
        return acc

    __call__ = evaluate

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=np.float64)


@lru_cache(maxsize=8)
def _subset_table(n: int, term_cap: int) -> dict[tuple[int, tuple[int, ...]], float]:
    """d_j values for every index subset of {1..n}, built once per n."""
    table = {}
    for j in range(1, n):
        for idx in itertools.combinations(range(1, n + 1), j):
            table[(j, idx)] = d_coefficient(n, j, idx, term_cap=term_cap)
    return table


def rank_likelihood_poly(
    s: Permutation, n_cap: int = DEFAULT_POLY_CAP, term_cap: int = DEFAULT_TERM_CAP
) -> RankLikelihoodPolynomial:
    """Exact polynomial of the FGM rank likelihood for one permutation."""
    n = len(s)
    if n > n_cap:
        raise ComputeCapError(f"n = {n} above the exact-polynomial cap of {n_cap}")
    table = _subset_table(n, term_cap)
    vals = s.values
    coeffs = [1.0 / math.factorial(n)]
    nfact = float(math.factorial(n))
    for j in range(1, n):
        tot = 0.0
        for idx in itertools.combinations(range(1, n + 1), j):
            img = tuple(sorted(vals[i - 1] for i in idx))
            tot += table[(j, idx)] * table[(j, img)]
        coeffs.append(nfact * tot)
    return RankLikelihoodPolynomial(n, tuple(coeffs))


def rank_likelihood_poly_rational(s: Permutation) -> tuple[Fraction, ...]:
    """Exact-rational coefficients (slow path, intended for n <= 5)."""
    n = len(s)
    coeffs = [Fraction(1, math.factorial(n))]
    for j in range(1, n):
        tot = Fraction(0)
        for idx in itertools.combinations(range(1, n + 1), j):
            img = tuple(sorted(s.values[i - 1] for i in idx))
            tot += d_coefficient_fraction(n, j, idx) * d_coefficient_fraction(n, j, img)
        coeffs.append(math.factorial(n) * tot)
    return tuple(coeffs)


def exact_rank_likelihood(s: Permutation, theta: float, **caps) -> float:
    """P_theta(S = s) for the FGM family."""
    return rank_likelihood_poly(s, **caps).evaluate(theta)


@lru_cache(maxsize=256)
def _prior_moments(prior: Prior, upto: int) -> MomentTable:
    return prior.moments(upto)


def exact_marginal(s: Permutation, prior: Prior, **caps) -> float:
    """P(S = s) with the FGM parameter integrated against the prior: the dot
    product of the polynomial coefficients with the prior moments."""
    poly = rank_likelihood_poly(s, **caps)
    table = _prior_moments(prior, poly.n - 1)
    return float(
        sum(c * table[j] for j, c in enumerate(poly.coeffs))
    )


@dataclass(frozen=True)
class ExactPredictive:
    """The exact predictive distribution over a compatible set."""

    support: tuple[Permutation, ...]
    probabilities: np.ndarray
    modes: tuple[Permutation, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "_index", {p: i for i, p in enumerate(self.support)}
        )

    def prob_of(self, p: Permutation) -> float:
        i = self._index.get(p)
        return float(self.probabilities[i]) if i is not None else 0.0

    def mode(self) -> Permutation:
        """Lexicographically first mode (deterministic tie-break)."""
        return self.modes[0]


def exact_predictive(
    inc: IncompleteRanking,
    prior: Prior,
    cap: int = permmod.DEFAULT_ENUMERATION_CAP,
    **caps,
) -> ExactPredictive:
    """Normalise the exact marginal over C(s*, M*) and record the mode set.

    Modes are all support points within relative tolerance 1e-10 of the
    maximum probability.
    """
    support = enumerate_compatible(inc, cap=cap)
    probs = np.asarray([exact_marginal(s, prior, **caps) for s in support])
    total = probs.sum()
    if total <= 0:
        raise ArithmeticError("predictive mass vanished; coefficients inconsistent")
    probs = probs / total
    top = probs.max()
    modes = tuple(
        support[i] for i in np.flatnonzero(probs >= top * (1.0 - MODE_REL_TOL))
    )
    return ExactPredictive(tuple(support), probs, modes)


def predict_mode_exact(
    r_x: Permutation,
    r_y_star: Permutation,
    indices: Sequence[int],
    prior: Prior,
    **kwargs,
) -> Permutation:
    """Most probable complete user ranking given the expert ranking and the
    user's ranked subset; lexicographically first mode composed back through
    the expert's ordering."""
    inc = permmod.to_star_form(r_x, r_y_star, indices)
    pred = exact_predictive(inc, prior, **kwargs)
    return pred.mode().compose(r_x)


def marginal_over_group(n: int, prior: Prior, **caps) -> ExactPredictive:
    """The marginal distribution of the rank statistic over all of S_n
    (the unconstrained, m = 0 case)."""
    support = [Permutation(p) for p in itertools.permutations(range(1, n + 1))]
    support.sort(key=lambda p: p.values)
    probs = np.asarray([exact_marginal(s, prior, **caps) for s in support])
    probs = probs / probs.sum()
    top = probs.max()
    modes = tuple(
        support[i] for i in np.flatnonzero(probs >= top * (1.0 - MODE_REL_TOL))
    )
    return ExactPredictive(tuple(support), probs, modes)
