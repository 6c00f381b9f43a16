"""Priors on the scalar copula parameter: transformed Beta, Jeffreys for the
FGM family, and tabulated densities; moments, sampling, and total-variation
comparison."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy import integrate, special

MOMENT_QUAD_TOL = 1e-10
TV_QUAD_TOL = 1e-6
SERIES_TAIL_TOL = 1e-14
INVERSE_CDF_GRID = 10_000


@dataclass(frozen=True)
class MomentTable:
    """Moments m_0..m_(len-1) of a prior, with how they were obtained."""

    moments: tuple[float, ...]
    provenance: str  # "closed-form" or "quadrature"

    def __getitem__(self, j: int) -> float:
        return self.moments[j]

    def __len__(self) -> int:
        return len(self.moments)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.moments, dtype=np.float64)


def beta_moment(alpha: float, beta: float, j: int) -> float:
    """E[(2T - 1)^j] for T ~ Beta(alpha, beta), by the alternating
    Beta-function sum."""
    if alpha <= 0 or beta <= 0:
        raise ValueError("Beta shape parameters must be positive")
    if j < 0:
        raise ValueError("moment order must be nonnegative")
    if j == 0:
        return 1.0
    log_b = special.betaln(alpha, beta)
    total = 0.0
    for k in range(j + 1):
        term = math.exp(
            special.betaln(alpha + k, beta + j - k) - special.betaln(1 + k, 1 + j - k) - log_b
        )
        total += -term if k % 2 else term
    total *= (-1.0) ** j / (j + 1)
    return total


_FISHER_BLOCK = 256


@lru_cache(maxsize=1)
def _fisher_at_one() -> float:
    # endpoint of the series; direct summation, cached once
    ks = np.arange(1_000_000, dtype=np.float64)
    return float(np.sum(1.0 / (2.0 * ks + 3.0) ** 2))


def _fisher_scalar(theta: float) -> float:
    if not -1.0 <= theta <= 1.0:
        raise ValueError("|theta| must be <= 1")
    t2 = theta * theta
    if t2 >= 1.0:
        return _fisher_at_one()
    total = 0.0
    p = 1.0
    k = 0
    while True:
        total += p / (2.0 * k + 3.0) ** 2
        p *= t2
        k += 1
        if p / ((1.0 - t2) * (2.0 * k + 3.0) ** 2) < SERIES_TAIL_TOL:
            return total


def jeffreys_fisher_info(theta) -> Union[float, np.ndarray]:
    """Fisher information of the FGM family: sum_k theta^(2k) / (2k+3)^2.

    The series is summed until the geometric tail bound drops below 1e-14;
    the endpoints use a cached deep summation.
    """
    if np.ndim(theta) == 0:
        return _fisher_scalar(float(theta))
    th = np.asarray(theta, dtype=np.float64)
    scalar = th.ndim == 0
    th = np.atleast_1d(th)
    if np.any(np.abs(th) > 1.0):
        raise ValueError("|theta| must be <= 1")
    t2 = th * th
    out = np.zeros_like(t2)
    at_one = t2 >= 1.0
    out[at_one] = _fisher_at_one()
    active = np.flatnonzero(~at_one)
    p = np.ones(active.size)  # t2^k on the active set
    t2a = t2[active]
    k = 0
    while active.size:
        for _ in range(_FISHER_BLOCK):
            out[active] += p / (2.0 * k + 3.0) ** 2
            p *= t2a
            k += 1
        tail = p / ((1.0 - t2a) * (2.0 * k + 3.0) ** 2)
        keep = tail >= SERIES_TAIL_TOL
        if not np.all(keep):
            active = active[keep]
            p = p[keep]
            t2a = t2a[keep]
    return float(out[0]) if scalar else out.reshape(np.shape(theta))


class _PriorBase:
    support: tuple[float, float] = (-1.0, 1.0)

    def density(self, theta):
        raise NotImplementedError

    def moments(self, upto: int) -> MomentTable:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def _quad_moment(self, j: int) -> float:
        lo, hi = self.support
        val, _ = integrate.quad(
            lambda t: t**j * self.density(t), lo, hi, epsabs=MOMENT_QUAD_TOL, limit=200
        )
        return val


@dataclass(frozen=True)
class TransformedBetaPrior(_PriorBase):
    """theta = 2T - 1 with T ~ Beta(alpha, beta)."""

    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("Beta shape parameters must be positive")

    def density(self, theta):
        th = np.asarray(theta, dtype=np.float64)
        if np.any(th < -1.0) or np.any(th > 1.0):
            raise ValueError("theta outside the support [-1, 1]")
        t = (th + 1.0) / 2.0
        with np.errstate(divide="ignore"):
            logpdf = (
                special.xlogy(self.alpha - 1.0, t)
                + special.xlogy(self.beta - 1.0, 1.0 - t)
                - special.betaln(self.alpha, self.beta)
                - math.log(2.0)
            )
        out = np.exp(logpdf)
        return float(out) if np.ndim(theta) == 0 else out

    def moments(self, upto: int) -> MomentTable:
        return MomentTable(
            tuple(beta_moment(self.alpha, self.beta, j) for j in range(upto + 1)),
            "closed-form",
        )

    def sample(self, rng: np.random.Generator, size=None):
        return 2.0 * rng.beta(self.alpha, self.beta, size=size) - 1.0

    def __str__(self) -> str:
        return f"beta:{self.alpha:g},{self.beta:g}"


class _GridSampler:
    """Inverse-CDF sampling on a dense grid with linear interpolation."""

    def __init__(self, grid: np.ndarray, pdf: np.ndarray):
        cdf = np.concatenate(
            [[0.0], np.cumsum((pdf[1:] + pdf[:-1]) / 2.0 * np.diff(grid))]
        )
        self.grid = grid
        self.cdf = cdf / cdf[-1]

    def draw(self, rng: np.random.Generator, size=None):
        u = rng.random(size)
        return np.interp(u, self.cdf, self.grid)


@dataclass(frozen=True)
class JeffreysPrior(_PriorBase):
    """Jeffreys' prior for the FGM parameter: proportional to sqrt(I(theta))."""

    def density(self, theta):
        th = np.asarray(theta, dtype=np.float64)
        if np.any(th < -1.0) or np.any(th > 1.0):
            raise ValueError("theta outside the support [-1, 1]")
        out = np.sqrt(jeffreys_fisher_info(th)) / _jeffreys_normalizer()
        return float(out) if np.ndim(theta) == 0 else out

    def moments(self, upto: int) -> MomentTable:
        vals = []
        for j in range(upto + 1):
            if j == 0:
                vals.append(1.0)
            elif j % 2:
                vals.append(0.0)  # exact, by symmetry
            else:
                vals.append(self._quad_moment(j))
        return MomentTable(tuple(vals), "quadrature")

    def sample(self, rng: np.random.Generator, size=None):
        return _jeffreys_sampler().draw(rng, size)

    def __str__(self) -> str:
        return "jeffreys"


@lru_cache(maxsize=1)
def _jeffreys_normalizer() -> float:
    val, _ = integrate.quad(
        lambda t: math.sqrt(jeffreys_fisher_info(t)), -1.0, 1.0, epsabs=1e-10, limit=200
    )
    return val


@lru_cache(maxsize=1)
def _jeffreys_sampler() -> _GridSampler:
    grid = np.linspace(-1.0, 1.0, INVERSE_CDF_GRID + 1)
    return _GridSampler(grid, np.sqrt(jeffreys_fisher_info(grid)))


class TabulatedPrior(_PriorBase):
    """Prior given by (grid, density) pairs; renormalised, interpolated linearly."""

    def __init__(self, grid, densities):
        grid = np.asarray(grid, dtype=np.float64)
        dens = np.asarray(densities, dtype=np.float64)
        if grid.ndim != 1 or grid.size < 2 or grid.shape != dens.shape:
            raise ValueError("need matching 1-d grid and density arrays, length >= 2")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(dens < 0):
            raise ValueError("densities must be nonnegative")
        mass = np.trapezoid(dens, grid)
        if mass <= 0:
            raise ValueError("density integrates to zero")
        self.grid = grid
        self.densities = dens / mass
        self.support = (float(grid[0]), float(grid[-1]))
        self._sampler = _GridSampler(self.grid, self.densities)

    def density(self, theta):
        th = np.asarray(theta, dtype=np.float64)
        lo, hi = self.support
        if np.any(th < lo) or np.any(th > hi):
            raise ValueError(f"theta outside the support [{lo}, {hi}]")
        out = np.interp(th, self.grid, self.densities)
        return float(out) if np.ndim(theta) == 0 else out

    def moments(self, upto: int) -> MomentTable:
        return MomentTable(tuple(self._quad_moment(j) for j in range(upto + 1)), "quadrature")

    def sample(self, rng: np.random.Generator, size=None):
        return self._sampler.draw(rng, size)

    def __eq__(self, other):
        return (
            isinstance(other, TabulatedPrior)
            and np.array_equal(self.grid, other.grid)
            and np.array_equal(self.densities, other.densities)
        )

    def __hash__(self):
        return hash((self.grid.tobytes(), self.densities.tobytes()))

    def __str__(self) -> str:
        return f"table:<{len(self.grid)} points>"


Prior = Union[TransformedBetaPrior, JeffreysPrior, TabulatedPrior]


def parse_prior(spec: str) -> Prior:
    """Parse a prior description: 'beta:A,B', 'jeffreys', or 'table:FILE'."""
    spec = spec.strip()
    if spec == "jeffreys":
        return JeffreysPrior()
    if spec.startswith("beta:"):
        try:
            a, b = (float(tok) for tok in spec[5:].split(","))
        except ValueError:
            raise ValueError(f"malformed Beta prior spec {spec!r}; expected beta:A,B")
        return TransformedBetaPrior(a, b)
    if spec.startswith("table:"):
        data = np.loadtxt(spec[6:])
        if data.ndim != 2 or data.shape[1] != 2:
            raise ValueError("tabulated prior file must have two whitespace-separated columns")
        return TabulatedPrior(data[:, 0], data[:, 1])
    raise ValueError(f"unknown prior spec {spec!r}")


def density(prior: Prior, theta):
    return prior.density(theta)


def moments(prior: Prior, upto: int) -> MomentTable:
    return prior.moments(upto)


def sample_prior(prior: Prior, rng: np.random.Generator, size=None):
    return prior.sample(rng, size)


def tv_distance(p: Prior, q: Prior) -> float:
    """Total variation distance (half the L1 distance) between two priors."""
    lo = max(p.support[0], q.support[0])
    hi = min(p.support[1], q.support[1])
    val, _ = integrate.quad(
        lambda t: abs(p.density(t) - q.density(t)), lo, hi, epsabs=TV_QUAD_TOL, limit=400
    )
    # mass either prior puts outside the common support also separates them
    if p.support != q.support:
        val += _mass_outside(p, lo, hi) + _mass_outside(q, lo, hi)
    return 0.5 * val


def _mass_outside(prior: Prior, lo: float, hi: float) -> float:
    total = 0.0
    if prior.support[0] < lo:
        total += integrate.quad(prior.density, prior.support[0], lo, epsabs=TV_QUAD_TOL)[0]
    if prior.support[1] > hi:
        total += integrate.quad(prior.density, hi, prior.support[1], epsabs=TV_QUAD_TOL)[0]
    return total
