"""Permutation algebra, the rank map, Kendall distance, and the
combinatorics of rankings that extend a ranked subset."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

DEFAULT_ENUMERATION_CAP = 10_000_000


class SizeMismatchError(ValueError):
    """Operands act on different numbers of objects."""


class EnumerationCapError(RuntimeError):
    """A compatible set is too large to materialise."""


@dataclass(frozen=True)
class Permutation:
    """A bijection of {1..n} in one-line notation, 1-based."""

    values: tuple[int, ...]

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        n = len(vals)
        if n < 1:
            raise ValueError("permutation must have size >= 1")
        if sorted(vals) != list(range(1, n + 1)):
            raise ValueError(f"not a permutation of 1..{n}: {vals}")

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def anti_identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n, 0, -1)))

    @classmethod
    def from_zero_based(cls, arr: Iterable[int]) -> "Permutation":
        return cls(tuple(int(v) + 1 for v in arr))

    @classmethod
    def parse(cls, text: str) -> "Permutation":
        return cls(tuple(int(tok) for tok in text.replace(" ", "").split(",") if tok))

    @property
    def n(self) -> int:
        return len(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[int]:
        return iter(self.values)

    def __str__(self) -> str:
        return ",".join(str(v) for v in self.values)

    def zero_based(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64) - 1

    def compose(self, other: "Permutation") -> "Permutation":
        """self o other: i -> self(other(i))."""
        if len(other) != len(self):
            raise SizeMismatchError(f"sizes {len(self)} and {len(other)} differ")
        return Permutation(tuple(self.values[q - 1] for q in other.values))

    def inverse(self) -> "Permutation":
        inv = [0] * len(self)
        for i, v in enumerate(self.values):
            inv[v - 1] = i + 1
        return Permutation(tuple(inv))


def identity(n: int) -> Permutation:
    return Permutation.identity(n)


def anti_identity(n: int) -> Permutation:
    return Permutation.anti_identity(n)


def compose(p: Permutation, q: Permutation) -> Permutation:
    return p.compose(q)


def inverse(p: Permutation) -> Permutation:
    return p.inverse()


def rank_of(grades: Sequence[float]) -> Permutation:
    """Ascending ranks: r(i) = #{j : g_j <= g_i}; any tie collapses to the identity."""
    g = np.asarray(grades, dtype=np.float64)
    if g.size == 0:
        raise ValueError("empty grade vector")
    if not np.all(np.isfinite(g)):
        raise ValueError("grades must be finite")
    n = g.size
    if np.unique(g).size < n:
        return Permutation.identity(n)
    order = np.argsort(g)
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(1, n + 1)
    return Permutation(tuple(int(r) for r in ranks))


def _inversions(seq: np.ndarray) -> int:
    return int(np.sum(np.triu(seq[:, None] > seq[None, :], 1)))


def kendall_distance(s: Permutation, t: Permutation) -> int:
    """Number of discordant pairs between two rankings."""
    if len(s) != len(t):
        raise SizeMismatchError(f"sizes {len(s)} and {len(t)} differ")
    return _inversions(np.asarray(t.compose(s.inverse()).values))


@dataclass(frozen=True)
class IncompleteRanking:
    """A ranked subset: a permutation of size m on positions ``indices`` within 1..n."""

    sub_perm: Permutation
    indices: tuple[int, ...]
    n: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        m = len(idx)
        if not (1 <= m < self.n):
            raise ValueError(f"need 1 <= m < n, got m={m}, n={self.n}")
        if len(self.sub_perm) != m:
            raise SizeMismatchError("sub-permutation size does not match index count")
        if any(i1 >= i2 for i1, i2 in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing")
        if idx[0] < 1 or idx[-1] > self.n:
            raise ValueError("indices out of range")

    @property
    def m(self) -> int:
        return len(self.indices)

    def free_indices(self) -> tuple[int, ...]:
        taken = set(self.indices)
        return tuple(i for i in range(1, self.n + 1) if i not in taken)

    def cardinality(self) -> int:
        """|C(s*, M*)| = n!/m!."""
        return math.factorial(self.n) // math.factorial(self.m)

    def __str__(self) -> str:
        idx = ",".join(str(i) for i in self.indices)
        return f"s*={self.sub_perm}; M*={idx}; n={self.n}"

    @classmethod
    def parse(cls, text: str) -> "IncompleteRanking":
        parts = dict(
            kv.split("=", 1) for kv in (p.strip() for p in text.split(";")) if "=" in kv
        )
        return cls(
            Permutation.parse(parts["s*"]),
            tuple(int(t) for t in parts["M*"].split(",")),
            int(parts["n"]),
        )


def induced_subranking(r: Permutation, indices: Sequence[int]) -> Permutation:
    """Ascending rank of (r(i_1), ..., r(i_m)); tie-free since r is a bijection."""
    idx = [int(i) for i in indices]
    if any(i < 1 or i > len(r) for i in idx):
        raise IndexError("index out of range")
    sub = [r.values[i - 1] for i in idx]
    return Permutation(tuple(sum(1 for x in sub if x <= v) for v in sub))


def to_star_form(
    r_x: Permutation, r_y_star: Permutation, indices: Sequence[int]
) -> IncompleteRanking:
    """Re-express a ranked subset against the expert's ordering.

    Returns (s*, M*) with M* the expert ranks of the ranked objects and
    s* = r_y* o (r_x*)^{-1}, so that a full ranking r_y extends (r_y*, M)
    exactly when r_y o r_x^{-1} extends (s*, M*).
    """
    idx = tuple(int(i) for i in indices)
    m = len(idx)
    if not (1 <= m < len(r_x)):
        raise ValueError(f"need 1 <= m < n, got m={m}, n={len(r_x)}")
    if len(r_y_star) != m:
        raise SizeMismatchError("sub-permutation size does not match index count")
    r_x_star = induced_subranking(r_x, idx)
    s_star = r_y_star.compose(r_x_star.inverse())
    m_star = tuple(sorted(r_x.values[i - 1] for i in idx))
    return IncompleteRanking(s_star, m_star, len(r_x))


def is_compatible(s: Permutation, inc: IncompleteRanking) -> bool:
    if len(s) != inc.n:
        raise SizeMismatchError(f"sizes {len(s)} and {inc.n} differ")
    return induced_subranking(s, inc.indices) == inc.sub_perm


def enumerate_compatible(
    inc: IncompleteRanking, cap: int = DEFAULT_ENUMERATION_CAP
) -> list[Permutation]:
    """All of C(s*, M*), lexicographically sorted; size n!/m!."""
    count = inc.cardinality()
    if count > cap:
        raise EnumerationCapError(
            f"compatible set has {count} elements, above the cap of {cap}"
        )
    n, m = inc.n, inc.m
    star_pos = [i - 1 for i in inc.indices]
    free_pos = [i - 1 for i in inc.free_indices()]
    pattern = [v - 1 for v in inc.sub_perm.values]
    out = []
    all_vals = range(1, n + 1)
    for free_vals in itertools.permutations(all_vals, n - m):
        vals = [0] * n
        taken = set(free_vals)
        for pos, v in zip(free_pos, free_vals):
            vals[pos] = v
        rem = sorted(v for v in all_vals if v not in taken)
        for k, pos in enumerate(star_pos):
            vals[pos] = rem[pattern[k]]
        out.append(Permutation(tuple(vals)))
    out.sort(key=lambda p: p.values)
    return out


def random_compatible(inc: IncompleteRanking, rng: np.random.Generator) -> Permutation:
    """Uniform draw from C(s*, M*): draw a uniform permutation, then re-sort the
    values on the ranked positions so their induced pattern is s*."""
    vals = (rng.permutation(inc.n) + 1).tolist()
    star_pos = [i - 1 for i in inc.indices]
    pattern = [v - 1 for v in inc.sub_perm.values]
    star_vals = sorted(vals[p] for p in star_pos)
    for k, pos in enumerate(star_pos):
        vals[pos] = star_vals[pattern[k]]
    return Permutation(tuple(vals))
