"""Vector types, norms, and norming functionals.

Finitely supported sequences stand in for elements of l1(N); plain numpy
arrays stand in for R^m.  Direct sums of two normed components carry the
usual p-norms of the pair of component norms, and their norming functionals
are available in closed form for the l1 / l2 / linf component norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

NORM_TAGS = ("l1", "l2", "linf")


@dataclass(frozen=True)
class SparseSeq:
    """Finitely supported real sequence, indexed from 1.

    Indices are strictly increasing and no stored value is zero, so the
    l1 norm is a finite sum by construction.
    """

    indices: tuple
    values: tuple

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values must have equal length")
        prev = 0
        for k, v in zip(self.indices, self.values):
            if not (isinstance(k, (int, np.integer)) and k >= 1):
                raise ValueError(f"index {k!r} is not a positive integer")
            if k <= prev:
                raise ValueError("indices must be strictly increasing")
            if v == 0.0 or not math.isfinite(v):
                raise ValueError(f"value at index {k} must be finite and nonzero")
            prev = k

    @classmethod
    def from_pairs(cls, pairs: Iterable) -> "SparseSeq":
        """Build from (index, value) pairs, dropping exact zeros and sorting."""
        items = sorted((int(k), float(v)) for k, v in pairs if v != 0.0)
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items))

    @classmethod
    def zero(cls) -> "SparseSeq":
        return cls((), ())

    @property
    def support(self) -> tuple:
        return self.indices

    def __len__(self):
        return len(self.indices)

    def value_at(self, k: int) -> float:
        import bisect

        i = bisect.bisect_left(self.indices, k)
        if i < len(self.indices) and self.indices[i] == k:
            return self.values[i]
        return 0.0

    def values_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def to_dense(self, length: int) -> np.ndarray:
        """Dense prefix of the first ``length`` entries."""
        out = np.zeros(length)
        for k, v in zip(self.indices, self.values):
            if k <= length:
                out[k - 1] = v
        return out


VectorLike = Union[SparseSeq, np.ndarray]


def _as_values(v: VectorLike) -> np.ndarray:
    if isinstance(v, SparseSeq):
        return v.values_array()
    return np.asarray(v, dtype=float)


def l1_norm(v: VectorLike) -> float:
    """Sum of absolute entries; 0 for the empty sequence."""
    vals = _as_values(v)
    return float(np.sum(np.abs(vals))) if vals.size else 0.0


def sup_norm(v: VectorLike) -> float:
    """Largest absolute entry; 0 for the empty sequence."""
    vals = _as_values(v)
    return float(np.max(np.abs(vals))) if vals.size else 0.0


def l2_norm(v: VectorLike) -> float:
    vals = _as_values(v)
    return float(np.linalg.norm(vals)) if vals.size else 0.0


def sparse_diff_l2(a: SparseSeq, b: SparseSeq) -> float:
    """l2 distance between two finitely supported sequences."""
    keys = sorted(set(a.indices) | set(b.indices))
    diffs = [a.value_at(k) - b.value_at(k) for k in keys]
    return float(np.linalg.norm(diffs))


def norm_by_tag(v: VectorLike, tag: str) -> float:
    if tag == "l1":
        return l1_norm(v)
    if tag == "l2":
        return l2_norm(v)
    if tag == "linf":
        return sup_norm(v)
    raise ValueError(f"unknown norm tag {tag!r}; expected one of {NORM_TAGS}")


def holder_conjugate(p: float) -> float:
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def directsum_norm(a_val: float, b_val: float, p: float) -> float:
    """Norm of a pair with component norms ``a_val``, ``b_val``.

    Equals (a^p + b^p)^(1/p) for finite p >= 1 and max(a, b) for p = inf.
    """
    if not p >= 1:
        raise ValueError(f"p must satisfy p >= 1, got {p}")
    if a_val < 0 or b_val < 0:
        raise ValueError("component norms must be nonnegative")
    if math.isinf(p):
        return max(a_val, b_val)
    if p == 1:
        return a_val + b_val
    if a_val == 0.0 and b_val == 0.0:
        return 0.0
    # factor out the max to avoid overflow for large p
    big = max(a_val, b_val)
    return big * (abs(a_val / big) ** p + abs(b_val / big) ** p) ** (1.0 / p)


def norming_functional(v: np.ndarray, tag: str) -> np.ndarray:
    """Unit dual vector pairing to the norm of nonzero ``v``.

    l1 -> sign vector (sup-norm 1); l2 -> v / |v|_2; linf -> indicator of the
    first peak coordinate, signed (l1-norm 1).
    """
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise ValueError("norming functional of the zero vector is undefined")
    if tag == "l1":
        return np.sign(v)
    if tag == "l2":
        return v / np.linalg.norm(v)
    if tag == "linf":
        k = int(np.argmax(np.abs(v)))
        lam = np.zeros_like(v)
        lam[k] = math.copysign(1.0, v[k])
        return lam
    raise ValueError(f"unknown norm tag {tag!r}; expected one of {NORM_TAGS}")


def norming_functional_directsum(
    a: np.ndarray,
    b: np.ndarray,
    p: float,
    left: str = "l1",
    right: str = "l1",
):
    """Norming functional (lam, mu) of the pair (a, b) in the p direct sum.

    The pair satisfies <a, lam> + <b, mu> = directsum_norm(|a|, |b|, p) and has
    unit norm in the conjugate-exponent direct sum of the dual component norms.
    For finite p the component scalings are |a|^(p/p') / C^(1/p') with
    C = |a|^p + |b|^p; for p = inf the functional concentrates on a component
    of maximal norm.
    """
    if not p >= 1:
        raise ValueError(f"p must satisfy p >= 1, got {p}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na = norm_by_tag(a, left)
    nb = norm_by_tag(b, right)
    if na == 0.0 and nb == 0.0:
        raise ValueError("norming functional of (0, 0) is undefined")

    if math.isinf(p):
        # p' = 1: all dual weight goes to a component of maximal norm
        if na >= nb:
            return norming_functional(a, left), np.zeros_like(b)
        return np.zeros_like(a), norming_functional(b, right)

    if na == 0.0:
        return np.zeros_like(a), norming_functional(b, right)
    if nb == 0.0:
        return norming_functional(a, left), np.zeros_like(b)

    if p == 1:
        # p' = inf: both components normed at full unit weight
        return norming_functional(a, left), norming_functional(b, right)

    pp = holder_conjugate(p)
    c = na**p + nb**p
    scale_a = na ** (p / pp) / c ** (1.0 / pp)
    scale_b = nb ** (p / pp) / c ** (1.0 / pp)
    return scale_a * norming_functional(a, left), scale_b * norming_functional(b, right)
