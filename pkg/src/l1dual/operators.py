"""Measurement operators with closed-form rows decaying in c0(N).

A row family holds m sequences a_j = (a_{j,k} : k >= 1) together with a
nonincreasing envelope dominating |a_{j,k}|.  The envelope is what makes the
sup norm of an infinite combination sum_j lam_j a_j computable: scanning a
prefix and bounding the tail by |lam|_1 * envelope certifies the maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .norms import SparseSeq


class CertificationError(RuntimeError):
    """Envelope failed to certify a sup norm within the scan budget."""


class RowFamily:
    """Base class: m rows of a semi-infinite matrix, evaluated by closed form.

    Subclasses implement ``columns`` (the ground truth, vectorized over k)
    and ``envelope_block``.  ``row_eval`` is derived from ``columns`` so that
    scalar and vectorized evaluation agree bit for bit.
    """

    m: int

    def columns(self, ks: np.ndarray) -> np.ndarray:
        """Dense (m, len(ks)) block of columns at 1-based indices ``ks``."""
        raise NotImplementedError

    def envelope_block(self, ks: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def block(self, k0: int, k1: int) -> np.ndarray:
        """Columns k0..k1 inclusive."""
        return self.columns(np.arange(k0, k1 + 1))

    def column(self, k: int) -> np.ndarray:
        return self.columns(np.asarray([k]))[:, 0]

    def row_eval(self, j: int, k: int) -> float:
        if not 1 <= j <= self.m:
            raise ValueError(f"row index {j} outside 1..{self.m}")
        return float(self.column(k)[j - 1])

    def envelope(self, k: int) -> float:
        return float(self.envelope_block(np.asarray([k]))[0])


class TrigRowFamily(RowFamily):
    """Rows cos(j*k)/k for j <= m/2 and sin(j*k)/k above, envelope 1/k."""

    def __init__(self, m: int):
        if m <= 0 or m % 2 != 0:
            raise ValueError(f"m must be a positive even integer, got {m}")
        self.m = m

    def columns(self, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        half = self.m // 2
        j = np.arange(1, half + 1, dtype=np.int64)
        phase = np.multiply.outer(j, ks).astype(float)
        inv_k = 1.0 / ks.astype(float)
        return np.vstack([np.cos(phase) * inv_k, np.sin(phase) * inv_k])

    def envelope_block(self, ks: np.ndarray) -> np.ndarray:
        return 1.0 / np.asarray(ks, dtype=float)


class CoordinateRowFamily(RowFamily):
    """Rows a_j = e_j: sampling the first m coordinates."""

    def __init__(self, m: int):
        if m <= 0:
            raise ValueError("m must be positive")
        self.m = m

    def columns(self, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        out = np.zeros((self.m, ks.size))
        for col, k in enumerate(ks):
            if 1 <= k <= self.m:
                out[k - 1, col] = 1.0
        return out

    def envelope_block(self, ks: np.ndarray) -> np.ndarray:
        return np.where(np.asarray(ks) <= self.m, 1.0, 0.0).astype(float)


class GeometricRowFamily(RowFamily):
    """Rows (r/j)^... scaled r^k decays; handy single-peak test operator.

    Row j is 0.5 * r^k / j, except at an optional per-row peak index where the
    entry is 1.  Distinct 1/j scalings keep the rows linearly independent.
    """

    def __init__(self, m: int, ratio: float = 0.5, peaks=None):
        if not 0 < ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")
        self.m = m
        self.ratio = ratio
        self.peaks = tuple(int(p) for p in peaks) if peaks is not None else tuple()

    def columns(self, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        base = self.ratio ** ks.astype(float)
        out = np.vstack([0.5 * base / j for j in range(1, self.m + 1)])
        for j, peak in enumerate(self.peaks):
            out[j, :] = np.where(ks == peak, 1.0, out[j, :])
        return out

    def envelope_block(self, ks: np.ndarray) -> np.ndarray:
        base = self.ratio ** np.asarray(ks, dtype=float)
        if not self.peaks:
            return 0.5 * base
        last = max(self.peaks)
        return np.where(np.asarray(ks) <= last, 1.0, 0.5 * base)


GENERATORS = {
    "trig": lambda params: TrigRowFamily(int(params["m"])),
    "coordinate": lambda params: CoordinateRowFamily(int(params["m"])),
    "geometric": lambda params: GeometricRowFamily(
        int(params["m"]),
        float(params.get("ratio", 0.5)),
        params.get("peaks"),
    ),
}


def rows_from_spec(spec: dict) -> RowFamily:
    """Build a row family from a manifest entry naming a built-in generator."""
    name = spec.get("generator", "trig")
    if name not in GENERATORS:
        raise ValueError(f"unknown generator {name!r}; known: {sorted(GENERATORS)}")
    return GENERATORS[name](spec)


def apply_A(rows: RowFamily, x: SparseSeq) -> np.ndarray:
    """Image of a finitely supported sequence: component j is sum_k a_{j,k} x_k."""
    if len(x) == 0:
        return np.zeros(rows.m)
    cols = rows.columns(np.asarray(x.indices, dtype=np.int64))
    return cols @ x.values_array()


def apply_Astar_prefix(rows: RowFamily, lam: np.ndarray, K: int) -> np.ndarray:
    """First K entries of sum_j lam_j a_j."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (rows.m,):
        raise ValueError(f"lam must have length m={rows.m}")
    if K < 1:
        raise ValueError("K must be a positive integer")
    return lam @ rows.block(1, K)


class CertifiedSup:
    """Certified sup norm of sum_j lam_j a_j with the scanned prefix retained.

    ``tail_bound`` dominates every entry beyond ``k_cert``; ``ensure_band``
    extends the scan so the tail also clears a looser membership band.
    """

    def __init__(self, rows, lam, rel_tol, k_max):
        self.rows = rows
        self.lam = np.asarray(lam, dtype=float)
        self.rel_tol = float(rel_tol)
        self.k_max = int(k_max)
        self.lam_l1 = float(np.sum(np.abs(self.lam)))
        self.prefix = np.empty(0)
        self.value = 0.0
        self.k_cert = 0
        self.tail_bound = math.inf

    @property
    def argmax(self):
        band = self.value * (1.0 - self.rel_tol)
        return [int(k) + 1 for k in np.nonzero(np.abs(self.prefix) >= band)[0]]

    def _scan(self, stop_band: float):
        """Extend the prefix until the envelope tail drops below the band."""
        block = 256
        while self.tail_bound >= self.value * (1.0 - stop_band):
            k0 = self.prefix.size + 1
            k1 = min(k0 + block - 1, self.k_max)
            if k0 > k1:
                raise CertificationError(
                    f"envelope never certified the sup norm within k_max={self.k_max}; "
                    "the declared envelope is too weak for this lam"
                )
            ks = np.arange(k0, k1 + 1)
            vals = self.lam @ self.rows.columns(ks)
            self.prefix = np.concatenate([self.prefix, vals])
            env_next = self.rows.envelope_block(ks + 1) * self.lam_l1
            run_max = np.maximum.accumulate(np.abs(self.prefix))[k0 - 1 :]
            ok = env_next < run_max * (1.0 - stop_band)
            if np.any(ok):
                stop = k0 + int(np.argmax(ok))
                self.k_cert = stop
                self.value = float(run_max[stop - k0])
                self.tail_bound = float(env_next[stop - k0])
                return
            block = min(block * 2, 1 << 20)
        # already certified

    def ensure_band(self, band: float):
        """Certify that no tail entry can reach value * (1 - band)."""
        if self.tail_bound >= self.value * (1.0 - band):
            self._scan(band)
            # scanning may have raised the value; keep prefix through k_cert only
            self.prefix = self.prefix[: self.k_cert]

    def prefix_seq(self) -> SparseSeq:
        return SparseSeq.from_pairs(
            (k + 1, v) for k, v in enumerate(self.prefix) if v != 0.0
        )


def sup_norm_certified(
    rows: RowFamily, lam: np.ndarray, rel_tol: float = 1e-9, k_max: int = 10**7
) -> CertifiedSup:
    """Sup norm of sum_j lam_j a_j, certified by the envelope tail bound.

    Scans prefixes and stops at the first k_cert whose tail bound
    |lam|_1 * envelope(k_cert + 1) falls below value * (1 - rel_tol), which
    guarantees no later index can exceed the reported maximum band.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (rows.m,):
        raise ValueError(f"lam must have length m={rows.m}")
    if not np.any(lam):
        raise ValueError("sup_norm_certified requires lam != 0")
    cert = CertifiedSup(rows, lam, rel_tol, k_max)
    cert._scan(rel_tol)
    cert.prefix = cert.prefix[: cert.k_cert]
    return cert


def peak_set(cert: CertifiedSup, rel_tol_support: float = 1e-6) -> list:
    """Indices where the combination attains its sup norm, up to a band.

    Membership uses |entry| >= value * (1 - rel_tol_support); the scan is
    extended if needed so that the envelope excludes every unscanned index
    from the band, making the returned set provably complete.
    """
    if cert.value <= 0.0:
        raise ValueError("peak_set requires a positive certified sup norm")
    cert.ensure_band(rel_tol_support)
    band = cert.value * (1.0 - rel_tol_support)
    return [int(k) + 1 for k in np.nonzero(np.abs(cert.prefix) >= band)[0]]


@dataclass(frozen=True)
class TruncatedMatrix:
    """Dense m x n matrix of the columns at a finite index set."""

    columns_index: tuple
    data: np.ndarray

    @property
    def shape(self):
        return self.data.shape


def truncate_matrix(rows: RowFamily, N) -> TruncatedMatrix:
    """Restrict the semi-infinite matrix to the columns listed in ``N``."""
    idx = [int(k) for k in N]
    if not idx:
        raise ValueError("column index set must be nonempty")
    if any(b <= a for a, b in zip(idx, idx[1:])) or idx[0] < 1:
        raise ValueError("column indices must be ascending positive integers")
    data = rows.columns(np.asarray(idx, dtype=np.int64))
    return TruncatedMatrix(tuple(idx), data)
