"""Dense matrix substrate: masked matrices, deterministic SVD, truncation.

All values are immutable after construction (arrays are marked read-only), so
every object in this module is safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllMissing,
    BadShape,
    NoConverge,
    NonFinite,
    RankOutOfRange,
    ShapeMismatch,
)


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class MaskedMatrix:
    """A real matrix with an explicit observed/missing mask.

    ``mask`` is authoritative: a cell is data if and only if its mask entry is
    True. Missing cells hold NaN as a sentinel so that accidental reads are
    detected, but the sentinel is never compared or interpreted as a value.

    Parameters
    ----------
    values : ndarray, shape (rows, cols)
        Cell values; entries at unobserved positions are overwritten with NaN.
    mask : ndarray of bool, shape (rows, cols)
        True where the cell is observed.
    col_labels : tuple of str, optional
        Column names carried through CSV round trips.
    """

    values: np.ndarray
    mask: np.ndarray
    col_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim != 2 or mask.ndim != 2:
            raise BadShape("values and mask must be 2-dimensional")
        if values.shape != mask.shape:
            raise BadShape(
                f"values shape {values.shape} != mask shape {mask.shape}"
            )
        if not np.all(np.isfinite(values[mask])):
            raise NonFinite("observed cells must be finite")
        values = values.copy()
        values[~mask] = np.nan
        values.flags.writeable = False
        mask = mask.copy()
        mask.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        if self.col_labels is not None:
            labels = tuple(str(c) for c in self.col_labels)
            if len(labels) != values.shape[1]:
                raise BadShape(
                    f"{len(labels)} column labels for {values.shape[1]} columns"
                )
            object.__setattr__(self, "col_labels", labels)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def observed_count(self) -> int:
        return int(np.count_nonzero(self.mask))

    def zero_filled(self) -> np.ndarray:
        """The matrix with every unobserved cell replaced by exactly 0."""
        out = np.where(self.mask, self.values, 0.0)
        out.flags.writeable = False
        return out

    @classmethod
    def from_dense(cls, values, mask=None, col_labels=None) -> "MaskedMatrix":
        """Build from a dense array, fully observed unless a mask is given."""
        values = np.asarray(values, dtype=float)
        if mask is None:
            mask = np.ones(values.shape, dtype=bool)
        return cls(values=values, mask=mask, col_labels=col_labels)

    @classmethod
    def from_values_with_nan(cls, values, col_labels=None) -> "MaskedMatrix":
        """Build from a dense array where NaN marks the missing cells."""
        values = np.asarray(values, dtype=float)
        return cls(values=values, mask=~np.isnan(values), col_labels=col_labels)


@dataclass(frozen=True)
class RescaledDesign:
    """A masked matrix together with its observed fraction and rescaling.

    ``rescaled`` is the zero-filled view divided elementwise by ``rho_hat``.
    """

    source: MaskedMatrix
    rho_hat: float
    rescaled: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "rescaled", _frozen(self.rescaled))


def estimate_rho(m: MaskedMatrix) -> float:
    """Fraction of observed cells, over the whole matrix.

    Raises AllMissing when nothing is observed; downstream division by the
    estimate must stay defined.
    """
    total = m.rows * m.cols
    observed = m.observed_count
    if total == 0 or observed == 0:
        raise AllMissing("no observed cells")
    return observed / total


def rescale(m: MaskedMatrix) -> RescaledDesign:
    """Zero-fill the missing cells and divide by the observed fraction."""
    rho_hat = estimate_rho(m)
    return RescaledDesign(source=m, rho_hat=rho_hat, rescaled=m.zero_filled() / rho_hat)


@dataclass(frozen=True)
class SvdFactors:
    """Singular values and vectors under a fixed sign convention.

    ``singular_values`` is nonincreasing with length q = min(rows, cols);
    ``left_vectors`` is rows x q and ``right_vectors`` cols x q, both with
    orthonormal columns. In each left vector the entry of largest absolute
    value is nonnegative (ties broken by lowest index); the paired right
    vector is flipped jointly, so the reconstruction is unchanged.
    """

    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray

    def __post_init__(self):
        s = _frozen(self.singular_values)
        u = _frozen(self.left_vectors)
        v = _frozen(self.right_vectors)
        if s.ndim != 1 or u.ndim != 2 or v.ndim != 2:
            raise BadShape("factors must be (q,), (rows, q), (cols, q)")
        if u.shape[1] != s.shape[0] or v.shape[1] != s.shape[0]:
            raise BadShape("factor column counts must match len(singular_values)")
        if s.shape[0] and (np.any(s < 0) or np.any(np.diff(s) > 0)):
            raise BadShape("singular values must be nonincreasing and nonnegative")
        object.__setattr__(self, "singular_values", s)
        object.__setattr__(self, "left_vectors", u)
        object.__setattr__(self, "right_vectors", v)

    @property
    def rank_bound(self) -> int:
        return int(self.singular_values.shape[0])


def _apply_sign_convention(u: np.ndarray, vt: np.ndarray):
    # argmax on |column| returns the lowest index among ties
    for j in range(u.shape[1]):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0:
            u[:, j] = -u[:, j]
            vt[j, :] = -vt[j, :]


def svd(m) -> SvdFactors:
    """Thin SVD of a dense matrix with deterministic output.

    Delegates the factorization to LAPACK and then enforces the sign
    convention, so identical input bits give identical output bits.

    Raises
    ------
    NonFinite
        If any entry is NaN or infinite.
    NoConverge
        If the iteration fails; never silently truncated.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise BadShape("svd expects a 2-dimensional matrix")
    if not np.all(np.isfinite(m)):
        raise NonFinite("matrix entries must be finite")
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NoConverge(str(exc)) from exc
    u = u.copy()
    vt = vt.copy()
    _apply_sign_convention(u, vt)
    return SvdFactors(singular_values=s, left_vectors=u, right_vectors=vt.T)


def truncate_rank(f: SvdFactors, k: int) -> np.ndarray:
    """Best rank-k approximation rebuilt from the top k triplets.

    Ties in the spectrum are resolved by stored order: the first k triplets
    are kept as they appear in ``f``.
    """
    if not 1 <= int(k) <= f.rank_bound:
        raise RankOutOfRange(f"k={k} outside [1, {f.rank_bound}]")
    k = int(k)
    return (f.left_vectors[:, :k] * f.singular_values[:k]) @ f.right_vectors[:, :k].T


def spectral_norm(m) -> float:
    """Largest singular value; 0.0 for an empty matrix."""
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise NonFinite("matrix entries must be finite")
    if m.size == 0:
        return 0.0
    return float(np.linalg.svd(m, compute_uv=False)[0])


def projector_distance(a, b) -> float:
    """Spectral distance between the column spans of two orthonormal bases.

    Computes ||a a^T - b b^T||_2 via an SVD of the difference. Inputs must
    share a row count; columns are assumed orthonormal.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2:
        raise BadShape("bases must be 2-dimensional")
    if a.shape[0] != b.shape[0]:
        raise ShapeMismatch(f"row counts differ: {a.shape[0]} vs {b.shape[0]}")
    return spectral_norm(a @ a.T - b @ b.T)
