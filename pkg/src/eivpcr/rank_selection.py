"""Heuristics for choosing the number of retained principal components."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllZero, BadParam, EmptySpectrum

_METHODS = ("known", "largest_gap", "energy_threshold")

# relative regularizer keeping the gap ratio defined at an exact-rank boundary
_GAP_EPS = 1e-12


def _as_spectrum(s) -> np.ndarray:
    s = np.asarray(s, dtype=float).ravel()
    if s.size == 0:
        raise EmptySpectrum("empty spectrum")
    if s[0] <= 0:
        raise AllZero("spectrum has no positive mass")
    return s


def gap_ratios(s) -> np.ndarray:
    """Consecutive ratios s_i / (s_{i+1} + eps), length len(s) - 1."""
    s = _as_spectrum(s)
    eps = _GAP_EPS * s[0]
    return s[:-1] / (s[1:] + eps)


def select_rank_largest_gap(s, k_max: int) -> int:
    """Index of the largest consecutive spectral gap, searched in [1, k_max].

    Ties break toward the smallest index. The ratio denominator carries a
    small relative regularizer so exact-rank spectra (trailing zeros) stay
    well defined.
    """
    s = _as_spectrum(s)
    if s.size < 2:
        raise EmptySpectrum("need at least two singular values")
    if not 1 <= int(k_max) <= s.size - 1:
        raise BadParam(f"k_max={k_max} outside [1, {s.size - 1}]")
    ratios = gap_ratios(s)[: int(k_max)]
    return int(np.argmax(ratios)) + 1


def select_rank_energy(s, fraction: float) -> int:
    """Smallest k whose leading squared singular values reach the fraction."""
    s = _as_spectrum(s)
    fraction = float(fraction)
    if not 0.0 < fraction < 1.0:
        raise BadParam(f"fraction={fraction} outside (0, 1)")
    energy = np.cumsum(s**2)
    return int(np.argmax(energy >= fraction * energy[-1])) + 1


@dataclass(frozen=True)
class SpectrumReport:
    """A spectrum, its consecutive gap ratios, and the chosen rank."""

    singular_values: np.ndarray
    gaps: np.ndarray
    chosen_k: int
    method: str

    def __post_init__(self):
        if self.method not in _METHODS:
            raise BadParam(f"method must be one of {_METHODS}")
        if self.chosen_k < 1:
            raise BadParam("chosen_k must be >= 1")
        s = np.asarray(self.singular_values, dtype=float)
        g = np.asarray(self.gaps, dtype=float)
        if g.size != max(s.size - 1, 0):
            raise BadParam("gaps length must be len(singular_values) - 1")
        object.__setattr__(self, "singular_values", s)
        object.__setattr__(self, "gaps", g)


def spectrum_report(s, *, k=None, k_max=None, energy_fraction=None) -> SpectrumReport:
    """Bundle a spectrum with a rank choice.

    Exactly one selection route applies: a user-supplied ``k`` (method
    "known"), an ``energy_fraction`` (method "energy_threshold"), or the
    largest-gap search up to ``k_max`` (the default route).
    """
    s = _as_spectrum(s)
    given = sum(x is not None for x in (k, energy_fraction))
    if given > 1:
        raise BadParam("pass at most one of k / energy_fraction")
    if k is not None:
        if not 1 <= int(k) <= s.size:
            raise BadParam(f"k={k} outside [1, {s.size}]")
        chosen, method = int(k), "known"
    elif energy_fraction is not None:
        chosen, method = select_rank_energy(s, energy_fraction), "energy_threshold"
    else:
        if k_max is None:
            k_max = s.size - 1
        chosen, method = select_rank_largest_gap(s, k_max), "largest_gap"
    gaps = gap_ratios(s) if s.size > 1 else np.empty(0)
    return SpectrumReport(singular_values=s, gaps=gaps, chosen_k=chosen, method=method)
