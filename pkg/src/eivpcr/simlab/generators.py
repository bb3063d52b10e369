"""Seeded generators for the simulation studies.

Each generator draws latent (noiseless) covariates; ``corrupt`` adds
measurement noise and an observation mask as a separate, independently
seeded step. All functions are pure in (parameters, seed): calling twice
yields bit-identical arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ..core import MaskedMatrix
from ..errors import BadParam, BadShape
from ..synthetic_control import PanelDataset
from .streams import Role, substream


class Shift(IntEnum):
    """Test-side factor distributions for the covariate-shift study.

    N1 is standard normal, N2 normal with variance 5, U1 uniform on
    [-sqrt(3), sqrt(3)] (variance 1, matching N1), U2 uniform on
    [-sqrt(15), sqrt(15)] (variance 5, matching N2).
    """

    N1 = 0
    N2 = 1
    U1 = 2
    U2 = 3


_KINDS = (
    "prob_pca",
    "factor_uv",
    "factor_shift",
    "factor_rowspan_violation",
    "panel_ife",
)


@dataclass(frozen=True)
class GeneratorSpec:
    """A fully determined generator configuration, usable as a config id."""

    kind: str
    n: int
    m: int
    p: int
    r: int
    noise_sigma: float
    mask_rho: float
    seed: int
    shift: Shift | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise BadParam(f"kind must be one of {_KINDS}")
        if min(self.n, self.p, self.r) < 1 or self.m < 0:
            raise BadShape("n, p, r must be >= 1 and m >= 0")
        if self.r > min(self.n, self.p):
            raise BadShape(f"r={self.r} exceeds min(n, p)={min(self.n, self.p)}")
        if not math.isfinite(self.noise_sigma) or self.noise_sigma < 0:
            raise BadParam(f"noise_sigma={self.noise_sigma} must be >= 0")
        if not 0.0 < self.mask_rho <= 1.0:
            raise BadParam(f"mask_rho={self.mask_rho} outside (0, 1]")

    def label(self) -> str:
        parts = [
            self.kind,
            f"n{self.n}",
            f"m{self.m}",
            f"p{self.p}",
            f"r{self.r}",
            f"sig{self.noise_sigma:g}",
            f"rho{self.mask_rho:g}",
        ]
        if self.shift is not None:
            parts.append(self.shift.name)
        return "/".join(parts)


@dataclass(frozen=True)
class TrialData:
    """One assembled trial: latent matrices, model, responses, observations.

    ``beta_star`` is the projection of ``beta_raw`` onto the rowspan of
    ``x_train`` (the minimum-norm model the estimator can identify) and
    ``theta_test`` holds the true expected test responses ``x_test @
    beta_raw``. Test-side fields are None for identification-only trials.
    """

    x_train: np.ndarray
    beta_raw: np.ndarray
    beta_star: np.ndarray
    y: np.ndarray
    z_train: MaskedMatrix
    x_test: np.ndarray | None = None
    z_test: MaskedMatrix | None = None
    theta_test: np.ndarray | None = None


def gen_prob_pca(n: int, p: int, r: int, seed) -> np.ndarray:
    """Rank-r latent covariates X = X_r Q.

    X_r is n x r with standard normal entries; Q is r x p with entries
    drawn uniformly from {-1/sqrt(r), +1/sqrt(r)}.
    """
    _check_dims(n=n, p=p, r=r)
    rng = substream(seed, Role.LATENT)
    x_r = rng.standard_normal((n, r))
    q = rng.choice([-1.0, 1.0], size=(r, p)) / math.sqrt(r)
    return x_r @ q


def _draw_shifted_factors(rng, m: int, r: int, shift: Shift) -> np.ndarray:
    if shift == Shift.N1:
        return rng.standard_normal((m, r))
    if shift == Shift.N2:
        return math.sqrt(5.0) * rng.standard_normal((m, r))
    if shift == Shift.U1:
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=(m, r))
    if shift == Shift.U2:
        return rng.uniform(-math.sqrt(15.0), math.sqrt(15.0), size=(m, r))
    raise BadParam(f"unknown shift {shift!r}")


def gen_factor_uv(n: int, m: int, p: int, seed, shift: Shift = Shift.N1, r: int = 10):
    """Train/test latent pair sharing right factors.

    X = U V^T with U (n x r) and V (p x r) standard normal. The test matrix
    X' = U' V^T reuses V, with U' drawn per ``shift``, so the test rowspace
    is contained in the train rowspace by construction for every shift.

    Returns
    -------
    (x_train, x_test)
    """
    _check_dims(n=n, m=m, p=p, r=r)
    rng = substream(seed, Role.LATENT)
    u = rng.standard_normal((n, r))
    v = rng.standard_normal((p, r))
    u_test = _draw_shifted_factors(
        substream(seed, Role.LATENT_TEST, int(Shift(shift))), m, r, Shift(shift)
    )
    return u @ v.T, u_test @ v.T


def gen_rowspan_violation(n: int, m: int, p: int, seed, r: int = 10):
    """Train matrix plus one inclusion-preserving and one violating test set.

    x_test_ok = U' V^T shares the train right factors (U' normal with
    variance 5, a distribution shift). x_test_bad = U V'^T reuses the train
    left factors with fresh standard normal right factors: its marginal
    distribution matches the train matrix, but its rowspace is new. The
    shared-U construction requires n == m.

    Returns
    -------
    (x_train, x_test_ok, x_test_bad)
    """
    _check_dims(n=n, m=m, p=p, r=r)
    if n != m:
        raise BadShape(f"shared left factors require n == m, got {n} != {m}")
    rng = substream(seed, Role.LATENT)
    u = rng.standard_normal((n, r))
    v = rng.standard_normal((p, r))
    u_ok = math.sqrt(5.0) * substream(seed, Role.LATENT_TEST).standard_normal((m, r))
    v_bad = substream(seed, Role.LATENT_TEST_BAD).standard_normal((p, r))
    return u @ v.T, u_ok @ v.T, u @ v_bad.T


@dataclass(frozen=True)
class PanelTrial:
    """A generated panel with the latent ground truth needed for scoring."""

    panel: PanelDataset
    truth: np.ndarray          # expected counterfactual target trajectory (m,)
    weights: np.ndarray        # donor combination defining the target (p,)
    latent_donors: np.ndarray  # noiseless donor outcomes, (n + m) x p


def gen_panel_ife(n: int, m: int, p: int, r: int, sigma: float, seed) -> PanelTrial:
    """Interactive fixed-effects panel with a synthetic target unit.

    Donor outcomes are inner products of standard normal time and unit
    factors plus N(0, sigma^2) noise. The target is a fixed random linear
    combination of the donors' latent outcomes (weights scaled by
    1/sqrt(p)) plus noise of the same level. The returned truth is the
    target's noiseless post-treatment trajectory.
    """
    _check_dims(n=n, m=m, p=p, r=r)
    if m < 1:
        raise BadShape("need at least one post period")
    sigma = float(sigma)
    if not sigma >= 0:
        raise BadParam(f"sigma={sigma} must be >= 0")
    time_factors = substream(seed, Role.LATENT).standard_normal((n + m, r))
    unit_factors = substream(seed, Role.LATENT_TEST).standard_normal((p, r))
    latent = time_factors @ unit_factors.T
    weights = substream(seed, Role.WEIGHTS).standard_normal(p) / math.sqrt(p)
    target_latent = latent @ weights

    values = np.empty((n + m, p + 1))
    values[:, 1:] = latent
    values[:, 0] = target_latent
    if sigma > 0:
        values[:, 1:] += sigma * substream(seed, Role.NOISE).standard_normal((n + m, p))
        values[:, 0] += sigma * substream(seed, Role.RESPONSE_NOISE).standard_normal(n + m)
    labels = ("target",) + tuple(f"donor{j}" for j in range(1, p + 1))
    panel = PanelDataset(
        outcomes=MaskedMatrix.from_dense(values, col_labels=labels),
        target_col=0,
        pre_periods=n,
        unit_labels=labels,
    )
    return PanelTrial(
        panel=panel,
        truth=target_latent[n:].copy(),
        weights=weights,
        latent_donors=latent,
    )


def corrupt(x, sigma: float, rho: float, seed) -> MaskedMatrix:
    """Additive N(0, sigma^2) noise followed by Bernoulli(rho) observation.

    ``sigma`` is a standard deviation. With sigma 0 and rho 1 the output
    holds the input bits unchanged, fully observed.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise BadShape("corrupt expects a matrix")
    sigma = float(sigma)
    rho = float(rho)
    if not math.isfinite(sigma) or sigma < 0:
        raise BadParam(f"sigma={sigma} must be >= 0")
    if not 0.0 < rho <= 1.0:
        raise BadParam(f"rho={rho} outside (0, 1]")
    values = x
    if sigma > 0:
        values = x + sigma * substream(seed, Role.NOISE).standard_normal(x.shape)
    if rho < 1.0:
        mask = substream(seed, Role.MASK).random(x.shape) < rho
    else:
        mask = np.ones(x.shape, dtype=bool)
    return MaskedMatrix.from_dense(values, mask=mask)


def _check_dims(**dims):
    for name, value in dims.items():
        if int(value) < 1:
            raise BadShape(f"{name}={value} must be >= 1")
    if "r" in dims:
        r = int(dims["r"])
        upper = min(int(dims[k]) for k in ("n", "p") if k in dims)
        if r > upper:
            raise BadShape(f"r={r} exceeds min(n, p)={upper}")
