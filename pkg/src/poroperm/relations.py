"""Closed-form porosity and permeability closures.

Two permeability-porosity relations are provided as sklearn-style
transformers: the Kozeny-Carman law and a piecewise-linear closure with a
percolation threshold porosity below which the permeability vanishes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

KOZENY_CARMAN_FACTOR = 180.0


class RelationParameterError(ValueError):
    """Invalid closure parameters."""


def porosity_from_dilatation(div_u, theta0: float):
    """theta = 1 - (1 - theta0) * exp(-div u).

    Strictly increasing in the dilatation; values <= 0 signal a degenerate,
    fully compacted state and are returned as-is for the caller to flag.
    """
    if not 0.0 < theta0 < 1.0:
        raise RelationParameterError("theta0 must lie in (0, 1)")
    return 1.0 - (1.0 - theta0) * np.exp(-np.asarray(div_u, dtype=float))


def dilatation_from_porosity(theta, theta0: float):
    """Inverse of :func:`porosity_from_dilatation`."""
    if not 0.0 < theta0 < 1.0:
        raise RelationParameterError("theta0 must lie in (0, 1)")
    return -np.log((1.0 - np.asarray(theta, dtype=float)) / (1.0 - theta0))


def kozeny_carman(theta, d_s: float):
    """kappa = d_s^2 / 180 * theta^3 / (1 - theta)^2 for theta in [0, 1).

    Negative porosities (degenerate compaction) map to zero permeability.
    """
    if d_s <= 0:
        raise RelationParameterError("grain size d_s must be positive")
    theta = np.asarray(theta, dtype=float)
    if np.any(theta >= 1.0):
        raise RelationParameterError("Kozeny-Carman is undefined for theta >= 1")
    t = np.clip(theta, 0.0, None)
    return (d_s**2 / KOZENY_CARMAN_FACTOR) * t**3 / (1.0 - t) ** 2


def network_inspired(theta, theta0: float, theta_hat: float, kappa0: float):
    """Linear ramp from zero at the threshold porosity up to kappa0 at theta0."""
    if not 0.0 <= theta_hat < theta0:
        raise RelationParameterError("requires 0 <= theta_hat < theta0")
    if kappa0 <= 0:
        raise RelationParameterError("kappa0 must be positive")
    theta = np.asarray(theta, dtype=float)
    ramp = kappa0 * (theta - theta_hat) / (theta0 - theta_hat)
    return np.where(theta < theta_hat, 0.0, ramp)


class PermeabilityRelation(BaseEstimator, TransformerMixin):
    """Base transformer: ``transform`` maps porosity to permeability (m^2)."""

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        raise NotImplementedError

    def __call__(self, theta):
        return self.transform(theta)

    @property
    def kappa0(self) -> float:
        """Permeability at the reference porosity, used for normalization."""
        raise NotImplementedError


class KozenyCarman(PermeabilityRelation):
    """Kozeny-Carman closure for grain size ``d_s`` and initial porosity ``theta0``."""

    name = "kozeny-carman"

    def __init__(self, d_s: float = 0.2e-3, theta0: float = 0.4):
        self.d_s = d_s
        self.theta0 = theta0

    def transform(self, X):
        return kozeny_carman(X, self.d_s)

    @property
    def kappa0(self) -> float:
        return float(kozeny_carman(self.theta0, self.d_s))


class NetworkInspired(PermeabilityRelation):
    """Threshold closure; kappa0 defaults to the Kozeny-Carman value at theta0.

    The threshold porosity is ``p_c * theta0``.
    """

    name = "network-inspired"

    def __init__(self, p_c: float, theta0: float = 0.4, d_s: float = 0.2e-3,
                 kappa0: float | None = None):
        self.p_c = p_c
        self.theta0 = theta0
        self.d_s = d_s
        self._explicit_kappa0 = kappa0

    def _validate(self):
        if not 0.0 <= self.p_c < 1.0:
            raise RelationParameterError("p_c must lie in [0, 1)")

    @property
    def theta_hat(self) -> float:
        return self.p_c * self.theta0

    @property
    def kappa0(self) -> float:
        if self._explicit_kappa0 is not None:
            return self._explicit_kappa0
        return float(kozeny_carman(self.theta0, self.d_s))

    def transform(self, X):
        self._validate()
        return network_inspired(X, self.theta0, self.theta_hat, self.kappa0)


def export_curve(relation: PermeabilityRelation, theta_grid) -> np.ndarray:
    """Normalized (theta/theta0, kappa/kappa0) samples of a closure."""
    theta = np.asarray(theta_grid, dtype=float)
    if np.any(theta <= 0) or np.any(theta > relation.theta0):
        raise RelationParameterError("theta grid must lie within (0, theta0]")
    kappa = relation.transform(theta)
    return np.column_stack([theta / relation.theta0, kappa / relation.kappa0])
