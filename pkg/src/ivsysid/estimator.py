"""Clipped instrumental-variables estimator and least-squares baseline.

The IV estimator inverts clip(Z'X) rather than Z'X itself: raising every
singular value to at least lambda bounds the inverse by 1/lambda, so a single
badly excited direction cannot blow up the estimate. Under persistence of
excitation (sigma_min(Z'X) > lambda) the clip is inactive and the estimator
is the plain method-of-moments solution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .splitfilters import DesignMatrices


class SingularDesignError(ValueError):
    """X is numerically rank deficient; carries the offending sigma_min."""

    def __init__(self, sigma_min: float):
        self.sigma_min = sigma_min
        super().__init__(f"regressor matrix is rank deficient (sigma_min={sigma_min:.3e})")


@dataclass(frozen=True)
class IvConfig:
    """Estimator hyperparameters.

    lam is the clipping floor applied to the singular values of Z'X. mu is
    the instrument truncation level; it acts upstream (rho_truncate inside
    assemble_design) and is carried here for provenance only.
    """

    lam: float
    mu: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")


@dataclass(frozen=True)
class Estimate:
    """A solved parameter matrix with excitation diagnostics.

    sigma_min_zx is the smallest singular value of the normal matrix that was
    inverted (Z'X for IV, X'X for LS) before any clipping;
    clipped_directions counts singular values raised to the floor (always 0
    for LS); condition_number is that of the inverted matrix (after clipping,
    for IV).
    """

    theta: np.ndarray
    sigma_min_zx: float
    clipped_directions: int
    method: Literal["iv", "ls"]
    condition_number: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("estimate contains non-finite entries")


def clip_singular_values(A: np.ndarray, lam: float) -> np.ndarray:
    """Raise every singular value of A to at least lam.

    The singular vectors are untouched, so ||A - clip(A)|| <= lam and the
    result satisfies sigma_min >= lam, hence ||clip(A)^-1|| <= 1/lam.
    """
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam}")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return (U * np.maximum(s, lam)) @ Vt


def iv_estimate(design: DesignMatrices, config: IvConfig) -> Estimate:
    """Instrumental-variables solve: theta = clip(Z'X)^-1 Z'Y.

    Args:
        design: assembled regression triplet.
        config: clipping floor and (recorded) truncation level.

    Returns:
        Estimate with method "iv". Deterministic given inputs.
    """
    X, Y, Z = design.X, design.Y, design.Z
    if X.shape != Z.shape or X.shape[0] != Y.shape[0]:
        raise ValueError(
            f"inconsistent design shapes X{X.shape}, Y{Y.shape}, Z{Z.shape}"
        )
    M = Z.T @ X
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    clipped = np.maximum(s, config.lam)
    theta = Vt.T @ ((U.T @ (Z.T @ Y)) / clipped[:, None])
    return Estimate(
        theta=theta,
        sigma_min_zx=float(s[-1]),
        clipped_directions=int(np.sum(s < config.lam)),
        method="iv",
        condition_number=float(clipped[0] / clipped[-1]),
    )


def ls_estimate(design: DesignMatrices) -> Estimate:
    """Ordinary least squares baseline via orthogonal factorization.

    Solves min ||X theta - Y||_F with an SVD-based solve rather than the
    normal equations.

    Raises:
        SingularDesignError: X numerically rank deficient.
    """
    X, Y = design.X, design.Y
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"inconsistent design shapes X{X.shape}, Y{Y.shape}")
    theta, _, rank, sv = np.linalg.lstsq(X, Y, rcond=None)
    if rank < X.shape[1]:
        raise SingularDesignError(float(sv[-1]))
    return Estimate(
        theta=theta,
        sigma_min_zx=float(sv[-1] ** 2),
        clipped_directions=0,
        method="ls",
        condition_number=float(sv[0] / sv[-1]),
    )


def excitation_check(design: DesignMatrices, lam: float) -> dict:
    """Plug-in persistence-of-excitation diagnostic.

    The identifiability condition lower-bounds sigma_min of E[Z'X]; the
    expectation is unobservable, so this reports the empirical sigma_min(Z'X)
    and whether it clears the clipping floor lam.
    """
    s = np.linalg.svd(design.Z.T @ design.X, compute_uv=False)
    sigma_min = float(s[-1])
    return {
        "sigma_min": sigma_min,
        "satisfied": bool(sigma_min > lam),
        "margin": sigma_min - lam,
    }
