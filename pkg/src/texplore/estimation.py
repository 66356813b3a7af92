"""Regularized least squares, self-normalized confidence sets, and goal tests.

The regularized estimate and its excitation summary feed two consumers: the
high-probability ellipsoid around theta_hat (confidence radius from the
self-normalized martingale bound) and the data-sufficiency checks that decide
whether a dataset certifies the target accuracy D_des.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DataError, DimensionError, DomainError
from .linmodel import ParameterVector, RegressorMatrix, kron_weighted_sqnorm


@dataclass(frozen=True)
class Excitation:
    """Excitation summary of a dataset under ridge regularization.

    Attributes
    ----------
    D_T : ndarray, shape (n_phi, n_phi)
        Regressor Gram matrix Phi Phi^T.
    Dbar_T_logdet : float
        log det of the regularized information matrix
        (D_T kron I_nx) + lam I, equal to n_x * log det(D_T + lam I_nphi).
    lam : float
        Ridge weight lambda > 0.
    n_x : int
        State dimension behind the Kronecker lift.
    """

    D_T: np.ndarray
    Dbar_T_logdet: float
    lam: float
    n_x: int

    @property
    def n_phi(self) -> int:
        return self.D_T.shape[0]

    @property
    def n_theta(self) -> int:
        return self.n_x * self.n_phi

    def regularized(self) -> np.ndarray:
        """Return D_T + lam I_nphi."""
        return self.D_T + self.lam * np.eye(self.n_phi)


def _logdet_spd(M: np.ndarray) -> float:
    c, low = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
    return 2.0 * float(np.sum(np.log(np.diag(c))))


def excitation_from_gram(D_T: np.ndarray, lam: float, n_x: int) -> Excitation:
    """Assemble an Excitation record from a Gram matrix."""
    D_T = np.asarray(D_T, dtype=float)
    if lam <= 0.0 or not np.isfinite(lam):
        raise DomainError(f"lam must be finite and > 0, got {lam}")
    if D_T.ndim != 2 or D_T.shape[0] != D_T.shape[1]:
        raise DimensionError(f"D_T must be square, got shape {D_T.shape}")
    if not np.all(np.isfinite(D_T)):
        raise DataError("D_T contains non-finite entries")
    D_T = 0.5 * (D_T + D_T.T)
    logdet = n_x * _logdet_spd(D_T + lam * np.eye(D_T.shape[0]))
    return Excitation(D_T, logdet, float(lam), int(n_x))


def rls_estimate(
    phi: RegressorMatrix, X: np.ndarray, lam: float
) -> tuple[ParameterVector, Excitation]:
    """Ridge-regularized least squares for theta = vec([A, B]).

    Solves min_theta ||X_+ - (Phi^T kron I) theta||^2 + lam ||theta||^2 using
    the Kronecker structure: one (n_phi, n_phi) SPD solve shared across the
    n_x state coordinates instead of an (n_theta, n_theta) system.

    Parameters
    ----------
    phi : RegressorMatrix
        Regressors phi_0 .. phi_{T-1}.
    X : ndarray, shape (T, n_x)
        Successor states x_1 .. x_T row by row.
    lam : float
        Ridge weight lambda > 0.

    Returns
    -------
    (ParameterVector, Excitation)
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n_x = phi.n_x
    if X.shape != (phi.T, n_x):
        raise DimensionError(f"X must have shape ({phi.T}, {n_x}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError("X contains non-finite entries")

    exc = excitation_from_gram(phi.gram(), lam, n_x)
    if phi.T == 0:
        theta = np.zeros(n_x * phi.n_phi)
    else:
        # [A_hat, B_hat] = X^T Phi^T (D_T + lam I)^{-1}, assembled column-major.
        rhs = phi.Phi @ X
        c = scipy.linalg.cho_factor(exc.regularized(), lower=True, check_finite=False)
        Z = scipy.linalg.cho_solve(c, rhs, check_finite=False)
        theta = Z.T.flatten(order="F")
    pv = ParameterVector(theta, n_x, phi.n_u)
    return pv, exc


def constant_C1(sigma_w: float, delta: float, lam: float, n_x: int, n_theta: int) -> float:
    """Excitation-independent part of the squared confidence radius bound.

    C1 = 4 sigma_w^2 (log(5^{2 n_x} / delta^2) - n_theta log lam).
    """
    if not (0.0 < delta < 1.0):
        raise DomainError(f"delta must be in (0, 1), got {delta}")
    if lam <= 0.0:
        raise DomainError(f"lam must be > 0, got {lam}")
    if sigma_w < 0.0:
        raise DomainError(f"sigma_w must be >= 0, got {sigma_w}")
    return 4.0 * sigma_w**2 * (
        2.0 * n_x * np.log(5.0) - 2.0 * np.log(delta) - n_theta * np.log(lam)
    )


def radius_R(exc: Excitation, sigma_w: float, delta: float, n_x: int | None = None) -> float:
    """Squared self-normalized confidence radius.

    R = 8 sigma_w^2 log(5^{n_x} det(Dbar_T)^{1/2} / (delta det(lam I)^{1/2})),
    evaluated in log space.  Always nonnegative for D_T >= 0 and delta < 1.
    """
    if not (0.0 < delta < 1.0):
        raise DomainError(f"delta must be in (0, 1), got {delta}")
    if sigma_w < 0.0:
        raise DomainError(f"sigma_w must be >= 0, got {sigma_w}")
    if n_x is None:
        n_x = exc.n_x
    elif n_x != exc.n_x:
        raise DimensionError(f"n_x = {n_x} does not match excitation n_x = {exc.n_x}")
    log_term = (
        n_x * np.log(5.0)
        - np.log(delta)
        + 0.5 * exc.Dbar_T_logdet
        - 0.5 * exc.n_theta * np.log(exc.lam)
    )
    return float(8.0 * sigma_w**2 * log_term)


@dataclass(frozen=True)
class ConfidenceEllipsoid:
    """High-probability set {theta : ||theta_hat - theta||_{Dbar_T} <= radius}."""

    center: ParameterVector
    excitation: Excitation
    radius: float
    delta: float


def confidence_ellipsoid(
    theta_hat: ParameterVector,
    exc: Excitation,
    sigma_w: float,
    delta: float,
    theta_bar: float,
) -> ConfidenceEllipsoid:
    """Ellipsoid with radius sqrt(R) + sqrt(lam) * theta_bar.

    Holds with probability at least 1 - delta for any true parameter with
    norm at most theta_bar.
    """
    if theta_bar < 0.0:
        raise DomainError(f"theta_bar must be >= 0, got {theta_bar}")
    R = radius_R(exc, sigma_w, delta)
    radius = float(np.sqrt(R) + np.sqrt(exc.lam) * theta_bar)
    return ConfidenceEllipsoid(theta_hat, exc, radius, float(delta))


def ellipsoid_contains(ell: ConfidenceEllipsoid, theta: ParameterVector) -> bool:
    """Whether theta lies in the ellipsoid (boundary inclusive)."""
    if theta.n_x != ell.center.n_x or theta.n_u != ell.center.n_u:
        raise DimensionError("parameter dimensions do not match the ellipsoid")
    d = ell.center.theta - theta.theta
    sq = kron_weighted_sqnorm(d, ell.excitation.regularized(), ell.center.n_x)
    return bool(np.sqrt(sq) <= ell.radius)


def goal_satisfied(
    theta_hat: ParameterVector, theta_ref: ParameterVector, D_des: np.ndarray
) -> bool:
    """Accuracy goal (theta_ref - theta_hat)^T (D_des kron I) (theta_ref - theta_hat) <= 1."""
    if theta_ref.n_x != theta_hat.n_x or theta_ref.n_u != theta_hat.n_u:
        raise DimensionError("parameter dimensions do not match")
    D_des = np.asarray(D_des, dtype=float)
    if D_des.shape != (theta_hat.n_phi, theta_hat.n_phi):
        raise DimensionError(
            f"D_des must be ({theta_hat.n_phi}, {theta_hat.n_phi}), got {D_des.shape}"
        )
    d = theta_ref.theta - theta_hat.theta
    return kron_weighted_sqnorm(d, D_des, theta_hat.n_x) <= 1.0


_MARGIN_RTOL = 1e-9


def _psd_margin_ok(M: np.ndarray) -> bool:
    M = 0.5 * (M + M.T)
    scale = 1.0 + float(np.linalg.norm(M, 2))
    return float(np.linalg.eigvalsh(M)[0]) >= -_MARGIN_RTOL * scale


def data_sufficient(
    phi: RegressorMatrix, lam: float, theta_bar: float, R: float, D_des: np.ndarray
) -> bool:
    """Exact data-sufficiency test.

    Checks Phi Phi^T + lam I - (sqrt(R) + sqrt(lam) theta_bar)^2 D_des >= 0
    up to a 1e-9 relative eigenvalue margin.  Together with ellipsoid
    containment this certifies the accuracy goal for every parameter in the
    confidence set.
    """
    if R < 0.0:
        raise DomainError(f"R must be >= 0, got {R}")
    if theta_bar < 0.0:
        raise DomainError(f"theta_bar must be >= 0, got {theta_bar}")
    if lam <= 0.0:
        raise DomainError(f"lam must be > 0, got {lam}")
    D_des = np.asarray(D_des, dtype=float)
    n_phi = phi.n_phi
    if D_des.shape != (n_phi, n_phi):
        raise DimensionError(f"D_des must be ({n_phi}, {n_phi}), got {D_des.shape}")
    coeff = (np.sqrt(R) + np.sqrt(lam) * theta_bar) ** 2
    M = phi.gram() + lam * np.eye(n_phi) - coeff * D_des
    return _psd_margin_ok(M)


def data_sufficient_convex(
    phi: RegressorMatrix,
    lam: float,
    theta_bar: float,
    C1: float,
    Dbar_T_logdet: float,
    sigma_w: float,
    D_des: np.ndarray,
) -> bool:
    """Convexified data-sufficiency test.

    Replaces the squared radius with its upper bound
    2 C1 + 8 sigma_w^2 logdet(Dbar_T) + 2 lam theta_bar^2, which is linear in
    the logdet term; passing this test implies the exact one.
    """
    if lam <= 0.0:
        raise DomainError(f"lam must be > 0, got {lam}")
    if theta_bar < 0.0:
        raise DomainError(f"theta_bar must be >= 0, got {theta_bar}")
    D_des = np.asarray(D_des, dtype=float)
    n_phi = phi.n_phi
    if D_des.shape != (n_phi, n_phi):
        raise DimensionError(f"D_des must be ({n_phi}, {n_phi}), got {D_des.shape}")
    coeff = 2.0 * C1 + 8.0 * sigma_w**2 * Dbar_T_logdet + 2.0 * lam * theta_bar**2
    M = phi.gram() + lam * np.eye(n_phi) - coeff * D_des
    return _psd_margin_ok(M)
