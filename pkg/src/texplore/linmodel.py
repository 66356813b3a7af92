"""Discrete-time linear system model, simulation, and regressor assembly.

The estimation target is theta = vec([A, B]) (column-major), so that the
one-step dynamics read x_{k+1} = (phi_k^T kron I_nx) theta + w_k with the
regressor phi_k = [x_k; u_k].  Everything downstream (least squares,
uncertainty sets, input design) works with this parameterization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DimensionError, DomainError, StabilityError


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataError(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class SystemModel:
    """State-space model x_{k+1} = A x_k + B u_k + w_k.

    Parameters
    ----------
    A : ndarray, shape (n_x, n_x)
        State transition matrix.
    B : ndarray, shape (n_x, n_u)
        Input matrix.
    sigma_w : float
        Sub-Gaussian proxy standard deviation of the disturbance w_k.
    """

    A: np.ndarray
    B: np.ndarray
    sigma_w: float

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionError(
                f"B row count {B.shape[0]} does not match state dimension {A.shape[0]}"
            )
        if not (self.sigma_w >= 0.0 and np.isfinite(self.sigma_w)):
            raise DomainError(f"sigma_w must be finite and >= 0, got {self.sigma_w}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "sigma_w", float(self.sigma_w))

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_phi(self) -> int:
        return self.n_x + self.n_u

    @property
    def n_theta(self) -> int:
        return self.n_x * self.n_phi

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    def is_schur(self, tol: float = 0.0) -> bool:
        return self.spectral_radius() < 1.0 - tol

    def is_controllable(self, rtol: float = 1e-10) -> bool:
        # Kalman rank test on [B, AB, ..., A^{nx-1}B].
        blocks = [self.B]
        for _ in range(self.n_x - 1):
            blocks.append(self.A @ blocks[-1])
        ctrb = np.hstack(blocks)
        s = np.linalg.svd(ctrb, compute_uv=False)
        if s.size == 0 or s[0] == 0.0:
            return False
        return int(np.sum(s > rtol * s[0])) == self.n_x


def validate_true_system(sys: SystemModel) -> None:
    """Raise unless the model qualifies as a simulation ground truth.

    Ground-truth models must be Schur stable and controllable; design-time
    nominal models are exempt from this check.
    """
    if not sys.is_schur():
        raise StabilityError(
            f"true system must be Schur stable, spectral radius {sys.spectral_radius():.6g}"
        )
    if not sys.is_controllable():
        raise StabilityError("true system must be controllable")


@dataclass(frozen=True)
class ParameterVector:
    """Stacked parameter vector theta = vec([A, B]) with its dimensions."""

    theta: np.ndarray
    n_x: int
    n_u: int

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if not np.all(np.isfinite(theta)):
            raise DataError("theta contains non-finite entries")
        n_phi = self.n_x + self.n_u
        if theta.size != self.n_x * n_phi:
            raise DimensionError(
                f"theta has {theta.size} entries, expected n_x*(n_x+n_u) = {self.n_x * n_phi}"
            )
        object.__setattr__(self, "theta", theta)

    @property
    def n_phi(self) -> int:
        return self.n_x + self.n_u

    def norm(self) -> float:
        return float(np.linalg.norm(self.theta))

    def as_matrix(self) -> np.ndarray:
        """Return [A, B] of shape (n_x, n_phi)."""
        return self.theta.reshape((self.n_x, self.n_phi), order="F")


def pack_theta(A, B) -> ParameterVector:
    """Stack (A, B) into theta = vec([A, B]), column-major."""
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
        raise DimensionError("pack_theta expects square A and matching B")
    M = np.hstack([A, B])
    return ParameterVector(M.flatten(order="F"), A.shape[0], B.shape[1])


def unpack_theta(pv: ParameterVector) -> tuple[np.ndarray, np.ndarray]:
    """Recover (A, B) from a stacked parameter vector."""
    M = pv.as_matrix()
    return M[:, : pv.n_x].copy(), M[:, pv.n_x :].copy()


def system_from_theta(pv: ParameterVector, sigma_w: float = 0.0) -> SystemModel:
    A, B = unpack_theta(pv)
    return SystemModel(A, B, sigma_w)


def kron_weighted_sqnorm(dtheta: np.ndarray, weight: np.ndarray, n_x: int) -> float:
    """Evaluate dtheta^T (weight kron I_nx) dtheta without forming the Kronecker.

    With M the (n_x, n_phi) matrix such that dtheta = vec(M), the quadratic
    form equals tr(M weight M^T).
    """
    dtheta = np.asarray(dtheta, dtype=float).reshape(-1)
    weight = np.asarray(weight, dtype=float)
    n_phi = weight.shape[0]
    if dtheta.size != n_x * n_phi:
        raise DimensionError(
            f"dtheta has {dtheta.size} entries, weight implies {n_x * n_phi}"
        )
    M = dtheta.reshape((n_x, n_phi), order="F")
    return float(np.sum((M @ weight) * M))


@dataclass(frozen=True)
class PriorSet:
    """Initial parameter ellipsoid {theta : (theta_hat0 - theta)^T (D0 kron I) (theta_hat0 - theta) <= 1}."""

    theta_hat0: ParameterVector
    D0: np.ndarray

    def __post_init__(self):
        D0 = _as_matrix(self.D0, "D0")
        n_phi = self.theta_hat0.n_phi
        if D0.shape != (n_phi, n_phi):
            raise DimensionError(f"D0 must be ({n_phi}, {n_phi}), got {D0.shape}")
        if np.max(np.abs(D0 - D0.T)) > 1e-10 * (1.0 + np.max(np.abs(D0))):
            raise DataError("D0 must be symmetric")
        D0 = 0.5 * (D0 + D0.T)
        if np.min(np.linalg.eigvalsh(D0)) <= 0.0:
            raise DomainError("D0 must be positive definite")
        object.__setattr__(self, "D0", D0)

    @property
    def n_x(self) -> int:
        return self.theta_hat0.n_x

    @property
    def n_u(self) -> int:
        return self.theta_hat0.n_u


def theta_bound(prior: PriorSet) -> float:
    """Worst-case parameter norm over the prior set.

    Returns ||theta_hat0|| + ||D0^{-1/2}||, the largest-singular-value bound
    on any member of the prior ellipsoid.
    """
    eigs = np.linalg.eigvalsh(prior.D0)
    lam_min = float(eigs[0])
    if lam_min <= 0.0:
        raise DomainError("D0 must be positive definite for theta_bound")
    return prior.theta_hat0.norm() + 1.0 / np.sqrt(lam_min)


def prior_contains(prior: PriorSet, theta: ParameterVector) -> bool:
    """Membership test for the prior ellipsoid (boundary counts as inside)."""
    if theta.n_x != prior.n_x or theta.n_u != prior.n_u:
        raise DimensionError("parameter dimensions do not match the prior")
    d = prior.theta_hat0.theta - theta.theta
    return kron_weighted_sqnorm(d, prior.D0, prior.n_x) <= 1.0


@dataclass(frozen=True)
class Trajectory:
    """Recorded closed-form simulation data with x_0 = 0.

    X has T+1 rows (x_0 .. x_T), U and W have T rows each.
    """

    X: np.ndarray
    U: np.ndarray
    W: np.ndarray
    T: int = field(default=0)

    def __post_init__(self):
        X = _as_matrix(self.X, "X")
        U = _as_matrix(self.U, "U")
        W = _as_matrix(self.W, "W")
        T = U.shape[0]
        if X.shape[0] != T + 1:
            raise DimensionError(f"X must have T+1 = {T + 1} rows, got {X.shape[0]}")
        if W.shape != (T, X.shape[1]):
            raise DimensionError(f"W must have shape ({T}, {X.shape[1]}), got {W.shape}")
        if T > 0 and np.any(X[0] != 0.0):
            raise DataError("trajectories must start at x_0 = 0")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "T", T)

    @property
    def n_x(self) -> int:
        return self.X.shape[1]

    @property
    def n_u(self) -> int:
        return self.U.shape[1]


def draw_noise(kind: str, sigma_w: float, T: int, n_x: int, seed) -> np.ndarray:
    """Draw a (T, n_x) disturbance sample with sub-Gaussian proxy sigma_w.

    Parameters
    ----------
    kind : {"gaussian", "uniform", "none"}
        "gaussian" draws N(0, sigma_w^2); "uniform" draws Uniform[-sigma_w, sigma_w],
        whose proxy variance is bounded by sigma_w^2; "none" returns zeros.
    seed : int or numpy.random.SeedSequence or numpy.random.Generator
        Source of randomness; identical seeds give identical draws.
    """
    if sigma_w < 0.0:
        raise DomainError(f"sigma_w must be >= 0, got {sigma_w}")
    if T < 0:
        raise DomainError(f"T must be >= 0, got {T}")
    if kind == "none" or sigma_w == 0.0:
        return np.zeros((T, n_x))
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if kind == "gaussian":
        return rng.normal(0.0, sigma_w, size=(T, n_x))
    if kind == "uniform":
        return rng.uniform(-sigma_w, sigma_w, size=(T, n_x))
    raise DomainError(f"unknown noise kind {kind!r}")


def simulate(sys: SystemModel, U, noise, seed=0) -> Trajectory:
    """Roll out x_{k+1} = A x_k + B u_k + w_k from x_0 = 0.

    Parameters
    ----------
    sys : SystemModel
    U : ndarray, shape (T, n_u)
        Input sequence u_0 .. u_{T-1}.  A 1-D array is accepted when n_u = 1.
    noise : str or ndarray
        Either a noise kind accepted by :func:`draw_noise` or an explicit
        (T, n_x) disturbance array (recorded as-is).
    seed
        Forwarded to :func:`draw_noise` when `noise` is a kind string.

    Returns
    -------
    Trajectory
        States x_0 .. x_T plus the applied inputs and disturbances.
    """
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    if U.ndim != 2 or U.shape[1] != sys.n_u:
        raise DimensionError(f"U must have shape (T, {sys.n_u}), got {U.shape}")
    if not np.all(np.isfinite(U)):
        raise DataError("U contains non-finite entries")
    T = U.shape[0]
    if isinstance(noise, str):
        W = draw_noise(noise, sys.sigma_w, T, sys.n_x, seed)
    else:
        W = np.asarray(noise, dtype=float)
        if W.ndim == 1:
            W = W[:, None]
        if W.shape != (T, sys.n_x):
            raise DimensionError(f"W must have shape ({T}, {sys.n_x}), got {W.shape}")
        if not np.all(np.isfinite(W)):
            raise DataError("W contains non-finite entries")

    X = np.zeros((T + 1, sys.n_x))
    A, B = sys.A, sys.B
    x = X[0]
    for k in range(T):
        x = A @ x + B @ U[k] + W[k]
        X[k + 1] = x
    return Trajectory(X, U, W)


@dataclass(frozen=True)
class RegressorMatrix:
    """Regressors Phi with column k equal to [x_k; u_k], k = 0 .. T-1."""

    Phi: np.ndarray
    n_x: int

    def __post_init__(self):
        Phi = np.asarray(self.Phi, dtype=float)
        if Phi.ndim != 2:
            raise DimensionError(f"Phi must be 2-D, got shape {Phi.shape}")
        if not (0 < self.n_x <= Phi.shape[0]):
            raise DimensionError(
                f"n_x = {self.n_x} inconsistent with Phi row count {Phi.shape[0]}"
            )
        if not np.all(np.isfinite(Phi)):
            raise DataError("Phi contains non-finite entries")
        object.__setattr__(self, "Phi", Phi)

    @property
    def n_phi(self) -> int:
        return self.Phi.shape[0]

    @property
    def n_u(self) -> int:
        return self.Phi.shape[0] - self.n_x

    @property
    def T(self) -> int:
        return self.Phi.shape[1]

    def gram(self) -> np.ndarray:
        """Return Phi Phi^T."""
        return self.Phi @ self.Phi.T


def build_regressors(traj: Trajectory) -> RegressorMatrix:
    """Stack [x_k; u_k] for k = 0 .. T-1 into an (n_phi, T) matrix."""
    Phi = np.vstack([traj.X[: traj.T].T, traj.U.T])
    return RegressorMatrix(Phi, traj.n_x)


def system_from_dict(d: dict) -> SystemModel:
    """Build a SystemModel from JSON-style {"A": rows, "B": rows, "sigma_w": s}."""
    try:
        A = np.asarray(d["A"], dtype=float)
        B = np.asarray(d["B"], dtype=float)
        sigma_w = float(d["sigma_w"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad system block: {exc}") from exc
    if B.ndim == 1:
        B = B[:, None]
    return SystemModel(A, B, sigma_w)


def system_to_dict(sys: SystemModel) -> dict:
    return {"A": sys.A.tolist(), "B": sys.B.tolist(), "sigma_w": sys.sigma_w}


def prior_from_dict(d: dict, n_x: int, n_u: int) -> PriorSet:
    """Build a PriorSet from JSON-style {"theta_hat0": flat list, "D0": rows}."""
    try:
        theta0 = np.asarray(d["theta_hat0"], dtype=float).reshape(-1)
        D0 = np.asarray(d["D0"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad prior block: {exc}") from exc
    return PriorSet(ParameterVector(theta0, n_x, n_u), D0)


def prior_to_dict(prior: PriorSet) -> dict:
    return {"theta_hat0": prior.theta_hat0.theta.tolist(), "D0": prior.D0.tolist()}


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Write a trajectory as CSV with header k,x_1..x_nx,u_1..u_nu.

    The final row holds x_T with empty input cells.
    """
    header = (
        ["k"]
        + [f"x_{i + 1}" for i in range(traj.n_x)]
        + [f"u_{i + 1}" for i in range(traj.n_u)]
    )
    lines = [",".join(header)]
    for k in range(traj.T + 1):
        cells = [str(k)] + [repr(v) for v in traj.X[k]]
        if k < traj.T:
            cells += [repr(v) for v in traj.U[k]]
        else:
            cells += [""] * traj.n_u
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
