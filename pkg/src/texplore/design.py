"""Exploration input design by sequential semidefinite programming.

The decision variables are the stacked cosine amplitudes of a multisine
input, a scalar energy bound gamma_e, and a multiplier tau.  Each outer
iteration linearizes the excitation term around the previous amplitude
iterate, solves the resulting SDP, and tightens the energy trust region
gamma_bar until gamma_e settles.

Layout of the SDP variable vector x, used by every builder here:
x = [gamma_e, u_1, ..., u_{L*n_u}, tau], with u frequency-major (the
amplitude vector of the first grid line first).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundConstants, compute_bound_constants
from .errors import DataError, DimensionError, DomainError, InfeasibleError, NumericalError
from .linmodel import PriorSet, SystemModel, pack_theta
from .sdp import (ConicProgram, LmiBlock, Solution, SolverOptions,
                  find_strictly_feasible, hermitian_embed, solve, verify)
from .spectral import FrequencyGrid, InputSpectrum, transfer_samples


@dataclass(frozen=True)
class DesignSpec:
    """Fixed data of one design problem (everything except prior and system).

    gamma_bar0 and U_tilde0 override the automatic initialization; left at
    None, the starting amplitudes come from the feasibility bisection and
    gamma_bar0 from ten times their energy.
    """

    grid: FrequencyGrid
    D_des: np.ndarray
    eps: float
    lam: float
    delta: float
    beta: float = 0.01
    tol: float = 1e-3
    max_outer: int = 20
    gamma_bar0: float | None = None
    U_tilde0: np.ndarray | None = None
    rho_ratio: float = 0.5
    v_margin: float = 0.2
    v_samples: int = 200
    envelope_terms: int = 200
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise DomainError(f"eps must be in (0, 1), got {self.eps}")
        if not 0.0 < self.delta < 1.0:
            raise DomainError(f"delta must be in (0, 1), got {self.delta}")
        if not 0.0 < self.beta < 1.0:
            raise DomainError(f"beta must be in (0, 1), got {self.beta}")
        if self.lam <= 0.0:
            raise DomainError(f"lam must be positive, got {self.lam}")
        if self.tol <= 0.0 or self.max_outer < 1:
            raise DomainError("tol must be positive and max_outer at least 1")
        if self.gamma_bar0 is not None and self.gamma_bar0 <= 0.0:
            raise DomainError(f"gamma_bar0 must be positive, got {self.gamma_bar0}")
        D = np.asarray(self.D_des, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise DimensionError(f"D_des must be square, got shape {D.shape}")
        if float(np.max(np.abs(D - D.T))) > 1e-12 * (1.0 + float(np.max(np.abs(D)))):
            raise DataError("D_des must be symmetric")
        if float(np.linalg.eigvalsh(D)[0]) < -1e-12 * (1.0 + float(np.max(np.abs(D)))):
            raise DataError("D_des must be positive semidefinite")
        object.__setattr__(self, "D_des", 0.5 * (D + D.T))
        if self.U_tilde0 is not None:
            U0 = np.asarray(self.U_tilde0, dtype=float)
            if U0.ndim != 2:
                raise DimensionError("U_tilde0 must be an (L, n_u) array")
            object.__setattr__(self, "U_tilde0", U0)

    @property
    def T(self) -> int:
        return self.grid.T


@dataclass(frozen=True)
class DesignResult:
    spectrum: InputSpectrum
    gamma_e: float
    tau: float
    gamma_bar: float
    converged: bool
    certified: bool
    n_outer: int
    trace: tuple
    constants: BoundConstants
    solution: Solution


# -- LMI builders ----------------------------------------------------------


def build_energy_lmi_1(n_vars: int, L: int, n_u: int, gamma_idx: int = 0,
                       u_offset: int = 1) -> LmiBlock:
    """Schur block [[gamma_e, u^T], [u, gamma_e I]] with u the stacked amplitudes.

    Positive semidefinite exactly when the total line energy satisfies
    sum_l ||u_bar(omega_l)||^2 <= gamma_e^2 (and gamma_e >= 0).
    """
    nW = L * n_u
    m = 1 + nW
    if gamma_idx == u_offset or not 0 <= gamma_idx < n_vars or u_offset + nW > n_vars:
        raise DimensionError("variable indices out of range in energy LMI")
    Fi = [np.zeros((m, m)) for _ in range(n_vars)]
    Fi[gamma_idx] = np.eye(m)
    for j in range(nW):
        F = Fi[u_offset + j]
        F[0, 1 + j] = 1.0
        F[1 + j, 0] = 1.0
    return LmiBlock(np.zeros((m, m)), tuple(Fi), name="energy_norm")


def build_energy_lmi_2(n_vars: int, gamma_bar: float, gamma_idx: int = 0) -> LmiBlock:
    """[[gamma_bar, gamma_e], [gamma_e, 1]] >= 0, i.e. gamma_e^2 <= gamma_bar."""
    if gamma_bar <= 0.0:
        raise DomainError(f"gamma_bar must be positive, got {gamma_bar}")
    Fi = [np.zeros((2, 2)) for _ in range(n_vars)]
    Fi[gamma_idx] = np.array([[0.0, 1.0], [1.0, 0.0]])
    return LmiBlock(np.array([[gamma_bar, 0.0], [0.0, 1.0]]), tuple(Fi), name="energy_cap")


def _unit_block_matrix(L: int, n_u: int, j: int) -> np.ndarray:
    """Block-diagonal stacking of the j-th unit amplitude vector."""
    E = np.zeros((L * n_u, L))
    ell, r = divmod(j, n_u)
    E[ell * n_u + r, ell] = 1.0
    return E


def build_S_exp(U_tilde: InputSpectrum, V_hat: np.ndarray, consts: BoundConstants,
                gamma_bar: float, eps: float, D_des: np.ndarray,
                u_offset: int = 1, tau_idx: int | None = None,
                n_vars: int | None = None) -> LmiBlock:
    """Linearized excitation LMI, robust over the transfer-sample ball.

    The underlying Hermitian condition, with W the block-stacked amplitudes,
    W~ the linearization point, and B the constant curvature matrix, is

        [[(1-eps)(W W~^T + W~ W^T - W~ W~^T) + tau I,  -tau V^H],
         [-tau V,  B - tau (Gamma_V - V V^H)]] >= 0,

    which by the S-procedure implies the excitation target for every transfer
    matrix within Gamma_V of the nominal V.  The block is returned in its
    real symmetric embedding, so its size is 2 (L n_u + n_phi).
    """
    grid = U_tilde.grid
    L, n_u = grid.L, U_tilde.amplitudes.shape[1]
    V_hat = np.asarray(V_hat, dtype=complex)
    n_phi = V_hat.shape[0]
    if V_hat.shape != (n_phi, L * n_u):
        raise DimensionError(f"V_hat must be n_phi x L*n_u, got {V_hat.shape}")
    D_des = np.asarray(D_des, dtype=float)
    if D_des.shape != (n_phi, n_phi):
        raise DimensionError(f"D_des must be {n_phi}x{n_phi}, got {D_des.shape}")
    if gamma_bar <= 0.0:
        raise DomainError(f"gamma_bar must be positive, got {gamma_bar}")
    if n_vars is None:
        n_vars = 2 + L * n_u
    if tau_idx is None:
        tau_idx = n_vars - 1

    W_t = U_tilde.block_matrix()
    GV = np.asarray(consts.Gamma_V_tilde, dtype=complex)
    if GV.shape != (n_phi, n_phi):
        raise DimensionError(f"Gamma_V_tilde must be {n_phi}x{n_phi}, got {GV.shape}")

    # Constant curvature block: transient and disturbance penalties at the
    # trust-region energy gamma_bar, ridge floor, and the excitation target.
    penalty = consts.Gamma_u_coeff * gamma_bar * np.eye(n_phi) + consts.Gamma_w_mat
    B = (-(2.0 * (1.0 - eps) / eps) * penalty
         + (consts.lam / consts.T) * np.eye(n_phi)
         - ((consts.C2 + consts.c3(gamma_bar)) / consts.T) * D_des)

    nW = L * n_u
    dim = nW + n_phi

    H0 = np.zeros((dim, dim), dtype=complex)
    H0[:nW, :nW] = -(1.0 - eps) * (W_t @ W_t.T)
    H0[nW:, nW:] = B

    Fi = [np.zeros((2 * dim, 2 * dim)) for _ in range(n_vars)]
    for j in range(nW):
        E = _unit_block_matrix(L, n_u, j)
        Hj = np.zeros((dim, dim), dtype=complex)
        Hj[:nW, :nW] = (1.0 - eps) * (E @ W_t.T + W_t @ E.T)
        Fi[u_offset + j] = hermitian_embed(Hj)
    H_tau = np.zeros((dim, dim), dtype=complex)
    H_tau[:nW, :nW] = np.eye(nW)
    H_tau[:nW, nW:] = -V_hat.conj().T
    H_tau[nW:, :nW] = -V_hat
    H_tau[nW:, nW:] = V_hat @ V_hat.conj().T - GV
    Fi[tau_idx] = hermitian_embed(H_tau)

    return LmiBlock(hermitian_embed(H0), tuple(Fi), name="excitation")


def _tau_nonneg(n_vars: int, tau_idx: int) -> LmiBlock:
    Fi = [np.zeros((1, 1)) for _ in range(n_vars)]
    Fi[tau_idx] = np.array([[1.0]])
    return LmiBlock(np.zeros((1, 1)), tuple(Fi), name="tau_nonneg")


def assemble_exploration_program(U_tilde: InputSpectrum, V_hat: np.ndarray,
                      consts: BoundConstants, gamma_bar: float, eps: float,
                      D_des: np.ndarray) -> ConicProgram:
    L = U_tilde.grid.L
    n_u = U_tilde.amplitudes.shape[1]
    n_vars = 2 + L * n_u
    blocks = (
        build_energy_lmi_1(n_vars, L, n_u),
        build_energy_lmi_2(n_vars, gamma_bar),
        build_S_exp(U_tilde, V_hat, consts, gamma_bar, eps, D_des, n_vars=n_vars),
        _tau_nonneg(n_vars, n_vars - 1),
    )
    c = np.zeros(n_vars)
    c[0] = 1.0
    names = ["gamma_e"] + [f"u_{ell}_{r}" for ell in range(L) for r in range(n_u)] + ["tau"]
    return ConicProgram(c, blocks, tuple(names))


def _split_x(x: np.ndarray, L: int, n_u: int):
    gamma_e = float(x[0])
    U = np.asarray(x[1:1 + L * n_u], dtype=float).reshape(L, n_u)
    tau = float(x[-1])
    return gamma_e, U, tau


def solve_exploration_sdp(U_tilde: InputSpectrum, V_hat: np.ndarray,
                          consts: BoundConstants, gamma_bar: float, eps: float,
                          D_des: np.ndarray,
                          options: SolverOptions | None = None,
                          x0=None):
    """One linearized design solve.  Returns (U_new, gamma_e, tau, Solution).

    Raises InfeasibleError (with per-block margins attached) when the solver
    proves there is no strict interior at this linearization point.
    """
    prog = assemble_exploration_program(U_tilde, V_hat, consts, gamma_bar, eps, D_des)
    sol = solve(prog, options, x0=x0)
    if sol.status == "infeasible":
        margins = {b.name: m for b, m in zip(prog.blocks, sol.min_eig_per_block)}
        worst = min(margins, key=margins.get)
        err = InfeasibleError(
            f"exploration SDP infeasible at gamma_bar={gamma_bar:.6g}: "
            f"worst block {worst!r} margin {margins[worst]:.3e}"
        )
        err.block = worst
        err.margins = margins
        raise err
    if sol.status not in ("optimal",):
        raise NumericalError(f"exploration SDP ended with status {sol.status!r}: {sol.message}")
    L, n_u = U_tilde.grid.L, U_tilde.amplitudes.shape[1]
    gamma_e, U_new, tau = _split_x(sol.x, L, n_u)
    return U_new, gamma_e, tau, sol


# -- outer iteration -------------------------------------------------------

_GAMMA_BAR_FLOOR = 1e-4


def _init_pattern(alpha: float, L: int, n_u: int) -> np.ndarray:
    U = np.zeros((L, n_u))
    U[:, 0] = alpha
    return U


def _gamma_bar_for(U: np.ndarray) -> float:
    # Twice the energy: room for the first solve to grow the input without
    # inflating the transient penalty (proportional to gamma_bar) so much
    # that short-horizon problems turn infeasible.
    return max(2.0 * float(np.sum(U * U)), _GAMMA_BAR_FLOOR)


def _probe_feasible(grid, alpha, L, n_u, V_hat, consts, eps, D_des, options) -> bool:
    U0 = _init_pattern(alpha, L, n_u)
    prog = assemble_exploration_program(InputSpectrum(grid, U0), V_hat, consts,
                             _gamma_bar_for(U0), eps, D_des)
    x, _ = find_strictly_feasible(prog, options)
    return x is not None


def _initial_amplitude(grid, L, n_u, V_hat, consts, eps, D_des, options) -> float:
    """Expanding search then bisection for a feasible starting amplitude."""
    alpha = 1e-3
    first_feasible = None
    while alpha <= 1e6:
        if _probe_feasible(grid, alpha, L, n_u, V_hat, consts, eps, D_des, options):
            first_feasible = alpha
            break
        alpha *= 2.0
    if first_feasible is None:
        raise InfeasibleError(
            "no feasible initial amplitude up to 1e6; the excitation target is "
            "out of reach for this horizon and prior"
        )
    if first_feasible == 1e-3:
        return first_feasible
    lo, hi = first_feasible / 2.0, first_feasible
    for _ in range(8):
        mid = float(np.sqrt(lo * hi))
        if _probe_feasible(grid, mid, L, n_u, V_hat, consts, eps, D_des, options):
            hi = mid
        else:
            lo = mid
    return hi


def run_algorithm_1(spec: DesignSpec, prior: PriorSet, sys_nominal: SystemModel,
                    seed: int = 0) -> DesignResult:
    """Full sequential design: constants, feasible start, outer SDP loop.

    Parameters
    ----------
    spec : DesignSpec
        Carries the grid (and with it the horizon T the certificates are
        evaluated at), the excitation target D_des, and all tolerances.
    prior : PriorSet
        Confidence region the design must be robust over.  sys_nominal must
        realize the prior center; the linearization and the transfer-sample
        ball are both anchored there.
    sys_nominal : SystemModel
    seed : int
        Drives the scenario draws inside the constants computation only.
    """
    theta_c = pack_theta(sys_nominal.A, sys_nominal.B).theta
    theta_0 = prior.theta_hat0.theta
    if theta_c.shape != theta_0.shape or not np.allclose(
        theta_c, theta_0, rtol=0.0, atol=1e-8
    ):
        raise DataError("sys_nominal does not realize the prior center")

    n_phi = sys_nominal.n_phi
    D_des = np.asarray(spec.D_des, dtype=float)
    if D_des.shape != (n_phi, n_phi):
        raise DimensionError(f"D_des must be {n_phi}x{n_phi}, got {D_des.shape}")

    consts = compute_bound_constants(
        prior, sys_nominal.sigma_w, spec.grid, spec.delta, spec.lam,
        beta=spec.beta, seed=seed, rho_ratio=spec.rho_ratio,
        v_margin=spec.v_margin, v_samples=spec.v_samples,
        envelope_terms=spec.envelope_terms,
    )
    V_hat = transfer_samples(sys_nominal, spec.grid).stacked()
    L, n_u = spec.grid.L, sys_nominal.n_u

    if not np.any(D_des):
        # Zero accuracy demand is met by the zero input; the SDP itself would
        # still ask the input to beat the disturbance deductions, so skip it.
        x0 = np.zeros(2 + L * n_u)
        sol = Solution(x=x0, objective=0.0, status="optimal",
                       min_eig_per_block=(), duality_gap=0.0,
                       message="zero demand met by the zero input")
        return DesignResult(
            spectrum=InputSpectrum(spec.grid, np.zeros((L, n_u))),
            gamma_e=0.0, tau=0.0, gamma_bar=_GAMMA_BAR_FLOOR,
            converged=True, certified=True, n_outer=0, trace=(),
            constants=consts, solution=sol,
        )

    if spec.U_tilde0 is not None:
        U_tilde = spec.U_tilde0
        if U_tilde.shape != (L, n_u):
            raise DimensionError(f"U_tilde0 must be ({L}, {n_u}), got {U_tilde.shape}")
    else:
        alpha0 = _initial_amplitude(
            spec.grid, L, n_u, V_hat, consts, spec.eps, D_des, spec.solver
        )
        U_tilde = _init_pattern(alpha0, L, n_u)
    gamma_bar = spec.gamma_bar0 if spec.gamma_bar0 is not None else _gamma_bar_for(U_tilde)

    trace = []
    gamma_prev = None
    gamma_e = float("nan")
    tau = float("nan")
    sol = None
    U_lin, gb_used = U_tilde, gamma_bar
    converged = False
    x_warm = None
    for it in range(1, spec.max_outer + 1):
        U_lin, gb_used = U_tilde, gamma_bar
        try:
            U_new, gamma_e, tau, sol = solve_exploration_sdp(
                InputSpectrum(spec.grid, U_lin), V_hat, consts, gb_used,
                spec.eps, D_des, spec.solver, x0=x_warm,
            )
        except InfeasibleError:
            if it == 1:
                raise
            # warm-start feasibility makes this impossible in exact arithmetic
            raise NumericalError(
                f"outer iteration {it} lost feasibility; previous optimum "
                "should remain feasible"
            )
        trace.append({
            "iter": it,
            "gamma_e": gamma_e,
            "gamma_bar": gb_used,
            "tau": tau,
            "objective": sol.objective,
            "duality_gap": sol.duality_gap,
            "min_eigs": tuple(sol.min_eig_per_block),
            "status": sol.status,
        })
        U_tilde = U_new
        x_warm = sol.x
        # first iteration has no predecessor: change counts as infinite, so
        # only an infinite tolerance accepts it
        change = np.inf if gamma_prev is None else abs(gamma_e - gamma_prev)
        if change <= spec.tol * (1.0 + abs(gamma_prev if gamma_prev is not None else gamma_e)):
            converged = True
            break
        gamma_prev = gamma_e
        # 5% headroom keeps the energy cap off the warm point; without it the
        # next subproblem starts on the boundary and phase 1 has no interior
        gamma_bar = max(1.05 * gamma_e * gamma_e, _GAMMA_BAR_FLOOR)

    # Certify the last solve against the exact program it ran on (same
    # linearization point and trust region), with the independent checker.
    prog = assemble_exploration_program(
        InputSpectrum(spec.grid, U_lin), V_hat, consts, gb_used,
        spec.eps, D_des,
    )
    report = verify(prog, sol.x, feas_tol=spec.solver.feas_tol)
    return DesignResult(
        spectrum=InputSpectrum(spec.grid, U_tilde),
        gamma_e=gamma_e,
        tau=tau,
        gamma_bar=gb_used,
        converged=converged,
        certified=bool(report["feasible"]),
        n_outer=len(trace),
        trace=tuple(trace),
        constants=consts,
        solution=sol,
    )
