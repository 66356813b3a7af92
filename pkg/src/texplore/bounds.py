"""Constants and certified bounds feeding the exploration design LMIs.

Everything here is an upper or lower bound with a finite-sample story: the
decay envelope certifies ||A^k|| <= C rho^k for all k, the disturbance and
transient bounds hold under the stated energy/noise events, and the scenario
constants bound the uncertain-system quantities by a max over prior samples.
The executable Lemma checks at the bottom replay the chain on simulated data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InfeasibleError, NumericalError, StabilityError
from .linmodel import (
    ParameterVector,
    PriorSet,
    SystemModel,
    system_from_theta,
    theta_bound,
)
from .estimation import constant_C1  # noqa: F401  (re-exported for constants audit)
from .spectral import (
    FrequencyGrid,
    InputSpectrum,
    SpectralDecomposition,
    TransferSample,
    toeplitz_norm_bounds,
    transfer_samples,
)


@dataclass(frozen=True)
class DecayEnvelope:
    """Certified decay ||A^k|| <= C rho^k for all k >= 0."""

    C: float
    rho: float
    k_check: int = 200

    def __post_init__(self):
        if not (self.C >= 1.0):
            raise DomainError(f"C must be >= 1, got {self.C}")
        if not (0.0 <= self.rho < 1.0):
            raise DomainError(f"rho must be in [0, 1), got {self.rho}")


def _matrix_powers_norms(A: np.ndarray, k_max: int) -> np.ndarray:
    norms = np.empty(k_max + 1)
    P = np.eye(A.shape[0])
    for k in range(k_max + 1):
        norms[k] = np.linalg.norm(P, 2)
        if k < k_max:
            P = A @ P
    return norms


def _tail_certificate(A: np.ndarray, rho: float, k_cap: int = 100_000) -> int:
    """Smallest m with ||A^m|| <= rho^m.

    Submultiplicativity then closes the tail: for k = a m + b with b < m,
    ||A^k|| <= (||A^m||)^a ||A^b|| <= rho^{am} C rho^b = C rho^k.
    """
    P = np.eye(A.shape[0])
    for m in range(1, k_cap + 1):
        P = A @ P
        if np.linalg.norm(P, 2) <= rho**m:
            return m
    raise NumericalError(f"no tail certificate found up to k = {k_cap}")


def fit_decay_envelope(A: np.ndarray, rho_ratio: float = 0.5, k_check: int = 200) -> DecayEnvelope:
    """Fit C, rho with ||A^k|| <= C rho^k certified for every k.

    rho sits at `rho_ratio` of the way from the spectral radius to 1; C is the
    max of ||A^k|| / rho^k over k <= k_check.  The tail beyond k_check is
    certified by finding m with ||A^m|| <= rho^m and using submultiplicativity.

    Parameters
    ----------
    A : ndarray
        Schur-stable matrix.
    rho_ratio : float
        Position of rho between the spectral radius and 1.
    k_check : int
        Direct verification range.

    Returns
    -------
    DecayEnvelope
    """
    A = np.asarray(A, dtype=float)
    sr = float(np.max(np.abs(np.linalg.eigvals(A))))
    if sr >= 1.0:
        raise StabilityError(f"spectral radius {sr:.6g} >= 1; no decay envelope exists")
    if not (0.0 < rho_ratio < 1.0):
        raise DomainError(f"rho_ratio must be in (0, 1), got {rho_ratio}")
    rho = sr + rho_ratio * (1.0 - sr)
    norms = _matrix_powers_norms(A, k_check)
    C = max(1.0, float(np.max(norms / rho ** np.arange(k_check + 1))))
    _tail_certificate(A, rho)
    return DecayEnvelope(C, rho, k_check)


def fit_common_envelope(
    A_list: list, rho_ratio: float = 0.5, k_check: int = 200
) -> DecayEnvelope:
    """One envelope valid for every matrix in the list."""
    srs = [float(np.max(np.abs(np.linalg.eigvals(np.asarray(A))))) for A in A_list]
    sr = max(srs)
    if sr >= 1.0:
        raise StabilityError(f"max spectral radius {sr:.6g} >= 1 across samples")
    rho = sr + rho_ratio * (1.0 - sr)
    decay = rho ** np.arange(k_check + 1)
    C = 1.0
    for A in A_list:
        A = np.asarray(A, dtype=float)
        norms = _matrix_powers_norms(A, k_check)
        C = max(C, float(np.max(norms / decay)))
        _tail_certificate(A, rho)
    return DecayEnvelope(C, rho, k_check)


def transient_gamma_u(envelope: DecayEnvelope, normB: float, L: int, T: int) -> float:
    """Coefficient of gamma_e^2 in the transient bound Gamma_u.

    Gamma_u(gamma^2) = coeff * gamma^2 * I with
    coeff = (4 L / T) (||B|| C rho / (1 - rho)^2)^2.
    """
    if T < 1:
        raise DomainError(f"T must be >= 1, got {T}")
    if normB < 0.0:
        raise DomainError(f"normB must be >= 0, got {normB}")
    g = normB * envelope.C * envelope.rho / (1.0 - envelope.rho) ** 2
    return float(4.0 * L / T * g**2)


def disturbance_gamma_w(sigma_w: float, T: int, n_x: int, delta: float) -> float:
    """High-probability bound on ||W||_F^2: sigma_w^2 ((1 + log 4) T n_x + 4 log(1/delta))."""
    if not (0.0 < delta < 1.0):
        raise DomainError(f"delta must be in (0, 1), got {delta}")
    if sigma_w < 0.0:
        raise DomainError(f"sigma_w must be >= 0, got {sigma_w}")
    return float(sigma_w**2 * ((1.0 + np.log(4.0)) * T * n_x + 4.0 * np.log(1.0 / delta)))


def disturbance_Gamma_w(
    normAw: float, gamma_w: float, L: int, T: int, n_phi: int
) -> np.ndarray:
    """Disturbance line-energy bound Gamma_w = (L/T) ||A_w||^2 gamma_w I."""
    if normAw < 0.0 or gamma_w < 0.0:
        raise DomainError("normAw and gamma_w must be >= 0")
    return (L / T) * normAw**2 * gamma_w * np.eye(n_phi)


def logdet_upper_bound(
    normAw: float,
    gamma_w: float,
    normAu: float,
    gamma_e_sq: float,
    lam: float,
    T: int,
    n_theta: int,
) -> float:
    """Deterministic bound n_theta log(2T ||A_w||^2 gamma_w + 2T^2 (||A_u||^2 + 1) gamma_e^2 + lam).

    Valid for log det of the regularized information matrix whenever the input
    energy satisfies the design cap and ||W||^2 <= gamma_w.
    """
    if lam <= 0.0:
        raise DomainError(f"lam must be > 0, got {lam}")
    if gamma_e_sq < 0.0:
        raise DomainError(f"gamma_e_sq must be >= 0, got {gamma_e_sq}")
    arg = 2.0 * T * normAw**2 * gamma_w + 2.0 * T**2 * (normAu**2 + 1.0) * gamma_e_sq + lam
    return float(n_theta * np.log(arg))


def constants_C2_C3(
    C1: float,
    lam: float,
    theta_bar: float,
    sigma_w: float,
    n_theta: int,
    T: int,
    normAw: float,
    gamma_w: float,
    normAu: float,
):
    """Split the radius bound into the constant C2 and the energy-dependent C3.

    C2 = 2 C1 + 2 lam theta_bar^2;
    C3(gamma^2) = 8 sigma_w^2 n_theta [log(2T ||A_w||^2 gamma_w)
                  + log(2T^2 (||A_u||^2 + 1) gamma^2 + lam)].

    Returns
    -------
    (float, callable)
        C2 and the monotone increasing map gamma^2 -> C3(gamma^2).
    """
    if lam <= 0.0:
        raise DomainError(f"lam must be > 0, got {lam}")
    if theta_bar < 0.0:
        raise DomainError(f"theta_bar must be >= 0, got {theta_bar}")
    C2 = 2.0 * C1 + 2.0 * lam * theta_bar**2
    if sigma_w == 0.0:
        return float(C2), lambda gamma_sq: 0.0

    arg1 = 2.0 * T * normAw**2 * gamma_w
    if arg1 <= 0.0:
        raise DomainError(
            f"log argument 2T||A_w||^2 gamma_w = {arg1:.6g} <= 0: constant set infeasible"
        )
    scale = 8.0 * sigma_w**2 * n_theta

    def C3(gamma_sq: float) -> float:
        if gamma_sq < 0.0:
            raise DomainError(f"gamma_sq must be >= 0, got {gamma_sq}")
        arg2 = 2.0 * T**2 * (normAu**2 + 1.0) * gamma_sq + lam
        return float(scale * (np.log(arg1) + np.log(arg2)))

    return float(C2), C3


def _sample_prior(
    prior: PriorSet, rng: np.random.Generator, boundary: bool
) -> ParameterVector:
    n_x, n_phi = prior.n_x, prior.theta_hat0.n_phi
    n_theta = n_x * n_phi
    z = rng.normal(size=n_theta)
    nz = np.linalg.norm(z)
    if nz == 0.0:
        z[0] = 1.0
        nz = 1.0
    r = 1.0 if boundary else float(rng.uniform() ** (1.0 / n_theta))
    d = (r / nz) * z
    # theta = theta_hat0 + (D0^{-1/2} kron I) d, applied in matrix form.
    w, Q = np.linalg.eigh(prior.D0)
    D0_inv_half = (Q / np.sqrt(w)) @ Q.T
    DM = d.reshape((n_x, n_phi), order="F") @ D0_inv_half
    theta = prior.theta_hat0.theta + DM.flatten(order="F")
    return ParameterVector(theta, n_x, prior.n_u)


def _sample_stable_systems(
    prior: PriorSet,
    n_random: int,
    rng: np.random.Generator,
    boundary_fraction: float = 1.0,
) -> list:
    """theta_hat0 plus n_random stable samples from the prior ellipsoid."""
    out = [system_from_theta(prior.theta_hat0)]
    if not out[0].is_schur():
        raise StabilityError("nominal system theta_hat0 must be Schur stable")
    attempts_cap = 100 * max(n_random, 1)
    attempts = 0
    while len(out) < n_random + 1:
        boundary = rng.uniform() < boundary_fraction
        cand = system_from_theta(_sample_prior(prior, rng, boundary))
        attempts += 1
        if cand.is_schur():
            out.append(cand)
        elif attempts >= attempts_cap:
            raise InfeasibleError(
                f"could not draw {n_random} stable prior samples in {attempts_cap} attempts"
            )
    return out


@dataclass(frozen=True)
class ScenarioConstants:
    """Sampled-max constants over the prior set (Appendix-style scenario bound)."""

    gamma_G: float
    gamma_Aw: float
    gamma_Au: float
    envelope: DecayEnvelope
    B_bar: float
    n_samples: int


def scenario_constants(
    prior: PriorSet,
    delta: float,
    beta: float,
    T: int,
    seed,
    rho_ratio: float = 0.5,
    envelope_terms: int = 200,
) -> ScenarioConstants:
    """Scenario bounds for the uncertain-system constants.

    Draws N_s = ceil((2/delta)(ln(1/beta) + 1)) samples from the prior set
    (the nominal estimate is always injected as sample 0), fits one decay
    envelope covering all of them, and maximizes the Toeplitz norm bounds and
    ||B|| over the samples.

    Returns
    -------
    ScenarioConstants
        gamma_G = B_bar C rho/(1-rho)^2, gamma_Aw = max ||A_w,i||^2,
        gamma_Au = max ||A_u,i||^2, plus the common envelope.
    """
    if not (0.0 < delta < 1.0 and 0.0 < beta < 1.0):
        raise DomainError("delta and beta must be in (0, 1)")
    n_s = int(np.ceil((2.0 / delta) * (np.log(1.0 / beta) + 1.0)))
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    # Uniform-in-volume draws from the prior ellipsoid; nominal injected first.
    systems = _sample_stable_systems(prior, n_s, rng, boundary_fraction=0.0)

    env = fit_common_envelope([s.A for s in systems], rho_ratio, envelope_terms)
    B_bar = max(float(np.linalg.norm(s.B, 2)) for s in systems)
    gamma_Aw = 0.0
    gamma_Au = 0.0
    for s in systems:
        nu, nw = toeplitz_norm_bounds(s, T, env.C, env.rho, envelope_terms)
        gamma_Au = max(gamma_Au, nu**2)
        gamma_Aw = max(gamma_Aw, nw**2)
    gamma_G = B_bar * env.C * env.rho / (1.0 - env.rho) ** 2
    return ScenarioConstants(gamma_G, gamma_Aw, gamma_Au, env, B_bar, n_s)


def gamma_V_tilde(
    prior: PriorSet,
    grid: FrequencyGrid,
    n_samples: int = 200,
    margin: float = 0.2,
    seed=0,
) -> np.ndarray:
    """Sampled transfer-uncertainty bound with V~ V~^H <= Gamma_V_tilde.

    V~_i = V(theta_i) - V(theta_hat0) over boundary and interior samples of
    the prior set.  The bound is the smallest multiple of the sample second
    moment that dominates every sampled outer product V~_i V~_i^H in the
    semidefinite order, inflated by the margin to leave headroom for
    parameters between the samples.  Shaping the bound this way matters: the
    input rows of V are parameter-independent and the state rows move very
    unevenly across directions, so a scaled identity would hand the
    uncertainty directions it cannot actually reach and can render the
    design infeasible outright.
    """
    if margin < 0.0:
        raise DomainError(f"margin must be >= 0, got {margin}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    systems = _sample_stable_systems(prior, n_samples, rng, boundary_fraction=0.5)
    V_hat = transfer_samples(systems[0], grid).stacked()
    n_phi = prior.theta_hat0.n_phi
    outers = []
    second_moment = np.zeros((n_phi, n_phi), dtype=complex)
    for s in systems[1:]:
        Vt = transfer_samples(s, grid).stacked() - V_hat
        P = Vt @ Vt.conj().T
        outers.append(P)
        second_moment += P
    second_moment /= max(len(outers), 1)
    second_moment = 0.5 * (second_moment + second_moment.conj().T)
    evals, evecs = np.linalg.eigh(second_moment)
    if evals[-1] <= 0.0:
        return np.zeros((n_phi, n_phi), dtype=complex)
    # whiten on the numerical range; sample ranges lie inside it by construction
    keep = evals > evals[-1] * 1e-12
    W = evecs[:, keep] / np.sqrt(evals[keep])
    scale = 0.0
    for P in outers:
        scale = max(scale, float(np.linalg.eigvalsh(W.conj().T @ P @ W)[-1]))
    return (1.0 + margin) * scale * second_moment


def excitation_lower_bound_check(
    decomp: SpectralDecomposition,
    V: TransferSample,
    U_e: InputSpectrum,
    eps: float,
) -> float:
    """Margin of the excitation lower bound on measured data.

    Returns eigmin of
      (1/T) Phi Phi^T - (1-eps) (V U_e)(V U_e)^H
      + (2(1-eps)/eps) (Phi_ut Phi_ut^H + Phi_w Phi_w^H),
    real part.  Nonnegative (to rounding) whenever U_e holds the measured line
    amplitudes of the decomposed trajectory.
    """
    if not (0.0 < eps < 1.0):
        raise DomainError(f"eps must be in (0, 1), got {eps}")
    P_ud = V.stacked() @ U_e.block_matrix().astype(complex)
    M = (
        decomp.phi_gram.astype(complex)
        - (1.0 - eps) * (P_ud @ P_ud.conj().T)
        + (2.0 * (1.0 - eps) / eps)
        * (decomp.phi_ut() @ decomp.phi_ut().conj().T + decomp.phi_w() @ decomp.phi_w().conj().T)
    )
    Mr = 0.5 * (M.real + M.real.T)
    return float(np.linalg.eigvalsh(Mr)[0])


@dataclass(frozen=True)
class BoundConstants:
    """Everything the exploration LMIs need, with a lazy C3.

    norm_Au and norm_Aw carry gamma_Au^{1/2}, gamma_Aw^{1/2} semantics (the
    scenario maxima, not nominal-system norms).
    """

    theta_bar: float
    C1: float
    C2: float
    gamma_w: float
    G_tr_bound: float
    norm_Au: float
    norm_Aw: float
    Gamma_u_coeff: float
    Gamma_w_mat: np.ndarray
    Gamma_V_tilde: np.ndarray
    envelope: DecayEnvelope
    sigma_w: float
    lam: float
    delta: float
    T: int
    L: int
    n_theta: int
    scenario: ScenarioConstants
    _c3: object = field(repr=False, default=None)

    def c3(self, gamma_sq: float) -> float:
        """Energy-dependent radius term C3(gamma^2)."""
        return self._c3(gamma_sq)

    def to_dict(self) -> dict:
        return {
            "theta_bar": self.theta_bar,
            "C1": self.C1,
            "C2": self.C2,
            "gamma_w": self.gamma_w,
            "G_tr_bound": self.G_tr_bound,
            "norm_Au": self.norm_Au,
            "norm_Aw": self.norm_Aw,
            "Gamma_u_coeff": self.Gamma_u_coeff,
            "Gamma_w_mat": self.Gamma_w_mat.tolist(),
            "Gamma_V_tilde": {
                "real": self.Gamma_V_tilde.real.tolist(),
                "imag": self.Gamma_V_tilde.imag.tolist(),
            },
            "envelope": {"C": self.envelope.C, "rho": self.envelope.rho},
            "sigma_w": self.sigma_w,
            "lambda": self.lam,
            "delta": self.delta,
            "T": self.T,
            "L": self.L,
            "n_theta": self.n_theta,
            "scenario": {
                "gamma_G": self.scenario.gamma_G,
                "gamma_Aw": self.scenario.gamma_Aw,
                "gamma_Au": self.scenario.gamma_Au,
                "B_bar": self.scenario.B_bar,
                "n_samples": self.scenario.n_samples,
            },
        }


def compute_bound_constants(
    prior: PriorSet,
    sigma_w: float,
    grid: FrequencyGrid,
    delta: float,
    lam: float,
    beta: float = 0.01,
    seed=0,
    rho_ratio: float = 0.5,
    v_margin: float = 0.2,
    v_samples: int = 200,
    envelope_terms: int = 200,
) -> BoundConstants:
    """Assemble all design-time constants from the prior and run parameters.

    Deterministic per seed: scenario sampling and the Gamma_V_tilde samples use
    independently spawned child streams of `seed`.
    """
    n_x = prior.n_x
    n_phi = prior.theta_hat0.n_phi
    n_theta = n_x * n_phi
    T = grid.T
    L = grid.L

    ss = np.random.SeedSequence(seed)
    scen_seed, v_seed = ss.spawn(2)
    scen = scenario_constants(
        prior, delta, beta, T, np.random.default_rng(scen_seed), rho_ratio, envelope_terms
    )
    Gv = gamma_V_tilde(prior, grid, v_samples, v_margin, np.random.default_rng(v_seed))

    tb = theta_bound(prior)
    C1 = constant_C1(sigma_w, delta, lam, n_x, n_theta)
    g_w = disturbance_gamma_w(sigma_w, T, n_x, delta)
    norm_Aw = float(np.sqrt(scen.gamma_Aw))
    norm_Au = float(np.sqrt(scen.gamma_Au))
    Gamma_u_coeff = float(4.0 * L / T * scen.gamma_G**2)
    Gamma_w_mat = disturbance_Gamma_w(norm_Aw, g_w, L, T, n_phi)
    C2, C3 = constants_C2_C3(C1, lam, tb, sigma_w, n_theta, T, norm_Aw, g_w, norm_Au)

    return BoundConstants(
        theta_bar=tb,
        C1=C1,
        C2=C2,
        gamma_w=g_w,
        G_tr_bound=scen.gamma_G,
        norm_Au=norm_Au,
        norm_Aw=norm_Aw,
        Gamma_u_coeff=Gamma_u_coeff,
        Gamma_w_mat=Gamma_w_mat,
        Gamma_V_tilde=Gv,
        envelope=scen.envelope,
        sigma_w=float(sigma_w),
        lam=float(lam),
        delta=float(delta),
        T=T,
        L=L,
        n_theta=n_theta,
        scenario=scen,
        _c3=C3,
    )
