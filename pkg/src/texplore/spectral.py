"""Spectral lines, multisine synthesis, transfer samples, and Toeplitz operators.

Conventions.  Frequencies are cycles per sample, restricted to the DFT grid
{0, 1/T, ..., (T-1)/T}; the line amplitude of a sequence is
(1/T) sum_k s_k e^{-j 2 pi omega k}.  A real cosine at an interior frequency
splits its design amplitude evenly between omega and 1 - omega, so measured
lines carry half the design amplitude except at omega in {0, 1/2}.  Design-side
accounting keeps the full amplitude (see bounds/design); validation works with
measured lines.

Toeplitz index convention.  The lower block-Toeplitz operators map inputs and
disturbances to the states x_1 .. x_T ((A_u U)_k = sum_{l<=k} A^{k-l} B u_l).
The spectral decomposition below instead windows the states x_0 .. x_{T-1}
that enter the regressors; since x_0 = 0 the windows differ by one phase
factor and a boundary column, and all operator-norm bounds transfer verbatim
(the reindexed window is the operator applied to a zero-padded sequence).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    GridError,
    ResolventError,
    ResourceError,
    StabilityError,
)
from .linmodel import SystemModel, Trajectory, build_regressors, simulate

# Explicit dense Toeplitz matrices are only sensible for small T; beyond this
# row-count budget only matrix-free actions and norm bounds are offered.
_DENSE_ROWS_MAX = 4000
_OPERATOR_ROWS_MAX = 10**5


def _ongrid_index(omega: float, T: int) -> int:
    """Return m with omega = m/T, or raise GridError."""
    if not (0.0 <= omega < 1.0):
        raise GridError(f"frequency {omega} outside [0, 1)")
    mt = omega * T
    m = int(round(mt))
    if abs(mt - m) > 1e-6:
        raise GridError(f"frequency {omega} is off the grid for T = {T}")
    return m % T


@dataclass(frozen=True)
class FrequencyGrid:
    """Experiment length T and the selected on-grid frequencies."""

    T: int
    freqs: tuple

    def __post_init__(self):
        if self.T < 1:
            raise DomainError(f"T must be >= 1, got {self.T}")
        freqs = tuple(float(w) for w in self.freqs)
        if len(freqs) == 0:
            raise GridError("at least one frequency is required")
        if len(freqs) > self.T:
            raise GridError(f"L = {len(freqs)} exceeds T = {self.T}")
        idx = [_ongrid_index(w, self.T) for w in freqs]
        if len(set(idx)) != len(idx):
            raise GridError("frequencies must be pairwise distinct")
        object.__setattr__(self, "freqs", freqs)

    @property
    def L(self) -> int:
        return len(self.freqs)

    def conjugate_completed(self) -> "FrequencyGrid":
        """Grid extended with the mirror lines 1 - omega of interior frequencies."""
        idx = {_ongrid_index(w, self.T) for w in self.freqs}
        extra = []
        for w in self.freqs:
            m = _ongrid_index(w, self.T)
            mc = (-m) % self.T
            if mc not in idx:
                idx.add(mc)
                extra.append(mc / self.T)
        return FrequencyGrid(self.T, self.freqs + tuple(extra))


@dataclass(frozen=True)
class InputSpectrum:
    """Multisine design: amplitude vector u_bar(omega_i) per grid frequency."""

    grid: FrequencyGrid
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=float)
        if amps.ndim == 1:
            amps = amps[:, None]
        if amps.ndim != 2 or amps.shape[0] != self.grid.L:
            raise DimensionError(
                f"amplitudes must have shape (L, n_u) = ({self.grid.L}, *), got {amps.shape}"
            )
        if not np.all(np.isfinite(amps)):
            raise DomainError("amplitudes contain non-finite entries")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_u(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def L(self) -> int:
        return self.grid.L

    def energy(self) -> float:
        """Design energy sum_i ||u_bar(omega_i)||^2."""
        return float(np.sum(self.amplitudes**2))

    def block_matrix(self) -> np.ndarray:
        """Block-diagonal U_e of shape (L * n_u, L), column i holding u_bar(omega_i)."""
        L, n_u = self.L, self.n_u
        U_e = np.zeros((L * n_u, L))
        for i in range(L):
            U_e[i * n_u : (i + 1) * n_u, i] = self.amplitudes[i]
        return U_e

    @staticmethod
    def from_block_matrix(grid: FrequencyGrid, U_e: np.ndarray) -> "InputSpectrum":
        """Validate block-diagonal structure and recover the per-line amplitudes."""
        U_e = np.asarray(U_e, dtype=float)
        L = grid.L
        if U_e.shape[1] != L or U_e.shape[0] % L != 0:
            raise DimensionError(f"U_e shape {U_e.shape} incompatible with L = {L}")
        n_u = U_e.shape[0] // L
        amps = np.zeros((L, n_u))
        for i in range(L):
            amps[i] = U_e[i * n_u : (i + 1) * n_u, i]
        rebuilt = InputSpectrum(grid, amps).block_matrix()
        if np.max(np.abs(rebuilt - U_e)) > 1e-10 * (1.0 + np.max(np.abs(U_e))):
            raise DimensionError("U_e is not block-diagonal")
        return InputSpectrum(grid, amps)


def _phase_vector(T: int, m: int) -> np.ndarray:
    # Exact range reduction: exp(-j 2 pi (m k mod T) / T) keeps phase error
    # independent of k, which matters once T reaches the validation cap.
    k = np.arange(T, dtype=np.int64)
    return np.exp(-2j * np.pi * ((m * k) % T) / float(T))


def spectral_amplitude(sequence: np.ndarray, omega: float) -> np.ndarray:
    """Amplitude of a spectral line: (1/T) sum_k seq_k e^{-j 2 pi omega k}.

    Parameters
    ----------
    sequence : ndarray, shape (T, d)
        Sample rows; a 1-D array is treated as d = 1.
    omega : float
        On-grid frequency in cycles per sample.

    Returns
    -------
    ndarray, shape (d,), complex
    """
    seq = np.asarray(sequence, dtype=float)
    if seq.ndim == 1:
        seq = seq[:, None]
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise DimensionError(f"sequence must be (T, d) with T >= 1, got {seq.shape}")
    T = seq.shape[0]
    m = _ongrid_index(omega, T)
    return _phase_vector(T, m) @ seq / T


def full_grid_amplitudes(sequence: np.ndarray) -> np.ndarray:
    """All T line amplitudes at once via the FFT; row n is the line at n/T."""
    seq = np.asarray(sequence, dtype=float)
    if seq.ndim == 1:
        seq = seq[:, None]
    T = seq.shape[0]
    return np.fft.fft(seq, axis=0) / T


def synth_multisine(spec: InputSpectrum) -> np.ndarray:
    """Synthesize u_k = sum_i u_bar(omega_i) cos(2 pi omega_i k), k = 0..T-1."""
    T = spec.grid.T
    k = np.arange(T, dtype=np.int64)
    U = np.zeros((T, spec.n_u))
    for w, amp in zip(spec.grid.freqs, spec.amplitudes):
        m = _ongrid_index(w, T)
        U += np.cos(2.0 * np.pi * ((m * k) % T) / float(T))[:, None] * amp
    return U


def line_weight(omega: float, T: int) -> float:
    """Measured-line fraction of a cosine's design amplitude: 1 at {0, 1/2}, else 1/2."""
    m = _ongrid_index(omega, T)
    return 1.0 if m == 0 or 2 * m == T else 0.5


@dataclass(frozen=True)
class TransferSample:
    """Steady-state regressor responses V_i = [(e^{j2pi omega_i} I - A)^{-1} B; I]."""

    grid: FrequencyGrid
    samples: tuple

    @property
    def n_phi(self) -> int:
        return self.samples[0].shape[0]

    @property
    def n_u(self) -> int:
        return self.samples[0].shape[1]

    def stacked(self) -> np.ndarray:
        """V = [V_1, ..., V_L] of shape (n_phi, L * n_u), complex."""
        return np.hstack(self.samples)


def transfer_samples(sys: SystemModel, grid: FrequencyGrid) -> TransferSample:
    """Sample the stacked frequency response at every grid frequency.

    Parameters
    ----------
    sys : SystemModel
        Must be Schur stable, which keeps the resolvent nonsingular on the
        unit circle.
    grid : FrequencyGrid

    Returns
    -------
    TransferSample
    """
    if not sys.is_schur():
        raise StabilityError(
            f"transfer samples need a Schur-stable A, spectral radius {sys.spectral_radius():.6g}"
        )
    eye = np.eye(sys.n_x)
    out = []
    for w in grid.freqs:
        z = np.exp(2j * np.pi * w)
        try:
            top = np.linalg.solve(z * eye - sys.A, sys.B.astype(complex))
        except np.linalg.LinAlgError as exc:
            raise ResolventError(f"resolvent singular at omega = {w}") from exc
        out.append(np.vstack([top, np.eye(sys.n_u, dtype=complex)]))
    return TransferSample(grid, tuple(out))


class ToeplitzOperators:
    """Causal maps from inputs/disturbances to the states x_1 .. x_T.

    (A_u U)_k = sum_{l<=k} A^{k-l} B u_l and (A_w W)_k = sum_{l<=k} A^{k-l} w_l
    for k = 0 .. T-1.  Dense matrices are available below a row budget;
    matrix-free actions and power-iteration norm estimates up to a larger
    budget; certified norm upper bounds always (via a decay envelope).
    """

    def __init__(self, sys: SystemModel, T: int):
        if T < 1:
            raise DomainError(f"T must be >= 1, got {T}")
        self.sys = sys
        self.T = int(T)

    # -- dense construction ------------------------------------------------

    def _dense(self, rhs: np.ndarray) -> np.ndarray:
        n_x = self.sys.n_x
        cols = rhs.shape[1]
        if self.T * max(n_x, cols) > _DENSE_ROWS_MAX:
            raise ResourceError(
                f"dense Toeplitz matrix with T = {self.T} exceeds the row budget "
                f"{_DENSE_ROWS_MAX}; use actions or norm bounds"
            )
        M = np.zeros((self.T * n_x, self.T * cols))
        block = rhs.copy()
        for d in range(self.T):
            for k in range(d, self.T):
                M[k * n_x : (k + 1) * n_x, (k - d) * cols : (k - d + 1) * cols] = block
            if d + 1 < self.T:
                block = self.sys.A @ block
        return M

    def au_matrix(self) -> np.ndarray:
        """Dense A_u with blocks A^{k-l} B."""
        return self._dense(self.sys.B)

    def aw_matrix(self) -> np.ndarray:
        """Dense A_w with blocks A^{k-l}."""
        return self._dense(np.eye(self.sys.n_x))

    # -- matrix-free actions ----------------------------------------------

    def _check_operator_budget(self):
        if self.T * self.sys.n_x > _OPERATOR_ROWS_MAX:
            raise ResourceError(
                f"T * n_x = {self.T * self.sys.n_x} exceeds the operator budget "
                f"{_OPERATOR_ROWS_MAX}; only certified norm bounds are available"
            )

    def au_action(self, U: np.ndarray) -> np.ndarray:
        """Apply A_u: returns the T rows sum_{l<=k} A^{k-l} B u_l."""
        self._check_operator_budget()
        U = np.asarray(U, dtype=float)
        out = np.zeros((self.T, self.sys.n_x))
        for k in range(self.T):
            out[k] = (self.sys.A @ out[k - 1] if k else 0.0) + self.sys.B @ U[k]
        return out

    def aw_action(self, W: np.ndarray) -> np.ndarray:
        """Apply A_w: returns the T rows sum_{l<=k} A^{k-l} w_l."""
        self._check_operator_budget()
        W = np.asarray(W, dtype=float)
        out = np.zeros((self.T, self.sys.n_x))
        for k in range(self.T):
            out[k] = (self.sys.A @ out[k - 1] if k else 0.0) + W[k]
        return out

    def aw_adjoint_action(self, Y: np.ndarray) -> np.ndarray:
        """Apply A_w^T: returns the T rows sum_{k>=l} (A^T)^{k-l} y_k."""
        self._check_operator_budget()
        Y = np.asarray(Y, dtype=float)
        out = np.zeros((self.T, self.sys.n_x))
        At = self.sys.A.T
        for l in range(self.T - 1, -1, -1):
            out[l] = (At @ out[l + 1] if l + 1 < self.T else 0.0) + Y[l]
        return out

    def au_adjoint_action(self, Y: np.ndarray) -> np.ndarray:
        """Apply A_u^T: rows B^T sum_{k>=l} (A^T)^{k-l} y_k."""
        return self.aw_adjoint_action(Y) @ self.sys.B

    def norm_aw_estimate(self, iters: int = 60, seed: int = 0) -> float:
        """Power-iteration estimate of ||A_w|| (converges from below)."""
        return self._power_norm(self.aw_action, self.aw_adjoint_action, self.sys.n_x, iters, seed)

    def norm_au_estimate(self, iters: int = 60, seed: int = 0) -> float:
        """Power-iteration estimate of ||A_u||."""
        return self._power_norm(self.au_action, self.au_adjoint_action, self.sys.n_u, iters, seed)

    def _power_norm(self, fwd, adj, width: int, iters: int, seed: int) -> float:
        rng = np.random.default_rng(seed)
        v = rng.normal(size=(self.T, width))
        v /= np.linalg.norm(v)
        sigma = 0.0
        for _ in range(iters):
            y = fwd(v)
            ny = np.linalg.norm(y)
            if ny == 0.0:
                return 0.0
            v = adj(y / ny)
            sigma = np.linalg.norm(v)
            if sigma == 0.0:
                return 0.0
            v /= sigma
        return float(np.sqrt(sigma * ny))


def toeplitz_norm_bounds(
    sys: SystemModel, T: int, C: float, rho: float, terms: int = 200
) -> tuple[float, float]:
    """Certified upper bounds (||A_u||, ||A_w||) from the triangle inequality.

    ||A_w|| <= sum_{k<T} ||A^k|| and ||A_u|| <= sum_{k<T} ||A^k B||; partial
    sums are explicit up to `terms` powers, the rest is closed under the decay
    envelope ||A^k|| <= C rho^k.
    """
    if not (0.0 <= rho < 1.0):
        raise DomainError(f"rho must be in [0, 1), got {rho}")
    n = int(min(T, terms))
    s_w = 0.0
    s_u = 0.0
    P = np.eye(sys.n_x)
    for k in range(n):
        s_w += np.linalg.norm(P, 2)
        s_u += np.linalg.norm(P @ sys.B, 2)
        if k + 1 < n:
            P = sys.A @ P
    if T > n:
        # Geometric tail over powers n .. T-1, truncated at infinity.
        tail = C * rho**n / (1.0 - rho)
        s_w += tail
        s_u += tail * np.linalg.norm(sys.B, 2)
    return float(s_u), float(s_w)


def build_toeplitz_operators(sys: SystemModel, T: int) -> ToeplitzOperators:
    """Construct the causal Toeplitz operator pair for horizon T."""
    return ToeplitzOperators(sys, T)


def f_matrix_norm(T: int) -> float:
    """Squared operator norm of the line-extraction matrix F: exactly 1/T."""
    if T < 1:
        raise DomainError(f"T must be >= 1, got {T}")
    return 1.0 / T


def build_f_matrix(T: int, omega: float, n_x: int) -> np.ndarray:
    """Explicit F = (1/T) [e^{-j2pi omega 0}, ..., e^{-j2pi omega (T-1)}] kron I_nx."""
    m = _ongrid_index(omega, T)
    row = _phase_vector(T, m) / T
    return np.kron(row[None, :], np.eye(n_x))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Measured line decomposition phi_bar = phi_bar_ud + phi_bar_ut + phi_bar_w.

    All quantities are per-line measured amplitudes over the window
    x_0 .. x_{T-1}: `x_ud` the steady-state response V_top u_bar, `x_ut` the
    transient remainder, `x_w` the disturbance contribution, `u_bar` the input
    lines.  `phi_gram` stores (1/T) Phi Phi^T of the source trajectory for the
    excitation checks.
    """

    grid: FrequencyGrid
    x_ud: np.ndarray
    x_ut: np.ndarray
    x_w: np.ndarray
    u_bar: np.ndarray
    phi_gram: np.ndarray

    @property
    def n_x(self) -> int:
        return self.x_ud.shape[0]

    @property
    def n_u(self) -> int:
        return self.u_bar.shape[0]

    def phi_ud(self) -> np.ndarray:
        """Stacked [x_ud; u_bar] of shape (n_phi, L)."""
        return np.vstack([self.x_ud, self.u_bar])

    def phi_ut(self) -> np.ndarray:
        """Stacked [x_ut; 0]."""
        return np.vstack([self.x_ut, np.zeros_like(self.u_bar)])

    def phi_w(self) -> np.ndarray:
        """Stacked [x_w; 0]."""
        return np.vstack([self.x_w, np.zeros_like(self.u_bar)])

    def phi_bar(self) -> np.ndarray:
        """Total measured lines [x_bar; u_bar]."""
        return self.phi_ud() + self.phi_ut() + self.phi_w()


def decompose_spectrum(
    sys: SystemModel, traj: Trajectory, grid: FrequencyGrid
) -> SpectralDecomposition:
    """Split each measured regressor line into steady, transient, and noise parts.

    The input-driven states are re-simulated with the recorded U and W = 0 (the
    causal Toeplitz action on the regressor window); the disturbance part is
    the exact remainder, so the reconstruction identity holds to rounding.

    Parameters
    ----------
    sys : SystemModel
        The system that generated `traj`.
    traj : Trajectory
        Recorded data with known W.
    grid : FrequencyGrid
        Frequencies to decompose; grid.T must equal traj.T.

    Returns
    -------
    SpectralDecomposition
    """
    if grid.T != traj.T:
        raise DimensionError(f"grid T = {grid.T} does not match trajectory T = {traj.T}")
    V = transfer_samples(sys, grid)
    Xu = simulate(sys, traj.U, "none").X
    Xw = traj.X - Xu

    L = grid.L
    x_ud = np.zeros((sys.n_x, L), dtype=complex)
    x_ut = np.zeros((sys.n_x, L), dtype=complex)
    x_w = np.zeros((sys.n_x, L), dtype=complex)
    u_bar = np.zeros((sys.n_u, L), dtype=complex)
    for i, w in enumerate(grid.freqs):
        ub = spectral_amplitude(traj.U, w)
        xu = spectral_amplitude(Xu[: traj.T], w)
        u_bar[:, i] = ub
        x_ud[:, i] = V.samples[i][: sys.n_x] @ ub
        x_ut[:, i] = xu - x_ud[:, i]
        x_w[:, i] = spectral_amplitude(Xw[: traj.T], w)

    gram = build_regressors(traj).gram() / traj.T
    return SpectralDecomposition(grid, x_ud, x_ut, x_w, u_bar, gram)


def spectrum_to_csv(decomp: SpectralDecomposition, path) -> None:
    """Write measured lines as CSV: omega,re_1,im_1,... per regressor entry."""
    phi = decomp.phi_bar()
    n_phi = phi.shape[0]
    header = ["omega"]
    for i in range(n_phi):
        header += [f"re_{i + 1}", f"im_{i + 1}"]
    lines = [",".join(header)]
    for i, w in enumerate(decomp.grid.freqs):
        cells = [repr(w)]
        for v in phi[:, i]:
            cells += [repr(float(v.real)), repr(float(v.imag))]
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
