"""Dense LMI blocks and a small deterministic interior-point SDP solver.

Solves minimize c^T x subject to F0_b + sum_i x_i F_{b,i} >= 0 for a handful
of dense symmetric blocks.  The algorithm is primal barrier path-following:
damped Newton centering on t c^T x - sum_b log det F_b(x) with t increased
tenfold per stage, preceded by a Phase-I stage that minimizes a uniform slack
s over F_b(x) + s I >= 0 to find a strictly feasible start (or prove there is
none).  Everything is plain numpy/scipy with fixed schedules, so identical
inputs produce identical outputs.

Problem sizes here are tiny (blocks up to ~100, up to ~50 variables), which
is why the implementation favors clarity over sparsity or scaling tricks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DataError, DimensionError, NumericalError


def _check_symmetric(M: np.ndarray, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DataError(f"{name} contains non-finite entries")
    scale = 1.0 + float(np.max(np.abs(M)))
    if float(np.max(np.abs(M - M.T))) > 1e-12 * scale:
        raise DataError(f"{name} is not symmetric to tolerance")
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class LmiBlock:
    """Affine matrix constraint F0 + sum_i x_i Fi[i] >= 0."""

    F0: np.ndarray
    Fi: tuple
    name: str = ""

    def __post_init__(self):
        F0 = _check_symmetric(self.F0, f"F0[{self.name}]")
        m = F0.shape[0]
        Fi = []
        for i, F in enumerate(self.Fi):
            F = _check_symmetric(F, f"Fi[{i}][{self.name}]")
            if F.shape[0] != m:
                raise DimensionError(
                    f"block {self.name!r}: Fi[{i}] is {F.shape[0]}x{F.shape[0]}, F0 is {m}x{m}"
                )
            Fi.append(F)
        object.__setattr__(self, "F0", F0)
        object.__setattr__(self, "Fi", tuple(Fi))

    @property
    def m(self) -> int:
        return self.F0.shape[0]

    @property
    def n_vars(self) -> int:
        return len(self.Fi)

    def value(self, x: np.ndarray) -> np.ndarray:
        F = self.F0.copy()
        for xi, Fi in zip(x, self.Fi):
            if xi != 0.0:
                F += xi * Fi
        return F


@dataclass(frozen=True)
class ConicProgram:
    """minimize c^T x over the intersection of the blocks' PSD constraints."""

    c: np.ndarray
    blocks: tuple
    var_names: tuple = ()

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if not np.all(np.isfinite(c)):
            raise DataError("objective c contains non-finite entries")
        blocks = tuple(self.blocks)
        if not blocks:
            raise DimensionError("at least one block is required")
        for b in blocks:
            if b.n_vars != c.size:
                raise DimensionError(
                    f"block {b.name!r} has {b.n_vars} coefficient matrices, c has {c.size}"
                )
        names = tuple(self.var_names) if self.var_names else tuple(
            f"x{i}" for i in range(c.size)
        )
        if len(names) != c.size:
            raise DimensionError("var_names length does not match c")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "var_names", names)

    @property
    def n_vars(self) -> int:
        return self.c.size

    def total_degree(self) -> int:
        """Sum of block sizes: the barrier parameter of the feasible cone."""
        return sum(b.m for b in self.blocks)


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iters: int = 200


@dataclass(frozen=True)
class Solution:
    x: np.ndarray
    objective: float
    status: str
    min_eig_per_block: tuple
    duality_gap: float
    iterations: tuple = field(default=())
    message: str = ""


def hermitian_embed(H: np.ndarray) -> np.ndarray:
    """Real symmetric embedding [[Re H, -Im H], [Im H, Re H]] of a Hermitian H.

    H >= 0 iff the embedding >= 0; eigenvalues are those of H with doubled
    multiplicity.
    """
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError(f"H must be square, got shape {H.shape}")
    scale = 1.0 + float(np.max(np.abs(H))) if H.size else 1.0
    if float(np.max(np.abs(H - H.conj().T))) > 1e-10 * scale:
        raise DataError("H is not Hermitian to tolerance")
    Hr = 0.5 * (H + H.conj().T)
    R, Im = Hr.real, Hr.imag
    E = np.block([[R, -Im], [Im, R]])
    return 0.5 * (E + E.T)


# -- interior-point machinery ---------------------------------------------


def _try_chol(M: np.ndarray):
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return None


def _neg_logdet_sum(blocks, x):
    """-sum_b log det F_b(x), or None if any block is not positive definite."""
    total = 0.0
    for b in blocks:
        L = _try_chol(b.value(x))
        if L is None:
            return None
        total -= 2.0 * float(np.sum(np.log(np.diag(L))))
    return total


def _strictly_feasible(blocks, x) -> bool:
    return all(_try_chol(b.value(x)) is not None for b in blocks)


def _barrier_grad_hess(blocks, x, n):
    """Gradient and Hessian of -sum_b log det F_b(x)."""
    g = np.zeros(n)
    H = np.zeros((n, n))
    for b in blocks:
        L = _try_chol(b.value(x))
        if L is None:
            return None, None
        m = b.m
        S = np.empty((n, m * m))
        for i in range(n):
            Y = scipy.linalg.solve_triangular(L, b.Fi[i], lower=True, check_finite=False)
            Si = scipy.linalg.solve_triangular(L, Y.T, lower=True, check_finite=False).T
            g[i] -= float(np.trace(Si))
            S[i] = (0.5 * (Si + Si.T)).ravel()
        H += S @ S.T
    return g, H


def _newton_direction(H, g):
    n = H.shape[0]
    base = max(float(np.trace(H)) / max(n, 1), 1.0)
    jitter = 0.0
    for _ in range(8):
        try:
            cf = scipy.linalg.cho_factor(
                H + jitter * np.eye(n) if jitter else H, lower=True, check_finite=False
            )
            return scipy.linalg.cho_solve(cf, -g, check_finite=False)
        except (scipy.linalg.LinAlgError, np.linalg.LinAlgError):
            jitter = 1e-14 * base if jitter == 0.0 else jitter * 100.0
    return None


def _center(blocks, c_t, x, budget, early_stop=None, ctol=1e-4):
    """Damped Newton minimization of c_t^T x - sum log det F_b(x).

    Stops once the squared Newton decrement drops to ctol: that is well
    inside the quadratic zone, and demanding more runs into rounding noise
    when the objective weight is large.  Returns (x, steps_used, note) with
    note in {"centered", "stalled", "budget", "numerical", "early"}.
    """
    n = x.size

    def f(z):
        bar = _neg_logdet_sum(blocks, z)
        return None if bar is None else float(c_t @ z) + bar

    steps = 0
    while steps < budget:
        if early_stop is not None and early_stop(x):
            return x, steps, "early"
        g_bar, H = _barrier_grad_hess(blocks, x, n)
        if g_bar is None:
            return x, steps, "numerical"
        g = c_t + g_bar
        d = _newton_direction(H, g)
        if d is None:
            return x, steps, "numerical"
        lam2 = float(-g @ d)
        if lam2 <= ctol:
            return x, steps, "centered"
        fx = f(x)
        gd = float(g @ d)
        step = 1.0
        accepted = False
        for _ in range(80):
            xn = x + step * d
            fn = f(xn)
            if fn is not None and fn <= fx + 0.01 * step * gd:
                x = xn
                accepted = True
                break
            step *= 0.5
        steps += 1
        if not accepted:
            return x, steps, "stalled"
    return x, steps, "budget"


def _phase1(prog: ConicProgram, opts: SolverOptions, hint=None):
    """Find a strictly feasible point, or report per-block margins of failure.

    Returns (x, None) on success, (None, margins) when no strict interior was
    found; margins maps block names to the best minimum eigenvalues seen.  A
    hint seeds the search near a point believed to be close to feasible.
    """
    n = prog.n_vars

    # Augmented program in (x, s): every block gains + s I, plus floor s >= -1.
    aug_blocks = []
    for b in prog.blocks:
        Fi = list(b.Fi) + [np.eye(b.m)]
        aug_blocks.append(LmiBlock(b.F0, tuple(Fi), name=b.name))
    floor = LmiBlock(
        np.array([[1.0]]), tuple([np.zeros((1, 1))] * n + [np.array([[1.0]])]), name="_phase1_floor"
    )
    aug_blocks.append(floor)

    x_init = np.zeros(n)
    if hint is not None:
        cand = np.asarray(hint, dtype=float).reshape(-1)
        if cand.size == n and np.all(np.isfinite(cand)):
            x_init = cand
    s0 = 1.0 if hint is None else 1e-8
    for b in prog.blocks:
        w0 = float(np.linalg.eigvalsh(b.value(x_init))[0])
        s0 = max(s0, 1e-8 - w0 + 0.1 * abs(w0))
    z = np.concatenate([x_init, [s0]])

    c_dir = np.zeros(n + 1)
    c_dir[-1] = 1.0
    m_total = sum(b.m for b in aug_blocks)
    t = 1.0
    newton_budget = max(300, opts.max_iters)
    used_total = 0

    # Success is judged per block by Cholesky, never by the magnitude of s:
    # blocks on very different scales would otherwise demand an interior depth
    # the narrow ones cannot supply.
    def good_enough(zz):
        return zz[-1] < 0.0 and _strictly_feasible(prog.blocks, zz[:n])

    for _ in range(60):
        z, used, note = _center(aug_blocks, t * c_dir, z, newton_budget - used_total, early_stop=good_enough)
        used_total += used
        if good_enough(z):
            return z[:n], None
        if note == "numerical" or used_total >= newton_budget:
            break
        gap = m_total / t
        if z[-1] - gap > 0.0:
            break  # optimal s provably positive: no strict interior exists
        if gap <= 1e-12 * (1.0 + abs(z[-1])):
            break
        t *= 10.0

    margins = {}
    for b in prog.blocks:
        margins[b.name or f"block{len(margins)}"] = float(np.linalg.eigvalsh(b.value(z[:n]))[0])
    return None, margins


def solve(prog: ConicProgram, options: SolverOptions | None = None,
          x0=None) -> Solution:
    """Minimize c^T x over the program's PSD blocks.

    Parameters
    ----------
    prog : ConicProgram
    options : SolverOptions
    x0 : array, optional
        Warm start.  Used directly when it is strictly feasible, otherwise it
        seeds the Phase-I search.
        feas_tol and gap_tol are relative (scaled by 1 + matrix norm and
        1 + |objective| respectively); max_iters bounds the total number of
        Newton steps in the path-following phase.

    Returns
    -------
    Solution
        status "optimal" with x, the objective, per-block minimum eigenvalues,
        an upper bound on the duality gap, and the per-stage iteration log;
        "infeasible" when Phase-I finds no strict interior (margins in
        `message`); "max_iters" or "numerical" on breakdown.
    """
    opts = options or SolverOptions()
    n = prog.n_vars

    warm = None
    if x0 is not None:
        cand = np.asarray(x0, dtype=float).reshape(-1)
        if cand.size == n and np.all(np.isfinite(cand)) and _strictly_feasible(prog.blocks, cand):
            warm = cand
    if warm is None:
        warm, margins = _phase1(prog, opts, hint=x0)
    if warm is None:
        worst = min(margins, key=margins.get) if margins else ""
        return Solution(
            x=np.zeros(n),
            objective=float("nan"),
            status="infeasible",
            min_eig_per_block=tuple(margins.get(b.name or f"block{i}", float("nan"))
                                    for i, b in enumerate(prog.blocks)),
            duality_gap=float("inf"),
            iterations=(),
            message=f"no strictly feasible point; worst block {worst!r} with margin {margins.get(worst)}",
        )

    x = warm
    m_total = prog.total_degree()
    t = 1.0
    trace = []
    used_total = 0
    status = "max_iters"
    message = ""
    gap = float("inf")
    for _ in range(60):
        x, used, note = _center(prog.blocks, t * prog.c, x, opts.max_iters - used_total)
        used_total += used
        obj = float(prog.c @ x)
        gap = m_total / t
        trace.append({"t": t, "objective": obj, "gap": gap, "newton_steps": used})
        if note == "numerical":
            status = "numerical"
            message = "Newton system breakdown"
            break
        if gap <= opts.gap_tol * (1.0 + abs(obj)):
            status = "optimal"
            break
        if used_total >= opts.max_iters:
            status = "max_iters"
            message = f"Newton budget {opts.max_iters} exhausted at gap {gap:.3g}"
            break
        t *= 10.0

    min_eigs = tuple(float(np.linalg.eigvalsh(b.value(x))[0]) for b in prog.blocks)
    return Solution(
        x=x,
        objective=float(prog.c @ x),
        status=status,
        min_eig_per_block=min_eigs,
        duality_gap=float(gap),
        iterations=tuple(trace),
        message=message,
    )


def find_strictly_feasible(prog: ConicProgram, options: SolverOptions | None = None):
    """Phase-I only: a strictly feasible x, or (None, per-block margins)."""
    opts = options or SolverOptions()
    return _phase1(prog, opts)


def verify(prog: ConicProgram, x: np.ndarray, feas_tol: float = 1e-8) -> dict:
    """Independent feasibility check of a candidate point.

    Uses scipy's eigensolver (distinct from the solver's internal routine) and
    judges each block against -feas_tol * (1 + ||block||).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != prog.n_vars:
        raise DimensionError(f"x has {x.size} entries, program has {prog.n_vars}")
    min_eigs = []
    feasible = True
    for b in prog.blocks:
        w = scipy.linalg.eigh(b.value(x), eigvals_only=True, check_finite=False)
        scale = 1.0 + float(np.max(np.abs(w)))
        min_eigs.append(float(w[0]))
        if w[0] < -feas_tol * scale:
            feasible = False
    return {
        "min_eigs": min_eigs,
        "objective": float(prog.c @ x),
        "feasible": bool(feasible),
    }


def program_to_dict(prog: ConicProgram) -> dict:
    """Dense row-major JSON-ready dump for debugging and cross-solver checks."""
    return {
        "c": prog.c.tolist(),
        "var_names": list(prog.var_names),
        "blocks": [
            {"name": b.name, "F0": b.F0.tolist(), "Fi": [F.tolist() for F in b.Fi]}
            for b in prog.blocks
        ],
    }


def program_from_dict(d: dict) -> ConicProgram:
    blocks = tuple(
        LmiBlock(
            np.asarray(bd["F0"], dtype=float),
            tuple(np.asarray(F, dtype=float) for F in bd["Fi"]),
            name=bd.get("name", ""),
        )
        for bd in d["blocks"]
    )
    return ConicProgram(np.asarray(d["c"], dtype=float), blocks, tuple(d.get("var_names", ())))
