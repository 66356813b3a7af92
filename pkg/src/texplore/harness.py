"""Run configuration, the four pipeline commands, and file persistence.

The config is one JSON document (optionally expanded from the built-in
"paper_example" preset) holding the true system, the prior, the frequency
grid, the design parameters, and validation/sweep settings.  Commands write
versioned JSON/CSV artifacts atomically into the output directory:

  design    -> design.json, design.txt
  validate  -> validation.csv, validation.json
  sweep     -> sweep.csv
  constants -> constants.json

Validation simulates, so it is capped at T <= 10^6; the large-T studies are
design-only.
"""

from __future__ import annotations

import copy
import dataclasses
import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .bounds import compute_bound_constants, disturbance_gamma_w, excitation_lower_bound_check
from .design import (DesignResult, DesignSpec, assemble_exploration_program,
                     run_algorithm_1)
from .errors import ConfigError, DataError, InfeasibleError, NumericalError
from .estimation import (confidence_ellipsoid, ellipsoid_contains, goal_satisfied,
                         radius_R, rls_estimate)
from .linmodel import (PriorSet, SystemModel, build_regressors, pack_theta,
                       prior_from_dict, simulate, system_from_theta, theta_bound,
                       validate_true_system)
from .sdp import SolverOptions, verify
from .spectral import (FrequencyGrid, InputSpectrum, line_weight, synth_multisine,
                       transfer_samples, decompose_spectrum)

SCHEMA_VERSION = 1
_VALIDATE_T_MAX = 10**6

_TOP_KEYS = {"schema_version", "preset", "seed", "out", "system", "prior",
             "grid", "design", "validation", "sweep"}


def _paper_example() -> dict:
    """The three-state chain benchmark with five low frequencies."""
    A = [[0.49, 0.49, 0.0], [0.0, 0.49, 0.49], [0.0, 0.0, 0.49]]
    B = [[0.0], [0.0], [0.49]]
    theta0 = pack_theta(np.asarray(A), np.asarray(B)).theta + 4e-4
    return {
        "system": {"A": A, "B": B, "sigma_w": 0.01},
        "prior": {"theta_hat0": theta0.tolist(), "D0": 1e3},
        "grid": {"T": 10**12, "freqs": [0.0, 0.1, 0.2, 0.3, 0.4]},
        "design": {
            "D_des": 1e-4,
            "eps": 0.5,
            "lambda": 1.0,
            "delta": 0.05,
            "beta": 0.01,
            "tol": 1e-3,
            "max_outer": 20,
        },
        "validation": {"replicas": 200, "noise": "gaussian"},
        "sweep": {"T_list": [10**p for p in range(10, 16)], "ratio": 1e-10},
    }


_PRESETS = {"paper_example": _paper_example}


@dataclass(frozen=True)
class RunConfig:
    system: SystemModel
    prior: PriorSet
    spec: DesignSpec
    noise_kind: str = "gaussian"
    replicas: int = 200
    seed: int = 0
    out_dir: str = "."
    sweep_T: tuple = ()
    sweep_ratio: float = 1e-10

    def nominal_system(self) -> SystemModel:
        """Prior-center system the design linearizes around."""
        return system_from_theta(self.prior.theta_hat0, sigma_w=self.system.sigma_w)


def _square_or_scaled_identity(value, n: int, name: str) -> np.ndarray:
    if np.isscalar(value):
        return float(value) * np.eye(n)
    M = np.asarray(value, dtype=float)
    if M.shape != (n, n):
        raise ConfigError(f"{name} must be a scalar or {n}x{n} matrix, got shape {M.shape}")
    return M


def _section(d: dict, key: str) -> dict:
    sec = d.get(key)
    if not isinstance(sec, dict):
        raise ConfigError(f"config section {key!r} is missing or not an object")
    return sec


def config_from_dict(d: dict) -> RunConfig:
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    sys_d = _section(d, "system")
    try:
        system = SystemModel(
            A=np.asarray(sys_d["A"], dtype=float),
            B=np.asarray(sys_d["B"], dtype=float),
            sigma_w=float(sys_d.get("sigma_w", 0.0)),
        )
    except KeyError as e:
        raise ConfigError(f"system section missing key {e}")

    prior_d = _section(d, "prior")
    if "theta_hat0" not in prior_d or "D0" not in prior_d:
        raise ConfigError("prior section needs theta_hat0 and D0")
    prior = prior_from_dict(
        {
            "theta_hat0": prior_d["theta_hat0"],
            "D0": _square_or_scaled_identity(prior_d["D0"], system.n_phi, "D0").tolist(),
        },
        system.n_x,
        system.n_u,
    )

    grid_d = _section(d, "grid")
    try:
        T = int(grid_d["T"])
        freqs = tuple(float(w) for w in grid_d["freqs"])
    except KeyError as e:
        raise ConfigError(f"grid section missing key {e}")
    grid = FrequencyGrid(T, freqs)

    des = _section(d, "design")
    solver_d = des.get("solver", {})
    solver = SolverOptions(
        feas_tol=float(solver_d.get("feas_tol", 1e-8)),
        gap_tol=float(solver_d.get("gap_tol", 1e-8)),
        max_iters=int(solver_d.get("max_iters", 200)),
    )
    U0 = des.get("U_tilde0")
    try:
        spec = DesignSpec(
            grid=grid,
            D_des=_square_or_scaled_identity(des["D_des"], system.n_phi, "D_des"),
            eps=float(des["eps"]),
            lam=float(des.get("lambda", 1.0)),
            delta=float(des["delta"]),
            beta=float(des.get("beta", 0.01)),
            tol=float(des.get("tol", 1e-3)),
            max_outer=int(des.get("max_outer", 20)),
            gamma_bar0=None if des.get("gamma_bar0") is None else float(des["gamma_bar0"]),
            U_tilde0=None if U0 is None else np.asarray(U0, dtype=float),
            rho_ratio=float(des.get("rho_ratio", 0.5)),
            v_margin=float(des.get("v_margin", 0.2)),
            v_samples=int(des.get("v_samples", 200)),
            envelope_terms=int(des.get("envelope_terms", 200)),
            solver=solver,
        )
    except KeyError as e:
        raise ConfigError(f"design section missing key {e}")

    val = d.get("validation", {})
    sweep = d.get("sweep", {})
    noise_kind = str(val.get("noise", "gaussian"))
    if noise_kind not in ("gaussian", "uniform", "none"):
        raise ConfigError(f"unknown noise kind {noise_kind!r}")
    return RunConfig(
        system=system,
        prior=prior,
        spec=spec,
        noise_kind=noise_kind,
        replicas=int(val.get("replicas", 200)),
        seed=int(d.get("seed", 0)),
        out_dir=str(d.get("out", ".")),
        sweep_T=tuple(int(t) for t in sweep.get("T_list", ())),
        sweep_ratio=float(sweep.get("ratio", 1e-10)),
    )


def load_config(path=None, preset=None, seed=None, out_dir=None, replicas=None) -> RunConfig:
    """Read a JSON config and expand the preset, with CLI overrides last.

    Explicit config values override preset values section by section; the
    seed/out/replicas arguments (the CLI flags) override both.
    """
    data = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
    preset_name = preset or data.get("preset")
    if preset_name is not None and preset_name not in _PRESETS:
        raise ConfigError(f"unknown preset {preset_name!r}")
    if preset_name is None and not data:
        raise ConfigError("no config given: provide --config and/or --preset")

    merged = copy.deepcopy(_PRESETS[preset_name]()) if preset_name else {}
    for key, value in data.items():
        if key == "preset":
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key].update(value)
        else:
            merged[key] = value

    if seed is not None:
        merged["seed"] = seed
    if out_dir is not None:
        merged["out"] = out_dir
    if replicas is not None:
        merged.setdefault("validation", {})
        merged["validation"]["replicas"] = replicas
    return config_from_dict(merged)


# -- persistence -----------------------------------------------------------


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.remove(tmp)
        except OSError:
            pass
        raise


def _write_json(path: str, doc: dict) -> None:
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


# -- design ----------------------------------------------------------------


def _trace_rows_jsonable(trace) -> list:
    rows = []
    for row in trace:
        r = dict(row)
        if "min_eigs" in r:
            r["min_eigs"] = [float(v) for v in r["min_eigs"]]
        rows.append(r)
    return rows


def design_document(cfg: RunConfig, res: DesignResult) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "T": cfg.spec.grid.T,
        "freqs": list(cfg.spec.grid.freqs),
        "n_u": cfg.system.n_u,
        "amplitudes": res.spectrum.amplitudes.tolist(),
        "gamma_e": res.gamma_e,
        "gamma_e_sq": res.gamma_e**2,
        "tau": res.tau,
        "gamma_bar": res.gamma_bar,
        "x": res.solution.x.tolist(),
        "converged": res.converged,
        "certified": res.certified,
        "n_outer": res.n_outer,
        "trace": _trace_rows_jsonable(res.trace),
        "constants": res.constants.to_dict(),
    }


def _design_summary_text(doc: dict) -> str:
    lines = [
        "exploration design",
        f"  T = {doc['T']}, L = {len(doc['freqs'])} lines, seed = {doc['seed']}",
        f"  gamma_e = {doc['gamma_e']:.6g}  (energy bound gamma_e^2 = {doc['gamma_e_sq']:.6g})",
        f"  tau = {doc['tau']:.6g}, trust region gamma_bar = {doc['gamma_bar']:.6g}",
        f"  outer iterations: {doc['n_outer']}, converged: {doc['converged']}, "
        f"certified: {doc['certified']}",
        "  amplitudes per frequency:",
    ]
    for w, amp in zip(doc["freqs"], doc["amplitudes"]):
        pretty = ", ".join(f"{a:.6g}" for a in amp)
        lines.append(f"    omega = {w}: [{pretty}]")
    return "\n".join(lines) + "\n"


def cmd_design(cfg: RunConfig) -> dict:
    """Run the full design and persist design.json plus a text summary."""
    res = run_algorithm_1(cfg.spec, cfg.prior, cfg.nominal_system(), seed=cfg.seed)
    doc = design_document(cfg, res)
    _write_json(os.path.join(cfg.out_dir, "design.json"), doc)
    _atomic_write(os.path.join(cfg.out_dir, "design.txt"), _design_summary_text(doc))
    return doc


# -- validation ------------------------------------------------------------


def _measured_spectrum(spec_in: InputSpectrum) -> InputSpectrum:
    """Per-line measured amplitudes of the synthesized cosines.

    A cosine at an interior frequency places half its design amplitude on
    omega and half on the mirror line 1 - omega; the lines at 0 and 1/2 keep
    the full amplitude.  Returned on the conjugate-completed grid.
    """
    grid = spec_in.grid
    T = grid.T
    grid_c = grid.conjugate_completed()
    index = {round(w * T) % T: i for i, w in enumerate(grid.freqs)}
    amps = np.zeros((grid_c.L, spec_in.n_u))
    for i, w in enumerate(grid_c.freqs):
        m = round(w * T) % T
        if m in index:
            amps[i] = spec_in.amplitudes[index[m]] * line_weight(w, T)
        else:
            amps[i] = spec_in.amplitudes[index[(-m) % T]] * 0.5
    return InputSpectrum(grid_c, amps)


def reverify_design(cfg: RunConfig, doc: dict):
    """Rebuild the design SDP from a loaded document and re-check feasibility.

    The program is linearized at the stored amplitudes; the relaxation is
    exact there, so feasibility of the stored point certifies the design.
    Returns (InputSpectrum, verification report).
    """
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise DataError(f"design file schema_version {doc.get('schema_version')!r} unsupported")
    grid = cfg.spec.grid
    if int(doc["T"]) != grid.T or tuple(doc["freqs"]) != tuple(grid.freqs):
        raise ConfigError("design file grid does not match the config grid")
    amps = np.asarray(doc["amplitudes"], dtype=float)
    spec_in = InputSpectrum(grid, amps)
    consts = compute_bound_constants(
        cfg.prior, cfg.system.sigma_w, grid, cfg.spec.delta, cfg.spec.lam,
        beta=cfg.spec.beta, seed=int(doc["seed"]), rho_ratio=cfg.spec.rho_ratio,
        v_margin=cfg.spec.v_margin, v_samples=cfg.spec.v_samples,
        envelope_terms=cfg.spec.envelope_terms,
    )
    nominal = cfg.nominal_system()
    V_hat = transfer_samples(nominal, grid).stacked()
    prog = assemble_exploration_program(
        spec_in, V_hat, consts, float(doc["gamma_bar"]), cfg.spec.eps, cfg.spec.D_des
    )
    report = verify(prog, np.asarray(doc["x"], dtype=float), feas_tol=cfg.spec.solver.feas_tol)
    return spec_in, report


def cmd_validate(cfg: RunConfig, design_path=None) -> dict:
    """Monte Carlo check of the guarantee chain on a stored design.

    Per replica: synthesize the multisine, simulate the true system, estimate,
    and evaluate the accuracy goal; also tracks ellipsoid containment of the
    true parameter, the disturbance-energy event, and the measured excitation
    margin.  Writes validation.csv (one row per replica) and validation.json.
    """
    grid = cfg.spec.grid
    if grid.T > _VALIDATE_T_MAX:
        raise ConfigError(
            f"validation simulates the full horizon and is capped at T = {_VALIDATE_T_MAX}; "
            f"this config has T = {grid.T}.  Use cmd_design/cmd_sweep for large-T studies."
        )
    validate_true_system(cfg.system)

    path = design_path or os.path.join(cfg.out_dir, "design.json")
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    spec_in, report = reverify_design(cfg, doc)
    if not report["feasible"]:
        err = InfeasibleError("stored design fails independent re-verification")
        err.margins = {f"block{i}": m for i, m in enumerate(report["min_eigs"])}
        raise err

    theta_tr = pack_theta(cfg.system.A, cfg.system.B)
    tb = theta_bound(cfg.prior)
    gamma_w = disturbance_gamma_w(cfg.system.sigma_w, grid.T, cfg.system.n_x, cfg.spec.delta)
    U_time = synth_multisine(spec_in)
    spec_c = _measured_spectrum(spec_in)
    V_c = transfer_samples(cfg.system, spec_c.grid)

    children = np.random.SeedSequence([cfg.seed, 1]).spawn(cfg.replicas)
    rows = []
    for r, child in enumerate(children):
        traj = simulate(cfg.system, U_time, cfg.noise_kind, seed=child)
        phi = build_regressors(traj)
        theta_hat, exc = rls_estimate(phi, traj.X[1:], cfg.spec.lam)
        goal_ok = goal_satisfied(theta_hat, theta_tr, cfg.spec.D_des)
        R = radius_R(exc, cfg.system.sigma_w, cfg.spec.delta)
        ell = confidence_ellipsoid(theta_hat, exc, cfg.system.sigma_w, cfg.spec.delta, tb)
        contain_ok = ellipsoid_contains(ell, theta_tr)
        noise_ok = float(np.sum(traj.W**2)) <= gamma_w
        decomp = decompose_spectrum(cfg.system, traj, spec_c.grid)
        margin = excitation_lower_bound_check(decomp, V_c, spec_c, cfg.spec.eps)
        rows.append({
            "replica": r,
            "goal_ok": int(goal_ok),
            "contain_ok": int(contain_ok),
            "noise_ok": int(noise_ok),
            "radius_sq": R,
            "logdet": exc.Dbar_T_logdet,
            "excitation_margin": margin,
        })

    n = max(len(rows), 1)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "replicas": len(rows),
        "T": grid.T,
        "noise": cfg.noise_kind,
        "success_rate": sum(r["goal_ok"] for r in rows) / n,
        "containment_rate": sum(r["contain_ok"] for r in rows) / n,
        "noise_bound_rate": sum(r["noise_ok"] for r in rows) / n,
        "min_excitation_margin": min((r["excitation_margin"] for r in rows), default=0.0),
        "gamma_w": gamma_w,
    }
    header = "replica,goal_ok,contain_ok,noise_ok,radius_sq,logdet,excitation_margin"
    lines = [f"# schema_version={SCHEMA_VERSION}", header]
    for r in rows:
        lines.append(",".join(repr(r[k]) if isinstance(r[k], float) else str(r[k])
                              for k in header.split(",")))
    _atomic_write(os.path.join(cfg.out_dir, "validation.csv"), "\n".join(lines) + "\n")
    _write_json(os.path.join(cfg.out_dir, "validation.json"), summary)
    return summary


# -- sweep -----------------------------------------------------------------

SWEEP_HEADER = "T,Ddes_norm,gamma_e_sq,T_gamma_e_sq,iters,status"


def cmd_sweep(cfg: RunConfig, T_list=None, ratio=None) -> list:
    """Design-only horizon sweep with proportional accuracy scaling.

    D_des(T) = ratio * T * (D_base / ||D_base||), so the demanded accuracy
    grows linearly with the horizon.  One row per T, sorted; infeasible
    points are recorded and the sweep continues.  Writes sweep.csv.
    """
    Ts = tuple(int(t) for t in (T_list if T_list is not None else cfg.sweep_T))
    if not Ts:
        raise ConfigError("sweep requires a nonempty T_list (config sweep.T_list)")
    rho = float(ratio if ratio is not None else cfg.sweep_ratio)
    if rho <= 0.0:
        raise ConfigError(f"sweep ratio must be positive, got {rho}")
    D_base = np.asarray(cfg.spec.D_des, dtype=float)
    base_norm = float(np.linalg.norm(D_base, 2))
    if base_norm <= 0.0:
        raise ConfigError("sweep needs a nonzero D_des to set the scaling direction")
    direction = D_base / base_norm

    nominal = cfg.nominal_system()
    rows = []
    for T in sorted(set(Ts)):
        grid_T = FrequencyGrid(T, cfg.spec.grid.freqs)
        spec_T = dataclasses.replace(cfg.spec, grid=grid_T, D_des=rho * T * direction)
        row = {"T": T, "Ddes_norm": rho * T, "gamma_e_sq": None,
               "T_gamma_e_sq": None, "iters": 0, "status": ""}
        try:
            res = run_algorithm_1(spec_T, cfg.prior, nominal, seed=cfg.seed)
            row["gamma_e_sq"] = res.gamma_e**2
            row["T_gamma_e_sq"] = T * res.gamma_e**2
            row["iters"] = res.n_outer
            if res.converged and res.certified:
                row["status"] = "ok"
            elif not res.converged:
                row["status"] = "max_outer"
            else:
                row["status"] = "uncertified"
        except InfeasibleError:
            row["status"] = "infeasible"
        except NumericalError:
            row["status"] = "numerical"
        rows.append(row)

    lines = [f"# schema_version={SCHEMA_VERSION}", SWEEP_HEADER]
    for row in rows:
        cells = [str(row["T"]), repr(float(row["Ddes_norm"]))]
        for key in ("gamma_e_sq", "T_gamma_e_sq"):
            cells.append("" if row[key] is None else repr(float(row[key])))
        cells += [str(row["iters"]), row["status"]]
        lines.append(",".join(cells))
    _atomic_write(os.path.join(cfg.out_dir, "sweep.csv"), "\n".join(lines) + "\n")
    return rows


# -- constants audit -------------------------------------------------------

_PROVENANCE = {
    "theta_bar": "analytic",
    "C1": "analytic",
    "C2": "analytic",
    "gamma_w": "analytic",
    "sigma_w": "config",
    "lambda": "config",
    "delta": "config",
    "T": "config",
    "L": "config",
    "n_theta": "config",
    "G_tr_bound": "scenario",
    "norm_Au": "scenario",
    "norm_Aw": "scenario",
    "Gamma_u_coeff": "scenario",
    "Gamma_w_mat": "analytic gamma_w x scenario norm_Aw",
    "Gamma_V_tilde": "scenario",
    "envelope": "scenario",
}


def cmd_constants(cfg: RunConfig) -> dict:
    """Compute and persist the full constants audit for the configured run."""
    consts = compute_bound_constants(
        cfg.prior, cfg.system.sigma_w, cfg.spec.grid, cfg.spec.delta, cfg.spec.lam,
        beta=cfg.spec.beta, seed=cfg.seed, rho_ratio=cfg.spec.rho_ratio,
        v_margin=cfg.spec.v_margin, v_samples=cfg.spec.v_samples,
        envelope_terms=cfg.spec.envelope_terms,
    )
    doc = {
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "beta": cfg.spec.beta,
        "n_scenario_samples": consts.scenario.n_samples,
        "values": consts.to_dict(),
        "provenance": _PROVENANCE,
    }
    _write_json(os.path.join(cfg.out_dir, "constants.json"), doc)
    return doc
