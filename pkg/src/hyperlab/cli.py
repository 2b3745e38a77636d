"""Command-line entry point: ``hyperlab {solve,spectrum,energy,verify,sweep}``."""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import energy as en
from . import io
from . import spectral as sp
from . import verify as vf
from .config import RunConfig, dump_config, load_config
from .errors import (
    BracketError,
    ConfigurationError,
    HyperlabError,
    IndeterminateError,
    RadiusError,
    ResolutionError,
    StiffnessError,
)
from .groundstate import RadialProfile, ShootingOptions, decay_rate, find_ground_state, residual_norm, solve_ball
from .ode import ProblemParams, validate_params

log = logging.getLogger("hyperlab")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BRACKET = 2
EXIT_HORIZON = 3
EXIT_CONFIG = 4
EXIT_UNRESOLVED = 5
EXIT_ENERGY_PATTERN = 6
EXIT_VERIFY = 7

# perturbation used for the radial Morse index when the config leaves epsilon at 0
DEFAULT_MORSE_EPSILON = 1e-3


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (BracketError, RadiusError)):
        return EXIT_BRACKET
    if isinstance(exc, (IndeterminateError, StiffnessError)):
        return EXIT_HORIZON
    if isinstance(exc, ResolutionError):
        return EXIT_UNRESOLVED
    if isinstance(exc, ConfigurationError):
        return EXIT_CONFIG
    return EXIT_ERROR


def shooting_options(cfg: RunConfig) -> ShootingOptions:
    return ShootingOptions(h=cfg.h, t0=cfg.t0, T_max=cfg.T_max, rtol=cfg.ode_tol)


def params_of(cfg: RunConfig, epsilon: float = 0.0) -> ProblemParams:
    return validate_params(cfg.N, cfg.p, cfg.lam, epsilon)


def solve_profile(cfg: RunConfig) -> RadialProfile:
    """Unperturbed ground state, or the ball solution when ``cfg.ball`` is set."""
    params = params_of(cfg)
    opts = shooting_options(cfg)
    if cfg.ball is not None:
        return solve_ball(params, cfg.ball, opts)
    return find_ground_state(params, opts)


def _out(cfg: RunConfig) -> Path:
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_solve(cfg: RunConfig) -> int:
    U = solve_profile(cfg)
    summary = {"params": U.params.as_dict(), "kind": U.kind.value, "amplitude": U.amplitude,
               "residual_norm": residual_norm(U), "h": U.h, "T": U.T}
    if cfg.ball is not None:
        summary["radius"] = cfg.ball
        summary["boundary_value"] = float(U.u[-1])
    else:
        fit = decay_rate(U)
        summary["decay"] = {"fitted_u2_slope": fit.u2_slope, "predicted_u2_slope": fit.predicted_u2_slope,
                            "fitted_log_u_slope": fit.u_slope, "predicted_log_u_slope": fit.predicted_u_slope,
                            "relative_error": fit.relative_error, "window": list(fit.window)}
    if cfg.epsilon > 0:
        pert = find_ground_state(params_of(cfg, cfg.epsilon), shooting_options(cfg), U=U) \
            if cfg.ball is None else solve_ball(params_of(cfg, cfg.epsilon), cfg.ball, shooting_options(cfg), U=U)
        summary["perturbed"] = {"epsilon": cfg.epsilon, "amplitude": pert.amplitude,
                                "max_difference_from_U": float(np.max(np.abs(pert.u - U.u)))}
    out = _out(cfg)
    io.save_profile(U, out / "profile", config_hash=cfg.config_hash)
    io.write_json(out / "solve.json", summary, config_hash=cfg.config_hash)
    print(f"amplitude {U.amplitude:.15g}  residual {summary['residual_norm']:.3g}")
    if "decay" in summary:
        d = summary["decay"]
        print(f"u^2 decay slope {d['fitted_u2_slope']:.8g} (predicted {d['predicted_u2_slope']:.8g}, "
              f"relative error {d['relative_error']:.2e})")
    else:
        print(f"boundary value u(T) = {summary['boundary_value']:.3e}")
    return EXIT_OK


def spectrum_summary(U: RadialProfile, cfg: RunConfig) -> dict:
    """Gap table, Morse reports and verdict lines for one profile."""
    rows = sp.kernel_gap_report(U, cfg.ell_max, C_delta=cfg.zero_window_C)
    lin = sp.morse_index(U, sp.Variant.LINEARIZED, cfg.ell_max, C_delta=cfg.zero_window_C)
    eps = cfg.epsilon if cfg.epsilon > 0 else DEFAULT_MORSE_EPSILON
    op = sp.assemble(U, 0, sp.Variant.PERTURBED, epsilon=eps)
    pert = sp.eigenvalues_lowest(op, 3, C_delta=cfg.zero_window_C)
    N = U.params.N
    ball = cfg.ball is not None
    kdim = sp.kernel_dimension(rows)
    radial_ok = rows[0].near_zero_count == 0 and rows[0].negative_count == 1
    verdicts = []
    unresolved = list(lin.unresolved) + ([0] if pert.near_zero else [])
    verdicts.append("radial nondegenerate" if radial_ok else "radial sector NOT resolved as nondegenerate")
    if ball:
        verdicts.append("nondegenerate (no kernel)" if kdim == 0 else f"kernel dimension = {kdim}")
    else:
        kernel_ok = rows[1].near_zero_count == 1 and all(r.near_zero_count == 0 for r in rows if r.ell != 1)
        verdicts.append(f"kernel dimension = {N} (mode l=1)" if kernel_ok and kdim == N
                        else f"kernel dimension = {kdim} (expected {N})")
    verdicts.append(f"Morse index (radial, perturbed) = {pert.negative}")
    return {"rows": rows, "linearized": lin, "perturbed_radial": pert, "epsilon": eps,
            "kernel_dimension": kdim, "verdicts": verdicts, "unresolved": sorted(set(unresolved))}


def cmd_spectrum(cfg: RunConfig) -> int:
    U = solve_profile(cfg)
    s = spectrum_summary(U, cfg)
    out = _out(cfg)
    io.write_csv(out / "kernel_gap.csv", ("ell", "min_abs_eigenvalue", "negative_count", "multiplicity"),
                 ((r.ell, r.min_abs_eigenvalue, r.negative_count, r.multiplicity) for r in s["rows"]),
                 config_hash=cfg.config_hash)
    report = {"params": U.params.as_dict(), "kind": U.kind.value,
              "linearized": s["linearized"].as_dict(),
              "perturbed_radial": {"epsilon": s["epsilon"], **s["perturbed_radial"].as_dict()},
              "kernel_dimension": s["kernel_dimension"], "verdicts": s["verdicts"],
              "unresolved_modes": s["unresolved"],
              "gaps": [asdict(r) for r in s["rows"]]}
    io.write_json(out / "morse.json", report, config_hash=cfg.config_hash)
    for v in s["verdicts"]:
        print(v)
    if s["unresolved"]:
        print(f"unresolved near-zero eigenvalues at modes {s['unresolved']}", file=sys.stderr)
        return EXIT_UNRESOLVED
    return EXIT_OK


def cmd_energy(cfg: RunConfig) -> int:
    if cfg.ball is not None:
        raise ConfigurationError("the energy analysis runs on the whole-space ground state")
    U = solve_profile(cfg)
    consts = en.constants(U.params)
    trace = en.E_hat(U, consts, cfg.epsilon)
    patterns = [en.sign_pattern(U, 0.0)]
    if cfg.epsilon > 0:
        patterns.append(en.sign_pattern(U, cfg.epsilon))
    scan = en.epsilon_scan(U)
    id_err, id_at = en.energy_identity_error(trace)
    out = _out(cfg)
    io.write_csv(out / "energy_trace.csv", ("t", "E", "G", "Gprime"), trace.rows(), config_hash=cfg.config_hash)
    io.write_csv(out / "epsilon_scan.csv", ("epsilon", "observed", "holds", "sign_changes"),
                 ((r.epsilon, r.observed, r.holds, " ".join(io.fmt(x) for x in r.sign_changes))
                  for r in scan.results), config_hash=cfg.config_hash)
    verdict = {"params": U.params.as_dict(), "constants": consts.as_dict(),
               "patterns": [r.as_dict() for r in patterns],
               "largest_preserving_epsilon": scan.largest_preserving,
               "energy_identity_max_error": id_err, "energy_identity_worst_t": id_at}
    io.write_json(out / "energy.json", verdict, config_hash=cfg.config_hash)
    case = consts.case_id
    print(f"case {int(case) if case is not None else 'none'}: expected {en.EXPECTED_PATTERN.get(case, 'unclaimed')}")
    for r in patterns:
        changes = ", ".join(f"{x:.10f}" for x in r.sign_changes) or "none"
        print(f"  epsilon={r.epsilon:g}: {r.observed}; sign changes at t = {changes}")
    print(f"largest tested epsilon preserving the pattern: {scan.largest_preserving}")
    if case is not None and not all(r.holds for r in patterns):
        return EXIT_ENERGY_PATTERN
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    cfg_ws = cfg.replace(ball=None)
    U = solve_profile(cfg_ws)
    manifest = vf.run_suite(U, seed=cfg.seed, mutation=cfg.mutate)
    reports = list(manifest.reports)
    if cfg.ball is not None:
        reports.append(vf.observe_ball_kernel(solve_profile(cfg)))
    doc = {"params": U.params.as_dict(), "seed": cfg.seed, "all_passed": all(r.passed for r in reports),
           "checks": [r.as_dict() for r in reports]}
    io.write_json(_out(cfg) / "verify.json", doc, config_hash=cfg.config_hash)
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.max_error:.3e} (tolerance {r.tolerance:.1e})")
    return EXIT_OK if doc["all_passed"] else EXIT_VERIFY


SWEEP_COLUMNS = ("index", "N", "p", "lambda", "status", "reason", "amplitude", "decay_slope",
                 "decay_relative_error", "energy_case", "morse_index", "radial_morse_index",
                 "perturbed_radial_morse_index", "kernel_dimension", "radial_nondegenerate", "kernel_ok")


def sweep_row(task) -> dict:
    """One (lambda, p) point of a sweep; errors are recorded, never raised."""
    index, cfg = task
    row = {"index": index, "N": cfg.N, "p": cfg.p, "lambda": cfg.lam}
    try:
        params = params_of(cfg)
    except ConfigurationError as exc:
        row.update(status="skipped", reason=str(exc))
        return row
    try:
        U = find_ground_state(params, shooting_options(cfg))
        s = spectrum_summary(U, cfg)
        fit = decay_rate(U)
        rows = s["rows"]
        consts = en.constants(params)
        row.update(
            status="ok", reason="", amplitude=U.amplitude, decay_slope=fit.u2_slope,
            decay_relative_error=fit.relative_error,
            energy_case=None if consts.case_id is None else int(consts.case_id),
            morse_index=s["linearized"].total, radial_morse_index=s["linearized"].radial,
            perturbed_radial_morse_index=s["perturbed_radial"].negative,
            kernel_dimension=s["kernel_dimension"],
            radial_nondegenerate=rows[0].near_zero_count == 0 and rows[0].negative_count == 1,
            kernel_ok=(rows[1].near_zero_count == 1
                       and all(r.near_zero_count == 0 and r.negative_count == 0 for r in rows[2:])),
        )
        for r in rows:
            row[f"gap_l{r.ell}"] = r.min_abs_eigenvalue
    except HyperlabError as exc:
        row.update(status="failed", reason=f"{type(exc).__name__}: {exc}")
    return row


def sweep_tasks(cfg: RunConfig):
    lambdas = cfg.lambdas or (cfg.lam,)
    ps = cfg.ps or (cfg.p,)
    tasks = []
    for p in ps:
        for lam in lambdas:
            tasks.append((len(tasks), cfg.replace(p=float(p), lam=float(lam), lambdas=(), ps=())))
    return tasks


def cmd_sweep(cfg: RunConfig) -> int:
    tasks = sweep_tasks(cfg)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(sweep_row, tasks))
    else:
        results = [sweep_row(t) for t in tasks]
    out = _out(cfg)
    for r in results:
        io.write_json(out / "rows" / f"row_{r['index']:03d}.json", r, config_hash=cfg.config_hash)
    gap_cols = tuple(f"gap_l{l}" for l in range(cfg.ell_max + 1))
    header = SWEEP_COLUMNS + gap_cols
    io.write_csv(out / "sweep.csv", header, ([r.get(c) for c in header] for r in results),
                 config_hash=cfg.config_hash)
    for r in results:
        tag = r["status"]
        extra = r["reason"] if tag != "ok" else (
            f"case {r['energy_case']}, morse {r['morse_index']}, kernel {r['kernel_dimension']}")
        print(f"N={r['N']} p={r['p']:g} lambda={r['lambda']:g}: {tag} {extra}")
    return EXIT_OK


HELP = {
    "solve": "ground state (or ball solution) with decay fit and residual",
    "spectrum": "mode-by-mode spectrum, kernel gaps and Morse indices",
    "energy": "auxiliary energy trace, sign pattern of G' and epsilon scan",
    "verify": "geometric and analytic cross-checks, written as one manifest",
    "sweep": "solve and analyse every (lambda, p) pair of a grid",
}

COMMANDS = {"solve": cmd_solve, "spectrum": cmd_spectrum, "energy": cmd_energy,
            "verify": cmd_verify, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("problem and grid")
    g.add_argument("--N", type=int)
    g.add_argument("--p", type=float)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--ball", type=float, metavar="T", help="solve on the geodesic ball of radius T")
    g.add_argument("--h", type=float)
    g.add_argument("--t0", type=float)
    g.add_argument("--Tmax", dest="T_max", type=float)
    g.add_argument("--ell-max", dest="ell_max", type=int)
    g.add_argument("--C-delta", dest="zero_window_C", type=float, help="zero window constant")
    g.add_argument("--out", metavar="DIR")
    g.add_argument("--seed", type=int)
    g.add_argument("--config", metavar="FILE", help="flat key = value file; flags override it")
    g.add_argument("--lambdas", help="sweep values, comma separated")
    g.add_argument("--ps", help="sweep exponents, comma separated")
    g.add_argument("--workers", type=int)
    g.add_argument("--mutate", choices=[m.value for m in vf.Mutation], help=argparse.SUPPRESS)
    g.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hyperlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


OVERRIDE_KEYS = ("N", "p", "lam", "epsilon", "ball", "h", "t0", "T_max", "ell_max", "zero_window_C",
                 "out", "seed", "lambdas", "ps", "workers", "mutate")


def config_from_args(args) -> RunConfig:
    overrides = {k: getattr(args, k) for k in OVERRIDE_KEYS}
    return load_config(args.config, overrides)


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command != "sweep":
            params_of(cfg, cfg.epsilon)
        (Path(cfg.out)).mkdir(parents=True, exist_ok=True)
        (Path(cfg.out) / "config.txt").write_text(
            f"# version={__version__}\n# config_hash={cfg.config_hash}\n" + dump_config(cfg))
        return COMMANDS[args.command](cfg)
    except HyperlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
