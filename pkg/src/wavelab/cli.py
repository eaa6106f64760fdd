"""Command-line front end: operator checks, convergence and corner
experiments, normal-mode analysis and spectrum dumps.

Exit codes: 0 on success/pass, 1 when a requested check fails, 2 on usage
errors (argparse convention).  Config files are line-oriented
``key = value`` text; command-line flags override file values, which
override defaults, and the provenance of every setting is recorded in the
report metadata.
"""

import argparse
import json
import sys

import numpy as np

from .sbp_core import build_sbp_d2, verify_sbp_properties, SbpConstructionError
from .sat_semidisc import DIRICHLET, NEUMANN, assemble_neumann_1d, assemble_dirichlet_1d, compute_iota0
from .wave_solver import SimulationConfig
from . import convergence_lab, normal_mode, spectral


_CONVERGE_KEYS = {
    "dim": (int, 2),
    "bc": (str, DIRICHLET),
    "order": (int, 4),
    "levels": (str, "41,81,161,321"),
    "tf": (float, 2.0),
    "cfl": (float, 0.1),
    "penalty_factor": (float, 1.2),
    "solution": (str, "wavenumber4"),
    "cp": (float, None),
    "min_rate": (float, None),
    "expect_rate": (float, None),
    "rate_tol": (float, None),
}


def load_config(path: str) -> dict:
    """Parse a key = value config file (comments with '#')."""
    values = {}
    with open(path) as f:
        for ln, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _CONVERGE_KEYS:
                raise ValueError(f"{path}:{ln}: unknown key {key!r}")
            caster = _CONVERGE_KEYS[key][0]
            try:
                values[key] = caster(val)
            except ValueError as exc:
                raise ValueError(f"{path}:{ln}: bad value for {key}: {exc}") from exc
    return values


def _merge_config(args) -> tuple:
    """Resolve defaults < config file < explicit flags, with provenance."""
    resolved, provenance = {}, {}
    file_vals = load_config(args.config) if getattr(args, "config", None) else {}
    for key, (_, default) in _CONVERGE_KEYS.items():
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            resolved[key] = flag_val
            provenance[key] = "flag"
        elif key in file_vals:
            resolved[key] = file_vals[key]
            provenance[key] = "file"
        else:
            resolved[key] = default
            provenance[key] = "default"
    return resolved, provenance


def _levels(expr) -> list:
    if isinstance(expr, (list, tuple)):
        return [int(x) for x in expr]
    return [int(tok) for tok in str(expr).split(",") if tok.strip()]


def _validate(resolved):
    if resolved["cfl"] is None or not 0 < resolved["cfl"] <= 0.5:
        raise ValueError(f"cfl must lie in (0, 0.5], got {resolved['cfl']}")
    if resolved["tf"] <= 0:
        raise ValueError("tf must be positive")
    if resolved["bc"] not in (DIRICHLET, NEUMANN):
        raise ValueError(f"bc must be dirichlet or neumann, got {resolved['bc']!r}")
    if resolved["dim"] not in (1, 2):
        raise ValueError("dim must be 1 or 2")


def _write_report(report, resolved, provenance, out, fmt, analyzer=None):
    report.metadata["provenance"] = provenance
    if analyzer is not None:
        report.metadata["analyzer"] = analyzer
    if fmt == "csv":
        text = report.to_csv()
    else:
        text = report.to_json() + "\n"
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _rate_check(report, resolved) -> int:
    q = report.headline_rate
    ok = True
    if resolved.get("min_rate") is not None:
        ok &= q >= resolved["min_rate"]
    if resolved.get("expect_rate") is not None:
        tol = resolved.get("rate_tol") or 0.2
        ok &= abs(q - resolved["expect_rate"]) <= tol
    if not ok:
        print(f"rate check failed: headline {q:.3f}", file=sys.stderr)
    return 0 if ok else 1


def _cmd_converge(args, corner: bool) -> int:
    resolved, provenance = _merge_config(args)
    _validate(resolved)
    corner_spec = None
    if corner:
        corner_spec = {} if resolved["cp"] is None else {"c_p": resolved["cp"]}
    cfg = SimulationConfig(
        dimension=resolved["dim"],
        order=resolved["order"],
        bc=resolved["bc"],
        t_f=resolved["tf"],
        cfl=resolved["cfl"],
        penalty_factor=resolved["penalty_factor"],
        solution=resolved["solution"],
        corner=corner_spec,
    )
    levels = _levels(resolved["levels"])
    report = convergence_lab.run_refinement_study(cfg, levels)
    analyzer = None
    if args.format == "json" and not corner:
        rep = normal_mode.singularity_analysis(
            resolved["order"], resolved["bc"],
            penalty_factor=resolved["penalty_factor"], scan_points=512,
        )
        analyzer = normal_mode.report_to_dict(rep)
        analyzer.pop("det_scan")
    _write_report(report, resolved, provenance, args.out, args.format, analyzer)
    return _rate_check(report, resolved)


def _cmd_operator_check(args) -> int:
    try:
        op = build_sbp_d2(args.order, args.n, 1.0 / (args.n - 1))
    except SbpConstructionError as exc:
        print(f"operator construction failed: {exc}", file=sys.stderr)
        return 1
    rep = verify_sbp_properties(op)
    print(f"order {rep.order}, n {rep.n}")
    print(f"  H positive: {rep.h_positive} (min {rep.h_min:.6g})")
    print(f"  ||M - M'||_max: {rep.m_symmetry_error:.3e} (scale {rep.m_norm_max:.3e})")
    print(f"  eigmin(sym M): {rep.m_eigmin:.3e}")
    print(f"  decomposition H^-1(-M+BS) consistent: {rep.b_pattern_ok}")
    for k, (inter, bound) in rep.exactness.items():
        print(f"  exactness degree {k}: interior {inter:.2e} boundary {bound:.2e}")
    print(f"  PASS: {rep.passed}")
    return 0 if rep.passed else 1


def _cmd_analyze(args) -> int:
    rep = normal_mode.singularity_analysis(
        args.order, args.bc, penalty_factor=args.penalty_factor,
        scan_points=args.scan_points,
    )
    payload = normal_mode.report_to_dict(rep)
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    ok = not rep.w_capped and rep.det_min_right_half >= 1e-12
    if not ok:
        print("analyzer check failed (capped w or near-singular C off axis)",
              file=sys.stderr)
    return 0 if ok else 1


def _cmd_spectrum(args) -> int:
    n = args.n
    h = 1.0 / (n - 1)
    if args.classic:
        A = spectral.classic_neumann_matrix(n, h)
        spec = spectral.diagonalize(A, np.ones(n), h)
        kind = NEUMANN
    else:
        op = build_sbp_d2(args.order, n, h)
        if args.bc == NEUMANN:
            sd = assemble_neumann_1d(op)
        else:
            sd = assemble_dirichlet_1d(op, args.penalty_factor * compute_iota0(op))
        spec = spectral.diagonalize_semidisc(sd)
        kind = args.bc
    lines = ["r,lambda,lambda_continuous,relerr"]
    for r in range(1, spec.n + 1):
        lam = spec.lam[r - 1]
        lam_c = spectral.continuous_eigen_reference(kind, r)
        rel = abs(lam - lam_c) / max(abs(lam_c), abs(lam), 1.0)
        lines.append(f"{r},{lam:.17g},{lam_c:.17g},{rel:.17g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    print(f"cond(Phi) = {spec.cond:.6g}, residual = {spec.residual:.3e}",
          file=sys.stderr)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wavelab",
        description="SBP-SAT wave-equation laboratory: convergence "
        "experiments and numerical normal-mode analysis",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add_converge_flags(q):
        q.add_argument("--dim", type=int, choices=(1, 2), default=None)
        q.add_argument("--bc", type=str, default=None)
        q.add_argument("--order", type=int, default=None)
        q.add_argument("--levels", type=str, default=None,
                       help="comma-separated N values, e.g. 41,81,161")
        q.add_argument("--tf", type=float, default=None)
        q.add_argument("--cfl", type=float, default=None)
        q.add_argument("--penalty-factor", dest="penalty_factor", type=float, default=None)
        q.add_argument("--solution", type=str, default=None)
        q.add_argument("--min-rate", dest="min_rate", type=float, default=None)
        q.add_argument("--expect-rate", dest="expect_rate", type=float, default=None)
        q.add_argument("--rate-tol", dest="rate_tol", type=float, default=None)
        q.add_argument("--config", type=str, default=None)
        q.add_argument("--out", type=str, default=None)
        q.add_argument("--format", choices=("csv", "json"), default="csv")

    q = sub.add_parser("converge", help="refinement study")
    add_converge_flags(q)

    q = sub.add_parser("corner", help="corner-perturbation experiment")
    add_converge_flags(q)
    q.add_argument("--cp", type=float, default=None,
                   help="corner amplitude constant (default: calibrated)")

    q = sub.add_parser("operator-check", help="SBP property verification")
    q.add_argument("--order", type=int, required=True)
    q.add_argument("--n", type=int, required=True)

    q = sub.add_parser("analyze", help="normal-mode boundary-system analysis")
    q.add_argument("--order", type=int, required=True)
    q.add_argument("--bc", choices=(DIRICHLET, NEUMANN), required=True)
    q.add_argument("--penalty-factor", dest="penalty_factor", type=float, default=1.2)
    q.add_argument("--scan-points", dest="scan_points", type=int, default=4096)
    q.add_argument("--out", type=str, default=None)

    q = sub.add_parser("spectrum", help="transverse operator eigenvalues")
    q.add_argument("--order", type=int, default=2)
    q.add_argument("--bc", choices=(DIRICHLET, NEUMANN), default=NEUMANN)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--classic", action="store_true",
                   help="use the textbook second-order Neumann matrix")
    q.add_argument("--out", type=str, default=None)

    return p


def parse_and_dispatch(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        if args.command == "converge":
            return _cmd_converge(args, corner=False)
        if args.command == "corner":
            return _cmd_converge(args, corner=True)
        if args.command == "operator-check":
            return _cmd_operator_check(args)
        if args.command == "analyze":
            return _cmd_analyze(args)
        if args.command == "spectrum":
            return _cmd_spectrum(args)
    except (ValueError, OSError, SbpConstructionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


def main():  # pragma: no cover - console entry
    sys.exit(parse_and_dispatch())
