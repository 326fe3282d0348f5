"""
Given a problem file describing a conjugation interpolation, hyperinvariance or matrix field problem,
decide it, construct a witness and write a certificate that can be verified independently.

Exit codes: 0 feasible/true, 1 infeasible/false, 2 parse error, 3 invariant violation, 4 digest mismatch.
"""

import logging
import sys
from argparse import ArgumentParser, FileType, Namespace
from enum import IntEnum
from importlib.metadata import version
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from conjugation_solver import logger
from conjugation_solver.antilinear import Conjugation, fixed_point_basis
from conjugation_solver.config import Config, Tolerances
from conjugation_solver.interpolate import (
    Certificate,
    ConstructionError,
    InterpolationProblem,
    ProblemError,
    construct_skew,
    construct_symmetric,
    hyperinvariance_falsifier,
    is_hyperinvariant,
    perturbation_suite,
    verify_certificate,
)
from conjugation_solver.linalg import CMatrix, DimensionError, adjoint, fro, qr_orthonormalize
from conjugation_solver.mu_field import (
    FieldExtractionError,
    MeasureError,
    UField,
    is_symmetric_measure,
    solve_sufield,
    solve_ufield,
    verify_ufield,
)
from conjugation_solver.problem_file import (
    CertificateFile,
    ProblemFile,
    canonical_digest,
    decode_matrix,
    encode_matrix,
    load_raw,
    write_atomic,
)
from conjugation_solver.report import Verdict
from conjugation_solver.spectral import NotCommutingError, NotNormalError, check_commuting, check_normal


class ExitCode(IntEnum):
    """Process exit codes."""

    FEASIBLE = 0
    INFEASIBLE = 1
    PARSE_ERROR = 2
    INVARIANT_ERROR = 3
    DIGEST_MISMATCH = 4


INVARIANT_ERRORS = (
    ProblemError,
    ConstructionError,
    NotNormalError,
    NotCommutingError,
    MeasureError,
    FieldExtractionError,
    DimensionError,
)


class ParseFailure(Exception):
    """Wraps any failure to read or validate an input file."""


def _tool_version() -> str:
    return version("conjugation-solver")


def _cli_tolerances(args: Namespace, base: Tolerances) -> Tolerances:
    return base.overridden(residual=args.tol, cluster=args.cluster)


def _load_problem(args: Namespace, config: Config) -> tuple[ProblemFile, dict[str, Any], Tolerances]:
    """Parse a problem file and resolve the tolerances: config, then file overrides, then CLI flags."""
    path = args.problem
    try:
        raw = load_raw(path)
        problem = ProblemFile.model_validate(raw)
        tol = _cli_tolerances(args, problem.resolve_tolerances(config.tolerances))
    except (OSError, ValueError, yaml.YAMLError) as exc:
        raise ParseFailure(f"Cannot parse problem file {path}: {exc}") from exc
    defaults = Tolerances()
    if tol.residual > defaults.residual or tol.cluster > defaults.cluster:
        logger.warning("tolerances loosened beyond the defaults: %s", tol)
    return problem, raw, tol


def _emit(cert: CertificateFile, args: Namespace, config: Config) -> None:
    text = cert.to_json(config.output_config.indent)
    if args.out is None:
        sys.stdout.write(text)
    else:
        write_atomic(args.out, text)
        print(f"certificate written to {args.out}")


def _base_certificate(problem: ProblemFile, raw: dict[str, Any], feasible: bool, **fields: Any) -> CertificateFile:
    return CertificateFile(
        tool_version=_tool_version(),
        input_digest=canonical_digest(raw),
        mode=problem.mode,
        feasible=feasible,
        **fields,
    )


def check(args: Namespace, config: Config) -> ExitCode:
    """Check the structural preconditions of a problem file and report each with its residual."""
    problem, _, tol = _load_problem(args, config)
    failures: list[str] = []

    def report(name: str, residual: float, limit: float) -> None:
        ok = residual <= limit
        print(f"{name}: residual {residual:.3e} (limit {limit:.1e}) {'ok' if ok else 'VIOLATED'}")
        if not ok:
            failures.append(name)

    if problem.mode in ("ufield", "sufield"):
        try:
            mu = problem.to_measure(tol)
            print(f"measure: {len(mu)} distinct atoms ok")
        except MeasureError as exc:
            print(f"measure: {exc}")
            return ExitCode.INVARIANT_ERROR
        if problem.mode == "sufield" and not is_symmetric_measure(mu, tol):
            print("measure symmetry: VIOLATED")
            return ExitCode.INVARIANT_ERROR
        return ExitCode.FEASIBLE

    mats = problem.operator_matrices()
    for name, mat in zip(problem.operators, mats):
        report(f'operator "{name}" normality', check_normal(mat), tol.scaled(fro(mat) ** 2))
    try:
        check_commuting(mats, tol)
        print("operators commute: ok")
    except NotCommutingError as exc:
        print(f"operators commute: VIOLATED ({exc})")
        failures.append("commuting")
    if problem.mode == "hyperinvariant" and not failures:
        span = problem.subspace_basis()
        norms = np.linalg.norm(span, axis=0)
        _, rank = qr_orthonormalize(span, tol, prefix=0)
        print(f"subspace: {span.shape[1]} spanning vectors, dimension {rank}")
        if zero := [idx for idx, norm in enumerate(norms) if norm <= tol.rank * max(1.0, float(np.max(norms)))]:
            print(f"subspace vectors {zero}: VIOLATED (zero vectors)")
            failures.append("subspace")
    if problem.mode in ("symmetric", "skew") and not failures:
        try:
            interp = problem.to_problem(tol)
            print(f"vector pairs: {interp.pair_count} orthogonal non-zero pairs ok")
            for violation in interp.norm_violations():
                report(f"pair {violation.i} norms", violation.gap, tol.scaled(abs(violation.lhs)))
        except ProblemError as exc:
            print(f"vector pairs: VIOLATED ({exc})")
            failures.append("pairs")
    return ExitCode.INVARIANT_ERROR if failures else ExitCode.FEASIBLE


def _auxiliary_residuals(cert: Certificate, interp: InterpolationProblem, config: Config) -> dict[str, float]:
    """Informative checks on a feasible certificate: its real form and, for one pair, rank-one perturbations."""
    assert cert.conjugation is not None
    tol, solver_config = interp.tol, config.solver_config
    fixed = fixed_point_basis(cert.conjugation, tol, solver_config.seed, solver_config.fixed_point_attempts)
    out = {"real_form": fro(cert.conjugation.s - fixed @ fixed.T)}
    if interp.pair_count == 1:
        try:
            report = perturbation_suite(cert, interp, solver_config.lambdas)
            out["perturbation"] = max(report.residuals.values(), default=0.0)
            if not report.passed:
                logger.warning("perturbed operators leave the relation: %s", report.residuals)
        except ProblemError as exc:
            logger.info("perturbation report skipped: %s", exc)
    return out


def _interpolation_certificate(
    problem: ProblemFile, raw: dict[str, Any], cert: Certificate, extra: dict[str, float]
) -> CertificateFile:
    if cert.conjugation is None:
        return _base_certificate(problem, raw, False, violations=[v.to_dict() for v in cert.violations])
    return _base_certificate(
        problem, raw, True, conjugation_s=encode_matrix(cert.conjugation.s), residuals=cert.residuals | extra
    )


def interpolate(args: Namespace, config: Config) -> ExitCode:
    """Decide an interpolation problem and write its certificate."""
    problem, raw, tol = _load_problem(args, config)
    if problem.mode not in ("symmetric", "skew"):
        raise ProblemError(f"interpolate needs a symmetric or skew problem, got mode {problem.mode}")
    interp = problem.to_problem(tol)
    cert = construct_symmetric(interp) if problem.mode == "symmetric" else construct_skew(interp)
    extra: dict[str, float] = {}
    if cert.feasible:
        extra = _auxiliary_residuals(cert, interp, config)
    else:
        for violation in cert.violations:
            logger.warning("violation: %s", violation)
    _emit(_interpolation_certificate(problem, raw, cert, extra), args, config)
    return ExitCode.FEASIBLE if cert.feasible else ExitCode.INFEASIBLE


def field(args: Namespace, config: Config) -> ExitCode:
    """Solve a matrix field problem and write the per-atom blocks."""
    problem, raw, tol = _load_problem(args, config)
    if problem.mode not in ("ufield", "sufield"):
        raise ProblemError(f"field needs a ufield or sufield problem, got mode {problem.mode}")
    mu = problem.to_measure(tol)
    f, g = problem.function_tables()
    result = solve_ufield(mu, f, g, tol) if problem.mode == "ufield" else solve_sufield(mu, f, g, tol)
    if isinstance(result, Verdict):
        cert = _base_certificate(problem, raw, False, violations=[v.to_dict() for v in result.violations])
    else:
        report = verify_ufield(mu, f, g, result, problem.mode == "sufield", tol)
        residuals = {"equation": report.equation, "unitarity": report.unitarity}
        if report.parity is not None:
            residuals["parity"] = report.parity
        cert = _base_certificate(
            problem, raw, True, field_blocks=[encode_matrix(block) for block in result.blocks], residuals=residuals
        )
    _emit(cert, args, config)
    return ExitCode.FEASIBLE if cert.feasible else ExitCode.INFEASIBLE


def _falsifier_moves(problem: ProblemFile, s: CMatrix, tol: Tolerances) -> bool:
    """Whether a stored falsifier is a conjugation with C N C = N* moving the subspace."""
    interp = InterpolationProblem.build(problem.operator_matrices(), [], [], "symmetric", tol)
    if not verify_certificate(s, interp).passed:
        return False
    basis, _ = qr_orthonormalize(problem.subspace_basis(), tol, prefix=0)
    outside = np.eye(problem.dimension) - basis @ adjoint(basis)
    return fro(outside @ Conjugation(s).apply(basis)) > tol.scaled(1.0)


def hyperinvariant(args: Namespace, config: Config) -> ExitCode:
    """Decide hyperinvariance of a subspace and look for a conjugation moving it when it is not."""
    problem, raw, tol = _load_problem(args, config)
    if problem.mode != "hyperinvariant":
        raise ProblemError(f"hyperinvariant needs a hyperinvariant problem, got mode {problem.mode}")
    n = problem.operator_matrices()[0]
    basis = problem.subspace_basis()
    result = is_hyperinvariant(n, basis, tol)
    print(f"hyperinvariant: {'true' if result else 'false'}")
    fields: dict[str, Any] = {"hyperinvariant": result}
    if not result:
        trials, seed = config.solver_config.falsifier_trials, config.solver_config.seed
        if (falsifier := hyperinvariance_falsifier(n, basis, trials, tol, seed)) is not None:
            print("falsifying conjugation S:")
            print(np.array2string(falsifier.s, precision=6, max_line_width=160))
            fields["conjugation_s"] = encode_matrix(falsifier.s)
        else:
            logger.warning("no falsifying conjugation found in %d trials", trials)
    if args.out is not None:
        _emit(_base_certificate(problem, raw, result, **fields), args, config)
    return ExitCode.FEASIBLE if result else ExitCode.INFEASIBLE


def _verify_interpolation(problem: ProblemFile, cert: CertificateFile, tol: Tolerances) -> bool:
    interp = problem.to_problem(tol)
    if not cert.feasible:
        solver = construct_symmetric if problem.mode == "symmetric" else construct_skew
        return not solver(interp).feasible
    assert cert.conjugation_s is not None
    s = decode_matrix(cert.conjugation_s)
    if s.shape != (interp.dim, interp.dim):
        print(f"conjugation_s has shape {s.shape}, expected {(interp.dim, interp.dim)}")
        return False
    result = verify_certificate(s, interp)
    for name, val in result.residuals.items():
        print(f"{name}: {val:.3e}{' VIOLATED' if name in result.failed else ''}")
    return result.passed


def _verify_field(problem: ProblemFile, cert: CertificateFile, tol: Tolerances) -> bool:
    mu = problem.to_measure(tol)
    f, g = problem.function_tables()
    symmetric = problem.mode == "sufield"
    if not cert.feasible:
        return isinstance((solve_sufield if symmetric else solve_ufield)(mu, f, g, tol), Verdict)
    assert cert.field_blocks is not None
    blocks = [decode_matrix(block) for block in cert.field_blocks]
    if len(blocks) != len(mu) or any(block.shape != (f.n, f.n) for block in blocks):
        print(f"field_blocks must hold {len(mu)} blocks of shape {(f.n, f.n)}")
        return False
    report = verify_ufield(mu, f, g, UField(np.stack(blocks)), symmetric, tol)
    print(f"equation: {report.equation:.3e}")
    print(f"unitarity: {report.unitarity:.3e}")
    if report.parity is not None:
        print(f"parity: {report.parity:.3e}")
    return report.passed


def _verify_hyperinvariance(problem: ProblemFile, cert: CertificateFile, tol: Tolerances) -> bool:
    expected = is_hyperinvariant(problem.operator_matrices()[0], problem.subspace_basis(), tol)
    if cert.hyperinvariant != expected:
        return False
    if cert.conjugation_s is None:
        return True
    s = decode_matrix(cert.conjugation_s)
    if expected or s.shape != (problem.dimension, problem.dimension):
        return False
    return _falsifier_moves(problem, s, tol)


def verify(args: Namespace, config: Config) -> ExitCode:
    """Re-verify a certificate against its problem from scratch, ignoring stored residuals."""
    problem, raw, tol = _load_problem(args, config)
    try:
        cert = CertificateFile.model_validate(load_raw(args.certificate))
    except (OSError, ValueError, yaml.YAMLError) as exc:
        raise ParseFailure(f"Cannot parse certificate file {args.certificate}: {exc}") from exc
    if cert.input_digest != canonical_digest(raw):
        print("digest mismatch: certificate was produced for a different problem")
        return ExitCode.DIGEST_MISMATCH
    if cert.mode != problem.mode:
        raise ProblemError(f"Certificate mode {cert.mode} does not match problem mode {problem.mode}")

    match problem.mode:
        case "symmetric" | "skew":
            passed = _verify_interpolation(problem, cert, tol)
        case "ufield" | "sufield":
            passed = _verify_field(problem, cert, tol)
        case "hyperinvariant":
            passed = _verify_hyperinvariance(problem, cert, tol)
    print(f"verification: {'pass' if passed else 'FAIL'}")
    return ExitCode.FEASIBLE if passed else ExitCode.INFEASIBLE


def dump_config(args: Namespace, config: Config) -> ExitCode:
    """Dump the currently active config, either default or parsed from args."""
    yaml.safe_dump(config.model_dump(mode="json"), args.output, sort_keys=False, allow_unicode=True)
    args.output.flush()
    return ExitCode.FEASIBLE


def build_parser() -> ArgumentParser:
    """Command line interface definition."""
    parser = ArgumentParser(description=__doc__)
    parser.add_argument("-v", "--version", action="version", version=_tool_version())
    parser.add_argument("-d", "--debug", action="store_true")
    parser.add_argument(
        "-c",
        "--config",
        help="A YAML file containing tolerances and solver settings, "
        "default can be dumped using `dump-config` command and to be modified",
        type=FileType("rt", encoding="utf-8"),
    )
    parser.add_argument(
        "--tol",
        help="Residual tolerance, overrides config and problem file; "
        "without --cluster the clustering tolerance is raised to at least this value",
        type=float,
    )
    parser.add_argument(
        "--cluster", help="Eigenvalue clustering tolerance, overrides config and problem file", type=float
    )
    parser.add_argument("--seed", help="Seed for every randomized subroutine", type=int)
    subparsers = parser.add_subparsers(dest="command", required=True)

    check_p = subparsers.add_parser("check", help="check structural preconditions of a problem file")
    check_p.add_argument("problem", help="Problem file (JSON, or YAML for other suffixes)", type=Path)

    for name, help_str in (
        ("interpolate", "decide a symmetric/skew interpolation problem and write its certificate"),
        ("field", "solve a ufield/sufield matrix field problem and write its certificate"),
        ("hyperinvariant", "decide hyperinvariance of a subspace, printing a falsifying conjugation if not"),
    ):
        sub_p = subparsers.add_parser(name, help=help_str)
        sub_p.add_argument("problem", help="Problem file (JSON, or YAML for other suffixes)", type=Path)
        sub_p.add_argument("-o", "--out", help="Write the certificate to path instead of stdout", type=Path)

    verify_p = subparsers.add_parser("verify", help="re-verify a certificate against its problem file")
    verify_p.add_argument("problem", help="Problem file the certificate was produced for", type=Path)
    verify_p.add_argument("certificate", help="Certificate file to check", type=Path)

    dump_p = subparsers.add_parser(
        "dump-config", help="dump default tolerances and solver config to stdout that can be passed to -c/--config"
    )
    dump_p.add_argument(
        "-o",
        "--output",
        help="Output to path instead of stdout",
        type=FileType("wt", encoding="utf-8"),
        default=sys.stdout,
    )
    return parser


def run(argv: list[str] | None = None) -> ExitCode:
    """Parse arguments, run the selected command and map failures onto exit codes."""
    args = build_parser().parse_args(argv)

    if args.debug:
        logger.setLevel(logging.DEBUG)

    try:
        config = Config.model_validate(yaml.safe_load(args.config) or {}) if args.config else Config()
        config.tolerances = _cli_tolerances(args, config.tolerances)
        if args.seed is not None:
            config.solver_config.seed = args.seed
    except (ValueError, yaml.YAMLError) as exc:
        logger.error("invalid configuration: %s", exc)
        return ExitCode.PARSE_ERROR

    try:
        match args.command:
            case "check":
                return check(args, config)
            case "interpolate":
                return interpolate(args, config)
            case "field":
                return field(args, config)
            case "hyperinvariant":
                return hyperinvariant(args, config)
            case "verify":
                return verify(args, config)
            case "dump-config":
                return dump_config(args, config)
    except ParseFailure as exc:
        logger.error("%s", exc)
        return ExitCode.PARSE_ERROR
    except INVARIANT_ERRORS as exc:
        logger.error("%s", exc)
        return ExitCode.INVARIANT_ERROR
    raise AssertionError(f"Unknown command {args.command}")


def main() -> None:
    """Run the command line interface and exit with its exit code."""
    sys.exit(run())


if __name__ == "__main__":
    main()
