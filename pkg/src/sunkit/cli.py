"""Command-line interface: ``sunkit {validate,pdf,sample,canonicalize,equiv,demo-nonid}``.

Exit codes: 0 success, 1 negative answer (``equiv``), 2 invalid parameters
or arguments, 3 acceptance or resource limits, 4 unreadable input.

Each command writes a JSON run report (command line, SHA-256 of the input
files, outputs with their error estimates, wall time). When the command's
main output is CSV on standard output the report goes to standard error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io as _io
import json
import os
import sys
import time
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import qmc as scipy_qmc

from . import __version__
from .algebra import permute_latent
from .canonical import canonicalize_eigen, canonicalize_tau, equivalent_up_to_permutation
from .core import CsnParams, SunParams, csn_logpdf, random_sun_params, sun_logpdf
from .errors import (
    ConvergenceFailure,
    LowAcceptance,
    NotPositiveDefinite,
    ParseError,
    ProposalBudgetExhausted,
    SunkitError,
    TooLarge,
    Underflow,
    ValidationError,
)
from .gauss import DEFAULT_QMC, QmcConfig
from .io import ParamFile, format_float, load_params, params_to_dict, serialize_params
from .numlin import Permutation
from .sampler import RngStream, estimate_acceptance, sample_selection

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_VALIDATION = 2
EXIT_RESOURCE = 3
EXIT_PARSE = 4

PROBE_POINTS = 25
PROBE_HALF_WIDTH = 3.0
DEMO_MAX_M = 5
DEMO_DATASET_SIZE = 200
SEED_ENV = "SUNKIT_QMC_SEED"


class ArgumentError(SunkitError, ValueError):
    pass


@dataclass
class RunReport:
    command: List[str]
    input_digest: Optional[str] = None
    outputs: Dict[str, Any] = field(default_factory=dict)
    wall_time: float = 0.0
    exit_code: int = EXIT_OK
    error: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "command": self.command,
                "input_digest": self.input_digest,
                "outputs": self.outputs,
                "wall_time": self.wall_time,
                "exit_code": self.exit_code,
                "error": self.error,
            },
            indent=2,
            default=_jsonable,
        )


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Permutation):
        return list(o.map)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def file_digest(paths: Sequence[str]) -> str:
    h = hashlib.sha256()
    for path in paths:
        try:
            with open(path, "rb") as fh:
                h.update(fh.read())
        except OSError:
            pass
    return h.hexdigest()


def resolve_qmc(pf: Optional[ParamFile], seed_flag: Optional[int]) -> QmcConfig:
    """File settings, then ``SUNKIT_QMC_SEED``, then ``--qmc-seed`` (last wins)."""
    cfg = pf.qmc if pf is not None and pf.qmc is not None else DEFAULT_QMC
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            cfg = replace(cfg, seed=int(env))
        except ValueError:
            raise ParseError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    if seed_flag is not None:
        cfg = replace(cfg, seed=seed_flag)
    return cfg


def probe_points(xi, omega, n: int = PROBE_POINTS) -> np.ndarray:
    """``n`` points of the unscrambled Halton sequence (the origin skipped)
    mapped to the box ``xi +/- 3 omega``."""
    h = scipy_qmc.Halton(len(xi), scramble=False)
    h.fast_forward(1)
    u = h.random(n)
    return np.asarray(xi) + np.asarray(omega) * PROBE_HALF_WIDTH * (2.0 * u - 1.0)


def _sun_only(pf: ParamFile, command: str) -> SunParams:
    if not isinstance(pf.params, SunParams):
        raise ArgumentError(f"{command} needs a SUN parameter file")
    return pf.params


def _logpdf(p, y, cfg):
    if isinstance(p, SunParams):
        return sun_logpdf(p, y, cfg)
    return csn_logpdf(p, y, cfg)


def _read_points(args, d: int) -> np.ndarray:
    rows = []
    if args.points:
        try:
            with open(args.points, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise ParseError(f"cannot read {args.points}: {e.strerror}") from None
        for line in csv.reader(_io.StringIO(text)):
            if not line or not "".join(line).strip():
                continue
            try:
                rows.append([float(v) for v in line])
            except ValueError:
                if rows:
                    raise ParseError(f"bad point row {line!r}") from None
                # header row
    for item in args.y or ():
        try:
            rows.append([float(v) for v in item.split(",")])
        except ValueError:
            raise ParseError(f"bad point {item!r}") from None
    if not rows:
        raise ArgumentError("no evaluation points (use --y or --points)")
    if any(len(r) != d for r in rows):
        raise ArgumentError(f"every point must have {d} coordinates")
    return np.array(rows, dtype=float)


def _write_csv(fh, header, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format_float(v) for v in r])


# commands

def cmd_validate(args, report: RunReport) -> int:
    pf = load_params(args.file)
    p = pf.params
    out = {"family": pf.family, "d": p.d, "m": p.m, "valid": True}
    if isinstance(p, SunParams):
        out["min_pivot_assembled"] = p.min_pivot
        out["conditional_ridge"] = p.ridged
    else:
        out["min_pivot_marginal"] = float(np.min(np.diag(np.linalg.cholesky(p.marginal_cov))) ** 2)
    report.outputs.update(out)
    return EXIT_OK


def cmd_pdf(args, report: RunReport) -> int:
    pf = load_params(args.file)
    cfg = resolve_qmc(pf, args.qmc_seed)
    Y = _read_points(args, pf.params.d)
    lp, err = _logpdf(pf.params, Y, cfg)
    lp, err = np.atleast_1d(lp), np.atleast_1d(err)
    if args.log:
        value = lp
    else:
        value = np.exp(lp)
        err = value * np.expm1(err)
    header = [f"y{i + 1}" for i in range(Y.shape[1])] + ["value", "err"]
    _write_csv(sys.stdout, header, np.column_stack([Y, value, err]))
    report.outputs.update({"n": int(Y.shape[0]), "log": bool(args.log),
                           "values": value, "errors": err})
    return EXIT_OK


def cmd_sample(args, report: RunReport) -> int:
    pf = load_params(args.file)
    p = _sun_only(pf, "sample")
    cfg = resolve_qmc(pf, args.qmc_seed)
    if args.n < 1:
        raise ArgumentError("--n must be positive")
    expected = estimate_acceptance(p, cfg)
    report.outputs["estimate_acceptance"] = expected.value
    report.outputs["estimate_acceptance_err"] = expected.error_estimate
    try:
        batch = sample_selection(p, args.n, RngStream(args.seed, args.stream),
                                 allow_low_acceptance=args.force, cfg=cfg)
    except ProposalBudgetExhausted as e:
        if e.partial is not None:
            report.outputs["partial_n"] = e.partial.n
        raise
    header = [f"y{i + 1}" for i in range(p.d)]
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            _write_csv(fh, header, batch.draws)
        report.outputs["out"] = args.out
        report.outputs["out_digest"] = file_digest([args.out])
    else:
        _write_csv(sys.stdout, header, batch.draws)
    report.outputs.update({"n": batch.n, "seed": args.seed, "stream": args.stream,
                           "acceptance_rate": batch.acceptance_rate,
                           "proposals_used": batch.proposals_used})
    return EXIT_OK


def cmd_canonicalize(args, report: RunReport) -> int:
    pf = load_params(args.file)
    p = _sun_only(pf, "canonicalize")
    cf = canonicalize_tau(p) if args.strategy == "tau" else canonicalize_eigen(p)
    report.outputs.update({
        "strategy": cf.strategy.value,
        "permutation": cf.applied,
        "degenerate": cf.degenerate,
        "tau_strict": cf.tau_strict,
    })
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(serialize_params(cf.params, pf.qmc))
        report.outputs["out"] = args.out
    else:
        report.outputs["params"] = params_to_dict(cf.params, pf.qmc)
    return EXIT_OK


def _probe_gap(p: SunParams, q: SunParams, cfg: QmcConfig):
    Y = probe_points(p.xi, p.omega)
    a, ea = sun_logpdf(p, Y, cfg)
    b, eb = sun_logpdf(q, Y, cfg)
    return float(np.max(np.abs(a - b))), float(np.max(ea + eb))


def cmd_equiv(args, report: RunReport) -> int:
    pa, pb = load_params(args.file_a), load_params(args.file_b)
    p, q = _sun_only(pa, "equiv"), _sun_only(pb, "equiv")
    cfg = resolve_qmc(pa, args.qmc_seed)
    same, witness = equivalent_up_to_permutation(p, q)
    report.outputs["equivalent"] = same
    report.outputs["witness"] = witness
    if (p.d, p.m) == (q.d, q.m) and np.allclose(p.xi, q.xi) and np.allclose(p.Omega, q.Omega):
        gap, err = _probe_gap(p, q, cfg)
        report.outputs["probe_max_logpdf_gap"] = gap
        report.outputs["probe_max_error_sum"] = err
    return EXIT_OK if same else EXIT_NEGATIVE


def cmd_demo_nonid(args, report: RunReport) -> int:
    d, m = args.d, args.m
    if m < 2:
        raise ArgumentError("no permutation is possible for m=1; nothing to demonstrate")
    if m > DEMO_MAX_M:
        raise ArgumentError(f"m must be at most {DEMO_MAX_M} (m! parameter sets are listed)")
    if d < 1:
        raise ArgumentError("d must be positive")
    cfg = resolve_qmc(None, args.qmc_seed)
    rng = np.random.default_rng(args.seed)
    p = random_sun_params(d, m, rng)
    data = sample_selection(p, args.n_data, RngStream(args.seed, 1), cfg=cfg).draws
    Y = probe_points(p.xi, p.omega)

    sets, canon, probe, loglik = [], [], [], []
    for P in Permutation.all(m):
        q = permute_latent(p, P)
        c = canonicalize_tau(q)
        lp, lpe = sun_logpdf(q, Y, cfg)
        ld, lde = sun_logpdf(q, data, cfg)
        sets.append({"permutation": P, "params": params_to_dict(q)})
        canon.append(c)
        probe.append((lp, lpe))
        loglik.append((float(np.sum(ld)), float(np.sum(lde))))

    ref = canon[0].params
    canon_same = all(c.params.max_abs_diff(ref) <= 1e-12 for c in canon)
    lp0 = probe[0][0]
    probe_spread = max(float(np.max(np.abs(lp - lp0))) for lp, _ in probe)
    probe_tol = 2.0 * max(float(np.max(e + probe[0][1])) for _, e in probe)
    ll = np.array([v for v, _ in loglik])
    ll_err = np.array([e for _, e in loglik])
    ll_spread = float(ll.max() - ll.min())
    ll_tol = 2.0 * float(np.sum(np.sort(ll_err)[-2:]))

    report.outputs.update({
        "d": d,
        "m": m,
        "seed": args.seed,
        "parameter_sets": sets,
        "canonical_form": params_to_dict(ref),
        "canonical_forms_identical": canon_same,
        "probe_points": PROBE_POINTS,
        "probe_logpdf_spread": probe_spread,
        "probe_tolerance": probe_tol,
        "dataset_size": int(data.shape[0]),
        "loglik": ll,
        "loglik_err": ll_err,
        "loglik_spread": ll_spread,
        "loglik_tolerance": ll_tol,
        "consistent": bool(canon_same and probe_spread <= probe_tol and ll_spread <= ll_tol),
    })
    return EXIT_OK if report.outputs["consistent"] else EXIT_NEGATIVE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sunkit", description="Unified skew-normal toolkit.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--report", metavar="PATH", help="also write the run report to PATH")
    sub = ap.add_subparsers(dest="command", required=True)

    def seed_flag(sp):
        sp.add_argument("--qmc-seed", type=int, default=None,
                        help=f"QMC shift seed (overrides the file and ${SEED_ENV})")

    sp = sub.add_parser("validate", help="check a parameter file")
    sp.add_argument("file")
    sp.set_defaults(func=cmd_validate, csv_stdout=False)

    sp = sub.add_parser("pdf", help="evaluate the density at points")
    sp.add_argument("file")
    sp.add_argument("--y", action="append", metavar="Y1,Y2,...", help="inline point (repeatable)")
    sp.add_argument("--points", metavar="CSV", help="CSV file of points, one per row")
    sp.add_argument("--log", action="store_true", help="report the log density")
    seed_flag(sp)
    sp.set_defaults(func=cmd_pdf, csv_stdout=True)

    sp = sub.add_parser("sample", help="draw variates by latent selection")
    sp.add_argument("file")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--stream", type=int, default=0)
    sp.add_argument("--out", metavar="CSV")
    sp.add_argument("--force", action="store_true", help="sample even at very low acceptance")
    seed_flag(sp)
    sp.set_defaults(func=cmd_sample, csv_stdout=None)

    sp = sub.add_parser("canonicalize", help="canonical representative of the permutation class")
    sp.add_argument("file")
    sp.add_argument("--strategy", choices=("tau", "eigen"), default="tau")
    sp.add_argument("--out", metavar="JSON")
    sp.set_defaults(func=cmd_canonicalize, csv_stdout=False)

    sp = sub.add_parser("equiv", help="test equivalence up to latent permutation")
    sp.add_argument("file_a")
    sp.add_argument("file_b")
    seed_flag(sp)
    sp.set_defaults(func=cmd_equiv, csv_stdout=False)

    sp = sub.add_parser("demo-nonid", help="show that latent permutations give the same law")
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--m", type=int, default=3)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-data", type=int, default=DEMO_DATASET_SIZE)
    seed_flag(sp)
    sp.set_defaults(func=cmd_demo_nonid, csv_stdout=False)
    return ap


def _input_files(args) -> List[str]:
    return [getattr(args, k) for k in ("file", "file_a", "file_b", "points") if getattr(args, k, None)]


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ParseError):
        return EXIT_PARSE
    if isinstance(exc, (ValidationError, ArgumentError)):
        return EXIT_VALIDATION
    if isinstance(exc, (LowAcceptance, ProposalBudgetExhausted, TooLarge, Underflow, ConvergenceFailure)):
        return EXIT_RESOURCE
    return EXIT_VALIDATION


def _describe(exc: BaseException) -> str:
    msg = str(exc)
    if isinstance(exc, NotPositiveDefinite) and exc.block and not msg.startswith(exc.block):
        msg = f"{exc.block}: {msg}"
    return f"{type(exc).__name__}: {msg}"


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    report = RunReport(command=["sunkit"] + argv, input_digest=file_digest(_input_files(args)))
    csv_stdout = args.csv_stdout if args.csv_stdout is not None else not getattr(args, "out", None)
    t0 = time.perf_counter()
    try:
        code = args.func(args, report)
    except SunkitError as exc:
        code = _exit_code(exc)
        report.error = _describe(exc)
        print(report.error, file=sys.stderr)
    report.wall_time = time.perf_counter() - t0
    report.exit_code = code
    text = report.to_json()
    print(text, file=sys.stderr if csv_stdout else sys.stdout)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
