"""Command-line front end: ``bifpoints``, ``spectrum``, ``branch`` and ``verify``.

Every command writes one JSON document and one or more CSV side-files into
the output directory.  Each numeric row carries the config digest and the
package version.  Files contain no timestamps, so identical configs give
identical files.

Exit codes: 0 success, 1 invariant failure, 2 usage error, 3 non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .bifurcation import find_b_star
from .config import OUTPUT_ENV, RunConfig
from .continuation import ContinuationConfig, trace_branch
from .errors import InvariantFailure, NonConvergence, PatchError, PreconditionError
from .linops import delta, mode_matrix
from .specfun import Params, mode_data
from .verify import CHECKS, run_checks

log = logging.getLogger("stationary_patches")

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2
EXIT_NONCONVERGENCE = 3

CONTOUR_SAMPLES = 256


# ---------------------------------------------------------------------------
# Serialisation helpers
# ---------------------------------------------------------------------------

def _clean(value: Any) -> Any:
    """Convert numpy scalars/arrays to plain JSON values; non-finite floats become null."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        f = float(value)
        return f if math.isfinite(f) else None
    return value


def _provenance(cfg: RunConfig) -> Dict[str, Any]:
    return {"config_digest": cfg.digest(), "version": __version__}


def _write_csv(path: Path, rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(["" if row.get(c) is None else row.get(c) for c in columns])


def _document(command: str, cfg: RunConfig, exit_code: int, body: Dict[str, Any]) -> Dict[str, Any]:
    # the output directory is left out so identical runs give identical bytes wherever they are written
    config = {k: v for k, v in cfg.to_dict().items() if k != "output_dir"}
    doc = {"command": command, "config": config, "exit_code": exit_code}
    doc.update(_provenance(cfg))
    doc.update(body)
    return _clean(doc)


def _emit(cfg: RunConfig, name: str, doc: Dict[str, Any], tables: Dict[str, Tuple[List[Dict[str, Any]], List[str]]]) -> Path:
    out = cfg.out_path
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{name}.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    for fname, (rows, cols) in tables.items():
        _write_csv(out / fname, [_clean(r) for r in rows], cols)
    return out / f"{name}.json"


def _parallel_map(fn: Callable, items: Iterable, workers: int) -> List[Any]:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# bifpoints
# ---------------------------------------------------------------------------

BIF_COLUMNS = [
    "m", "alpha", "status", "b_star", "residual", "scale", "bracket_lo", "bracket_hi",
    "cert_root", "cert_theta_gt_qplus", "cert_lambda_chain", "certified", "message",
    "config_digest", "version",
]


def _bif_row(job: Tuple[int, float]) -> Dict[str, Any]:
    m, alpha = job
    row: Dict[str, Any] = dict.fromkeys(BIF_COLUMNS)
    row.update(m=m, alpha=alpha)
    try:
        bp = find_b_star(m, alpha)
    except InvariantFailure as exc:
        status = "NO-ROOT" if "no root" in str(exc) else "FAIL"
        row.update(status=status, certified=False, message=str(exc))
        return row
    row.update(
        status="OK" if bp.certified else "FAIL",
        b_star=bp.b_star,
        residual=bp.residual,
        scale=bp.scale,
        bracket_lo=bp.bracket[0],
        bracket_hi=bp.bracket[1],
        cert_root=bp.certificate[0],
        cert_theta_gt_qplus=bp.certificate[1],
        cert_lambda_chain=bp.certificate[2],
        certified=bp.certified,
        message="",
    )
    return row


def cmd_bifpoints(cfg: RunConfig, workers: int = 1) -> Tuple[int, Dict[str, Any], Dict[str, Any]]:
    """One row per m: b*_m with its certificate; rows failing certification are flagged."""
    rows = _parallel_map(_bif_row, [(m, cfg.alpha) for m in cfg.m_list], workers)
    prov = _provenance(cfg)
    for r in rows:
        r.update(prov)
    code = EXIT_OK if all(r["status"] == "OK" for r in rows) else EXIT_INVARIANT
    solved = [r["b_star"] for r in rows if r["status"] == "OK"]
    increasing = all(b > a for a, b in zip(solved, solved[1:]))
    if not increasing:
        code = EXIT_INVARIANT
    doc = _document("bifpoints", cfg, code, {"rows": rows, "increasing_in_m": increasing})
    return code, doc, {"bifpoints.csv": (rows, BIF_COLUMNS)}


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------

SPEC_COLUMNS = [
    "n", "alpha", "b", "lambda_n", "lambda_1", "theta_n", "m11", "m12", "m21", "m22", "det",
    "config_digest", "version",
]


def cmd_spectrum(cfg: RunConfig, b: float, n_max: int = 64) -> Tuple[int, Dict[str, Any], Dict[str, Any]]:
    """Mode data, mode matrix and determinant for n = 1..n_max at (alpha, b)."""
    if n_max < 1:
        raise PreconditionError("n_max must be >= 1")
    p = Params(cfg.alpha, b)
    prov = _provenance(cfg)
    rows = []
    for n in range(1, n_max + 1):
        md = mode_data(n, p)
        M = mode_matrix(n, p)
        rows.append(
            dict(
                n=n, alpha=cfg.alpha, b=b, lambda_n=md.lambda_n, lambda_1=md.lambda_1, theta_n=md.theta_n,
                m11=M.m11, m12=M.m12, m21=M.m21, m22=M.m22, det=delta(n, p), **prov,
            )
        )
    doc = _document("spectrum", cfg, EXIT_OK, {"b": b, "n_max": n_max, "rows": rows})
    return EXIT_OK, doc, {"spectrum.csv": (rows, SPEC_COLUMNS)}


# ---------------------------------------------------------------------------
# branch
# ---------------------------------------------------------------------------

BRANCH_COLUMNS = [
    "m", "alpha", "index", "s", "b", "residual", "newton_iters", "tail", "tail_ok",
    "config_digest", "version",
]
CONTOUR_COLUMNS = ["m", "alpha", "index", "s", "x", "outer_radius", "inner_radius", "config_digest", "version"]


def amplitude_schedule(s_max: float, steps: int) -> List[float]:
    """Amplitudes from 1e-4 to s_max (a single point s_max when steps == 1)."""
    if steps < 1:
        raise PreconditionError("steps must be >= 1")
    if steps == 1:
        return [s_max]
    if s_max <= 1e-4:
        raise PreconditionError("s_max must exceed 1e-4 when steps > 1")
    return [float(s) for s in np.linspace(1e-4, s_max, steps)]


def cmd_branch(cfg: RunConfig, m: int, s_max: float = 1e-3, steps: int = 10) -> Tuple[int, Dict[str, Any], Dict[str, Any]]:
    """Trace the m-fold branch and dump every point plus its contour samples."""
    ccfg = ContinuationConfig(J=cfg.J, newton_tol=cfg.newton_tol)
    s_values = amplitude_schedule(s_max, steps)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        br = trace_branch(m, cfg.alpha, s_values, ccfg)
    prov = _provenance(cfg)
    x = 2 * np.pi * np.arange(CONTOUR_SAMPLES) / CONTOUR_SAMPLES
    rows, contour, records = [], [], []
    for i, pt in enumerate(br.points):
        c = np.concatenate([pt.state.R_pert.coeffs, pt.state.r_pert.coeffs])
        tail_ok = bool(pt.tail <= ccfg.tail_gate * float(np.max(np.abs(c))))
        row = dict(
            m=m, alpha=cfg.alpha, index=i, s=pt.amplitude, b=pt.b, residual=pt.residual,
            newton_iters=pt.newton_iters, tail=pt.tail, tail_ok=tail_ok, **prov,
        )
        rows.append(row)
        records.append(dict(row, R_coeffs=pt.state.R_pert.coeffs, r_coeffs=pt.state.r_pert.coeffs,
                            residual_history=list(pt.history)))
        outer = pt.state.outer(x)
        inner = pt.state.inner(x)
        for xi, ro, ri in zip(x, outer, inner):
            contour.append(dict(m=m, alpha=cfg.alpha, index=i, s=pt.amplitude, x=xi,
                                outer_radius=ro, inner_radius=ri, **prov))
    messages = [str(w.message) for w in caught]
    if not br.complete:
        code = EXIT_NONCONVERGENCE
    elif not all(r["tail_ok"] for r in rows):
        code = EXIT_INVARIANT
    else:
        code = EXIT_OK
    origin = br.origin
    body = {
        "m": m,
        "s_values": s_values,
        "complete": br.complete,
        "origin": {"b_star": origin.b_star, "kernel": origin.kernel, "residual": origin.residual},
        "points": records,
        "warnings": messages,
    }
    doc = _document("branch", cfg, code, body)
    tables = {
        f"branch_m{m}.csv": (rows, BRANCH_COLUMNS),
        f"branch_m{m}_contours.csv": (contour, CONTOUR_COLUMNS),
    }
    return code, doc, tables


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

VERIFY_COLUMNS = ["name", "passed", "measured", "threshold", "detail", "config_digest", "version"]


def cmd_verify(cfg: RunConfig, names: Optional[Sequence[str]] = None) -> Tuple[int, Dict[str, Any], Dict[str, Any]]:
    """Run the named invariant checks (all by default); nonzero exit if any fails."""
    unknown = [n for n in names or () if n not in CHECKS]
    if unknown:
        raise PreconditionError(f"unknown checks: {unknown}")
    results = run_checks(cfg, names)
    prov = _provenance(cfg)
    # wall-clock timings are left out of the files to keep them reproducible
    rows = [dict(name=r.name, passed=r.passed, measured=r.measured, threshold=r.threshold, detail=r.detail, **prov)
            for r in results]
    code = EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT
    doc = _document("verify", cfg, code, {"rows": rows, "all_passed": code == EXIT_OK})
    return code, doc, {"verify.csv": (rows, VERIFY_COLUMNS)}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common(parser: argparse.ArgumentParser) -> None:
    d = RunConfig()
    parser.add_argument("--config", metavar="PATH", help="flat JSON config file; flags override its values")
    parser.add_argument("--alpha", type=float, help=f"kernel exponent in (0, 2) (default {d.alpha})")
    parser.add_argument("--m", type=int, nargs="*", metavar="M",
                        help="symmetry classes, e.g. --m 2 3 4; --m alone gives an empty list "
                             f"(default {list(d.m_list)})")
    parser.add_argument("--out", metavar="DIR",
                        help=f"output directory (default {d.output_dir!r}; env {OUTPUT_ENV} also overrides)")
    parser.add_argument("--tol", type=float, help=f"Newton residual tolerance (default {d.newton_tol:g})")
    parser.add_argument("--json", action="store_true", help="print the JSON document on stdout")
    parser.add_argument("--workers", type=int, default=1, help="processes for independent work items (default 1)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stationary-patches",
        description="Bifurcation radii and stationary branches of annular gSQG patches.",
        epilog="Exit codes: 0 ok, 1 invariant failure, 2 usage error, 3 non-convergence.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bifpoints", help="bifurcation radii b*_m with certificates")
    _common(p)

    p = sub.add_parser("spectrum", help="per-mode coefficients, mode matrices and determinants")
    _common(p)
    p.add_argument("--b", type=float, default=None,
                   help="inner radius (default: b*_m for the first entry of the m list)")
    p.add_argument("--n-max", type=int, default=64, help="largest mode (default 64)")

    p = sub.add_parser("branch", help="Newton continuation of the branch leaving b*_m")
    _common(p)
    p.add_argument("--s-max", type=float, default=1e-3, help="largest amplitude (default 1e-3)")
    p.add_argument("--steps", type=int, default=10, help="number of amplitudes from 1e-4 to s_max (default 10)")

    p = sub.add_parser("verify", help="run the invariant suite")
    _common(p)
    p.add_argument("--check", action="append", choices=sorted(CHECKS), help="run only this check (repeatable)")
    return parser


def _load_config(args: argparse.Namespace) -> RunConfig:
    overrides = {
        "alpha": args.alpha,
        "m_list": args.m,
        "output_dir": args.out,
        "newton_tol": args.tol,
    }
    return RunConfig.load(args.config, overrides)


def _print_table(rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> None:
    shown = [c for c in columns if c not in ("config_digest", "version")]
    print("  ".join(shown))
    for r in rows:
        cells = []
        for c in shown:
            v = r.get(c)
            cells.append(f"{v:.12g}" if isinstance(v, float) else ("" if v is None else str(v)))
        print("  ".join(cells))


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _load_config(args)
        if args.command == "bifpoints":
            code, doc, tables = cmd_bifpoints(cfg, args.workers)
            name = "bifpoints"
        elif args.command == "spectrum":
            if args.b is None and not cfg.m_list:
                raise PreconditionError("spectrum needs --b or a non-empty m list")
            b = args.b if args.b is not None else find_b_star(cfg.m_list[0], cfg.alpha).b_star
            code, doc, tables = cmd_spectrum(cfg, b, args.n_max)
            name = "spectrum"
        elif args.command == "branch":
            if len(cfg.m_list) != 1:
                raise PreconditionError("branch needs exactly one symmetry class, e.g. --m 2")
            m = cfg.m_list[0]
            code, doc, tables = cmd_branch(cfg, m, args.s_max, args.steps)
            name = f"branch_m{m}"
        else:
            code, doc, tables = cmd_verify(cfg, args.check)
            name = "verify"
    except PreconditionError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonConvergence as exc:
        print(f"non-convergence: {exc} (residual {exc.residual:.3e} after {exc.iterations} iterations)", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except PatchError as exc:
        print(f"invariant failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT

    path = _emit(cfg, name, doc, tables)
    if args.json:
        json.dump(doc, sys.stdout, indent=2, sort_keys=True, allow_nan=False)
        sys.stdout.write("\n")
    else:
        first_rows, first_cols = next(iter(tables.values()))
        _print_table(first_rows, first_cols)
        log.info("wrote %s", path)
        print(f"exit code {code}; results in {cfg.out_path}")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
