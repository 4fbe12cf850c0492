"""Command-line front end: certificates and decompositions as JSON.

Exit codes: 0 ok, 1 error (bad input, internal failure), 2 not PSD,
3 not x-symmetric, 4 inconclusive.  Human-readable summaries go to stdout;
with --json the machine payload is printed instead, byte-identical for
identical inputs and seeds (timings never enter the JSON).  Every emitted
decomposition is re-verified against its form before it is written; a
failed re-verification is a hard error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import forms, gram, linalg, meig, partsym, simple
from .errors import (
    CannotReduce,
    InvalidInput,
    NoPSDPointFound,
    NotPSD,
    NumericalError,
)

_EXIT_OK = 0
_EXIT_ERROR = 1
_EXIT_NOT_PSD = 2
_EXIT_NOT_XSYM = 3
_EXIT_INCONCLUSIVE = 4


@dataclass
class CommandResult:
    command: str
    status: str  # ok | not-psd | inconclusive | error
    payload: dict
    exit_code: int
    timing_ms: float = 0.0
    summary: str = ""


def _tolerances(args) -> linalg.Tolerances:
    if getattr(args, "tol", None) is not None:
        return linalg.Tolerances.uniform(args.tol)
    env = os.environ.get("BIQUAD_TOL")
    if env:
        try:
            return linalg.Tolerances.uniform(float(env))
        except (ValueError, InvalidInput) as exc:
            raise InvalidInput(f"bad BIQUAD_TOL value {env!r}: {exc}") from exc
    return linalg.DEFAULT_TOL


def _load_form(path: str, transpose: bool) -> forms.BiquadraticForm:
    """Read either a monomial form file or an x-symmetric (d, A, B) file."""
    data = forms.load_json(path)
    if not isinstance(data, dict):
        raise InvalidInput(f"{path}: expected a JSON object")
    if "terms" in data:
        form = forms.form_from_dict(data)
    elif {"m", "d", "A", "B"} <= set(data):
        xsym = partsym.XSymmetricData(
            int(data["m"]),
            np.asarray(data["d"], dtype=float),
            np.asarray(data["A"], dtype=float),
            np.asarray(data["B"], dtype=float),
        )
        form = partsym.reconstruct(xsym)
    else:
        raise InvalidInput(f"{path}: neither a form file (terms) nor x-symmetric data (m, d, A, B)")
    if transpose:
        form = forms.transpose_xy(form)
    return form


def _vec(a) -> list[float]:
    return [float(v) for v in np.asarray(a).ravel()]


def _witness_payload(x, y, value) -> dict:
    return {"x": _vec(x), "y": _vec(y), "value": float(value)}


def _cert_payload(form, reduction, cert: partsym.PSDCertificate | None, invalid) -> dict:
    payload = {
        "m": form.m,
        "n": form.n,
        "verdict": "PSD",
        "active": [],
        "d": [],
        "q_eigenvalues": [],
        "r_eigenvalues": [],
        "witness": None,
    }
    if invalid is not None:
        value = forms.evaluate(form, invalid.x, invalid.y)
        payload["verdict"] = "NotPSD"
        payload["witness"] = _witness_payload(invalid.x, invalid.y, value)
        payload["reason"] = invalid.reason
        return payload
    payload["active"] = [j + 1 for j in reduction.active]
    payload["d"] = _vec(np.asarray(reduction.scale) ** 2)
    if cert is not None:
        payload["q_eigenvalues"] = _vec(cert.q_eigenvalues)
        payload["r_eigenvalues"] = _vec(cert.r_eigenvalues)
        if not cert.psd:
            payload["verdict"] = "NotPSD"
            x, z = cert.witness
            y = _reduced_witness_y(reduction, z, form.n)
            payload["witness"] = _witness_payload(x, y, forms.evaluate(form, x, y))
    return payload


def _reduced_witness_y(reduction: partsym.MonicReduction, z: np.ndarray, n: int) -> np.ndarray:
    """Map a witness y-vector of the reduced monic form back to the original
    variables via y_j = z_j / sqrt(d_j) on active indices."""
    y = np.zeros(n)
    idx = np.asarray(reduction.active)
    y[idx] = z / reduction.scale[idx]
    return y


def cmd_check_psd(args) -> CommandResult:
    tol = _tolerances(args)
    form = _load_form(args.form, args.transpose)
    data = partsym.detect_x_symmetric(form)
    if data is None:
        return CommandResult(
            "check-psd",
            "error",
            {"error": "form is not x-symmetric; use 'sos-rank' for general forms"},
            _EXIT_NOT_XSYM,
            summary="not x-symmetric (try 'biquad sos-rank')",
        )
    reduction = partsym.reduce_general(data, tol)
    if isinstance(reduction, partsym.InvalidReduction):
        payload = _cert_payload(form, None, None, reduction)
        return CommandResult(
            "check-psd", "not-psd", payload, _EXIT_NOT_PSD,
            summary=f"NotPSD: {reduction.reason}; witness value {payload['witness']['value']:.6g}",
        )
    if not reduction.active:
        payload = _cert_payload(form, reduction, None, None)
        return CommandResult("check-psd", "ok", payload, _EXIT_OK, summary="PSD (zero form)")
    cert = partsym.check_psd_monic(reduction.monic, tol)
    payload = _cert_payload(form, reduction, cert, None)
    if cert.psd:
        return CommandResult(
            "check-psd", "ok", payload, _EXIT_OK,
            summary=f"PSD: min eig(Q) = {min(cert.q_eigenvalues):.6g}, min eig(R) = {min(cert.r_eigenvalues):.6g}",
        )
    return CommandResult(
        "check-psd", "not-psd", payload, _EXIT_NOT_PSD,
        summary=f"NotPSD: witness value {payload['witness']['value']:.6g}",
    )


def cmd_decompose(args) -> CommandResult:
    tol = _tolerances(args)
    form = _load_form(args.form, args.transpose)
    data = partsym.detect_x_symmetric(form)
    if data is None:
        return CommandResult(
            "decompose",
            "error",
            {"error": "form is not x-symmetric; use 'sos-rank' for general forms"},
            _EXIT_NOT_XSYM,
            summary="not x-symmetric",
        )
    method = args.method if args.method != "auto" else "structured"
    reduction = partsym.reduce_general(data, tol)
    if isinstance(reduction, partsym.InvalidReduction):
        payload = _cert_payload(form, None, None, reduction)
        return CommandResult("decompose", "not-psd", payload, _EXIT_NOT_PSD,
                             summary=f"NotPSD: {reduction.reason}")
    if not reduction.active:
        dec = forms.SOSDecomposition(form.m, form.n, ())
    else:
        try:
            if method == "naive":
                monic_dec = partsym.sos_decompose_naive(reduction.monic, tol)
            else:
                monic_dec = partsym.sos_decompose_structured(reduction.monic, tol)
        except NotPSD as exc:
            cert = exc.witness
            payload = _cert_payload(form, reduction, cert, None)
            return CommandResult("decompose", "not-psd", payload, _EXIT_NOT_PSD,
                                 summary="NotPSD: Q/R eigenvalue test failed")
        dec = partsym.undo_reduction(reduction, monic_dec, form.m, form.n)
    passed, resid = forms.verify_sos(form, dec, seed=args.seed)
    if not passed:
        raise NumericalError(f"decomposition failed re-verification: residual {resid:.3e}")
    forms.save_decomposition(dec, args.out)
    payload = {
        "factor_count": len(dec),
        "max_residual": resid,
        "method": method,
        "out": args.out,
    }
    return CommandResult(
        "decompose", "ok", payload, _EXIT_OK,
        summary=f"{len(dec)} bilinear squares ({method}); max residual {resid:.3e} -> {args.out}",
    )


def cmd_gen_simple(args) -> CommandResult:
    support = simple.gen_simple(args.m, args.n, args.s)
    form = simple.to_form(support)
    forms.save_form(form, args.out)
    rank = simple.exact_sos_rank_simple(support)
    payload = {"support": simple.support_to_dict(support), "out": args.out}
    if isinstance(rank, simple.UpperBoundOnly):
        payload["sos_rank"] = None
        payload["upper_bound"] = rank.bound
        payload["exact"] = False
        summary = (
            f"P_({args.m},{args.n},{args.s}): support has a rectangle; "
            f"SOS rank <= {rank.bound} (try 'biquad sos-rank')"
        )
    else:
        payload["sos_rank"] = rank
        payload["upper_bound"] = rank
        payload["exact"] = True
        summary = f"P_({args.m},{args.n},{args.s}): SOS rank exactly {rank}"
    return CommandResult("gen-simple", "ok", payload, _EXIT_OK, summary=summary + f" -> {args.out}")


def cmd_sos_rank(args) -> CommandResult:
    tol = _tolerances(args)
    form = _load_form(args.form, args.transpose)
    family = gram.build_family(form)
    try:
        point, rank = gram.min_rank_search(family, restarts=args.restarts, seed=args.seed, tol=tol)
    except NoPSDPointFound:
        return CommandResult(
            "sos-rank",
            "inconclusive",
            {"seed": args.seed, "restarts": args.restarts,
             "note": "no PSD Gram point found; the form may be PSD but not SOS, or more restarts are needed"},
            _EXIT_INCONCLUSIVE,
            summary="inconclusive: no PSD Gram point found",
        )
    dec = gram.factor_gram(point, tol)
    passed, resid = forms.verify_sos(form, dec, seed=args.seed)
    if not passed:
        raise NumericalError(f"Gram factorization failed re-verification: residual {resid:.3e}")
    support = simple.detect_simple(form)
    lower = None
    if support is not None:
        cert = simple.lower_bound_certificate(support)
        if cert.applicable:
            lower = cert.bound
    mn = form.m * form.n
    universal = mn - 1 if form.m >= 2 and form.n >= 2 else mn
    payload = {
        "upper_bound": rank,
        "gram_point": {"gamma": _vec(point.gamma), "rank": rank},
        "lower_bound": lower,
        "exact": lower is not None and lower == rank,
        "universal_bound": universal,
        "max_residual": resid,
        "seed": args.seed,
        "restarts": args.restarts,
    }
    if payload["exact"]:
        summary = f"SOS rank exactly {rank} (lower bound meets heuristic upper bound)"
    else:
        summary = f"SOS rank <= {rank} (heuristic upper bound; universal bound {universal})"
        if lower is not None:
            summary += f", >= {lower}"
    return CommandResult("sos-rank", "ok", payload, _EXIT_OK, summary=summary + f"; seed {args.seed}")


def cmd_reduce_rank(args) -> CommandResult:
    tol = _tolerances(args)
    form = _load_form(args.form, args.transpose)
    family = gram.build_family(form)
    start = gram._find_psd_point(family, np.zeros(family.dim), tol)
    if start is None:
        return CommandResult(
            "reduce-rank",
            "inconclusive",
            {"seed": args.seed, "note": "no PSD Gram point found to start from"},
            _EXIT_INCONCLUSIVE,
            summary="inconclusive: no PSD starting point",
        )
    reduced = gram.reduce_to_boundary(family, start, seed=args.seed, tol=tol)
    rank = linalg.numerical_rank(reduced.matrix, tol)
    dec = gram.factor_gram(reduced, tol)
    passed, resid = forms.verify_sos(form, dec, seed=args.seed)
    if not passed:
        raise NumericalError(f"Gram factorization failed re-verification: residual {resid:.3e}")
    payload = {"gamma": _vec(reduced.gamma), "rank": rank, "max_residual": resid, "seed": args.seed}
    if args.out:
        forms.dump_json({"gamma": payload["gamma"], "rank": rank}, args.out)
        payload["out"] = args.out
    mn = form.m * form.n
    return CommandResult(
        "reduce-rank", "ok", payload, _EXIT_OK,
        summary=f"boundary Gram point of rank {rank} (mn = {mn}); seed {args.seed}",
    )


def cmd_meig(args) -> CommandResult:
    _ = _tolerances(args)
    form = _load_form(args.form, args.transpose)
    pairs = meig.meig_solve(form, restarts=args.restarts, seed=args.seed)
    payload = {
        "pairs": [
            {
                "lambda": p.eigenvalue,
                "x": _vec(p.x),
                "y": _vec(p.y),
                "residuals": [p.residual_x, p.residual_y],
            }
            for p in pairs
        ],
        "count": len(pairs),
        "seed": args.seed,
        "restarts": args.restarts,
    }
    values = ", ".join(f"{p.eigenvalue:.6g}" for p in pairs)
    return CommandResult(
        "meig", "ok", payload, _EXIT_OK,
        summary=f"{len(pairs)} M-eigenpairs found: [{values}]; seed {args.seed}",
    )


def cmd_bench(args) -> CommandResult:
    tol = _tolerances(args)
    rng = np.random.default_rng(args.seed)
    naive_ms, structured_ms = [], []
    for _ in range(args.trials):
        data = partsym.random_psd_instance(args.m, args.n, rng)
        t0 = time.perf_counter()
        dec_naive = partsym.sos_decompose_naive(data, tol)
        t1 = time.perf_counter()
        dec_structured = partsym.sos_decompose_structured(data, tol)
        t2 = time.perf_counter()
        naive_ms.append((t1 - t0) * 1e3)
        structured_ms.append((t2 - t1) * 1e3)
        del dec_naive, dec_structured
    speedups = [n / s if s > 0 else float("inf") for n, s in zip(naive_ms, structured_ms)]
    payload = {
        "m": args.m,
        "n": args.n,
        "trials": args.trials,
        "seed": args.seed,
        "naive_ms": naive_ms,
        "structured_ms": structured_ms,
    }
    lines = [f"{'trial':>5}  {'naive_ms':>12}  {'structured_ms':>14}  {'speedup':>8}"]
    for idx, (nv, st, sp) in enumerate(zip(naive_ms, structured_ms, speedups)):
        lines.append(f"{idx:>5}  {nv:>12.3f}  {st:>14.3f}  {sp:>8.1f}")
    summary = "\n".join(lines) + f"\nseed {args.seed}"
    return CommandResult("bench", "ok", payload, _EXIT_OK, summary=summary)


def _add_common(sub, tol=True, seed=True, transpose=False, restarts=None):
    sub.add_argument("--json", action="store_true", help="print the JSON payload instead of a summary")
    if tol:
        sub.add_argument("--tol", type=float, default=None,
                         help="rank/PSD tolerance (default: BIQUAD_TOL env var or 1e-9)")
    if seed:
        sub.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    if transpose:
        sub.add_argument("--transpose", action="store_true",
                         help="swap the roles of x and y before analyzing")
    if restarts is not None:
        sub.add_argument("--restarts", type=int, default=restarts,
                         help=f"number of seeded restarts (default {restarts})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biquad",
        description="Certificates, SOS decompositions and rank bounds for biquadratic forms.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("check-psd", help="PSD test for an x-symmetric form")
    p.add_argument("form", help="form file (terms) or x-symmetric data file (m, d, A, B)")
    _add_common(p, transpose=True)
    p.set_defaults(handler=cmd_check_psd)

    p = subs.add_parser("decompose", help="write an SOS decomposition of an x-symmetric PSD form")
    p.add_argument("form")
    p.add_argument("out", help="output decomposition file")
    p.add_argument("--method", choices=("naive", "structured", "auto"), default="auto")
    _add_common(p, transpose=True)
    p.set_defaults(handler=cmd_decompose)

    p = subs.add_parser("gen-simple", help="generate a simple form of the diagonal-walk series")
    p.add_argument("m", type=int)
    p.add_argument("n", type=int)
    p.add_argument("s", type=int)
    p.add_argument("out", help="output form file")
    _add_common(p, tol=False, seed=False)
    p.set_defaults(handler=cmd_gen_simple)

    p = subs.add_parser("sos-rank", help="heuristic SOS-rank bounds via the Gram family")
    p.add_argument("form")
    _add_common(p, transpose=True, restarts=20)
    p.set_defaults(handler=cmd_sos_rank)

    p = subs.add_parser("reduce-rank", help="walk a PSD Gram point to the cone boundary (rank <= mn-1)")
    p.add_argument("form")
    p.add_argument("--out", default=None, help="optional output Gram-point file")
    _add_common(p, transpose=True)
    p.set_defaults(handler=cmd_reduce_rank)

    p = subs.add_parser("meig", help="M-eigenpairs of a small form")
    p.add_argument("form")
    _add_common(p, transpose=True, restarts=20)
    p.set_defaults(handler=cmd_meig)

    p = subs.add_parser("bench", help="time the naive vs structured decomposition paths")
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--trials", type=int, default=1)
    _add_common(p)
    p.set_defaults(handler=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        result = args.handler(args)
    except InvalidInput as exc:
        result = CommandResult(args.command, "error", {"error": str(exc)}, _EXIT_ERROR,
                               summary=f"error: {exc}")
    except FileNotFoundError as exc:
        result = CommandResult(args.command, "error", {"error": str(exc)}, _EXIT_ERROR,
                               summary=f"error: {exc}")
    except json.JSONDecodeError as exc:
        result = CommandResult(args.command, "error", {"error": f"parse failure: {exc}"}, _EXIT_ERROR,
                               summary=f"error: parse failure: {exc}")
    except NotPSD as exc:
        result = CommandResult(args.command, "not-psd", {"error": str(exc)}, _EXIT_NOT_PSD,
                               summary=f"not PSD: {exc}")
    except CannotReduce as exc:
        result = CommandResult(args.command, "error", {"error": str(exc)}, _EXIT_ERROR,
                               summary=f"error: {exc}")
    except NumericalError as exc:
        result = CommandResult(args.command, "error", {"error": str(exc)}, _EXIT_ERROR,
                               summary=f"error: {exc}")
    result.timing_ms = (time.perf_counter() - t0) * 1e3
    if args.json:
        envelope = {"command": result.command, "status": result.status, "payload": result.payload}
        sys.stdout.write(json.dumps(envelope, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(f"[{result.command}] {result.status} ({result.timing_ms:.1f} ms)\n")
        if result.summary:
            sys.stdout.write(result.summary + "\n")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
