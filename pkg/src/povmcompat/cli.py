"""Command-line front end.

One binary with subcommands; the machine-readable report document goes to
stdout as JSON (stable key order) and a short human summary to stderr.
Exit codes: 0 for a completed analysis, 2 for malformed input, 3 for a
numerical failure; ``repro-paper`` exits 1 when a criterion fails.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import fixtures, repro, serialize
from .compatibility import (
    binarization_jm_all,
    coexistence_check,
    extreme_joint_with_mother,
    jm_check,
    jm_threshold,
    joint_from_mother_binary,
    post_processing_finder,
    relabeling_finder,
)
from .dilation import dilate_minimal, is_extreme, verify_dilation
from .errors import (
    InputError,
    InvalidObservableError,
    NotApplicableError,
    PovmCompatError,
    ShapeError,
)
from .feasibility import DEFAULT_FEAS_TOL, DEFAULT_MAX_ITER
from .observables import diagnose_effects, relabel
from .steering import steerable

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CRITERION_FAILED = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _solver_args(args) -> dict:
    feas_tol = args.tol
    if feas_tol is None:
        env = os.environ.get("COMPAT_TOL")
        feas_tol = float(env) if env else DEFAULT_FEAS_TOL
    return {"feas_tol": feas_tol, "max_iter": args.max_iter}


def _load_raw_observable(path):
    data = serialize.load_json(path)
    try:
        dim = int(data["dim"])
        outcomes = [
            (str(entry["label"]), serialize.matrix_from_json(entry["effect"]))
            for entry in data["outcomes"]
        ]
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed observable payload in {path}: {exc}") from exc
    return dim, outcomes


def _cmd_validate(args, solver):
    dim, outcomes = _load_raw_observable(args.observable)
    diag = diagnose_effects(dim, outcomes)
    summary = "PASS" if diag.passes else "FAIL"
    return serialize.diagnostics_to_json(diag), f"validate: {summary}", EXIT_OK


def _cmd_dilate(args, solver):
    obs = serialize.load_observable(args.observable)
    dil = dilate_minimal(obs)
    diag = verify_dilation(obs, dil)
    payload = serialize.dilation_to_json(dil, diag)
    return payload, f"dilation dimension {dil.dilation_dim}", EXIT_OK


def _cmd_extreme(args, solver):
    obs = serialize.load_observable(args.observable)
    report = is_extreme(obs)
    word = "extreme" if report.is_extreme else f"not extreme (kernel {report.kernel_dim})"
    return serialize.extremality_to_json(report), word, EXIT_OK


def _cmd_jm(args, solver):
    a = serialize.load_observable(args.observable_a)
    b = serialize.load_observable(args.observable_b)
    verdict = jm_check(a, b, **solver)
    return (
        serialize.verdict_to_json(verdict),
        f"joint measurability: {verdict.status}",
        EXIT_OK,
    )


def _cmd_binarizations_jm(args, solver):
    a = serialize.load_observable(args.observable_a)
    b = serialize.load_observable(args.observable_b)
    verdict = binarization_jm_all(a, b, subset_cap=args.subset_cap, **solver)
    return (
        serialize.verdict_to_json(verdict),
        f"binarization compatibility: {verdict.status}",
        EXIT_OK,
    )


def _cmd_coexist(args, solver):
    a = serialize.load_observable(args.observable_a)
    b = serialize.load_observable(args.observable_b)
    verdict = coexistence_check(
        a,
        b,
        max_mother_outcomes=args.max_mother_outcomes,
        subset_cap=args.subset_cap,
        **solver,
    )
    return serialize.verdict_to_json(verdict), f"coexistence: {verdict.status}", EXIT_OK


def _cmd_mother_joint(args, solver):
    mother = serialize.load_observable(args.mother)
    masks = serialize.masks_from_json(serialize.load_json(args.masks))
    try:
        if args.extreme_a:
            a = serialize.load_observable(args.extreme_a)
            result = extreme_joint_with_mother(a, mother, masks)
            payload = serialize.certificate_to_json(result)
            return payload, "joint constructed from the mother", EXIT_OK
        cert = joint_from_mother_binary(mother, masks)
        payload = serialize.certificate_to_json(cert)
        return payload, "binary joint constructed from the mother", EXIT_OK
    except NotApplicableError as exc:
        payload = {
            "status": "NOT_APPLICABLE",
            "reason": str(exc),
            "residual": exc.residual,
        }
        return payload, f"not applicable: {exc}", EXIT_OK


def _cmd_relabel_find(args, solver):
    a = serialize.load_observable(args.observable_a)
    mother = serialize.load_observable(args.mother)
    found = relabeling_finder(a, mother)
    if found is None:
        return {"found": False, "relabeling": None}, "no relabeling exists", EXIT_OK
    rebuilt = relabel(mother, found, labels=a.labels)
    residual = max(
        float(np.linalg.norm(x - y)) for x, y in zip(rebuilt.effects, a.effects)
    )
    payload = {"found": True, "relabeling": list(found), "residual": residual}
    return payload, f"relabeling found: {list(found)}", EXIT_OK


def _cmd_postprocess_find(args, solver):
    a = serialize.load_observable(args.observable_a)
    mother = serialize.load_observable(args.mother)
    kernel, verdict = post_processing_finder(a, mother, **solver)
    payload = {
        "found": kernel is not None,
        "kernel": None if kernel is None else [list(row) for row in kernel.matrix],
        "feasibility": serialize.feasibility_to_json(verdict),
    }
    word = "kernel found" if kernel is not None else f"no kernel ({verdict.status})"
    return payload, word, EXIT_OK


def _cmd_jm_threshold(args, solver):
    a = serialize.load_observable(args.observable_a)
    b = serialize.load_observable(args.observable_b)
    log: list = []
    threshold = jm_threshold(a, b, probe_log=log, **solver)
    payload = {
        "threshold": threshold,
        "probes": [
            {"visibility": eta, "status": status, "seconds": seconds}
            for eta, status, seconds in log
        ],
    }
    return payload, f"critical visibility {threshold:.4f}", EXIT_OK


def _cmd_steer(args, solver):
    state = serialize.load_state(args.state)
    measurements = [serialize.load_observable(path) for path in args.measurements]
    verdict = steerable(state, measurements, **solver)
    return serialize.steering_to_json(verdict), f"steering: {verdict.status}", EXIT_OK


def _cmd_fixtures(args, solver):
    listing = {"observables": sorted(fixtures.OBSERVABLES), "states": sorted(fixtures.STATES)}
    if args.dir:
        outdir = Path(args.dir)
        outdir.mkdir(parents=True, exist_ok=True)
        for name, build in fixtures.OBSERVABLES.items():
            serialize.save_json(outdir / f"{name}.json", serialize.observable_to_json(build()))
        for name, build in fixtures.STATES.items():
            serialize.save_json(outdir / f"{name}.json", serialize.state_to_json(build()))
        listing["written_to"] = str(outdir)
    return listing, f"{len(fixtures.OBSERVABLES)} observables, {len(fixtures.STATES)} states", EXIT_OK


def _cmd_repro(args, solver):
    results, all_passed = repro.run_reference_suite()
    payload = {
        "all_passed": all_passed,
        "criteria": [
            {
                "name": r.name,
                "passed": r.passed,
                "values": _plain(r.values),
            }
            for r in results
        ],
    }
    lines = [
        f"{'PASS' if r.passed else 'FAIL'}  {r.name}" for r in results
    ]
    summary = "\n".join(lines)
    return payload, summary, EXIT_OK if all_passed else EXIT_CRITERION_FAILED


def _plain(value):
    """Recursively convert numpy scalars/arrays for JSON."""
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="povmcompat",
        description="Compatibility analysis for finite-outcome quantum observables.",
    )
    parser.add_argument("--tol", type=float, default=None, help="solver feasibility tolerance (overrides COMPAT_TOL)")
    parser.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER, help="solver iteration cap")
    parser.add_argument("--out", type=str, default=None, help="also write the JSON report to this file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="diagnose an observable file")
    p.add_argument("observable")
    p.set_defaults(handler=_cmd_validate)

    p = sub.add_parser("dilate", help="minimal dilation of an observable")
    p.add_argument("observable")
    p.set_defaults(handler=_cmd_dilate)

    p = sub.add_parser("extreme", help="extremality classification")
    p.add_argument("observable")
    p.set_defaults(handler=_cmd_extreme)

    p = sub.add_parser("jm", help="joint measurability of two observables")
    p.add_argument("observable_a")
    p.add_argument("observable_b")
    p.set_defaults(handler=_cmd_jm)

    p = sub.add_parser("binarizations-jm", help="joint measurability of every binarization pair")
    p.add_argument("observable_a")
    p.add_argument("observable_b")
    p.add_argument("--subset-cap", type=int, default=4096)
    p.set_defaults(handler=_cmd_binarizations_jm)

    p = sub.add_parser("coexist", help="coexistence of two observables")
    p.add_argument("observable_a")
    p.add_argument("observable_b")
    p.add_argument("--subset-cap", type=int, default=4096)
    p.add_argument("--max-mother-outcomes", type=int, default=5)
    p.set_defaults(handler=_cmd_coexist)

    p = sub.add_parser("mother-joint", help="joint observable from a mother and masks")
    p.add_argument("mother")
    p.add_argument("--masks", required=True, help="JSON file {\"masks\": [[indices]...]}")
    p.add_argument("--extreme-a", default=None, help="per-outcome masks realize this observable")
    p.set_defaults(handler=_cmd_mother_joint)

    p = sub.add_parser("relabel-find", help="find a relabeling of the mother onto the target")
    p.add_argument("observable_a")
    p.add_argument("mother")
    p.set_defaults(handler=_cmd_relabel_find)

    p = sub.add_parser("postprocess-find", help="find a stochastic kernel from the mother onto the target")
    p.add_argument("observable_a")
    p.add_argument("mother")
    p.set_defaults(handler=_cmd_postprocess_find)

    p = sub.add_parser("jm-threshold", help="critical visibility for joint measurability")
    p.add_argument("observable_a")
    p.add_argument("observable_b")
    p.set_defaults(handler=_cmd_jm_threshold)

    p = sub.add_parser("steer", help="steerability of a state with given measurements")
    p.add_argument("state")
    p.add_argument("measurements", nargs="+")
    p.set_defaults(handler=_cmd_steer)

    p = sub.add_parser("fixtures", help="list or export the built-in reference files")
    p.add_argument("--dir", default=None, help="write fixture JSON files here")
    p.set_defaults(handler=_cmd_fixtures)

    p = sub.add_parser("repro-paper", help="run the built-in reference suite")
    p.set_defaults(handler=_cmd_repro)

    return parser


def run_command(argv=None) -> tuple[dict, int]:
    """Dispatch a CLI invocation; returns the report document and exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    solver = _solver_args(args)
    start = time.perf_counter()
    try:
        result, summary, code = args.handler(args, solver)
    except (InputError, InvalidObservableError, ShapeError) as exc:
        report = _report(args, solver, {"error": str(exc)}, start)
        return report, EXIT_INPUT
    except (PovmCompatError, np.linalg.LinAlgError) as exc:
        report = _report(args, solver, {"error": str(exc)}, start)
        return report, EXIT_NUMERICAL
    report = _report(args, solver, result, start)
    report["summary"] = summary
    return report, code


def _report(args, solver, result, start) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": args.command,
        "parameters": {
            "feas_tol": solver["feas_tol"],
            "max_iter": solver["max_iter"],
            "out": args.out,
        },
        "result": _plain(result),
        "runtime_s": time.perf_counter() - start,
    }


def main(argv=None) -> int:
    report, code = run_command(argv)
    summary = report.pop("summary", None)
    out_path = report["parameters"].get("out")
    document = json.dumps(report, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(document)
    if out_path:
        Path(out_path).write_text(document, encoding="utf-8")
    if summary:
        print(summary, file=sys.stderr)
    if "error" in report.get("result", {}):
        print(f"error: {report['result']['error']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
