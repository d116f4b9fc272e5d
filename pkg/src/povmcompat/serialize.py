"""JSON encoding of matrices, observables, states, masks, and verdicts.

Matrices are row-major nested arrays whose entries are ``[re, im]`` pairs of
doubles; observables are ``{"dim": d, "outcomes": [{"label", "effect"}]}``.
Round trips are bit-stable for double-representable entries.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .compatibility import (
    BinaryJointCertificate,
    CompatibilityVerdict,
    ExtremeMotherJoint,
    MotherAssignment,
    PairWitness,
    Rank1PackingVerdict,
    ViolatedCondition,
)
from .dilation import DilationDiagnostics, ExtremalityReport, NaimarkDilation
from .errors import InputError
from .feasibility import FeasibilityVerdict
from .linalg import DEFAULT_TOL, Tolerance, as_matrix
from .observables import DiscreteObservable, JointCertificate, ObservableDiagnostics
from .steering import Assemblage, BipartiteState, LhsModel, SteeringVerdict


def matrix_to_json(mat: np.ndarray) -> list:
    mat = as_matrix(mat)
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


def matrix_from_json(data) -> np.ndarray:
    try:
        rows = [[complex(entry[0], entry[1]) for entry in row] for row in data]
    except (TypeError, IndexError) as exc:
        raise InputError(f"malformed matrix payload: {exc}") from exc
    return as_matrix(rows)


def observable_to_json(obs: DiscreteObservable) -> dict:
    return {
        "dim": obs.dim,
        "outcomes": [
            {"label": label, "effect": matrix_to_json(effect)}
            for label, effect in obs.outcomes
        ],
    }


def observable_from_json(data, tol: Tolerance = DEFAULT_TOL) -> DiscreteObservable:
    try:
        dim = int(data["dim"])
        outcomes = [
            (str(entry["label"]), matrix_from_json(entry["effect"]))
            for entry in data["outcomes"]
        ]
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed observable payload: {exc}") from exc
    return DiscreteObservable(dim, outcomes, tol)


def state_to_json(state: BipartiteState) -> dict:
    return {"dims": [state.dim_a, state.dim_b], "rho": matrix_to_json(state.rho)}


def state_from_json(data) -> BipartiteState:
    try:
        dim_a, dim_b = (int(d) for d in data["dims"])
        rho = matrix_from_json(data["rho"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed state payload: {exc}") from exc
    return BipartiteState(dim_a, dim_b, rho)


def masks_from_json(data) -> list[frozenset[int]]:
    try:
        return [frozenset(int(i) for i in mask) for mask in data["masks"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed masks payload: {exc}") from exc


def load_json(path) -> object:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def load_observable(path, tol: Tolerance = DEFAULT_TOL) -> DiscreteObservable:
    return observable_from_json(load_json(path), tol)


def load_state(path) -> BipartiteState:
    return state_from_json(load_json(path))


def save_json(path, payload) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _mask_to_json(mask) -> list[int]:
    return sorted(int(i) for i in mask)


def certificate_to_json(cert) -> object:
    """Serialize any certificate object carried by a verdict."""
    if cert is None:
        return None
    if isinstance(cert, JointCertificate):
        return {
            "type": "joint",
            "provenance": cert.provenance,
            "joint": observable_to_json(cert.joint),
            "pairs": [list(pair) for pair in cert.pairs],
            "marginal_residuals": [
                cert.marginal_residual_a,
                cert.marginal_residual_b,
            ],
        }
    if isinstance(cert, MotherAssignment):
        return {
            "type": "mother",
            "provenance": cert.provenance,
            "mother": observable_to_json(cert.mother),
            "a_masks": [
                {"subset": _mask_to_json(s), "mask": _mask_to_json(m)}
                for s, m in cert.a_masks
            ],
            "b_masks": [
                {"subset": _mask_to_json(s), "mask": _mask_to_json(m)}
                for s, m in cert.b_masks
            ],
        }
    if isinstance(cert, ViolatedCondition):
        return {"type": "violated_condition", **asdict(cert)}
    if isinstance(cert, PairWitness):
        return {
            "type": "pair_witness",
            "mask_a": _mask_to_json(cert.mask_a),
            "mask_b": _mask_to_json(cert.mask_b),
            "verdict": verdict_to_json(cert.verdict),
        }
    if isinstance(cert, BinaryJointCertificate):
        return {
            "type": "binary_joint",
            "provenance": cert.provenance,
            "joint": observable_to_json(cert.joint),
            "sign_vectors": [list(s) for s in cert.sign_vectors],
            "masks": [_mask_to_json(m) for m in cert.masks],
            "marginal_residuals": list(cert.marginal_residuals),
        }
    if isinstance(cert, ExtremeMotherJoint):
        return {
            "type": "extreme_mother_joint",
            "certificate": certificate_to_json(cert.certificate),
            "factor_residual": cert.factor_residual,
            "dilation_dim": cert.dilation.dilation_dim,
        }
    if isinstance(cert, tuple):
        return [certificate_to_json(item) for item in cert]
    raise TypeError(f"cannot serialize certificate of type {type(cert)!r}")


def verdict_to_json(verdict: CompatibilityVerdict) -> dict:
    return {
        "relation": verdict.relation,
        "status": verdict.status,
        "certificate": certificate_to_json(verdict.certificate),
        "notes": list(verdict.notes),
    }


def feasibility_to_json(verdict: FeasibilityVerdict) -> dict:
    return {
        "status": verdict.status,
        "residual": verdict.residual,
        "separation_gap": verdict.separation_gap,
        "iterations": verdict.iterations,
    }


def steering_to_json(verdict: SteeringVerdict) -> dict:
    payload = {
        "status": verdict.status,
        "feasibility": feasibility_to_json(verdict.feasibility),
        "notes": list(verdict.notes),
    }
    if verdict.model is not None:
        payload["model"] = {
            "strategies": [list(s) for s in verdict.model.strategies],
            "states": [matrix_to_json(state) for state in verdict.model.states],
        }
    return payload


def diagnostics_to_json(diag: ObservableDiagnostics) -> dict:
    return {
        "dim": diag.dim,
        "labels": list(diag.labels),
        "hermiticity_defects": list(diag.hermiticity_defects),
        "psd_margins": list(diag.psd_margins),
        "upper_margins": list(diag.upper_margins),
        "normalization_residual": diag.normalization_residual,
        "zero_effects": list(diag.zero_effects),
        "duplicate_labels": list(diag.duplicate_labels),
        "passes": diag.passes,
    }


def dilation_to_json(dil: NaimarkDilation, diag: DilationDiagnostics) -> dict:
    return {
        "dilation_dim": dil.dilation_dim,
        "J": matrix_to_json(dil.isometry),
        "blocks": [matrix_to_json(block) for block in dil.blocks],
        "residuals": {
            "isometry": diag.isometry_residual,
            "orthogonality": diag.orthogonality_residual,
            "completeness": diag.completeness_residual,
            "reconstruction": diag.reconstruction_residual,
        },
        "rank_sum": diag.rank_sum,
        "minimal": diag.minimal,
    }


def extremality_to_json(report: ExtremalityReport) -> dict:
    return {
        "is_extreme": report.is_extreme,
        "kernel_dim": report.kernel_dim,
        "dilation_dim": report.dilation.dilation_dim,
        "singular_values": list(report.singular_values),
    }


def packing_to_json(verdict: Rank1PackingVerdict) -> dict:
    return asdict(verdict)


def assemblage_to_json(assemblage: Assemblage) -> dict:
    return {
        "dim_b": assemblage.dim_b,
        "settings": [
            [{"label": label, "sigma": matrix_to_json(sigma)} for label, sigma in setting]
            for setting in assemblage.settings
        ],
        "no_signaling_residual": assemblage.no_signaling_residual(),
    }
