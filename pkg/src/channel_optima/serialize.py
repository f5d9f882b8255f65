"""JSON report serialization with stable key order and [re, im] number pairs."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from typing import Any

import numpy as np

from .entropyopt import CapacityReport, Ensemble, MinEntropyReport, OptimizerConfig
from .optsets import CoincidenceReport, OptimalSetSample
from .product import AdditivityReport, HereditaryReport, ProjectiveRelationsReport
from .qcore import DensityMatrix, Projector, PureState


def _num(x: float) -> float | str:
    x = float(x)
    if x == float("inf"):
        return "inf"
    if x == float("-inf"):
        return "-inf"
    return x


def vector_to_json(v: np.ndarray) -> list:
    return [[float(c.real), float(c.imag)] for c in np.asarray(v, dtype=complex)]


def matrix_to_json(m: np.ndarray) -> list:
    return [vector_to_json(row) for row in np.asarray(m, dtype=complex)]


def ensemble_to_json(e: Ensemble) -> dict:
    return {
        "weights": [float(p) for p, _ in e.members],
        "states": [vector_to_json(s.ket) for _, s in e.members],
    }


def config_to_json(cfg: OptimizerConfig) -> dict:
    data = asdict(cfg)
    return {k: data[k] for k in sorted(data)}


def config_hash(cfg: OptimizerConfig) -> str:
    return hashlib.sha256(
        json.dumps(config_to_json(cfg), sort_keys=True).encode()
    ).hexdigest()


def minent_report_to_json(r: MinEntropyReport) -> dict:
    return {
        "value": _num(r.value),
        "minimizers": [vector_to_json(s.ket) for s in r.minimizers],
        "residuals": [_num(x) for x in r.residuals],
        "restart_converged": [bool(x) for x in r.restart_converged],
        "converged": bool(r.converged),
    }


def capacity_report_to_json(r: CapacityReport) -> dict:
    return {
        "value": _num(r.value),
        "ensemble": ensemble_to_json(r.ensemble),
        "omega": matrix_to_json(r.omega.mat),
        "max_distance_residual": _num(r.max_distance_residual),
        "lemma1_residuals": [_num(x) for x in r.lemma1_residuals],
        "iterations": int(r.iterations),
        "converged": bool(r.converged),
    }


def sample_to_json(s: OptimalSetSample) -> dict:
    return {
        "kind": s.kind,
        "states": [vector_to_json(p.ket) for p in s.states],
        "residuals": [_num(x) for x in s.residuals],
        "support_projector": {
            "rank": int(s.support_projector.rank),
            "matrix": matrix_to_json(s.support_projector.mat),
        },
    }


def coincidence_report_to_json(r: CoincidenceReport) -> dict:
    return {
        "coincide": bool(r.coincide),
        "lambda": _num(r.lam),
        "lambda_expected": _num(r.lambda_expected),
        "condition_residual": _num(r.condition_residual),
        "unital_condition_residual": _num(r.unital_condition_residual),
        "support_function_gap": _num(r.support_function_gap),
        "bistochastic": bool(r.bistochastic),
        "omega_chaotic_residual": None
        if r.omega_chaotic_residual is None
        else _num(r.omega_chaotic_residual),
    }


def additivity_report_to_json(r: AdditivityReport) -> dict:
    return {
        "kind": r.kind,
        "single_values": [_num(x) for x in r.single_values],
        "product_value": _num(r.product_value),
        "gap": _num(r.gap),
        "witness": vector_to_json(r.witness.ket),
        "witness_rank": None if r.witness_rank is None else int(r.witness_rank),
        "witness_flatness_defect": _num(r.witness_flatness_defect),
        "omega_product_residual": None
        if r.omega_product_residual is None
        else _num(r.omega_product_residual),
        "checks": [[label, _num(value)] for label, value in r.checks],
        "converged": bool(r.converged),
    }


def hereditary_report_to_json(r: HereditaryReport) -> dict:
    return {
        "tested": int(r.tested),
        "violations": [[int(i), _num(d)] for i, d in r.violations],
        "strong_violations": [[list(pair), _num(d)] for pair, d in r.strong_violations],
        "max_defect": _num(r.max_defect),
    }


def projective_report_to_json(r: ProjectiveRelationsReport) -> dict:
    return {
        "relations": [
            {"name": name, "projected_minus_single": _num(a), "single_minus_projected": _num(b)}
            for name, a, b in r.relations
        ],
        "omega_product_residual": _num(r.omega_product_residual),
        "all_hold": bool(r.all_hold),
    }


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"
