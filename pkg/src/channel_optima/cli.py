"""Command-line front end: load channels, run analyses, emit JSON reports.

Every report embeds the tool version, seed, and a config hash; repeated runs
with the same seed are byte-identical up to the elapsed-time field.  Exit
codes: 0 success, 1 input error, 2 non-convergence (partial report written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .channels import Channel, ChannelFormatError, catalog, load_channel, tensor_channels
from .config import derive_rng, log_base_label, set_log_base
from .entropyopt import (
    ConstraintSet,
    OptimizerConfig,
    holevo_capacity,
    min_output_entropy,
)
from .optsets import coincidence_test, sample_optimal_set_C, sample_optimal_set_E
from .product import (
    additivity_capacity,
    additivity_min_entropy,
    assumption_A_defect,
    assumption_B_defects,
    hereditary_check,
    membership_defect_for_kind,
)
from .qcore import DensityMatrix, random_density_matrix
from . import serialize
from .serialize import dumps

CONFIG_ENV_VAR = "CHANNEL_OPTIMA_CONFIG"


class InputError(Exception):
    """Invalid user input (bad file, unknown catalog entry, missing flag)."""


def _parse_inline_catalog(spec: str) -> Channel:
    name, _, rest = spec.partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            key, _, value = item.partition("=")
            if not key or not value:
                raise InputError(f"bad catalog parameter {item!r} in {spec!r}")
            params[key] = value
    try:
        return catalog(name, **params)
    except ChannelFormatError as exc:
        raise InputError(str(exc)) from None


def _resolve_channel(spec: str) -> Channel:
    if spec.endswith(".json") or os.path.sep in spec or os.path.exists(spec):
        try:
            return load_channel(spec)
        except ChannelFormatError as exc:
            raise InputError(str(exc)) from None
    return _parse_inline_catalog(spec)


def _channel_from_flags(args) -> Channel:
    if args.channel is not None:
        return _resolve_channel(args.channel)
    if args.catalog is None:
        raise InputError("provide a channel file or --catalog NAME")
    params = {}
    if args.dim is not None:
        params["d"] = args.dim
    if args.dim_out is not None:
        params["d_out"] = args.dim_out
    if args.p is not None:
        params["p"] = args.p
    if args.gamma is not None:
        params["gamma"] = args.gamma
    try:
        return catalog(args.catalog, **params)
    except ChannelFormatError as exc:
        raise InputError(str(exc)) from None


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as exc:
        raise InputError(f"config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"config file {path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise InputError(f"config file {path}: expected a JSON object")
    return data


def _build_config(args) -> OptimizerConfig:
    values: dict = {}
    config_path = args.config or os.environ.get(CONFIG_ENV_VAR)
    if config_path:
        allowed = {"restarts", "max_iters", "obj_tol", "grad_tol", "seed", "ensemble_cap", "threads"}
        for key, value in _load_config_file(config_path).items():
            if key not in allowed:
                raise InputError(f"config file: unknown key {key!r}")
            values[key] = value
    if args.restarts is not None:
        values["restarts"] = args.restarts
    if args.max_iters is not None:
        values["max_iters"] = args.max_iters
    if args.tol is not None:
        values["obj_tol"] = args.tol
    if args.grad_tol is not None:
        values["grad_tol"] = args.grad_tol
    if args.seed is not None:
        values["seed"] = args.seed
    if args.threads is not None:
        values["threads"] = args.threads
    elif "threads" not in values:
        values["threads"] = os.cpu_count() or 1
    try:
        return OptimizerConfig(**values)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad optimizer configuration: {exc}") from None


def _load_constraint(path: str | None, dim: int) -> ConstraintSet:
    if path is None:
        return ConstraintSet.full()
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as exc:
        raise InputError(f"constraint file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"constraint file {path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict) or "generators" not in data:
        raise InputError(f"constraint file {path}: expected {{\"generators\": [...]}}")
    gens = []
    for idx, rows in enumerate(data["generators"]):
        arr = np.array(rows, dtype=float)
        if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
            raise InputError(f"constraint file {path}: generators[{idx}] is not a square [re,im] matrix")
        mat = arr[..., 0] + 1j * arr[..., 1]
        if mat.shape[0] != dim:
            raise InputError(
                f"constraint file {path}: generators[{idx}] dim {mat.shape[0]} != channel dim {dim}"
            )
        try:
            gens.append(DensityMatrix(mat))
        except ValueError as exc:
            raise InputError(f"constraint file {path}: generators[{idx}]: {exc}") from None
    return ConstraintSet.of(*gens)


# -- commands -----------------------------------------------------------------

def _cmd_minent(args, cfg):
    ch = _channel_from_flags(args)
    report = min_output_entropy(ch, cfg)
    body = serialize.minent_report_to_json(report)
    table = [("min_output_entropy", report.value,
              max(report.residuals) if report.residuals else 0.0)]
    return body, report.converged, table, [ch.name or args.channel or args.catalog]


def _cmd_capacity(args, cfg):
    ch = _channel_from_flags(args)
    constraint = _load_constraint(args.constraint, ch.dim_in)
    report = holevo_capacity(ch, constraint, cfg)
    body = serialize.capacity_report_to_json(report)
    table = [("capacity", report.value, report.max_distance_residual)]
    return body, report.converged, table, [ch.name or args.channel or args.catalog]


def _cmd_optsets(args, cfg):
    ch = _channel_from_flags(args)
    minent = min_output_entropy(ch, cfg)
    capacity = holevo_capacity(ch, ConstraintSet.full(), cfg)
    sample_e = sample_optimal_set_E(ch, cfg, minent=minent)
    sample_c = sample_optimal_set_C(ch, capacity, cfg)
    body = {
        "min_output_entropy": serialize.minent_report_to_json(minent),
        "capacity": serialize.capacity_report_to_json(capacity),
        "sample_E": serialize.sample_to_json(sample_e),
        "sample_C": serialize.sample_to_json(sample_c),
    }
    converged = minent.converged and capacity.converged
    table = [
        ("min_output_entropy", minent.value, max(minent.residuals)),
        ("capacity", capacity.value, capacity.max_distance_residual),
        ("sample_E_size", float(len(sample_e.states)), max(sample_e.residuals)),
        ("sample_C_size", float(len(sample_c.states)), max(sample_c.residuals)),
    ]
    return body, converged, table, [ch.name or args.channel or args.catalog]


def _cmd_coincidence(args, cfg):
    ch = _channel_from_flags(args)
    minent = min_output_entropy(ch, cfg)
    capacity = holevo_capacity(ch, ConstraintSet.full(), cfg)
    sample_e = sample_optimal_set_E(ch, cfg, minent=minent)
    sample_c = sample_optimal_set_C(ch, capacity, cfg)
    report = coincidence_test(ch, capacity, minent, [sample_e, sample_c], cfg,
                              n_directions=args.directions)
    body = serialize.coincidence_report_to_json(report)
    body["capacity"] = serialize.capacity_report_to_json(capacity)
    body["min_output_entropy"] = serialize.minent_report_to_json(minent)
    table = [
        ("coincide", 1.0 if report.coincide else 0.0, report.condition_residual),
        ("lambda", report.lam, abs(report.lam - report.lambda_expected)),
        ("support_function_gap", report.support_function_gap, 0.0),
    ]
    converged = minent.converged and capacity.converged
    return body, converged, table, [ch.name or args.channel or args.catalog]


def _cmd_additivity(args, cfg):
    phi = _resolve_channel(args.phi)
    psi = _resolve_channel(args.psi)
    if args.kind == "capacity":
        report = additivity_capacity(phi, psi, cfg)
    else:
        report = additivity_min_entropy(phi, psi, cfg)
    body = serialize.additivity_report_to_json(report)
    table = [
        (f"additivity_gap_{report.kind}", report.gap, 0.0),
        ("product_value", report.product_value, 0.0),
    ]
    if report.omega_product_residual is not None:
        table.append(("omega_product_residual", report.omega_product_residual, 0.0))
    return body, report.converged, table, [phi.name or args.phi, psi.name or args.psi]


def _cmd_hereditary(args, cfg):
    phi = _resolve_channel(args.phi)
    psi = _resolve_channel(args.psi)
    prod = tensor_channels(phi, psi)
    oracle, sample = membership_defect_for_kind(args.kind, prod, cfg)
    report = hereditary_check(sample, prod.input_dims, oracle,
                              strong=args.strong, max_states=args.max_states)
    body = serialize.hereditary_report_to_json(report)
    body["kind"] = args.kind
    table = [
        ("hereditary_tested", float(report.tested), 0.0),
        ("hereditary_violations", float(len(report.violations) + len(report.strong_violations)),
         report.max_defect),
    ]
    return body, True, table, [phi.name or args.phi, psi.name or args.psi]


def _cmd_assumptions(args, cfg):
    phi = _resolve_channel(args.phi)
    psi = _resolve_channel(args.psi)
    prod = tensor_channels(phi, psi)
    d = prod.combined.dim_in
    a_defects = []
    b_defects = []
    for i in range(args.samples):
        omega = random_density_matrix(derive_rng(cfg.seed, "assumption_state", i), d)
        a_defects.append(assumption_A_defect(phi, psi, omega, cfg, product=prod))
        rho = random_density_matrix(derive_rng(cfg.seed, "assumption_left", i), phi.dim_in)
        sigma = random_density_matrix(derive_rng(cfg.seed, "assumption_right", i), psi.dim_in)
        product_state = DensityMatrix(np.kron(rho.mat, sigma.mat), _validated=True)
        b_defects.append(assumption_B_defects(phi, psi, product_state, cfg, product=prod))
    body = {
        "samples": args.samples,
        "assumption_A_defects": [serialize._num(x) for x in a_defects],
        "assumption_A_min": serialize._num(min(a_defects)),
        "assumption_B_defects": [[serialize._num(x) for x in row] for row in b_defects],
        "assumption_B_max_abs": serialize._num(
            max(abs(x) for row in b_defects for x in row)
        ),
    }
    table = [
        ("assumption_A_min_defect", min(a_defects), 0.0),
        ("assumption_B_max_abs_defect", max(abs(x) for row in b_defects for x in row), 0.0),
    ]
    return body, True, table, [phi.name or args.phi, psi.name or args.psi]


def _add_common_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=None, help="master random seed (default 0)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: available parallelism)")
    parser.add_argument("--restarts", type=int, default=None, help="multi-start restarts")
    parser.add_argument("--max-iters", type=int, default=None, help="iteration cap per solve")
    parser.add_argument("--tol", type=float, default=None, help="objective tolerance")
    parser.add_argument("--grad-tol", type=float, default=None, help="gradient tolerance")
    parser.add_argument("--log-base", choices=("2", "e"), default="2", help="entropy unit")
    parser.add_argument("--out", default=None, help="write the JSON report to this file")
    parser.add_argument("--table", action="store_true",
                        help="also emit a flat TSV of (quantity, value, residual) rows")
    parser.add_argument("--config", default=None,
                        help=f"optimizer config JSON (or set ${CONFIG_ENV_VAR})")


def _add_single_channel_args(parser: argparse.ArgumentParser):
    parser.add_argument("channel", nargs="?", default=None,
                        help="channel file, or inline catalog spec name:k=v,...")
    parser.add_argument("--catalog", default=None, help="catalog channel name")
    parser.add_argument("--dim", type=int, default=None, help="catalog dimension parameter")
    parser.add_argument("--dim-out", type=int, default=None, help="catalog output dimension")
    parser.add_argument("--p", type=float, default=None, help="catalog noise parameter")
    parser.add_argument("--gamma", type=float, default=None, help="catalog damping parameter")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="channel-optima",
        description="Capacity, output-entropy, and optimal-set analysis of quantum channels.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("minent", help="minimal output entropy")
    _add_single_channel_args(p)
    _add_common_flags(p)
    p.set_defaults(func=_cmd_minent)

    p = sub.add_parser("capacity", help="Holevo capacity (optionally constrained)")
    _add_single_channel_args(p)
    p.add_argument("--constraint", default=None,
                   help="JSON file with constraint generators")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_capacity)

    p = sub.add_parser("optsets", help="sample and certify both optimal sets")
    _add_single_channel_args(p)
    _add_common_flags(p)
    p.set_defaults(func=_cmd_optsets)

    p = sub.add_parser("coincidence", help="test coincidence of the two optimal sets")
    _add_single_channel_args(p)
    p.add_argument("--directions", type=int, default=50,
                   help="support-function directions for the cross-check")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_coincidence)

    p = sub.add_parser("additivity", help="additivity probe for a channel pair")
    p.add_argument("kind", choices=("min_entropy", "capacity"))
    p.add_argument("phi", help="first channel (file or inline catalog spec)")
    p.add_argument("psi", help="second channel")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_additivity)

    p = sub.add_parser("hereditary", help="hereditary screen of a sampled product optimal set")
    p.add_argument("phi", help="first channel")
    p.add_argument("psi", help="second channel")
    p.add_argument("--kind", choices=("E", "C"), default="E")
    p.add_argument("--strong", action="store_true", help="also test marginal cross-pairs")
    p.add_argument("--max-states", type=int, default=None)
    _add_common_flags(p)
    p.set_defaults(func=_cmd_hereditary)

    p = sub.add_parser("assumptions", help="screen the two additivity assumptions on random states")
    p.add_argument("phi", help="first channel")
    p.add_argument("psi", help="second channel")
    p.add_argument("--samples", type=int, default=10)
    _add_common_flags(p)
    p.set_defaults(func=_cmd_assumptions)
    return parser


def _emit(args, envelope: dict, table_rows):
    text = dumps(envelope)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    if args.table:
        lines = "".join(f"{name}\t{value!r}\t{residual!r}\n" for name, value, residual in table_rows)
        if args.out:
            with open(args.out + ".tsv", "w", encoding="utf-8") as handle:
                handle.write(lines)
        else:
            sys.stdout.write(lines)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    set_log_base(args.log_base)
    started = time.perf_counter()
    try:
        cfg = _build_config(args)
        body, converged, table_rows, channel_names = args.func(args, cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ChannelFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    envelope = {
        "command": args.command,
        "channels": channel_names,
        "config": serialize.config_to_json(cfg),
        "config_hash": serialize.config_hash(cfg),
        "converged": bool(converged),
        "elapsed_seconds": time.perf_counter() - started,
        "log_base": log_base_label(),
        "report": body,
        "seed": cfg.seed,
        "version": __version__,
    }
    _emit(args, envelope, table_rows)
    return 0 if converged else 2


if __name__ == "__main__":
    sys.exit(main())
