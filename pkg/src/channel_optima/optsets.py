"""Optimal-set construction and certification for a single channel.

Two sets matter: the capacity-optimal set (states saturating the capacity
inequality) and the entropy-optimal set (convex closure of the minimal
output-entropy states).  Extreme-point candidates are pure states certified by
an eigenvector condition; set-level statements are made on finite samples and
on penalized support functions, never on the (possibly continuum) sets
themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import Channel, is_bistochastic
from .config import derive_rng, random_ket
from .entropyopt import (
    CapacityReport,
    MinEntropyReport,
    OptimizerConfig,
    _conjugate_engine,
    _entropy_value,
    _entropy_value_grad,
    _multistart_sphere,
    _dedup_kets,
    capacity_residual_vector,
    chi,
    min_entropy_residual,
)
from .qcore import (
    DensityMatrix,
    Projector,
    PureState,
    eig_hermitian,
    herm,
    log_on_support,
    max_abs,
    projector_from_span,
    relative_entropy,
)

MEMBERSHIP_TOL = 1e-4
CERTIFICATION_TOL = 1e-5
COINCIDENCE_SUPPORT_TOL = 1e-4
SAMPLE_CAP = 512


@dataclass(frozen=True)
class OptimalSetSample:
    """Certified pure extreme-point candidates of one optimal set."""

    kind: str  # "C" (capacity) or "E" (minimal output entropy)
    states: tuple[PureState, ...]
    residuals: tuple[float, ...]
    support_projector: Projector


@dataclass(frozen=True)
class CoincidenceReport:
    """Outcome of the coincidence test between the two optimal sets."""

    coincide: bool
    lam: float
    condition_residual: float
    lambda_expected: float
    unital_condition_residual: float
    support_function_gap: float
    bistochastic: bool
    omega_chaotic_residual: float | None


def sample_optimal_set_E(ch: Channel, cfg: OptimizerConfig,
                         minent: MinEntropyReport | None = None) -> OptimalSetSample:
    """Sample extreme points of the entropy-optimal set.

    States are the deduplicated output-entropy minimizers whose eigenvector
    residual certifies below 1e-5; at most 512 are retained.
    """
    from .entropyopt import min_output_entropy

    report = minent if minent is not None else min_output_entropy(ch, cfg)
    kets, residuals = [], []
    for state, res in zip(report.minimizers, report.residuals):
        if res <= CERTIFICATION_TOL and len(kets) < SAMPLE_CAP:
            kets.append(state.ket)
            residuals.append(res)
    if not kets:
        raise RuntimeError("no output-entropy minimizer certified below 1e-5")
    return OptimalSetSample(
        kind="E",
        states=tuple(PureState(k) for k in kets),
        residuals=tuple(residuals),
        support_projector=projector_from_span(kets),
    )


def sample_optimal_set_C(ch: Channel, report: CapacityReport,
                         cfg: OptimizerConfig) -> OptimalSetSample:
    """Sample extreme points of the capacity-optimal set.

    Runs a multi-start maximization of the output relative entropy to Omega,
    keeps pure states within 1e-5 of the capacity, and certifies each by the
    eigenvector condition.
    """
    if not report.converged:
        raise ValueError("capacity report did not converge; refusing to sample")
    omega_mat = report.omega.mat
    a_op = ch.dual_apply(-log_on_support(omega_mat))

    def vg(psi):
        h, gh, spec = _entropy_value_grad(ch, psi)
        val = np.vdot(psi, a_op @ psi).real - h
        return -val, -(2.0 * (a_op @ psi) - gh), spec

    def v(psi):
        return -(np.vdot(psi, a_op @ psi).real - _entropy_value(ch, psi))

    seeds = [s.ket for _, s in report.ensemble.members]
    runs = _multistart_sphere(vg, v, ch.dim_in, cfg, "sample_set_C", extra_starts=seeds)
    candidates = [x for f, x, _ in runs if abs(-f - report.value) <= CERTIFICATION_TOL]
    kets, residuals = [], []
    for k in _dedup_kets(candidates):
        res = capacity_residual_vector(ch, k, omega_mat, report.value)
        if res <= CERTIFICATION_TOL and len(kets) < SAMPLE_CAP:
            kets.append(k)
            residuals.append(res)
    if not kets:
        raise RuntimeError("no capacity-optimal extreme point certified below 1e-5")
    return OptimalSetSample(
        kind="C",
        states=tuple(PureState(k) for k in kets),
        residuals=tuple(residuals),
        support_projector=projector_from_span(kets),
    )


def membership_C(ch: Channel, rho: DensityMatrix, report: CapacityReport,
                 cfg: OptimizerConfig) -> tuple[bool, float]:
    """Capacity-optimal set membership via the defining equality.

    defect = Cbar - chi(rho) - H(Phi(rho) || Omega); member when the defect is
    finite and at most 1e-4.  A channel with Cbar = 0 admits every state by
    convention.
    """
    if not report.converged:
        raise ValueError("capacity report did not converge")
    if report.value <= 1e-9:
        return True, 0.0
    chi_val, _ = chi(ch, rho, cfg)
    dist = relative_entropy(ch.apply(rho), report.omega)
    if math.isinf(dist):
        return False, -math.inf
    defect = report.value - chi_val - dist
    return defect <= MEMBERSHIP_TOL, defect


def membership_E_defect(ch: Channel, rho: DensityMatrix, h_min: float,
                        cfg: OptimizerConfig) -> float:
    """Entropy-optimal set defect: convex closure at rho minus the minimum."""
    from .entropyopt import convex_closure_entropy

    closure, _ = convex_closure_entropy(ch, rho, cfg)
    return closure - h_min


def minimal_support_projector(samples: Sequence[OptimalSetSample]) -> Projector:
    """Projector onto the span of every sampled state vector."""
    kets = [s.ket for sample in samples for s in sample.states]
    if not kets:
        raise ValueError("no states to span")
    dims = {k.shape[0] for k in kets}
    if len(dims) != 1:
        raise ValueError("samples of mismatched dimension")
    return projector_from_span(kets)


# ---------------------------------------------------------------------------
# penalized support functions of optimal sets
# ---------------------------------------------------------------------------

_SUPPORT_STAGES = (1e2, 1e4, 1e6)


def optimal_set_support(ch: Channel, g_op: np.ndarray, kind: str, cfg: OptimizerConfig,
                        h_min: float | None = None,
                        capacity: CapacityReport | None = None,
                        restarts: int = 6,
                        extra_starts: Sequence[np.ndarray] = ()) -> float:
    """Support function max Tr[G rho] over one optimal set.

    The set constraint is enforced by penalty continuation on the membership
    defect of pure states (output entropy above the minimum for kind "E",
    distance-to-capacity shortfall for kind "C"), so the value carries no
    finite-sample coverage error.  Projections of product-channel sets are the
    same computation with a lifted direction G (x) I.
    """
    from .entropyopt import _sphere_minimize

    g_op = herm(np.asarray(g_op, dtype=complex))
    if kind == "E":
        if h_min is None:
            raise ValueError("kind 'E' needs h_min")

        def defect_grad(psi):
            h, gh, spec = _entropy_value_grad(ch, psi)
            return h - h_min, gh, spec

    elif kind == "C":
        if capacity is None:
            raise ValueError("kind 'C' needs a capacity report")
        a_op = ch.dual_apply(-log_on_support(capacity.omega.mat))
        cbar = capacity.value

        def defect_grad(psi):
            h, gh, spec = _entropy_value_grad(ch, psi)
            dist = np.vdot(psi, a_op @ psi).real - h
            return cbar - dist, -(2.0 * (a_op @ psi) - gh), spec

    else:
        raise ValueError(f"kind must be 'C' or 'E', got {kind!r}")

    def make_value_grad(kappa):
        def vg(psi):
            dval, dgrad, spec = defect_grad(psi)
            base = np.vdot(psi, g_op @ psi).real
            g = 2.0 * (g_op @ psi)
            if dval > 0.0:
                return -(base - kappa * dval), -(g - kappa * dgrad), spec
            return -base, -g, spec

        def v(psi):
            dval, _, _ = defect_grad(psi)
            base = np.vdot(psi, g_op @ psi).real
            return -(base - kappa * dval) if dval > 0.0 else -base

        return vg, v

    _, vecs = eig_hermitian(g_op)
    starts = [vecs[:, 0]] + list(extra_starts)
    rng = derive_rng(cfg.seed, "set_support", kind)
    starts += [random_ket(rng, ch.dim_in) for _ in range(restarts)]

    best = -math.inf
    for x0 in starts:
        x = np.asarray(x0, dtype=complex)
        for kappa in _SUPPORT_STAGES:
            vg, v = make_value_grad(kappa)
            x, f, _ = _sphere_minimize(vg, v, x, min(cfg.max_iters, 300),
                                       cfg.grad_tol, cfg.obj_tol)
        best = max(best, -f)
    return best


def random_directions(dim: int, count: int, seed: int, label: str = "directions") -> list[np.ndarray]:
    """Unit-Frobenius random Hermitian matrices (deterministic in the seed)."""
    rng = derive_rng(seed, label, dim, count)
    dirs = []
    for _ in range(count):
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        g = herm(g)
        dirs.append(g / np.linalg.norm(g))
    return dirs


def support_function_gap(ch: Channel, minent: MinEntropyReport, capacity: CapacityReport,
                         cfg: OptimizerConfig, n_directions: int = 50) -> float:
    """Largest support-function disagreement between the two optimal sets."""
    seeds_e = [s.ket for s in minent.minimizers[:4]]
    seeds_c = [s.ket for _, s in capacity.ensemble.members[:4]]
    gap = 0.0
    for g_op in random_directions(ch.dim_in, n_directions, cfg.seed, "coincidence"):
        h_e = optimal_set_support(ch, g_op, "E", cfg, h_min=minent.value, extra_starts=seeds_e)
        h_c = optimal_set_support(ch, g_op, "C", cfg, capacity=capacity, extra_starts=seeds_c)
        gap = max(gap, abs(h_e - h_c))
    return gap


# ---------------------------------------------------------------------------
# finite-sample hulls
# ---------------------------------------------------------------------------

def hull_support_value(mats: Sequence[np.ndarray], g_op: np.ndarray) -> float:
    """Support function of the convex hull of finitely many operators."""
    return max(float(np.trace(g_op @ m).real) for m in mats)


def hull_membership_defect(point: np.ndarray, mats: Sequence[np.ndarray],
                           directions: Sequence[np.ndarray]) -> float:
    """Separation defect of a point from a finite hull.

    Positive values certify the point lies outside: some direction (random
    ones plus the targeted differences point - vertex) sees the point beyond
    every vertex.
    """
    probes = list(directions)
    for m in mats:
        diff = herm(point - m)
        norm = np.linalg.norm(diff)
        if norm > 1e-12:
            probes.append(diff / norm)
    defect = -math.inf
    for g_op in probes:
        val = float(np.trace(g_op @ point).real) - hull_support_value(mats, g_op)
        defect = max(defect, val)
    return defect


# ---------------------------------------------------------------------------
# coincidence of the two optimal sets
# ---------------------------------------------------------------------------

def coincidence_test(ch: Channel, capacity: CapacityReport, minent: MinEntropyReport,
                     samples: Sequence[OptimalSetSample], cfg: OptimizerConfig,
                     n_directions: int = 50) -> CoincidenceReport:
    """Necessary-and-sufficient eigenvalue condition for set coincidence.

    Tests whether Phi*(-log Omega) acts as a scalar on the minimal support
    subspace of the sampled sets, with the scalar pinned at Cbar + H_min
    (a scan over the mean diagonal value is reported when it fits better),
    and cross-checks by support-function agreement of the two sets.  For
    bistochastic channels a scalar action on the whole space forces the
    chaotic Omega, which is verified.
    """
    if not capacity.converged:
        raise ValueError("capacity report did not converge")
    p_phi = minimal_support_projector(samples)
    m_op = ch.dual_apply(-log_on_support(capacity.omega.mat))
    lambda_expected = capacity.value + minent.value

    def residual_for(lam: float) -> float:
        return max_abs(m_op @ p_phi.mat - lam * p_phi.mat)

    lam_scan = float(np.trace(p_phi.mat @ m_op @ p_phi.mat).real) / p_phi.rank
    candidates = [(residual_for(lambda_expected), lambda_expected),
                  (residual_for(lam_scan), lam_scan)]
    condition_residual, lam = min(candidates, key=lambda t: t[0])

    unital_residual = max_abs(m_op - lam * np.eye(ch.dim_in))
    support_gap = support_function_gap(ch, minent, capacity, cfg, n_directions)
    coincide = condition_residual <= CERTIFICATION_TOL and support_gap <= COINCIDENCE_SUPPORT_TOL

    bistochastic = is_bistochastic(ch)
    omega_chaotic_residual = None
    if bistochastic:
        omega_chaotic_residual = max_abs(
            capacity.omega.mat - np.eye(ch.dim_out) / ch.dim_out
        )
        if unital_residual <= 1e-6 and omega_chaotic_residual > 1e-6:
            raise RuntimeError(
                "bistochastic channel with scalar dual image but non-chaotic Omega: "
                f"residuals {unital_residual:.2e} / {omega_chaotic_residual:.2e}"
            )
    return CoincidenceReport(
        coincide=coincide,
        lam=lam,
        condition_residual=condition_residual,
        lambda_expected=lambda_expected,
        unital_condition_residual=unital_residual,
        support_function_gap=support_gap,
        bistochastic=bistochastic,
        omega_chaotic_residual=omega_chaotic_residual,
    )
