"""Tensor-product analysis: additivity probes, hereditary structure, and the
projective relations between product-channel and single-channel optimal sets.

Universal statements are screened on finite samples and penalized support
functions; nothing here claims more than the sample shows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channels import Channel, ProductChannel, tensor_channels
from .config import derive_rng, random_ket
from .entropyopt import (
    CapacityReport,
    ConstraintSet,
    Ensemble,
    MinEntropyReport,
    OptimizerConfig,
    chi,
    convex_closure_entropy,
    holevo_capacity,
    min_output_entropy,
)
from .optsets import (
    MEMBERSHIP_TOL,
    OptimalSetSample,
    optimal_set_support,
    random_directions,
    sample_optimal_set_C,
    sample_optimal_set_E,
)
from .qcore import (
    DensityMatrix,
    Projector,
    PureState,
    eig_hermitian,
    herm,
    max_abs,
    partial_trace,
    relative_entropy,
    support_isometry,
    tensor,
    von_neumann_entropy,
)

ADDITIVITY_TOL = 1e-4
PROJECTIVE_TOL = 1e-3
FLATNESS_TOL = 1e-6
_SCHMIDT_NONZERO = 1e-9


# ---------------------------------------------------------------------------
# uniformly entangled vectors and the flat-marginal decomposition
# ---------------------------------------------------------------------------

def make_uniformly_entangled(e_vectors: Sequence[np.ndarray],
                             f_vectors: Sequence[np.ndarray]) -> PureState:
    """Equal-weight Schmidt vector r^(-1/2) sum_i |e_i (x) f_i>.

    Both partial traces of the result are rank-r projectors over r.
    """
    es = [np.asarray(e, dtype=complex).reshape(-1) for e in e_vectors]
    fs = [np.asarray(f, dtype=complex).reshape(-1) for f in f_vectors]
    if len(es) != len(fs) or not es:
        raise ValueError("need equally many (at least one) vectors on each side")
    for vecs, side in ((es, "H"), (fs, "K")):
        gram = np.array([[np.vdot(a, b) for b in vecs] for a in vecs])
        if max_abs(gram - np.eye(len(vecs))) > 1e-10:
            raise ValueError(f"{side}-side vectors are not orthonormal within 1e-10")
    r = len(es)
    ket = sum(np.kron(e, f) for e, f in zip(es, fs)) / np.sqrt(r)
    return PureState(ket)


def uniform_entanglement_rank(psi: PureState, dims: tuple[int, int]) -> tuple[int | None, float]:
    """Detect a flat Schmidt spectrum.

    Returns (r, defect) when the nonzero Schmidt coefficients are all 1/r
    within 1e-6, else (None, defect); the defect is the largest deviation of
    the nonzero coefficients from 1/r.
    """
    d_h, d_k = dims
    if psi.dim != d_h * d_k:
        raise ValueError(f"state dim {psi.dim} != {d_h}*{d_k}")
    coeffs = np.linalg.svd(psi.ket.reshape(d_h, d_k), compute_uv=False) ** 2
    nz = coeffs[coeffs > _SCHMIDT_NONZERO]
    r = int(nz.size)
    defect = float(np.max(np.abs(nz - 1.0 / r)))
    return (r if defect <= FLATNESS_TOL else None, defect)


def weyl_decomposition(p: Projector, q: Projector) -> Ensemble:
    """Canonical decomposition of (P/r) (x) (Q/r) into uniformly entangled states.

    Uses the r^2 generalized Bell vectors built from discrete shift/clock
    operators on the two rank-r supports; the uniform mixture reproduces the
    product of the flat marginals exactly.
    """
    if p.rank != q.rank:
        raise ValueError(f"projector ranks differ: {p.rank} != {q.rank}")
    r = p.rank
    basis_h = support_isometry(p)  # columns e_1..e_r
    basis_k = support_isometry(q)
    omega = np.exp(2j * np.pi / r)
    members = []
    for a in range(r):
        for b in range(r):
            es = [basis_h[:, (j + a) % r] * omega ** (b * j) for j in range(r)]
            fs = [basis_k[:, j] for j in range(r)]
            members.append((1.0 / r**2, make_uniformly_entangled(es, fs)))
    return Ensemble(members)


def _eigenvalue_clusters(evals: np.ndarray, tol: float = 1e-8) -> list[tuple[float, np.ndarray]]:
    """Positive spectrum grouped into (value, member-mask) clusters."""
    clusters: list[tuple[float, list[int]]] = []
    for idx, lam in enumerate(evals):
        if lam <= 1e-10:
            continue
        for k, (value, members) in enumerate(clusters):
            if abs(lam - value) <= tol:
                members.append(idx)
                clusters[k] = ((value * (len(members) - 1) + lam) / len(members), members)
                break
        else:
            clusters.append((lam, [idx]))
    out = []
    for value, members in clusters:
        mask = np.zeros(evals.size, dtype=bool)
        mask[members] = True
        out.append((value, mask))
    return out


def verify_lemma3(rho: DensityMatrix, sigma: DensityMatrix,
                  decomposition: Ensemble) -> tuple[bool, dict]:
    """Check a decomposition of rho (x) sigma into states with fixed marginals.

    Forward direction: every member must have partial traces rho and sigma and
    the mixture must reproduce rho (x) sigma (both within 1e-8).  Necessity:
    such a decomposition is accepted only when rho and sigma are flat
    (multiples of equal-rank projectors within 1e-8); for non-flat marginals
    the spectral-projector contradiction is reported: a product of spectral
    projectors with distinct eigenvalues annihilates every member but not
    rho (x) sigma.
    """
    dims = (rho.dim, sigma.dim)
    checks: dict = {}
    marg_dev = 0.0
    mixture = np.zeros((rho.dim * sigma.dim, rho.dim * sigma.dim), dtype=complex)
    for prob, state in decomposition.members:
        proj = state.projector_mat()
        marg_dev = max(marg_dev, max_abs(partial_trace(proj, dims, "H") - rho.mat))
        marg_dev = max(marg_dev, max_abs(partial_trace(proj, dims, "K") - sigma.mat))
        mixture += prob * proj
    mix_dev = max_abs(mixture - tensor(rho.mat, sigma.mat))
    checks["marginal_max_deviation"] = marg_dev
    checks["mixture_deviation"] = mix_dev
    checks["marginals_match"] = marg_dev <= 1e-8
    checks["mixture_matches"] = mix_dev <= 1e-8

    def flat_stats(dm: DensityMatrix):
        evals = np.linalg.eigvalsh(dm.mat)
        nz = evals[evals > 1e-10]
        r = int(nz.size)
        return r, float(np.max(np.abs(nz - 1.0 / r)))

    r_rho, flat_rho = flat_stats(rho)
    r_sigma, flat_sigma = flat_stats(sigma)
    checks["flatness_defects"] = (flat_rho, flat_sigma)
    checks["ranks"] = (r_rho, r_sigma)
    checks["ranks_equal"] = r_rho == r_sigma
    checks["spectra_flat"] = flat_rho <= 1e-8 and flat_sigma <= 1e-8 and r_rho == r_sigma

    checks["contradiction"] = None
    evals_r, evecs_r = eig_hermitian(rho.mat)
    clusters_r = _eigenvalue_clusters(evals_r)
    if len(clusters_r) >= 2:
        lam1, mask1 = clusters_r[0]
        lam2, _ = clusters_r[1]
        p1 = evecs_r[:, mask1] @ evecs_r[:, mask1].conj().T
        evals_s, evecs_s = eig_hermitian(sigma.mat)
        clusters_s = _eigenvalue_clusters(evals_s)
        nearest = min(clusters_s, key=lambda c: abs(c[0] - lam2), default=None)
        if nearest is not None:
            q2 = evecs_s[:, nearest[1]] @ evecs_s[:, nearest[1]].conj().T
            probe = tensor(p1, q2)
            product_side = float(np.trace(probe @ tensor(rho.mat, sigma.mat)).real)
            mixture_side = float(np.trace(probe @ mixture).real)
            checks["contradiction"] = {
                "lambda1": float(lam1),
                "lambda2": float(nearest[0]),
                "product_side": product_side,
                "mixture_side": mixture_side,
            }
    valid = bool(checks["marginals_match"] and checks["mixture_matches"]
                 and checks["spectra_flat"])
    return valid, checks


# ---------------------------------------------------------------------------
# additivity probes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdditivityReport:
    """Desk-scale additivity probe for one channel pair."""

    kind: str  # "min_entropy" or "capacity"
    single_values: tuple[float, float]
    product_value: float
    gap: float
    witness: PureState
    witness_rank: int | None
    witness_flatness_defect: float
    omega_product_residual: float | None
    checks: tuple[tuple[str, float], ...]
    converged: bool


def _as_product(phi: Channel, psi: Channel,
                product: ProductChannel | None) -> ProductChannel:
    return product if product is not None else tensor_channels(phi, psi)


def additivity_min_entropy(phi: Channel, psi: Channel, cfg: OptimizerConfig,
                           product: ProductChannel | None = None,
                           max_embed_checks: int = 6) -> AdditivityReport:
    """Minimal-output-entropy additivity probe.

    gap = (H_min(phi) + H_min(psi)) - H_min(phi (x) psi) >= -tol; when the gap
    closes, each sampled single-channel minimizer is embedded as a product
    with the other side's best minimizer and re-certified on the product
    channel.
    """
    prod = _as_product(phi, psi, product)
    dims = prod.input_dims
    rep_phi = min_output_entropy(phi, cfg)
    rep_psi = min_output_entropy(psi, cfg)
    rep_prod = min_output_entropy(prod.combined, cfg)
    gap = (rep_phi.value + rep_psi.value) - rep_prod.value
    witness = rep_prod.minimizers[0]
    rank, flat = uniform_entanglement_rank(witness, dims)

    checks: list[tuple[str, float]] = []
    if abs(gap) <= ADDITIVITY_TOL:
        best_psi = rep_psi.minimizers[0].ket
        for i, state in enumerate(rep_phi.minimizers[:max_embed_checks]):
            out = prod.combined.apply_ket(np.kron(state.ket, best_psi))
            checks.append((f"embed_left[{i}]", von_neumann_entropy(out) - rep_prod.value))
        best_phi = rep_phi.minimizers[0].ket
        for j, state in enumerate(rep_psi.minimizers[:max_embed_checks]):
            out = prod.combined.apply_ket(np.kron(best_phi, state.ket))
            checks.append((f"embed_right[{j}]", von_neumann_entropy(out) - rep_prod.value))

    return AdditivityReport(
        kind="min_entropy",
        single_values=(rep_phi.value, rep_psi.value),
        product_value=rep_prod.value,
        gap=gap,
        witness=witness,
        witness_rank=rank,
        witness_flatness_defect=flat,
        omega_product_residual=None,
        checks=tuple(checks),
        converged=rep_phi.converged and rep_psi.converged and rep_prod.converged,
    )


def additivity_capacity(phi: Channel, psi: Channel, cfg: OptimizerConfig,
                        product: ProductChannel | None = None,
                        max_pair_checks: int = 3) -> AdditivityReport:
    """Holevo-capacity additivity probe.

    gap = Cbar(phi (x) psi) - Cbar(phi) - Cbar(psi) >= -tol, with the
    factorization residual of the optimal-average image reported.  When the
    gap closes, sampled extreme pairs are certified inside the product
    capacity-optimal set and pure projections of product extreme points are
    certified in the single-channel sets.
    """
    prod = _as_product(phi, psi, product)
    dims = prod.input_dims
    cap_phi = holevo_capacity(phi, ConstraintSet.full(), cfg)
    cap_psi = holevo_capacity(psi, ConstraintSet.full(), cfg)
    cap_prod = holevo_capacity(prod.combined, ConstraintSet.full(), cfg)
    gap = cap_prod.value - cap_phi.value - cap_psi.value
    omega_residual = max_abs(
        cap_prod.omega.mat - tensor(cap_phi.omega.mat, cap_psi.omega.mat)
    )
    weights = cap_prod.ensemble.weights()
    witness = cap_prod.ensemble.members[int(np.argmax(weights))][1]
    rank, flat = uniform_entanglement_rank(witness, dims)

    checks: list[tuple[str, float]] = []
    if abs(gap) <= ADDITIVITY_TOL and cap_prod.converged:
        sample_phi = sample_optimal_set_C(phi, cap_phi, cfg)
        sample_psi = sample_optimal_set_C(psi, cap_psi, cfg)
        omega_pair = tensor(cap_phi.omega.mat, cap_psi.omega.mat)
        for i, sp in enumerate(sample_phi.states[:max_pair_checks]):
            for j, sq in enumerate(sample_psi.states[:max_pair_checks]):
                out = prod.combined.apply_ket(np.kron(sp.ket, sq.ket))
                dist = relative_entropy(out, omega_pair)
                checks.append((f"pair[{i},{j}]", dist - cap_prod.value))
        sample_prod = sample_optimal_set_C(prod.combined, cap_prod, cfg)
        for i, state in enumerate(sample_prod.states[:2 * max_pair_checks]):
            marg = partial_trace(state.projector_mat(), dims, "H")
            evals = np.linalg.eigvalsh(marg)
            if evals[-2] > FLATNESS_TOL:
                continue  # entangled projection; the pure-projection claim is vacuous
            ket = eig_hermitian(marg)[1][:, 0]
            dist = relative_entropy(phi.apply_ket(ket), cap_phi.omega.mat)
            checks.append((f"projection_left[{i}]", dist - cap_phi.value))

    return AdditivityReport(
        kind="capacity",
        single_values=(cap_phi.value, cap_psi.value),
        product_value=cap_prod.value,
        gap=gap,
        witness=witness,
        witness_rank=rank,
        witness_flatness_defect=flat,
        omega_product_residual=omega_residual,
        checks=tuple(checks),
        converged=cap_phi.converged and cap_psi.converged and cap_prod.converged,
    )


# ---------------------------------------------------------------------------
# finite hull helpers
# ---------------------------------------------------------------------------

def hull_extreme_points(mats: Sequence[np.ndarray], seed: int,
                        n_directions: int = 200,
                        dedup_tol: float = 1e-6) -> list[np.ndarray]:
    """Extreme points of a finite hull found by support-function maximization.

    Every random Hermitian direction selects the vertex it is maximized on;
    winners are deduplicated at ``dedup_tol`` in the max-norm.
    """
    if not mats:
        raise ValueError("empty hull")
    dim = mats[0].shape[0]
    winners: list[np.ndarray] = []
    for g in random_directions(dim, n_directions, seed, "hull_extremes"):
        values = [float(np.trace(g @ m).real) for m in mats]
        winner = mats[int(np.argmax(values))]
        if all(max_abs(winner - w) > dedup_tol for w in winners):
            winners.append(winner)
    return winners


def _flatness(mat: np.ndarray) -> tuple[int, float]:
    evals = np.linalg.eigvalsh(mat)
    nz = evals[evals > 1e-8]
    r = int(nz.size)
    if r == 0:
        return 0, math.inf
    return r, float(np.max(np.abs(nz - 1.0 / r)))


@dataclass(frozen=True)
class StructureReport:
    """Projection structure of a hereditary set with pure extreme points."""

    extremes_h: tuple[np.ndarray, ...]
    flatness_h: tuple[float, ...]
    ranks_h: tuple[int, ...]
    extremes_k: tuple[np.ndarray, ...]
    flatness_k: tuple[float, ...]
    ranks_k: tuple[int, ...]
    passed: bool
    equal_ranks: bool | None


def structure_theorem_check(set_states: Sequence[PureState], dims: tuple[int, int],
                            hereditary: str = "hereditary", seed: int = 0,
                            n_directions: int = 200) -> StructureReport:
    """Check the projection structure of a (strong) hereditary sample.

    Both partial-trace images of the sampled set are reduced to their hull
    extreme points; each must be a multiple of a projector (flat spectrum
    within 1e-6), and in the strong case all ranks must agree.  A degenerate
    single-point hull passes trivially.
    """
    if hereditary not in ("hereditary", "strong"):
        raise ValueError("hereditary must be 'hereditary' or 'strong'")
    margs_h = [partial_trace(s.projector_mat(), dims, "H") for s in set_states]
    margs_k = [partial_trace(s.projector_mat(), dims, "K") for s in set_states]
    ext_h = hull_extreme_points(margs_h, seed, n_directions)
    ext_k = hull_extreme_points(margs_k, seed, n_directions)
    stats_h = [_flatness(m) for m in ext_h]
    stats_k = [_flatness(m) for m in ext_k]
    flat_ok = all(f <= FLATNESS_TOL for _, f in stats_h + stats_k)
    equal_ranks: bool | None = None
    passed = flat_ok
    if hereditary == "strong":
        ranks = [r for r, _ in stats_h + stats_k]
        equal_ranks = len(set(ranks)) == 1
        passed = flat_ok and equal_ranks
    return StructureReport(
        extremes_h=tuple(ext_h),
        flatness_h=tuple(f for _, f in stats_h),
        ranks_h=tuple(r for r, _ in stats_h),
        extremes_k=tuple(ext_k),
        flatness_k=tuple(f for _, f in stats_k),
        ranks_k=tuple(r for r, _ in stats_k),
        passed=passed,
        equal_ranks=equal_ranks,
    )


# ---------------------------------------------------------------------------
# hereditary checks on sampled optimal sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HereditaryReport:
    tested: int
    violations: tuple[tuple[int, float], ...]
    strong_violations: tuple[tuple[tuple[int, int], float], ...]
    max_defect: float


def hereditary_check(sample: OptimalSetSample, dims: tuple[int, int],
                     membership_defect: Callable[[DensityMatrix], float],
                     strong: bool = False, max_states: int | None = None) -> HereditaryReport:
    """Screen a sampled set for the (strong) hereditary property.

    For each sampled state (or ordered pair, in the strong case) the product
    of marginals is formed and its membership defect evaluated; defects above
    1e-4 (or non-finite) are reported as violations.
    """
    limit = max_states if max_states is not None else (8 if strong else 64)
    states = sample.states[:limit]
    margs_h = [DensityMatrix(herm(partial_trace(s.projector_mat(), dims, "H")), _validated=True)
               for s in states]
    margs_k = [DensityMatrix(herm(partial_trace(s.projector_mat(), dims, "K")), _validated=True)
               for s in states]

    def defect_of(i: int, j: int) -> float:
        d = membership_defect(tensor(margs_h[i], margs_k[j]))
        return d if math.isfinite(d) else math.inf

    tested = 0
    violations: list[tuple[int, float]] = []
    strong_violations: list[tuple[tuple[int, int], float]] = []
    max_defect = -math.inf
    for i in range(len(states)):
        d = defect_of(i, i)
        tested += 1
        max_defect = max(max_defect, d)
        if not d <= MEMBERSHIP_TOL:
            violations.append((i, d))
    if strong:
        for i in range(len(states)):
            for j in range(len(states)):
                if i == j:
                    continue
                d = defect_of(i, j)
                tested += 1
                max_defect = max(max_defect, d)
                if not d <= MEMBERSHIP_TOL:
                    strong_violations.append(((i, j), d))
    return HereditaryReport(
        tested=tested,
        violations=tuple(violations),
        strong_violations=tuple(strong_violations),
        max_defect=max_defect,
    )


def lemma2_check(phi: Channel, psi: Channel, product_report: CapacityReport,
                 samples: OptimalSetSample, cfg: OptimizerConfig,
                 product: ProductChannel | None = None) -> tuple[bool, dict]:
    """Sufficient condition for capacity additivity from the product optimum.

    Applies when the found optimal average factorizes (residual <= 1e-6) and
    every hull extreme point of both partial-trace images of the sampled
    product capacity-optimal set is pure (second eigenvalue <= 1e-6).  When it
    applies, the additivity gap is computed and must be at most 1e-3.
    """
    prod = _as_product(phi, psi, product)
    dims = prod.input_dims
    avg = product_report.ensemble.average_mat()
    marg_h = partial_trace(avg, dims, "H")
    marg_k = partial_trace(avg, dims, "K")
    factor_residual = max_abs(avg - tensor(marg_h, marg_k))

    second_eig = 0.0
    for keep in ("H", "K"):
        margs = [partial_trace(s.projector_mat(), dims, keep) for s in samples.states]
        for ext in hull_extreme_points(margs, cfg.seed):
            evals = np.linalg.eigvalsh(ext)
            second_eig = max(second_eig, float(evals[-2]))

    applies = factor_residual <= 1e-6 and second_eig <= FLATNESS_TOL
    detail: dict = {
        "factor_residual": factor_residual,
        "max_second_eigenvalue": second_eig,
        "applies": applies,
    }
    if applies:
        cap_phi = holevo_capacity(phi, ConstraintSet.full(), cfg)
        cap_psi = holevo_capacity(psi, ConstraintSet.full(), cfg)
        gap = product_report.value - cap_phi.value - cap_psi.value
        detail["gap"] = gap
        if abs(gap) > PROJECTIVE_TOL:
            raise RuntimeError(
                f"factorized optimal average with pure projections, yet additivity gap {gap:.3e}"
            )
    return applies, detail


def membership_defect_for_kind(kind: str, prod: ProductChannel,
                               cfg: OptimizerConfig):
    """Build the membership oracle and the sampled product optimal set.

    Returns (defect function, sample): for kind "E" the defect is the convex
    closure above the minimum; for kind "C" the capacity-equality defect with
    support mismatches mapped to +inf.
    """
    from .optsets import membership_C, membership_E_defect

    if kind == "E":
        minent = min_output_entropy(prod.combined, cfg)
        sample = sample_optimal_set_E(prod.combined, cfg, minent=minent)

        def defect(dm: DensityMatrix) -> float:
            return membership_E_defect(prod.combined, dm, minent.value, cfg)

        return defect, sample
    if kind == "C":
        capacity = holevo_capacity(prod.combined, ConstraintSet.full(), cfg)
        sample = sample_optimal_set_C(prod.combined, capacity, cfg)

        def defect(dm: DensityMatrix) -> float:
            _, d = membership_C(prod.combined, dm, capacity, cfg)
            return d if math.isfinite(d) else math.inf

        return defect, sample
    raise ValueError(f"kind must be 'E' or 'C', got {kind!r}")


# ---------------------------------------------------------------------------
# assumption screens
# ---------------------------------------------------------------------------

def assumption_A_defect(phi: Channel, psi: Channel, omega: DensityMatrix,
                        cfg: OptimizerConfig,
                        product: ProductChannel | None = None) -> float:
    """chi of the marginal product minus chi of the state itself.

    A value below -1e-4 is counterexample evidence against the existence of
    product-average optimal ensembles for this pair.
    """
    prod = _as_product(phi, psi, product)
    dims = prod.input_dims
    marg = tensor(partial_trace(omega, dims, "H"), partial_trace(omega, dims, "K"))
    chi_marg, _ = chi(prod.combined, marg, cfg)
    chi_omega, _ = chi(prod.combined, omega, cfg)
    return chi_marg - chi_omega


def assumption_B_defects(phi: Channel, psi: Channel, omega: DensityMatrix,
                         cfg: OptimizerConfig,
                         product: ProductChannel | None = None) -> tuple[float, float, float]:
    """Signed defects of the chi-subadditivity family at one state.

    Returns (subadditivity defect, product-chi defect, product-closure
    defect): chi_prod(omega) - chi_phi(marg_H) - chi_psi(marg_K), and the two
    equality defects evaluated at the product of the marginals.  Positive
    subadditivity defects beyond tolerance are strong-additivity
    counterexample evidence.
    """
    prod = _as_product(phi, psi, product)
    dims = prod.input_dims
    marg_h = partial_trace(omega, dims, "H")
    marg_k = partial_trace(omega, dims, "K")
    marg_prod = tensor(marg_h, marg_k)

    chi_omega, _ = chi(prod.combined, omega, cfg)
    chi_h, _ = chi(phi, marg_h, cfg)
    chi_k, _ = chi(psi, marg_k, cfg)
    subadd = chi_omega - chi_h - chi_k

    chi_pair, _ = chi(prod.combined, marg_prod, cfg)
    eq12 = chi_pair - chi_h - chi_k

    closure_pair, _ = convex_closure_entropy(prod.combined, marg_prod, cfg)
    closure_h, _ = convex_closure_entropy(phi, marg_h, cfg)
    closure_k, _ = convex_closure_entropy(psi, marg_k, cfg)
    eq13 = closure_pair - closure_h - closure_k
    return subadd, eq12, eq13


# ---------------------------------------------------------------------------
# projective relations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectiveRelationsReport:
    relations: tuple[tuple[str, float, float], ...]
    omega_product_residual: float
    all_hold: bool


def projective_relations_check(phi: Channel, psi: Channel, cfg: OptimizerConfig,
                               n_directions: int = 20,
                               product: ProductChannel | None = None) -> ProjectiveRelationsReport:
    """Compare partial-trace images of product optimal sets with single-channel sets.

    For each relation the support functions agree on random Hermitian
    directions within 1e-3 in both orders iff the sets mutually include;
    projections of product sets are probed with lifted directions G (x) I and
    I (x) G, which makes the comparison exact rather than sample-limited.
    Per-relation defects are reported; nothing is asserted.
    """
    prod = _as_product(phi, psi, product)
    d_h, d_k = prod.input_dims
    cap_phi = holevo_capacity(phi, ConstraintSet.full(), cfg)
    cap_psi = holevo_capacity(psi, ConstraintSet.full(), cfg)
    cap_prod = holevo_capacity(prod.combined, ConstraintSet.full(), cfg)
    me_phi = min_output_entropy(phi, cfg)
    me_psi = min_output_entropy(psi, cfg)
    me_prod = min_output_entropy(prod.combined, cfg)
    omega_residual = max_abs(cap_prod.omega.mat - tensor(cap_phi.omega.mat, cap_psi.omega.mat))

    def single_support(kind: str, side: str, g: np.ndarray) -> float:
        ch = phi if side == "H" else psi
        if kind == "E":
            rep = me_phi if side == "H" else me_psi
            return optimal_set_support(ch, g, "E", cfg, h_min=rep.value)
        rep = cap_phi if side == "H" else cap_psi
        return optimal_set_support(ch, g, "C", cfg, capacity=rep)

    def projected_support(kind: str, side: str, g: np.ndarray) -> float:
        lifted = np.kron(g, np.eye(d_k)) if side == "H" else np.kron(np.eye(d_h), g)
        if kind == "E":
            return optimal_set_support(prod.combined, lifted, "E", cfg, h_min=me_prod.value)
        return optimal_set_support(prod.combined, lifted, "C", cfg, capacity=cap_prod)

    relations = []
    all_hold = True
    for kind in ("C", "E"):
        for side in ("H", "K"):
            dim = d_h if side == "H" else d_k
            out_defect = -math.inf  # projected exceeds single: projection not inside
            in_defect = -math.inf   # single exceeds projected: single not covered
            for g in random_directions(dim, n_directions, cfg.seed, f"projective_{kind}_{side}"):
                h_single = single_support(kind, side, g)
                h_proj = projected_support(kind, side, g)
                out_defect = max(out_defect, h_proj - h_single)
                in_defect = max(in_defect, h_single - h_proj)
            relations.append((f"{kind}_{side}", out_defect, in_defect))
            if max(out_defect, in_defect) > PROJECTIVE_TOL:
                all_hold = False
    return ProjectiveRelationsReport(
        relations=tuple(relations),
        omega_product_residual=omega_residual,
        all_hold=all_hold,
    )


# ---------------------------------------------------------------------------
# constructors for the worked hereditary examples
# ---------------------------------------------------------------------------

def sample_subspace_states(basis_h: Sequence[np.ndarray], basis_k: Sequence[np.ndarray],
                           n_product: int, n_entangled: int, seed: int) -> list[PureState]:
    """Pure states supported on span(basis_h) (x) span(basis_k).

    Product states come first (they generate the pure extreme points of the
    projected images); the entangled draws have their top Schmidt coefficient
    clipped at 0.85 so their marginals stay strictly inside the hull the
    product sample traces out, as a faithful finite surrogate of the full set
    requires.
    """
    bh = np.array([np.asarray(v, dtype=complex) for v in basis_h])
    bk = np.array([np.asarray(v, dtype=complex) for v in basis_k])
    rng = derive_rng(seed, "subspace_states", len(bh), len(bk), n_product, n_entangled)
    states = []
    for _ in range(n_product):
        a = random_ket(rng, len(bh))
        b = random_ket(rng, len(bk))
        states.append(PureState(np.kron(a @ bh, b @ bk)))
    cap = 0.85
    for _ in range(n_entangled):
        c = rng.standard_normal((len(bh), len(bk))) + 1j * rng.standard_normal((len(bh), len(bk)))
        if min(len(bh), len(bk)) > 1:
            u, s, vh = np.linalg.svd(c, full_matrices=False)
            lam = s**2 / (s**2).sum()
            for _ in range(lam.size):  # cap-and-redistribute on the simplex
                over = lam > cap
                if not over.any():
                    break
                excess = float((lam[over] - cap).sum())
                lam[over] = cap
                lam[~over] += excess / max(1, (~over).sum())
            c = (u * np.sqrt(lam)) @ vh
        c = c / np.linalg.norm(c)
        ket = np.einsum("ij,ia,jb->ab", c, bh, bk).reshape(-1)
        states.append(PureState(ket / np.linalg.norm(ket)))
    return states


def sample_maximally_entangled_states(basis_h: Sequence[np.ndarray],
                                      basis_k: Sequence[np.ndarray],
                                      n: int, seed: int) -> list[PureState]:
    """Uniformly entangled states of full rank on a pair of equal-dim subspaces.

    Each state is the canonical vector with the H-side basis rotated by a
    Haar-random unitary, so all members share the same flat marginals P/r and
    Q/r.
    """
    bh = [np.asarray(v, dtype=complex) for v in basis_h]
    bk = [np.asarray(v, dtype=complex) for v in basis_k]
    r = len(bh)
    if r != len(bk):
        raise ValueError("subspaces must share one dimension")
    rng = derive_rng(seed, "max_entangled_states", r, n)
    states = []
    for _ in range(n):
        g = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
        q, rr = np.linalg.qr(g)
        u = q * (np.diag(rr) / np.abs(np.diag(rr))).conj()
        rotated = [sum(u[j, i] * bh[j] for j in range(r)) for i in range(r)]
        states.append(make_uniformly_entangled(rotated, bk))
    return states
