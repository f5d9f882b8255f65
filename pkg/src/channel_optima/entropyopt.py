"""Variational engine: optimizations over pure states and ensembles.

Computes the minimal output entropy, the convex closure of the output
entropy, its conjugate function, the chi-function, and (constrained) Holevo
capacities, together with the certification residuals used downstream.

Pure-state searches are multi-start projected gradient descent on the unit
sphere with analytic gradients (finite-difference fallback next to output
spectrum degeneracies).  Ensemble searches with a fixed average use penalty
continuation followed by an exact-average polar correction.  Capacity uses
the maximal-distance (conditional-gradient) iteration with multiplicative
weight updates and a smooth joint polish.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize as spopt

from .channels import Channel
from .config import EPS_SUPPORT, derive_rng, ln_of_base, random_ket
from .qcore import (
    DensityMatrix,
    PureState,
    eig_hermitian,
    herm,
    log_on_support,
    max_abs,
    relative_entropy,
    von_neumann_entropy,
)

#: Stop the capacity iteration when the maximal-distance residual is below this.
CAPACITY_RESIDUAL_TOL = 1e-6
#: Primal and dual convex-closure values must agree to within this.
DUALITY_GAP_TOL = 1e-3
#: A state counts as an optimal average when the maximal-distance residual is below this.
OPTIMAL_AVERAGE_TOL = 1e-5

_DEDUP_OVERLAP = 1.0 - 1e-8
_LOG_FLOOR = 1e-18
_DEGENERACY_GAP = 1e-7


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs shared by every optimization; identical seeds give identical results."""

    restarts: int = 32
    max_iters: int = 2000
    obj_tol: float = 1e-9
    grad_tol: float = 1e-7
    seed: int = 0
    ensemble_cap: int | None = None
    threads: int = 1

    def __post_init__(self):
        if self.restarts < 1 or self.max_iters < 1 or self.threads < 1:
            raise ValueError("restarts, max_iters, threads must be positive")
        if self.obj_tol <= 0 or self.grad_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.ensemble_cap is not None and self.ensemble_cap < 1:
            raise ValueError("ensemble_cap must be positive")

    def cap_for(self, dim: int) -> int:
        """Ensemble size cap; defaults to dim^2."""
        return self.ensemble_cap if self.ensemble_cap is not None else dim * dim


class Ensemble:
    """Finite ensemble of pure states with strictly positive weights summing to 1."""

    __slots__ = ("members",)

    def __init__(self, members: Sequence[tuple[float, PureState]]):
        items = tuple((float(p), s) for p, s in members)
        if not items:
            raise ValueError("ensemble must have at least one member")
        dim = items[0][1].dim
        if any(s.dim != dim for _, s in items):
            raise ValueError("ensemble members must share one dimension")
        if len(items) > dim * dim:
            raise ValueError(f"ensemble size {len(items)} exceeds cap {dim * dim}")
        probs = np.array([p for p, _ in items])
        if probs.min() <= 0.0:
            raise ValueError("ensemble weights must be strictly positive")
        if abs(probs.sum() - 1.0) > 1e-10:
            raise ValueError(f"ensemble weights sum to {probs.sum()!r}, not 1")
        self.members = items

    @property
    def dim(self) -> int:
        return self.members[0][1].dim

    def __len__(self):
        return len(self.members)

    def weights(self) -> np.ndarray:
        return np.array([p for p, _ in self.members])

    def kets(self) -> np.ndarray:
        return np.array([s.ket for _, s in self.members])

    def average_mat(self) -> np.ndarray:
        kets = self.kets()
        return np.einsum("i,ia,ib->ab", self.weights(), kets, kets.conj())

    def average(self) -> DensityMatrix:
        return DensityMatrix(herm(self.average_mat()), _validated=True)

    def holevo_quantity(self, ch: Channel) -> float:
        """Output entropy of the average minus the average output entropy."""
        outs = [ch.apply_ket(s.ket) for _, s in self.members]
        avg_out = sum(p * out for (p, _), out in zip(self.members, outs))
        mean_h = sum(p * von_neumann_entropy(out) for (p, _), out in zip(self.members, outs))
        return von_neumann_entropy(herm(avg_out)) - mean_h


@dataclass(frozen=True)
class MinEntropyReport:
    """Minimal output entropy with the certified minimizers found."""

    value: float
    minimizers: tuple[PureState, ...]
    residuals: tuple[float, ...]
    restart_converged: tuple[bool, ...]
    converged: bool


@dataclass(frozen=True)
class CapacityReport:
    """Holevo capacity with its optimal ensemble and certification residuals."""

    value: float
    ensemble: Ensemble
    omega: DensityMatrix
    max_distance_residual: float
    lemma1_residuals: tuple[float, ...]
    converged: bool
    iterations: int


class ConstraintSet:
    """Convex constraint on ensemble averages: full state space or a hull of generators."""

    __slots__ = ("generators",)

    def __init__(self, generators: Sequence[DensityMatrix] | None):
        if generators is not None:
            gens = tuple(generators)
            if not gens:
                raise ValueError("constraint needs at least one generator (or use full())")
            dim = gens[0].dim
            if any(g.dim != dim for g in gens):
                raise ValueError("constraint generators must share one dimension")
            self.generators = gens
        else:
            self.generators = None

    @classmethod
    def full(cls) -> "ConstraintSet":
        return cls(None)

    @classmethod
    def of(cls, *generators: DensityMatrix) -> "ConstraintSet":
        return cls(generators)

    @property
    def is_full(self) -> bool:
        return self.generators is None


# ---------------------------------------------------------------------------
# channel calculus on raw kets
# ---------------------------------------------------------------------------

def _entropy_from_out(out: np.ndarray) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Entropy of an output matrix plus its eigensystem and clamped-log matrix."""
    w, v = np.linalg.eigh(out)
    wc = np.maximum(w, 0.0)
    nz = wc > 0.0
    h = max(float(-(wc[nz] * np.log(wc[nz])).sum()) / ln_of_base(), 0.0) + 0.0
    lnw = np.log(np.maximum(w, _LOG_FLOOR))
    ln_out = (v * lnw) @ v.conj().T
    return max(h, 0.0), w, v, ln_out


def _entropy_value(ch: Channel, psi: np.ndarray) -> float:
    w = np.linalg.eigvalsh(ch.apply_ket(psi))
    wc = np.maximum(w, 0.0)
    nz = wc > 0.0
    return max(float(-(wc[nz] * np.log(wc[nz])).sum()) / ln_of_base(), 0.0) + 0.0


def _entropy_value_grad(ch: Channel, psi: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """(H, euclidean gradient of H, output spectrum)."""
    out = ch.apply_ket(psi)
    h, w, _, ln_out = _entropy_from_out(out)
    u = ch.dual_apply_ket(ln_out, psi)
    grad = (-2.0 / ln_of_base()) * (u + psi)
    return h, grad, w


def _spectrum_gap(w: np.ndarray) -> float:
    """Smallest spacing between distinct output eigenvalues."""
    s = np.sort(w)
    if s.size < 2:
        return math.inf
    return float(np.min(np.diff(s)))


# ---------------------------------------------------------------------------
# projected gradient descent on the unit sphere
# ---------------------------------------------------------------------------

def _tangent(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    return g - np.vdot(x, g).real * x


def _fd_tangent_grad(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    d = x.shape[0]
    g = np.zeros(d, dtype=complex)
    for j in range(d):
        for part, step in ((1.0, h), (1j, h)):
            e = np.zeros(d, dtype=complex)
            e[j] = part * step
            fp = f((x + e) / np.linalg.norm(x + e))
            fm = f((x - e) / np.linalg.norm(x - e))
            comp = (fp - fm) / (2.0 * step)
            g[j] += comp * (1.0 if part == 1.0 else 1j)
    return _tangent(x, g)


def _sphere_minimize(
    value_grad: Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]],
    value: Callable[[np.ndarray], float],
    x0: np.ndarray,
    max_iters: int,
    grad_tol: float,
    obj_tol: float,
) -> tuple[np.ndarray, float, bool]:
    """Armijo projected gradient descent with retraction by normalization.

    ``value_grad`` returns (f, euclidean gradient, output spectrum); the
    spectrum drives the finite-difference fallback next to degeneracies.
    """
    x = np.asarray(x0, dtype=complex)
    x = x / np.linalg.norm(x)
    fx, g, spec = value_grad(x)
    t = 1.0
    used_fd = False
    stalls = 0
    for _ in range(max_iters):
        gt = _tangent(x, g)
        gn2 = np.vdot(gt, gt).real
        if math.sqrt(gn2) <= grad_tol:
            return x, fx, True
        t = min(t * 2.0, 1e3)
        accepted = False
        while t >= 1e-14:
            cand = x - t * gt
            cand = cand / np.linalg.norm(cand)
            fc = value(cand)
            if fc <= fx - 1e-4 * t * gn2:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if not used_fd and _spectrum_gap(spec) < _DEGENERACY_GAP:
                # analytic eigen-derivative is unreliable here; one retry on a
                # finite-difference gradient
                used_fd = True
                g = _fd_tangent_grad(value, x)
                t = 1.0
                continue
            return x, fx, math.sqrt(gn2) <= 100.0 * grad_tol
        drop = fx - fc
        x, fx = cand, fc
        fx2, g, spec = value_grad(x)
        fx = fx2
        used_fd = False
        if drop <= obj_tol * max(1.0, abs(fx)):
            stalls += 1
            if stalls >= 3:
                return x, fx, True
        else:
            stalls = 0
    gt = _tangent(x, g)
    return x, fx, float(np.linalg.norm(gt)) <= 100.0 * grad_tol


def _run_indexed(tasks: Sequence[Callable[[], object]], threads: int) -> list:
    """Run independent tasks, returning results in input order."""
    if threads <= 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda task: task(), tasks))


def _multistart_sphere(
    value_grad,
    value,
    dim: int,
    cfg: OptimizerConfig,
    label: str,
    extra_starts: Sequence[np.ndarray] = (),
) -> list[tuple[float, np.ndarray, bool]]:
    """Deterministic multi-start minimization; results in fixed start order.

    Restart i draws its own generator from (seed, label, i), so a larger
    restart count only appends candidates and never reshuffles earlier ones.
    """
    starts = [np.asarray(s, dtype=complex) for s in extra_starts]
    for i in range(cfg.restarts):
        starts.append(random_ket(derive_rng(cfg.seed, label, i), dim))

    def make_task(x0):
        return lambda: _sphere_minimize(value_grad, value, x0, cfg.max_iters, cfg.grad_tol, cfg.obj_tol)

    results = _run_indexed([make_task(s) for s in starts], cfg.threads)
    return [(f, x, ok) for (x, f, ok) in results]


def _dedup_kets(kets: Sequence[np.ndarray], overlap: float = _DEDUP_OVERLAP) -> list[np.ndarray]:
    kept: list[np.ndarray] = []
    for k in kets:
        if all(abs(np.vdot(k, other)) ** 2 <= overlap for other in kept):
            kept.append(k)
    return kept


# ---------------------------------------------------------------------------
# minimal output entropy and the conjugate function
# ---------------------------------------------------------------------------

def _basis_kets(dim: int) -> list[np.ndarray]:
    return [np.eye(dim, dtype=complex)[:, j].copy() for j in range(dim)]


def min_entropy_residual(ch: Channel, psi: np.ndarray, h_min: float) -> float:
    """Eigenvector defect of the extreme-point condition for the entropy-optimal set.

    || Phi*(-log Phi(|psi><psi|)) |psi> - H_min |psi> ||_2
    """
    b = -log_on_support(ch.apply_ket(psi))
    return float(np.linalg.norm(ch.dual_apply(b) @ psi - h_min * psi))


def capacity_residual_vector(ch: Channel, psi: np.ndarray, omega_mat: np.ndarray, cbar: float) -> float:
    """Eigenvector defect of the extreme-point condition for the capacity-optimal set.

    || Phi*(-log Omega + log Phi(|psi><psi|)) |psi> - Cbar |psi> ||_2
    """
    b = -log_on_support(omega_mat) + log_on_support(ch.apply_ket(psi))
    return float(np.linalg.norm(ch.dual_apply(b) @ psi - cbar * psi))


def min_output_entropy(ch: Channel, cfg: OptimizerConfig) -> MinEntropyReport:
    """Multi-start minimization of the output entropy over pure inputs.

    Returns the best value found, every local optimum within obj_tol of it
    (deduplicated by overlap), and the per-minimizer eigenvector residuals.
    """
    def vg(psi):
        return _entropy_value_grad(ch, psi)

    def v(psi):
        return _entropy_value(ch, psi)

    runs = _multistart_sphere(vg, v, ch.dim_in, cfg, "min_output_entropy",
                              extra_starts=_basis_kets(ch.dim_in))
    best = min(f for f, _, _ in runs)
    best = max(best, 0.0)
    near = [(f, x, ok) for f, x, ok in runs if f <= best + cfg.obj_tol]
    kets = _dedup_kets([x for _, x, _ in near])
    residuals = tuple(min_entropy_residual(ch, k, best) for k in kets)
    return MinEntropyReport(
        value=best,
        minimizers=tuple(PureState(k) for k in kets),
        residuals=residuals,
        restart_converged=tuple(ok for _, _, ok in runs),
        converged=any(ok for f, _, ok in runs if f <= best + cfg.obj_tol),
    )


def conjugate(ch: Channel, a: np.ndarray, cfg: OptimizerConfig,
              extra_starts: Sequence[np.ndarray] = ()) -> tuple[float, PureState]:
    """Conjugate of the output entropy at a Hermitian operator.

    Maximizes <psi|A|psi> - H(Phi(|psi><psi|)) over unit vectors; the top
    eigenvectors of A seed the search alongside the random restarts.
    """
    a = herm(np.asarray(a, dtype=complex))
    if a.shape != (ch.dim_in, ch.dim_in):
        raise ValueError(f"operator shape {a.shape} != ({ch.dim_in}, {ch.dim_in})")
    value, ket, _ = _conjugate_engine(ch, a, cfg, extra_starts)
    return value, PureState(ket)


def _conjugate_engine(ch: Channel, a: np.ndarray, cfg: OptimizerConfig,
                      extra_starts: Sequence[np.ndarray] = ()) -> tuple[float, np.ndarray, bool]:
    def vg(psi):
        h, gh, spec = _entropy_value_grad(ch, psi)
        val = np.vdot(psi, a @ psi).real - h
        grad = 2.0 * (a @ psi) - gh
        return -val, -grad, spec

    def v(psi):
        return -(np.vdot(psi, a @ psi).real - _entropy_value(ch, psi))

    _, vecs = eig_hermitian(a)
    starts = [vecs[:, 0], vecs[:, -1]] + list(extra_starts)
    runs = _multistart_sphere(vg, v, ch.dim_in, cfg, "conjugate", extra_starts=starts)
    f, x, ok = min(runs, key=lambda r: r[0])
    return -f, x, ok


# ---------------------------------------------------------------------------
# convex closure of the output entropy (fixed-average ensembles)
# ---------------------------------------------------------------------------

def _softmax(y: np.ndarray) -> np.ndarray:
    z = np.exp(y - y.max())
    return z / z.sum()


class _EnsembleObjective:
    """Average output entropy of an m-member pure ensemble, plus an average
    penalty mu * ||avg - rho||_F^2; analytic gradient over states and logits."""

    def __init__(self, ch: Channel, rho_mat: np.ndarray, m: int):
        self.k = ch.kraus
        self.d = ch.dim_in
        self.m = m
        self.rho = rho_mat

    def pack(self, kets: np.ndarray, weights: np.ndarray) -> np.ndarray:
        y = np.log(np.maximum(weights, 1e-14))
        return np.concatenate([kets.real.ravel(), kets.imag.ravel(), y])

    def unpack(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        md = self.m * self.d
        z = (theta[:md] + 1j * theta[md:2 * md]).reshape(self.m, self.d)
        norms = np.linalg.norm(z, axis=1)
        phi = z / norms[:, None]
        return phi, _softmax(theta[2 * md:])

    def stats(self, theta: np.ndarray):
        md = self.m * self.d
        z = (theta[:md] + 1j * theta[md:2 * md]).reshape(self.m, self.d)
        norms = np.linalg.norm(z, axis=1)
        phi = z / norms[:, None]
        w = _softmax(theta[2 * md:])
        t = np.einsum("kab,ib->ika", self.k, phi)
        sig = np.einsum("ika,ikb->iab", t, t.conj())
        evals, evecs = np.linalg.eigh(sig)
        wc = np.maximum(evals, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(wc > 0.0, wc * np.log(wc), 0.0)
        h = -plogp.sum(axis=1) / ln_of_base()
        return z, norms, phi, w, t, evals, evecs, h

    def value_grad(self, theta: np.ndarray, mu: float) -> tuple[float, np.ndarray]:
        z, norms, phi, w, t, evals, evecs, h = self.stats(theta)
        lnw = np.log(np.maximum(evals, _LOG_FLOOR))
        ln_sig = np.einsum("iab,ib,icb->iac", evecs, lnw, evecs.conj())
        avg = np.einsum("i,ia,ib->ab", w, phi, phi.conj())
        m_def = avg - self.rho
        pen = float(np.vdot(m_def, m_def).real)
        value = float(w @ h) + mu * pen

        x = np.einsum("iab,ikb->ika", ln_sig, t)
        u = np.einsum("kba,ikb->ia", self.k.conj(), x)
        g_h_phi = (-2.0 / ln_of_base()) * (u + phi)
        g_pen_phi = 4.0 * mu * (phi @ m_def.T)
        g_phi = w[:, None] * (g_h_phi + g_pen_phi)
        radial = np.einsum("ia,ia->i", g_phi.conj(), phi).real
        g_z = (g_phi - radial[:, None] * phi) / norms[:, None]

        df_dw = h + 2.0 * mu * np.einsum("ia,ab,ib->i", phi.conj(), m_def, phi).real
        g_y = w * (df_dw - float(w @ df_dw))
        grad = np.concatenate([g_z.real.ravel(), g_z.imag.ravel(), g_y])
        return value, grad

    def average_value(self, phi: np.ndarray, w: np.ndarray) -> float:
        t = np.einsum("kab,ib->ika", self.k, phi)
        sig = np.einsum("ika,ikb->iab", t, t.conj())
        evals = np.maximum(np.linalg.eigvalsh(sig), 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(evals > 0.0, evals * np.log(evals), 0.0)
        h = -plogp.sum(axis=1) / ln_of_base()
        return float(w @ h)


def _sqrt_and_pinv_sqrt(rho_mat: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    evals, evecs = eig_hermitian(rho_mat)
    on = evals > EPS_SUPPORT
    root = (evecs[:, on] * np.sqrt(evals[on])) @ evecs[:, on].conj().T
    pinv = (evecs[:, on] / np.sqrt(evals[on])) @ evecs[:, on].conj().T
    return root, pinv, int(on.sum())


def _project_to_average(kets: np.ndarray, weights: np.ndarray,
                        rho_mat: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Snap an ensemble onto the exact-average manifold.

    Replaces the weighted state matrix by the nearest one (polar factor)
    whose Gram average equals rho; returns (kets, weights, residual).
    """
    root, pinv, _ = _sqrt_and_pinv_sqrt(rho_mat)
    w_mat = (kets * np.sqrt(weights)[:, None]).T  # d x m columns
    x = pinv @ w_mat
    u, _, vh = np.linalg.svd(x, full_matrices=False)
    w2 = root @ (u @ vh)
    p2 = np.linalg.norm(w2, axis=0) ** 2
    keep = p2 > 1e-12
    if not np.any(keep):
        return kets, weights, math.inf
    kets2 = (w2[:, keep] / np.linalg.norm(w2[:, keep], axis=0)).T
    p2 = p2[keep]
    p2 = p2 / p2.sum()
    avg = np.einsum("i,ia,ib->ab", p2, kets2, kets2.conj())
    return kets2, p2, max_abs(avg - rho_mat)


_PENALTY_STAGES = (1e2, 1e4, 1e6)
_AVERAGE_RESIDUAL_TOL = 1e-8


def _closure_restart_count(cfg: OptimizerConfig) -> int:
    return max(2, cfg.restarts // 8)


def convex_closure_entropy(ch: Channel, rho: DensityMatrix,
                           cfg: OptimizerConfig) -> tuple[float, Ensemble]:
    """Largest convex minorant of the output entropy, evaluated at rho.

    Minimizes the average output entropy over pure ensembles with average rho
    (ensemble size capped at cfg.cap_for(dim)).  The fixed average is enforced
    by penalty continuation and then snapped exactly (polar correction), so
    the reported ensemble averages to rho within 1e-8.
    """
    if rho.dim != ch.dim_in:
        raise ValueError(f"state dim {rho.dim} != channel dim_in {ch.dim_in}")
    evals, evecs = rho.eigh()
    if evals[1:].max(initial=0.0) <= 1e-12:
        ket = evecs[:, 0]
        return _entropy_value(ch, ket), Ensemble([(1.0, PureState(ket))])

    m = max(cfg.cap_for(rho.dim), int((evals > EPS_SUPPORT).sum()))
    problem = _EnsembleObjective(ch, rho.mat, m)
    root, _, _ = _sqrt_and_pinv_sqrt(rho.mat)

    def spectral_start():
        kets, weights = [], []
        for lam, vec in zip(evals, evecs.T):
            if lam > EPS_SUPPORT:
                kets.append(vec)
                weights.append(lam)
        rng = derive_rng(cfg.seed, "closure_pad")
        while len(kets) < m:
            kets.append(random_ket(rng, rho.dim))
            weights.append(1e-8)
        w = np.array(weights)
        return np.array(kets), w / w.sum()

    def hjw_start(i):
        rng = derive_rng(cfg.seed, "closure", i)
        g = rng.standard_normal((m, rho.dim)) + 1j * rng.standard_normal((m, rho.dim))
        q, _ = np.linalg.qr(g)  # m x d, orthonormal columns
        w_mat = root @ q.conj().T  # d x m
        p = np.linalg.norm(w_mat, axis=0) ** 2
        p = np.maximum(p, 1e-14)
        kets = (w_mat / np.linalg.norm(w_mat, axis=0)).T
        return kets, p / p.sum()

    starts = [spectral_start()] + [hjw_start(i) for i in range(_closure_restart_count(cfg))]

    def solve(start):
        kets0, w0 = start
        theta = problem.pack(kets0, w0)
        for mu in _PENALTY_STAGES:
            res = spopt.minimize(
                problem.value_grad, theta, args=(mu,), jac=True, method="L-BFGS-B",
                options={"maxiter": min(cfg.max_iters, 250), "ftol": 1e-15, "gtol": 1e-12},
            )
            theta = res.x
        phi, w = problem.unpack(theta)
        kets2, w2, residual = _project_to_average(phi, w, rho.mat)
        if residual > _AVERAGE_RESIDUAL_TOL:
            return math.inf, kets2, w2, residual
        return problem.average_value(kets2, w2), kets2, w2, residual

    results = _run_indexed([(lambda s=s: solve(s)) for s in starts], cfg.threads)
    best = min(results, key=lambda r: r[0])
    value, kets, weights, _ = best
    keep = weights > 1e-12
    weights = weights[keep] / weights[keep].sum()
    members = [(p, PureState(k)) for p, k in zip(weights, kets[keep])]
    return value, Ensemble(members)


def chi(ch: Channel, rho: DensityMatrix, cfg: OptimizerConfig) -> tuple[float, Ensemble]:
    """Chi-function: output entropy of rho minus the convex closure at rho.

    The returned ensemble is the optimal pure-state decomposition of rho.
    """
    closure, ensemble = convex_closure_entropy(ch, rho, cfg)
    value = von_neumann_entropy(ch.apply(rho)) - closure
    return max(value, 0.0), ensemble


def _hermitian_basis(d: int) -> list[np.ndarray]:
    """Real basis of the Hermitian d x d operators (diagonal, then re/im pairs)."""
    ops = []
    for i in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[i, i] = 1.0
        ops.append(e)
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = e[j, i] = 1.0
            ops.append(e)
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = -1j
            e[j, i] = 1j
            ops.append(e)
    return ops


def closure_via_duality(ch: Channel, rho: DensityMatrix, cfg: OptimizerConfig,
                        gap_tol: float = 1e-5, max_oracle_calls: int = 80) -> float:
    """Convex closure at rho via its dual representation.

    Gradient-free cutting-plane ascent over Hermitian A (d^2 real
    coordinates) of Tr[A rho] - H*(A), seeded at Phi*(-log Phi(rho)).  Each
    inner conjugate call contributes one linear cut on H*, the next query
    point maximizes the relaxed model over a box (LP), and the returned value
    is the best true lower bound seen; the iteration stops when the model's
    upper bound pinches against it.
    """
    if rho.dim != ch.dim_in:
        raise ValueError(f"state dim {rho.dim} != channel dim_in {ch.dim_in}")
    d = ch.dim_in
    basis = _hermitian_basis(d)
    n = len(basis)
    inner_cfg = OptimizerConfig(
        restarts=max(3, cfg.restarts // 8),
        max_iters=min(cfg.max_iters, 400),
        obj_tol=cfg.obj_tol,
        grad_tol=cfg.grad_tol,
        seed=cfg.seed,
        threads=1,
    )

    def coords(sigma: np.ndarray) -> np.ndarray:
        return np.array([np.trace(b @ sigma).real for b in basis])

    def assemble(a: np.ndarray) -> np.ndarray:
        return herm(sum(x * b for x, b in zip(a, basis)))

    rho_vec = coords(rho.mat)
    cut_vecs: list[np.ndarray] = []
    cut_offsets: list[float] = []

    def add_cut(psi: np.ndarray):
        cut_vecs.append(coords(np.outer(psi, psi.conj())))
        cut_offsets.append(_entropy_value(ch, psi))

    evals, evecs = rho.eigh()
    for vec in evecs.T:
        add_cut(vec)
    rng = derive_rng(cfg.seed, "duality_seed_cuts")
    for _ in range(2 * d):
        add_cut(random_ket(rng, d))

    warm: list[np.ndarray] = []

    def oracle(a_mat: np.ndarray) -> tuple[float, np.ndarray]:
        h_star, ket, _ = _conjugate_engine(ch, a_mat, inner_cfg, extra_starts=tuple(warm))
        warm[:] = [ket]
        return h_star, ket

    a0 = ch.dual_apply(-log_on_support(ch.apply_mat(rho.mat)))
    a0 = a0 - (np.trace(a0).real / d) * np.eye(d)  # the value is trace-shift invariant
    h0, k0 = oracle(a0)
    best = float(np.trace(a0 @ rho.mat).real) - h0
    add_cut(k0)

    # pin the flat trace direction; the diagonal coordinates come first
    trace_row = np.concatenate([np.ones(d), np.zeros(n - d), [0.0]])
    box = max(10.0, 4.0 * max_abs(a0))
    calls = 1
    while calls < max_oracle_calls:
        # maximize rho_vec . a - s  subject to  psi_vec . a - h <= s,  |a| <= box
        c = -np.concatenate([rho_vec, [-1.0]])
        a_ub = np.array([np.concatenate([v, [-1.0]]) for v in cut_vecs])
        b_ub = np.array(cut_offsets)
        bounds = [(-box, box)] * n + [(None, None)]
        lp = spopt.linprog(c, A_ub=a_ub, b_ub=b_ub,
                           A_eq=trace_row[None, :], b_eq=[0.0],
                           bounds=bounds, method="highs")
        if not lp.success:
            break
        a_coords = lp.x[:n]
        upper = float(rho_vec @ a_coords - lp.x[n])
        box_active = bool(np.max(np.abs(a_coords)) >= box - 1e-9)
        a_mat = assemble(a_coords)
        h_star, ket = oracle(a_mat)
        calls += 1
        best = max(best, float(rho_vec @ a_coords) - h_star)
        add_cut(ket)
        if box_active:
            box = min(box * 2.0, 1e7)
        elif upper - best <= gap_tol:
            break
    return best


# ---------------------------------------------------------------------------
# Holevo capacity
# ---------------------------------------------------------------------------

def _output_stats(ch: Channel, kets: np.ndarray):
    outs = np.array([ch.apply_ket(k) for k in kets])
    logs = np.array([log_on_support(o) for o in outs])
    ents = np.array([von_neumann_entropy(o) for o in outs])
    return outs, logs, ents


def _distance_terms(outs, logs, avg_out) -> np.ndarray:
    """Per-state output relative entropy to the averaged output."""
    log_avg = log_on_support(avg_out)
    return np.einsum("iab,iba->i", outs, logs - log_avg[None, :, :]).real


def _ba_weights(outs, logs, w0: np.ndarray, iters: int = 400,
                tol: float = 1e-12) -> tuple[np.ndarray, float, np.ndarray]:
    """Multiplicative weight optimization of the Holevo quantity for fixed states."""
    w = np.array(w0, dtype=float)
    w = w / w.sum()
    lnb = ln_of_base()
    dists = None
    for _ in range(iters):
        avg = np.einsum("i,iab->ab", w, outs)
        dists = _distance_terms(outs, logs, avg)
        chi_now = float(w @ dists)
        if dists.max() - chi_now <= tol:
            break
        w = w * np.exp(lnb * (dists - dists.max()))
        total = w.sum()
        if total <= 0.0 or not np.isfinite(total):
            w = np.full(w.shape, 1.0 / w.size)
        else:
            w = w / total
    avg = np.einsum("i,iab->ab", w, outs)
    dists = _distance_terms(outs, logs, avg)
    return w, float(w @ dists), dists


def _polish_ensemble(ch: Channel, kets: np.ndarray, weights: np.ndarray,
                     max_iters: int) -> tuple[np.ndarray, np.ndarray]:
    """Joint smooth ascent of the Holevo quantity over states and weights."""
    m, d = kets.shape
    lnb = ln_of_base()
    k_ops = ch.kraus

    def value_grad(theta: np.ndarray):
        md = m * d
        z = (theta[:md] + 1j * theta[md:2 * md]).reshape(m, d)
        norms = np.linalg.norm(z, axis=1)
        phi = z / norms[:, None]
        w = _softmax(theta[2 * md:])
        t = np.einsum("kab,ib->ika", k_ops, phi)
        sig = np.einsum("ika,ikb->iab", t, t.conj())
        evals, evecs = np.linalg.eigh(sig)
        wc = np.maximum(evals, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(wc > 0.0, wc * np.log(wc), 0.0)
        h = -plogp.sum(axis=1) / lnb
        lnw = np.log(np.maximum(evals, _LOG_FLOOR))
        ln_sig = np.einsum("iab,ib,icb->iac", evecs, lnw, evecs.conj())
        avg = np.einsum("i,iab->ab", w, sig)
        wa, va = np.linalg.eigh(avg)
        wa_c = np.maximum(wa, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp_a = np.where(wa_c > 0.0, wa_c * np.log(wa_c), 0.0)
        h_avg = -float(plogp_a.sum()) / lnb
        ln_avg = (va * np.log(np.maximum(wa, _LOG_FLOOR))) @ va.conj().T
        chi_val = h_avg - float(w @ h)

        diff = ln_sig - ln_avg[None, :, :]
        x = np.einsum("iab,ikb->ika", diff, t)
        u = np.einsum("kba,ikb->ia", k_ops.conj(), x)
        g_phi = (2.0 / lnb) * (w[:, None] * u)
        radial = np.einsum("ia,ia->i", g_phi.conj(), phi).real
        g_z = (g_phi - radial[:, None] * phi) / norms[:, None]
        dists = np.einsum("iab,iba->i", sig, diff).real
        dchi_dw = dists - 1.0 / lnb
        g_y = w * (dchi_dw - float(w @ dchi_dw))
        grad = np.concatenate([g_z.real.ravel(), g_z.imag.ravel(), g_y])
        return -chi_val, -grad

    theta0 = np.concatenate([kets.real.ravel(), kets.imag.ravel(),
                             np.log(np.maximum(weights, 1e-14))])
    res = spopt.minimize(value_grad, theta0, jac=True, method="L-BFGS-B",
                         options={"maxiter": max_iters, "ftol": 1e-15, "gtol": 1e-12})
    md = m * d
    z = (res.x[:md] + 1j * res.x[md:2 * md]).reshape(m, d)
    phi = z / np.linalg.norm(z, axis=1)[:, None]
    return phi, _softmax(res.x[2 * md:])


def _capacity_full(ch: Channel, cfg: OptimizerConfig) -> CapacityReport:
    d = ch.dim_in
    cap = cfg.cap_for(d)
    kets = np.array(_basis_kets(d))
    weights = np.full(len(kets), 1.0 / len(kets))
    inner_cfg = OptimizerConfig(
        restarts=max(4, cfg.restarts // 4), max_iters=min(cfg.max_iters, 600),
        obj_tol=cfg.obj_tol, grad_tol=cfg.grad_tol, seed=cfg.seed, threads=cfg.threads,
    )
    max_outer = 120
    residual = math.inf
    chi_val = 0.0
    converged = False
    outer = 0
    for outer in range(1, max_outer + 1):
        outs, logs, _ = _output_stats(ch, kets)
        weights, chi_val, _ = _ba_weights(outs, logs, weights)
        keep = weights > 1e-10
        if keep.sum() < keep.size:
            kets = kets[keep]
            weights = weights[keep] / weights[keep].sum()
            outs, logs, _ = _output_stats(ch, kets)
            weights, chi_val, _ = _ba_weights(outs, logs, weights)
        avg_out = np.einsum("i,iab->ab", weights, outs)
        a_op = ch.dual_apply(-log_on_support(avg_out))
        val, new_ket, _ = _conjugate_engine(ch, a_op, inner_cfg, extra_starts=tuple(kets))
        residual = abs(val - chi_val)
        if residual <= CAPACITY_RESIDUAL_TOL:
            converged = True
            break
        duplicate = any(abs(np.vdot(new_ket, k)) ** 2 > _DEDUP_OVERLAP for k in kets)
        if not duplicate and len(kets) < cap:
            kets = np.vstack([kets, new_ket])
            weights = np.concatenate([weights * (1.0 - 1e-3), [1e-3]])
        else:
            kets, weights = _polish_ensemble(ch, kets, weights, min(cfg.max_iters, 500))
            keep = weights > 1e-10
            kets, weights = kets[keep], weights[keep] / weights[keep].sum()

    outs, logs, _ = _output_stats(ch, kets)
    weights, chi_val, _ = _ba_weights(outs, logs, weights)
    keep = weights > 1e-9
    kets, weights = kets[keep], weights[keep] / weights[keep].sum()
    outs, logs, _ = _output_stats(ch, kets)
    weights, chi_val, _ = _ba_weights(outs, logs, weights)
    avg_out = herm(np.einsum("i,iab->ab", weights, outs))
    a_op = ch.dual_apply(-log_on_support(avg_out))
    val, _, _ = _conjugate_engine(ch, a_op, cfg, extra_starts=tuple(kets))
    residual = abs(val - chi_val)
    converged = residual <= CAPACITY_RESIDUAL_TOL

    omega = DensityMatrix(avg_out, _validated=True)
    members = [(p, PureState(k)) for p, k in zip(weights, kets)]
    ensemble = Ensemble(members)
    lemma1 = tuple(capacity_residual_vector(ch, k, avg_out, chi_val) for k in kets)
    return CapacityReport(
        value=chi_val,
        ensemble=ensemble,
        omega=omega,
        max_distance_residual=residual,
        lemma1_residuals=lemma1,
        converged=converged,
        iterations=outer,
    )


def _capacity_generators(ch: Channel, generators: Sequence[DensityMatrix],
                         cfg: OptimizerConfig) -> CapacityReport:
    gens = list(generators)
    if gens[0].dim != ch.dim_in:
        raise ValueError(f"generator dim {gens[0].dim} != channel dim_in {ch.dim_in}")

    def chi_at(t: np.ndarray) -> tuple[float, Ensemble]:
        avg = sum(float(ti) * g.mat for ti, g in zip(t, gens))
        return chi(ch, DensityMatrix(herm(avg), _validated=True), cfg)

    if len(gens) == 1:
        best_t = np.array([1.0])
        value, ensemble = chi_at(best_t)
        vertex_values = [value]
    else:
        vertex_values = []
        best = (-math.inf, None)
        for j in range(len(gens)):
            t = np.zeros(len(gens))
            t[j] = 1.0
            v, _ = chi_at(t)
            vertex_values.append(v)
            if v > best[0]:
                best = (v, t)
        uniform = np.full(len(gens), 1.0 / len(gens))
        v_uniform, _ = chi_at(uniform)
        if v_uniform > best[0]:
            best = (v_uniform, uniform)

        def negated(y: np.ndarray) -> float:
            v, _ = chi_at(_softmax(y))
            return -v

        y0 = np.log(np.maximum(best[1], 1e-6))
        res = spopt.minimize(negated, y0, method="Powell",
                             options={"maxfev": 40 * len(gens), "xtol": 1e-5, "ftol": 1e-8})
        best_t = _softmax(res.x)
        value, ensemble = chi_at(best_t)
        if value < best[0]:
            best_t = best[1]
            value, ensemble = chi_at(best_t)

    avg_out = herm(ch.apply_mat(ensemble.average_mat()))
    omega = DensityMatrix(avg_out, _validated=True)
    residual = max(0.0, max(vertex_values) - value)
    lemma1 = tuple(capacity_residual_vector(ch, s.ket, avg_out, value)
                   for _, s in ensemble.members)
    return CapacityReport(
        value=value,
        ensemble=ensemble,
        omega=omega,
        max_distance_residual=residual,
        lemma1_residuals=lemma1,
        converged=True,
        iterations=1,
    )


def holevo_capacity(ch: Channel, constraint: ConstraintSet, cfg: OptimizerConfig) -> CapacityReport:
    """Constrained Holevo capacity with a maximal-distance certificate.

    For the full state space this is the conditional-gradient iteration: add
    the pure state of maximal output relative entropy to the current averaged
    output, re-balance weights multiplicatively, and stop when the
    maximal-distance residual drops below 1e-6.  For a finitely generated
    constraint the chi-function is maximized over the generator simplex and
    the residual is the best vertex defect.
    """
    if constraint.is_full:
        return _capacity_full(ch, cfg)
    return _capacity_generators(ch, constraint.generators, cfg)


def check_optimal_average(ch: Channel, rho: DensityMatrix,
                          cfg: OptimizerConfig) -> tuple[bool, float]:
    """Maximal-distance test for being the average state of an optimal ensemble.

    The residual is |max_omega H(Phi(omega) || Phi(rho)) - chi(rho)|; rho
    passes when it is below 1e-5.
    """
    a_op = ch.dual_apply(-log_on_support(ch.apply_mat(rho.mat)))
    val, _, _ = _conjugate_engine(ch, a_op, cfg)
    chi_val, _ = chi(ch, rho, cfg)
    residual = abs(val - chi_val)
    return residual <= OPTIMAL_AVERAGE_TOL, residual


def check_capacity_inequality(ch: Channel, rho: DensityMatrix, report: CapacityReport,
                              cfg: OptimizerConfig) -> float:
    """Slack of the capacity inequality at rho.

    slack = Cbar - chi(rho) - H(Phi(rho) || Omega); -inf (never asserted)
    when the output support escapes the support of Omega.
    """
    chi_val, _ = chi(ch, rho, cfg)
    dist = relative_entropy(ch.apply(rho), report.omega)
    if math.isinf(dist):
        return -math.inf
    return report.value - chi_val - dist
