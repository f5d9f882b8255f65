"""Complex linear algebra and quantum-state primitives.

Operators are dense complex numpy arrays; density matrices, pure states and
projectors carry thin validated wrappers.  Entropic quantities use the
globally configured logarithm base (bits by default, ``config.set_log_base``).
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .config import EPS_SUPPORT, ln_of_base

HERMITICITY_TOL = 1e-12
POSITIVITY_TOL = 1e-10
TRACE_TOL = 1e-10
PROJECTOR_TOL = 1e-10


def herm(a: np.ndarray) -> np.ndarray:
    """Hermitian part (A + A†)/2."""
    a = np.asarray(a, dtype=complex)
    return 0.5 * (a + a.conj().T)


def max_abs(a: np.ndarray) -> float:
    """Entrywise max-norm, 0 for empty input."""
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def is_hermitian(a: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    a = np.asarray(a, dtype=complex)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and max_abs(a - a.conj().T) <= tol


def _as_square(mat, what: str) -> np.ndarray:
    m = np.array(mat, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} must be a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m.view(float))):
        raise ValueError(f"{what} has non-finite entries")
    return m


class DensityMatrix:
    """Positive unit-trace operator on C^dim."""

    __slots__ = ("mat",)

    def __init__(self, mat, *, _validated: bool = False):
        m = _as_square(mat, "density matrix")
        if not _validated:
            if max_abs(m - m.conj().T) > HERMITICITY_TOL:
                raise ValueError("density matrix is not Hermitian within 1e-12")
            if abs(np.trace(m).real - 1.0) > TRACE_TOL or abs(np.trace(m).imag) > TRACE_TOL:
                raise ValueError("density matrix trace is not 1 within 1e-10")
            evals = np.linalg.eigvalsh(herm(m))
            if evals.min() < -POSITIVITY_TOL:
                raise ValueError(f"density matrix has eigenvalue {evals.min():.3e} < -1e-10")
        m.setflags(write=False)
        self.mat = m

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def eigh(self):
        """Eigenvalues (descending) and matching orthonormal eigenvector columns."""
        return eig_hermitian(self.mat)

    def is_pure(self, tol: float = 1e-10) -> bool:
        return abs(np.trace(self.mat @ self.mat).real - 1.0) <= tol

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


class PureState:
    """Unit vector in C^dim (global phase is irrelevant everywhere we use it)."""

    __slots__ = ("ket",)

    def __init__(self, ket):
        v = np.array(ket, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(v.view(float))):
            raise ValueError("state vector has non-finite entries")
        n = np.linalg.norm(v)
        if abs(n - 1.0) > 1e-12:
            raise ValueError(f"state vector norm {n!r} is not 1 within 1e-12")
        v.setflags(write=False)
        self.ket = v

    @property
    def dim(self) -> int:
        return self.ket.shape[0]

    def projector_mat(self) -> np.ndarray:
        return np.outer(self.ket, self.ket.conj())

    def density(self) -> DensityMatrix:
        return DensityMatrix(self.projector_mat(), _validated=True)

    def overlap(self, other: "PureState") -> float:
        """|<self|other>|^2."""
        return float(abs(np.vdot(self.ket, other.ket)) ** 2)

    def __repr__(self):
        return f"PureState(dim={self.dim})"


class Projector:
    """Orthogonal projector with its rank."""

    __slots__ = ("mat", "rank")

    def __init__(self, mat):
        m = _as_square(mat, "projector")
        m = herm(m)
        if max_abs(m @ m - m) > PROJECTOR_TOL:
            raise ValueError("matrix is not idempotent within 1e-10")
        tr = np.trace(m).real
        rank = int(round(tr))
        if abs(tr - rank) > 1e-8:
            raise ValueError(f"projector trace {tr!r} is not near an integer")
        m.setflags(write=False)
        self.mat = m
        self.rank = rank

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def __repr__(self):
        return f"Projector(dim={self.dim}, rank={self.rank})"


def projector_from_span(vectors: Sequence[np.ndarray], rank_tol: float = 1e-10) -> Projector:
    """Orthogonal projector onto the span of the given vectors.

    The rank is the numerical rank of the stacked vectors at ``rank_tol``.
    """
    vecs = [np.asarray(v, dtype=complex).reshape(-1) for v in vectors]
    if not vecs:
        raise ValueError("need at least one vector to span a subspace")
    x = np.array(vecs)
    _, s, vh = np.linalg.svd(x, full_matrices=False)
    keep = s > rank_tol
    basis = vh[keep].conj().T  # columns are orthonormal
    return Projector(basis @ basis.conj().T)


def support_isometry(p: Projector) -> np.ndarray:
    """d x rank matrix whose orthonormal columns span range(P)."""
    evals, evecs = eig_hermitian(p.mat)
    return np.ascontiguousarray(evecs[:, : p.rank])


def tensor(a, b):
    """Kronecker product, preserving the wrapper kind of the operands."""
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(np.kron(a.mat, b.mat), _validated=True)
    if isinstance(a, DensityMatrix) or isinstance(b, DensityMatrix):
        raise TypeError("tensor operands must be of the same kind")
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def _ptrace_mat(w: np.ndarray, dims, keep: str) -> np.ndarray:
    d_h, d_k = int(dims[0]), int(dims[1])
    if w.shape[0] != d_h * d_k:
        raise ValueError(f"operator dim {w.shape[0]} != {d_h}*{d_k}")
    w4 = w.reshape(d_h, d_k, d_h, d_k)
    if keep == "H":
        return np.einsum("ikjk->ij", w4)
    if keep == "K":
        return np.einsum("ikil->kl", w4)
    raise ValueError(f"keep must be 'H' or 'K', got {keep!r}")


def partial_trace(w, dims, keep: str = "H"):
    """Trace out one tensor factor of an operator on C^dH (x) C^dK.

    ``keep="H"`` returns the first-factor reduction, ``keep="K"`` the second.
    """
    if isinstance(w, DensityMatrix):
        return DensityMatrix(_ptrace_mat(w.mat, dims, keep), _validated=True)
    return _ptrace_mat(np.asarray(w, dtype=complex), dims, keep)


def eig_hermitian(a: np.ndarray):
    """Eigen-decomposition of a (nearly) Hermitian matrix.

    The input is symmetrized first; eigenvalues come back descending with the
    eigenvectors as matching orthonormal columns.
    """
    m = _as_square(a, "operator")
    w, v = np.linalg.eigh(herm(m))
    return w[::-1].copy(), np.ascontiguousarray(v[:, ::-1])


def _mat_of(rho) -> np.ndarray:
    return rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def log_on_support(rho, eps: float = EPS_SUPPORT) -> np.ndarray:
    """Matrix logarithm restricted to the support.

    Eigenvalues at or below ``eps`` map to 0 (not -inf), so the null space of
    the input is contained in the null space of the result.  The logarithm is
    taken in the configured base.
    """
    w, v = eig_hermitian(_mat_of(rho))
    out = np.zeros_like(w)
    on = w > eps
    out[on] = np.log(w[on]) / ln_of_base()
    return (v * out) @ v.conj().T


def entropy_of_spectrum(evals: np.ndarray) -> float:
    """Shannon entropy of a nonnegative spectrum in the configured base.

    Values in [-1e-10, 0) are clamped to 0 (roundoff from partial traces);
    0 log 0 = 0.
    """
    w = np.asarray(evals, dtype=float)
    if w.min() < -POSITIVITY_TOL:
        raise ValueError(f"spectrum has eigenvalue {w.min():.3e} < -1e-10")
    w = np.maximum(w, 0.0)
    nz = w > 0.0
    h = float(-(w[nz] * np.log(w[nz])).sum()) / ln_of_base()
    return max(h, 0.0) + 0.0


def von_neumann_entropy(rho) -> float:
    """-Tr rho log rho in the configured base; 0 for pure states."""
    return entropy_of_spectrum(np.linalg.eigvalsh(herm(_mat_of(rho))))


def relative_entropy(rho, sigma, eps: float = EPS_SUPPORT) -> float:
    """Tr rho (log rho - log sigma) on supports, or +inf.

    Returns ``math.inf`` when the support of rho is not contained in the
    support of sigma: some rho-eigenvector with eigenvalue > eps has
    sigma-expectation < eps.  Finite results are in the configured base.
    """
    r = _mat_of(rho)
    s = _mat_of(sigma)
    if r.shape != s.shape:
        raise ValueError(f"dimension mismatch: {r.shape} vs {s.shape}")
    wr, vr = eig_hermitian(r)
    on = wr > eps
    for vec in vr[:, on].T:
        if np.vdot(vec, s @ vec).real < eps:
            return math.inf
    tr_r_log_r = float((wr[on] * np.log(wr[on])).sum()) / ln_of_base()
    tr_r_log_s = float(np.trace(r @ log_on_support(s, eps)).real)
    return tr_r_log_r - tr_r_log_s


def binary_entropy(x: float) -> float:
    """Entropy of the (x, 1-x) distribution in the configured base."""
    return entropy_of_spectrum(np.array([x, 1.0 - x]))


def random_density_matrix(rng: np.random.Generator, dim: int,
                          rank: int | None = None) -> DensityMatrix:
    """Random full(-or fixed-)rank state from a normalized Wishart draw."""
    r = rank if rank is not None else dim
    g = rng.standard_normal((dim, r)) + 1j * rng.standard_normal((dim, r))
    m = g @ g.conj().T
    return DensityMatrix(herm(m / np.trace(m).real), _validated=True)
