"""Quantum channels in Kraus form: duals, tensor products, subchannels, catalog.

The Kraus list is the single canonical representation.  Choi matrices appear
only internally (complete-positivity checks and extensional equality).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .config import derive_rng
from .qcore import (
    DensityMatrix,
    Projector,
    eig_hermitian,
    herm,
    max_abs,
    support_isometry,
)

COMPLETENESS_TOL = 1e-10
BISTOCHASTIC_TOL = 1e-8


class ChannelFormatError(ValueError):
    """Raised when a channel description (JSON or parameters) is malformed."""


class Channel:
    """Completely positive trace-preserving map given by Kraus operators.

    ``kraus`` is a read-only complex array of shape (k, dim_out, dim_in);
    completeness sum_i K_i† K_i = I is enforced at construction.
    """

    __slots__ = ("kraus", "name")

    def __init__(self, kraus, *, name: str | None = None, atol: float = COMPLETENESS_TOL):
        k = np.array(kraus, dtype=complex)
        if k.ndim != 3 or k.shape[0] == 0:
            raise ValueError("kraus must be a nonempty list of equally shaped matrices")
        if not np.all(np.isfinite(k.view(float))):
            raise ValueError("Kraus operators have non-finite entries")
        gram = np.einsum("kba,kbc->ac", k.conj(), k)
        defect = max_abs(gram - np.eye(k.shape[2]))
        if defect > atol:
            raise ValueError(f"Kraus completeness defect {defect:.3e} exceeds {atol:.1e}")
        k.setflags(write=False)
        self.kraus = k
        self.name = name

    @property
    def dim_in(self) -> int:
        return self.kraus.shape[2]

    @property
    def dim_out(self) -> int:
        return self.kraus.shape[1]

    @property
    def kraus_count(self) -> int:
        return self.kraus.shape[0]

    def apply_mat(self, rho: np.ndarray) -> np.ndarray:
        """sum_i K_i rho K_i† for a raw matrix."""
        t = np.matmul(self.kraus, rho)
        return np.einsum("kad,kbd->ab", t, self.kraus.conj())

    def apply(self, rho):
        """Channel output; DensityMatrix in, DensityMatrix out."""
        if isinstance(rho, DensityMatrix):
            if rho.dim != self.dim_in:
                raise ValueError(f"input dim {rho.dim} != channel dim_in {self.dim_in}")
            return DensityMatrix(herm(self.apply_mat(rho.mat)), _validated=True)
        return self.apply_mat(np.asarray(rho, dtype=complex))

    def apply_ket(self, psi: np.ndarray) -> np.ndarray:
        """Output matrix for the pure input |psi><psi|."""
        m = self.kraus @ psi  # (k, dim_out) rows K_i psi
        return np.einsum("ka,kb->ab", m, m.conj())

    def dual_apply(self, a: np.ndarray) -> np.ndarray:
        """Dual (adjoint) map sum_i K_i† A K_i, symmetrized.

        Satisfies Tr[A Phi(rho)] = Tr[Phi*(A) rho]; unital for CPTP channels.
        """
        a = np.asarray(a, dtype=complex)
        if a.shape != (self.dim_out, self.dim_out):
            raise ValueError(f"operator shape {a.shape} != ({self.dim_out}, {self.dim_out})")
        out = np.einsum("kba,bc,kcd->ad", self.kraus.conj(), a, self.kraus, optimize=True)
        return herm(out)

    def dual_apply_ket(self, a: np.ndarray, psi: np.ndarray) -> np.ndarray:
        """Phi*(A) |psi> without forming Phi*(A)."""
        m = self.kraus @ psi            # (k, dim_out)
        am = m @ a.T                    # rows A K_i psi
        return np.einsum("kba,kb->a", self.kraus.conj(), am)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Channel({self.dim_in}->{self.dim_out}, k={self.kraus_count}{label})"


@dataclass(frozen=True)
class ProductChannel:
    """Tensor product of two channels with the combined Kraus set."""

    left: Channel
    right: Channel
    combined: Channel

    @property
    def input_dims(self) -> tuple[int, int]:
        return (self.left.dim_in, self.right.dim_in)

    @property
    def output_dims(self) -> tuple[int, int]:
        return (self.left.dim_out, self.right.dim_out)


def tensor_channels(phi: Channel, psi: Channel) -> ProductChannel:
    """Kraus set of the product channel: all pairwise Kronecker products."""
    kraus = [np.kron(a, b) for a in phi.kraus for b in psi.kraus]
    name = None
    if phi.name and psi.name:
        name = f"{phi.name} (x) {psi.name}"
    return ProductChannel(phi, psi, Channel(kraus, name=name))


def restrict(ch: Channel, subspace: Projector) -> Channel:
    """Subchannel on a subspace of the input space.

    Composes the channel with the isometry onto range(subspace); the result
    has dim_in == subspace.rank and agrees with the parent on embedded states.
    """
    if subspace.dim != ch.dim_in:
        raise ValueError(f"projector dim {subspace.dim} != channel dim_in {ch.dim_in}")
    if subspace.rank == 0:
        raise ValueError("cannot restrict to a rank-0 subspace")
    v = support_isometry(subspace)
    return Channel([k @ v for k in ch.kraus], name=f"restricted({ch.name or 'channel'})")


def choi_matrix(ch: Channel) -> np.ndarray:
    """Unnormalized Choi matrix sum_ij |i><j| (x) Phi(|i><j|) (internal use)."""
    d = ch.dim_in
    k = ch.kraus  # (n, dout, din)
    vecs = k.transpose(0, 2, 1).reshape(ch.kraus_count, d * ch.dim_out)
    return np.einsum("ka,kb->ab", vecs, vecs.conj())


def channels_extensionally_equal(a: Channel, b: Channel, tol: float = 1e-10) -> bool:
    """Equality as maps (agreement on a basis of inputs), not as Kraus lists."""
    if a.dim_in != b.dim_in or a.dim_out != b.dim_out:
        return False
    return max_abs(choi_matrix(a) - choi_matrix(b)) <= tol


def is_bistochastic(ch: Channel, tol: float = BISTOCHASTIC_TOL) -> bool:
    """True iff the chaotic input maps to the chaotic output."""
    image = ch.apply_mat(np.eye(ch.dim_in, dtype=complex) / ch.dim_in)
    return max_abs(image - np.eye(ch.dim_out) / ch.dim_out) <= tol


def random_channel(d_in: int, d_out: int, kraus_count: int, seed: int) -> Channel:
    """Seeded Haar-random channel.

    A Haar isometry C^d_in -> C^(d_out * kraus_count) is drawn via QR of a
    complex Gaussian matrix and sliced into Kraus blocks; the result is a
    pure function of the arguments.
    """
    if d_in < 1 or d_out < 1 or kraus_count < 1:
        raise ValueError("dimensions and kraus_count must be positive")
    if d_out * kraus_count < d_in:
        raise ValueError(f"d_out*kraus_count = {d_out * kraus_count} < d_in = {d_in}; no isometry exists")
    rng = derive_rng(seed, "random_channel", d_in, d_out, kraus_count)
    g = rng.standard_normal((d_out * kraus_count, d_in)) + 1j * rng.standard_normal(
        (d_out * kraus_count, d_in)
    )
    q, r = np.linalg.qr(g)
    phases = np.diag(r) / np.abs(np.diag(r))
    v = q * phases.conj()  # columns orthonormal, distribution phase-fixed
    kraus = v.reshape(kraus_count, d_out, d_in)
    return Channel(kraus, name=f"random({d_in}->{d_out}, k={kraus_count}, seed={seed})")


# -- catalog ----------------------------------------------------------------

def _weyl_ops(d: int) -> list[np.ndarray]:
    """The d^2 discrete Weyl (shift/clock) unitaries X^a Z^b on C^d."""
    omega = np.exp(2j * np.pi / d)
    x = np.roll(np.eye(d, dtype=complex), 1, axis=0)
    z = np.diag(omega ** np.arange(d))
    ops = []
    for a in range(d):
        xa = np.linalg.matrix_power(x, a)
        for b in range(d):
            ops.append(xa @ np.linalg.matrix_power(z, b))
    return ops


def _require(cond: bool, message: str):
    if not cond:
        raise ChannelFormatError(message)


def catalog(name: str, **params) -> Channel:
    """Construct a named channel.

    Known names and parameters:

    - ``identity(d)``: single Kraus operator I_d.
    - ``depolarizing(d, p)``: rho -> (1-p) rho + p I/d;  Kraus are
      sqrt(1-p+p/d^2) I and sqrt(p)/d W for the d^2-1 nontrivial Weyl
      unitaries W;  0 <= p <= 1.
    - ``completely_depolarizing(d, d_out)``: rho -> I/d_out; Kraus
      |i><j| / sqrt(d_out).
    - ``dephasing(p)``: qubit rho -> (1-p/2) rho + (p/2) Z rho Z
      (off-diagonals damped by 1-p); 0 <= p <= 1.
    - ``amplitude_damping(gamma)``: qubit decay toward |0>; Kraus
      [[1,0],[0,sqrt(1-gamma)]] and [[0,sqrt(gamma)],[0,0]].
    - ``erasure(d, p)``: rho -> (1-p) rho (+) p |e><e| with a flag state
      appended (dim_out = d+1).
    - ``transpose_depolarizing(d, p)``: rho -> (1-p) rho^T + p I/d, complete
      positivity requires p >= d/(d+1); Kraus built from the Choi spectrum.
    """
    def need(key, cast=float):
        _require(key in params, f"catalog {name!r} requires parameter {key!r}")
        try:
            return cast(params[key])
        except (TypeError, ValueError) as exc:
            raise ChannelFormatError(f"parameter {key!r} of {name!r}: {exc}") from None

    known = {k for k in params}
    if name == "identity":
        d = need("d", int)
        _require(d >= 1, "identity: d must be >= 1")
        _require(known <= {"d"}, f"identity: unknown parameters {known - {'d'}}")
        return Channel([np.eye(d, dtype=complex)], name=f"identity({d})")

    if name == "depolarizing":
        d, p = need("d", int), need("p")
        _require(d >= 2, "depolarizing: d must be >= 2")
        _require(0.0 <= p <= 1.0, f"depolarizing: p={p} outside [0, 1]")
        _require(known <= {"d", "p"}, "depolarizing: unknown parameters")
        ops = _weyl_ops(d)
        kraus = [np.sqrt(1.0 - p + p / d**2) * ops[0]]
        kraus += [(np.sqrt(p) / d) * w for w in ops[1:]]
        if p == 0.0:
            kraus = kraus[:1]
        return Channel(kraus, name=f"depolarizing({d}, p={p})")

    if name == "completely_depolarizing":
        d = need("d", int)
        d_out = int(params.get("d_out", d))
        _require(d >= 1 and d_out >= 1, "completely_depolarizing: dims must be >= 1")
        _require(known <= {"d", "d_out"}, "completely_depolarizing: unknown parameters")
        kraus = []
        for i in range(d_out):
            for j in range(d):
                k = np.zeros((d_out, d), dtype=complex)
                k[i, j] = 1.0 / np.sqrt(d_out)
                kraus.append(k)
        return Channel(kraus, name=f"completely_depolarizing({d}->{d_out})")

    if name == "dephasing":
        p = need("p")
        _require(0.0 <= p <= 1.0, f"dephasing: p={p} outside [0, 1]")
        _require(known <= {"p"}, "dephasing: unknown parameters")
        z = np.diag([1.0 + 0j, -1.0])
        kraus = [np.sqrt(1.0 - p / 2.0) * np.eye(2, dtype=complex)]
        if p > 0.0:
            kraus.append(np.sqrt(p / 2.0) * z)
        return Channel(kraus, name=f"dephasing(p={p})")

    if name == "amplitude_damping":
        gamma = need("gamma")
        _require(0.0 <= gamma <= 1.0, f"amplitude_damping: gamma={gamma} outside [0, 1]")
        _require(known <= {"gamma"}, "amplitude_damping: unknown parameters")
        k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - gamma)]], dtype=complex)
        k1 = np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]], dtype=complex)
        kraus = [k0, k1] if gamma > 0.0 else [k0]
        return Channel(kraus, name=f"amplitude_damping(gamma={gamma})")

    if name == "erasure":
        d, p = need("d", int), need("p")
        _require(d >= 1, "erasure: d must be >= 1")
        _require(0.0 <= p <= 1.0, f"erasure: p={p} outside [0, 1]")
        _require(known <= {"d", "p"}, "erasure: unknown parameters")
        keep = np.zeros((d + 1, d), dtype=complex)
        keep[:d, :] = np.sqrt(1.0 - p) * np.eye(d)
        kraus = [keep]
        for j in range(d):
            k = np.zeros((d + 1, d), dtype=complex)
            k[d, j] = np.sqrt(p)
            kraus.append(k)
        if p == 0.0:
            kraus = kraus[:1]
        return Channel(kraus, name=f"erasure({d}, p={p})")

    if name == "transpose_depolarizing":
        d, p = need("d", int), need("p")
        _require(d >= 2, "transpose_depolarizing: d must be >= 2")
        p_min = d / (d + 1.0)
        _require(p_min - 1e-12 <= p <= 1.0,
                 f"transpose_depolarizing: p={p} outside [{p_min:.6f}, 1] (not completely positive)")
        _require(known <= {"d", "p"}, "transpose_depolarizing: unknown parameters")
        swap = np.zeros((d * d, d * d), dtype=complex)
        for i in range(d):
            for j in range(d):
                swap[i * d + j, j * d + i] = 1.0
        choi = (1.0 - p) * swap + (p / d) * np.eye(d * d, dtype=complex)
        evals, evecs = eig_hermitian(choi)
        kraus = []
        for lam, vec in zip(evals, evecs.T):
            if lam <= 1e-12:
                continue
            kraus.append(np.sqrt(lam) * vec.reshape(d, d).T)
        return Channel(kraus, name=f"transpose_depolarizing({d}, p={p})")

    raise ChannelFormatError(f"unknown catalog channel {name!r}")


# -- JSON channel files -------------------------------------------------------

def _matrix_from_json(rows, where: str) -> np.ndarray:
    try:
        arr = np.array(rows, dtype=float)
    except (TypeError, ValueError):
        raise ChannelFormatError(f"{where}: entries must be [re, im] pairs") from None
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ChannelFormatError(f"{where}: expected rows of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def _matrix_to_json(mat: np.ndarray):
    m = np.asarray(mat, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def channel_from_jsonable(obj, where: str = "channel") -> Channel:
    """Build a channel from a parsed JSON document.

    Accepts either explicit Kraus form ``{"dim_in", "dim_out", "kraus"}`` or a
    catalog reference ``{"catalog": name, "params": {...}}``.  Raises
    ChannelFormatError with a field path on any defect.
    """
    if not isinstance(obj, dict):
        raise ChannelFormatError(f"{where}: expected a JSON object, got {type(obj).__name__}")
    if "catalog" in obj:
        params = obj.get("params", {})
        if not isinstance(params, dict):
            raise ChannelFormatError(f"{where}.params: expected an object")
        return catalog(str(obj["catalog"]), **params)
    for key in ("dim_in", "dim_out", "kraus"):
        if key not in obj:
            raise ChannelFormatError(f"{where}.{key}: missing required field")
    try:
        d_in, d_out = int(obj["dim_in"]), int(obj["dim_out"])
    except (TypeError, ValueError):
        raise ChannelFormatError(f"{where}.dim_in/dim_out: must be integers") from None
    if not isinstance(obj["kraus"], list) or not obj["kraus"]:
        raise ChannelFormatError(f"{where}.kraus: expected a nonempty list of operators")
    kraus = []
    for idx, rows in enumerate(obj["kraus"]):
        mat = _matrix_from_json(rows, f"{where}.kraus[{idx}]")
        if mat.shape != (d_out, d_in):
            raise ChannelFormatError(
                f"{where}.kraus[{idx}]: shape {mat.shape} != (dim_out, dim_in) = ({d_out}, {d_in})"
            )
        kraus.append(mat)
    try:
        return Channel(kraus)
    except ValueError as exc:
        raise ChannelFormatError(f"{where}.kraus: {exc}") from None


def channel_to_jsonable(ch: Channel) -> dict:
    return {
        "dim_in": ch.dim_in,
        "dim_out": ch.dim_out,
        "kraus": [_matrix_to_json(k) for k in ch.kraus],
    }


def load_channel(path: str) -> Channel:
    """Load and validate a channel file (JSON, UTF-8)."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            obj = json.load(handle)
    except OSError as exc:
        raise ChannelFormatError(f"{path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ChannelFormatError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
    return channel_from_jsonable(obj, where=path)


def save_channel(ch: Channel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(channel_to_jsonable(ch), handle, sort_keys=True, indent=2)
        handle.write("\n")
