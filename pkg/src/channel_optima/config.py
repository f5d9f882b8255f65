"""Global numerical conventions: logarithm base, support cutoff, seeding."""

from __future__ import annotations

import contextlib
import hashlib
import math

import numpy as np

#: Eigenvalues at or below this threshold count as zero in every support
#: decision (matrix logarithms, relative-entropy domain tests, ranks).
EPS_SUPPORT = 1e-12

_BASES = {"2": 2.0, "e": math.e}

_log_base_label = "2"


def set_log_base(label: str) -> None:
    """Select the entropy unit: ``"2"`` for bits (default), ``"e"`` for nats."""
    global _log_base_label
    key = str(label)
    if key not in _BASES:
        raise ValueError(f"unsupported log base {label!r}: choose '2' or 'e'")
    _log_base_label = key


def log_base_label() -> str:
    return _log_base_label


def log_base() -> float:
    return _BASES[_log_base_label]


def ln_of_base() -> float:
    """ln of the configured base; entropies are natural-log values over this."""
    return math.log(_BASES[_log_base_label])


@contextlib.contextmanager
def using_log_base(label: str):
    """Temporarily switch the logarithm base (restores the previous one)."""
    previous = _log_base_label
    set_log_base(label)
    try:
        yield
    finally:
        set_log_base(previous)


def derive_rng(seed: int, *labels) -> np.random.Generator:
    """Deterministic generator keyed by (seed, labels).

    Sub-seeds are derived by hashing, so each (task, index) pair gets an
    independent stream that does not depend on how many other streams exist.
    """
    material = repr((int(seed),) + tuple(str(x) for x in labels)).encode()
    digest = hashlib.sha256(material).digest()
    return np.random.default_rng(int.from_bytes(digest[:16], "big"))


def random_ket(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Haar-uniform unit vector in C^dim (Gaussian components, normalized)."""
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)
