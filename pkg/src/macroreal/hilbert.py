"""Finite-dimensional Hilbert space helpers.

States live on a truncated Fock space (or any finite dimension), operators are
plain complex ndarrays. Everything downstream builds on the validators and
constructors collected here.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy import special

DEFAULT_ATOL = 1e-10


def as_operator(m) -> np.ndarray:
    """Coerce to a square complex matrix, rejecting non-finite entries."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError("matrix contains non-finite entries")
    return a


def is_hermitian(m, atol: float = DEFAULT_ATOL) -> bool:
    a = as_operator(m)
    return bool(np.max(np.abs(a - a.conj().T)) <= atol)


def is_unitary(m, atol: float = DEFAULT_ATOL) -> bool:
    a = as_operator(m)
    d = a.shape[0]
    return bool(np.max(np.abs(a.conj().T @ a - np.eye(d))) <= atol)


def is_positive_semidefinite(m, atol: float = DEFAULT_ATOL) -> bool:
    a = as_operator(m)
    if not is_hermitian(a, atol):
        return False
    w = np.linalg.eigvalsh(a)
    return bool(w.min() >= -atol)


@dataclasses.dataclass(frozen=True)
class StateVector:
    """Normalized pure state. Amplitudes are validated, not renormalized."""

    amplitudes: np.ndarray
    atol: float = 1e-8

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.ndim != 1 or a.size == 0:
            raise ValueError("amplitudes must be a non-empty 1-d array")
        if not np.all(np.isfinite(a.view(float))):
            raise ValueError("amplitudes contain non-finite entries")
        n = np.linalg.norm(a)
        if abs(n - 1.0) > self.atol:
            raise ValueError(f"state norm {n!r} is not 1 within {self.atol}")
        object.__setattr__(self, "amplitudes", a)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> "DensityState":
        return DensityState(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclasses.dataclass(frozen=True)
class DensityState:
    """Density matrix with Hermiticity, positivity and unit-trace checks."""

    matrix: np.ndarray
    atol: float = DEFAULT_ATOL

    def __post_init__(self):
        m = as_operator(self.matrix)
        if np.max(np.abs(m - m.conj().T)) > self.atol:
            raise ValueError("density matrix is not Hermitian within tolerance")
        w = np.linalg.eigvalsh((m + m.conj().T) / 2)
        if w.min() < -self.atol:
            raise ValueError(f"density matrix has negative eigenvalue {w.min():g}")
        tr = np.trace(m).real
        if abs(tr - 1.0) > max(self.atol, 1e-9):
            raise ValueError(f"density matrix trace {tr!r} is not 1")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)


def basis_state(k: int, dim: int) -> StateVector:
    if not 0 <= k < dim:
        raise ValueError(f"basis index {k} out of range for dim {dim}")
    a = np.zeros(dim, dtype=complex)
    a[k] = 1.0
    return StateVector(a)


def fock_projector(k: int, dim: int) -> np.ndarray:
    """Projector |k><k| on a dim-dimensional Fock cutoff."""
    p = np.zeros((dim, dim), dtype=complex)
    if not 0 <= k < dim:
        raise ValueError(f"Fock index {k} out of range for dim {dim}")
    p[k, k] = 1.0
    return p


def default_fock_dim(gamma) -> int:
    """Truncation dimension that keeps the Poisson tail of |gamma> below 1e-12."""
    g = abs(complex(gamma))
    return int(math.ceil(g * g + 8.0 * g + 20.0))


def coherent_truncation_loss(gamma, dim: int) -> float:
    """Weight of |gamma> beyond Fock level dim-1 (upper regularized gamma)."""
    g2 = abs(complex(gamma)) ** 2
    # 1 - CDF of Poisson(g2) at dim-1, evaluated stably.
    return float(special.gammainc(dim, g2))


def coherent_state(gamma, dim: int | None = None, *, loss_ceiling: float = 1e-10) -> StateVector:
    """Truncated coherent state |gamma>, renormalized on the cutoff space.

    Raises if the truncation loss exceeds loss_ceiling; pass a larger ceiling
    to allow lossy truncations on purpose.
    """
    g = complex(gamma)
    if dim is None:
        dim = default_fock_dim(g)
    loss = coherent_truncation_loss(g, dim)
    if loss > loss_ceiling:
        raise ValueError(
            f"truncation loss {loss:.3g} at dim {dim} exceeds ceiling {loss_ceiling:.3g}"
        )
    amps = coherent_amplitudes(g, dim)
    amps = amps / np.linalg.norm(amps)
    return StateVector(amps)


def coherent_amplitudes(gamma, dim: int) -> np.ndarray:
    """Raw truncated amplitudes e^{-|g|^2/2} g^k / sqrt(k!), not renormalized.

    Computed in the log domain so large |gamma| and large dim do not overflow.
    """
    g = complex(gamma)
    k = np.arange(dim)
    if g == 0:
        amps = np.zeros(dim, dtype=complex)
        amps[0] = 1.0
        return amps
    r = abs(g)
    phase = g / r
    logmod = -0.5 * r * r + k * math.log(r) - 0.5 * special.gammaln(k + 1.0)
    return np.exp(logmod) * phase**k


def coherent_overlap(alpha, beta) -> complex:
    """Exact <alpha|beta> for ideal (untruncated) coherent states."""
    a, b = complex(alpha), complex(beta)
    return complex(np.exp(-0.5 * (abs(a) ** 2 + abs(b) ** 2) + np.conj(a) * b))


def quadrature_operators(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Position and momentum matrices X, P on the Fock cutoff, [X, P] ~ i.

    The commutator only equals i on the sub-block away from the cutoff edge.
    """
    n = np.arange(1, dim)
    a = np.zeros((dim, dim), dtype=complex)
    a[n - 1, n] = np.sqrt(n)
    x = (a + a.conj().T) / math.sqrt(2.0)
    p = (a - a.conj().T) / (1j * math.sqrt(2.0))
    return x, p


def number_operator(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim).astype(complex))


def unitary_from_hamiltonian(h, t: float, *, atol: float = DEFAULT_ATOL) -> np.ndarray:
    """exp(-i H t) through an eigendecomposition of the (validated) Hermitian H."""
    hm = as_operator(h)
    if not is_hermitian(hm, atol):
        raise ValueError("Hamiltonian is not Hermitian within tolerance")
    w, v = np.linalg.eigh(hm)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def operator_norm(m) -> float:
    """Spectral norm (largest singular value)."""
    a = np.asarray(m, dtype=complex)
    return float(np.linalg.norm(a, 2))
