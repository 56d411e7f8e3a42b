"""Dense Hilbert-space primitives on a finite proxy space.

States, Hermitian operators, spectral decompositions, unitary evolution and
Heisenberg-picture observables, all as dense complex matrices.

Conventions
-----------
* hbar = 1 internally; times are in units of 1/energy.
* The evolution operator is U(t) = exp(+i H t); pass ``sign=-1`` for the
  textbook exp(-i H t).
* Matrix exponentials are always evaluated through the eigendecomposition
  of the (Hermitian) generator, never through a power series, so unitarity
  holds to machine precision.

All values are immutable after construction and safe to share between
threads; every operation is a pure function of its inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

HERMITIAN_ATOL = 1e-12
DECOMPOSITION_RTOL = 1e-10


class HilbertError(ValueError):
    """Invalid input to a linear-algebra operation."""


class HermiticityError(HilbertError):
    """Matrix deviates from its adjoint beyond tolerance."""


class EigensolverError(RuntimeError):
    """Eigendecomposition failed; message carries diagnostics."""


def _as_complex_matrix(m) -> np.ndarray:
    a = np.array(m, dtype=np.complex128, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise HilbertError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(np.float64))):
        raise HilbertError("matrix has non-finite entries")
    return a


@dataclass(frozen=True)
class HermitianOperator:
    """Dense Hermitian matrix with a role tag.

    The input is checked against its adjoint entrywise (tolerance ``atol``)
    and then symmetrized to (A + A^dagger)/2; genuinely non-Hermitian data
    is rejected rather than repaired.
    """

    matrix: np.ndarray
    role: str = "observable"  # hamiltonian | observable | interaction
    atol: float = HERMITIAN_ATOL

    def __post_init__(self):
        a = _as_complex_matrix(self.matrix)
        deviation = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
        if deviation > self.atol:
            raise HermiticityError(
                f"max |A - A^dagger| = {deviation:.3e} exceeds {self.atol:.1e}"
            )
        a = (a + a.conj().T) / 2
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class StateVector:
    """Complex amplitude vector with nonzero norm."""

    amplitudes: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=np.complex128, copy=True).ravel()
        if a.size == 0:
            raise HilbertError("empty state vector")
        if not np.all(np.isfinite(a.view(np.float64))):
            raise HilbertError("state vector has non-finite entries")
        n = float(np.linalg.norm(a))
        if n == 0.0:
            raise HilbertError("state vector has zero norm")
        if self.normalized and abs(n - 1.0) > 1e-12:
            raise HilbertError(f"|norm - 1| = {abs(n - 1.0):.3e} exceeds 1e-12")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "StateVector":
        return StateVector(self.amplitudes / self.norm, normalized=True)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (ascending) and unitary eigenvector matrix (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        w = np.array(self.eigenvalues, dtype=np.float64, copy=True).ravel()
        s = np.array(self.eigenvectors, dtype=np.complex128, copy=True)
        if s.shape != (w.size, w.size):
            raise HilbertError("eigenvector matrix shape does not match eigenvalues")
        if np.any(np.diff(w) < 0):
            raise HilbertError("eigenvalues must be ascending")
        w.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "eigenvalues", w)
        object.__setattr__(self, "eigenvectors", s)

    @property
    def dim(self) -> int:
        return self.eigenvalues.size


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time samples on [0, t_max], endpoints included."""

    t_max: float
    steps: int = 101
    points: np.ndarray = field(init=False)

    def __post_init__(self):
        if not (np.isfinite(self.t_max) and self.t_max > 0):
            raise HilbertError(f"t_max must be positive and finite, got {self.t_max}")
        if self.steps < 2:
            raise HilbertError(f"steps must be >= 2, got {self.steps}")
        pts = np.linspace(0.0, float(self.t_max), int(self.steps))
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def refine(self, factor: int) -> "TimeGrid":
        """Grid with the same span and (steps - 1) * factor + 1 points."""
        return TimeGrid(self.t_max, (self.steps - 1) * factor + 1)


def spectral_decompose(A: Union[HermitianOperator, np.ndarray]) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian operator, validated.

    Checks reconstruction ||A - S L S^dagger|| <= 1e-10 ||A|| and
    orthonormality ||S^dagger S - I|| <= 1e-10 in the spectral norm.
    """
    if not isinstance(A, HermitianOperator):
        A = HermitianOperator(A)
    try:
        w, s = np.linalg.eigh(A.matrix)
    except np.linalg.LinAlgError as exc:
        scale = float(np.max(np.abs(A.matrix))) if A.matrix.size else 0.0
        raise EigensolverError(
            f"eigh failed for dim={A.dim}, max|entry|={scale:.3e}: {exc}"
        ) from exc
    dec = SpectralDecomposition(w, s)
    ortho = np.linalg.norm(s.conj().T @ s - np.eye(A.dim), 2)
    if ortho > DECOMPOSITION_RTOL:
        raise EigensolverError(f"eigenvector orthonormality defect {ortho:.3e}")
    scale = max(np.linalg.norm(A.matrix, 2), 1e-300)
    recon = np.linalg.norm((s * w) @ s.conj().T - A.matrix, 2)
    if recon > DECOMPOSITION_RTOL * scale:
        raise EigensolverError(
            f"reconstruction defect {recon:.3e} exceeds {DECOMPOSITION_RTOL:.1e} * ||A||"
        )
    return dec


def operator_norm(B: Union[np.ndarray, HermitianOperator]) -> float:
    """Spectral norm (largest singular value).

    For Hermitian input this equals max |eigenvalue|, the supremum of the
    modulus of the normalized quadratic form.
    """
    m = B.matrix if isinstance(B, HermitianOperator) else _as_complex_matrix(B)
    return float(np.linalg.norm(m, 2))


def evolve(H: HermitianOperator, t: float, sign: int = +1) -> np.ndarray:
    """Unitary U = exp(sign * i H t), via the eigendecomposition of H."""
    if sign not in (+1, -1):
        raise HilbertError(f"sign must be +1 or -1, got {sign}")
    if not np.isfinite(t):
        raise HilbertError(f"time must be finite, got {t}")
    dec = spectral_decompose(H)
    phases = np.exp(sign * 1j * dec.eigenvalues * t)
    return (dec.eigenvectors * phases) @ dec.eigenvectors.conj().T


def heisenberg_observable(
    A0: HermitianOperator, H: HermitianOperator, t: float
) -> HermitianOperator:
    """Heisenberg-picture observable A(t) = exp(-iHt) A0 exp(+iHt)."""
    if A0.dim != H.dim:
        raise HilbertError(f"dimension mismatch: A0 is {A0.dim}, H is {H.dim}")
    u = evolve(H, t)
    rotated = u.conj().T @ A0.matrix @ u
    return HermitianOperator(rotated, role=A0.role, atol=1e-10)


def expectation(
    psi: Union[StateVector, np.ndarray], A: Union[np.ndarray, HermitianOperator]
) -> complex:
    """Normalized expectation <psi|A|psi> / <psi|psi>."""
    v = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi, dtype=np.complex128)
    m = A.matrix if isinstance(A, HermitianOperator) else np.asarray(A, dtype=np.complex128)
    if m.shape[0] != v.size:
        raise HilbertError(f"dimension mismatch: state {v.size}, operator {m.shape[0]}")
    norm2 = np.vdot(v, v).real
    if norm2 == 0.0:
        raise HilbertError("state vector has zero norm")
    return complex(np.vdot(v, m @ v) / norm2)
