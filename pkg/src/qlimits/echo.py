"""Loschmidt-echo experiments: imperfect time reversal under an uncertain
Hamiltonian.

A single member evolves forward under a perturbed Hamiltonian and is
reversed under the nominal one,

    echo(t) = |<psi0| exp(-i H t) exp(+i (H + dH) t) |psi0>|^2,

so echo(0) = 1 and echo stays in [0, 1].  Ensembles draw dH = delta * G /
||G|| with G a seeded GUE sample per member, making ``delta`` the
spectral-norm size of the Hamiltonian uncertainty; averaging the members
realizes the irreversibility of the family's mean evolution.

Member m draws its own sub-seed (seed, STREAM_ECHO_MEMBER, m), so results
are independent of scheduling and worker count; averaging runs in member
order.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .hilbert import (
    HermitianOperator,
    HilbertError,
    StateVector,
    TimeGrid,
    operator_norm,
    spectral_decompose,
)
from .sampling import STREAM_ECHO_MEMBER, STREAM_HAMILTONIAN, SeedLike, sample_gue

ECHO_RANGE_ATOL = 1e-10


@dataclass(frozen=True)
class EnsembleSpec:
    """Dimension, size, perturbation scale and seeding of an echo ensemble."""

    dim: int
    size: int
    delta: float                 # spectral-norm perturbation scale (energy units)
    seed: int
    base: Optional[HermitianOperator] = None   # explicit nominal H, else GUE-sampled
    base_scale: float = 1.0
    reverse_convention: str = "perturbed-forward"  # or "nominal-forward"

    def __post_init__(self):
        if self.size < 1:
            raise HilbertError(f"ensemble size must be >= 1, got {self.size}")
        if self.delta < 0:
            raise HilbertError(f"perturbation scale must be >= 0, got {self.delta}")
        if self.reverse_convention not in ("perturbed-forward", "nominal-forward"):
            raise HilbertError(f"unknown reverse convention {self.reverse_convention!r}")
        if self.base is not None and self.base.dim != self.dim:
            raise HilbertError("explicit base Hamiltonian dimension mismatch")

    def nominal(self) -> HermitianOperator:
        if self.base is not None:
            return self.base
        return sample_gue(self.dim, self.base_scale, [self.seed, STREAM_HAMILTONIAN])


@dataclass(frozen=True)
class EchoCurve:
    """Echo fidelities over a grid: per-member curves and their statistics."""

    grid: TimeGrid
    members: np.ndarray     # (M, T)
    mean: np.ndarray        # (T,)
    std: np.ndarray         # (T,) population dispersion
    minimum: np.ndarray     # (T,)
    maximum: np.ndarray     # (T,)

    def __post_init__(self):
        m = np.asarray(self.members, dtype=np.float64)
        if np.any(m < -ECHO_RANGE_ATOL) or np.any(m > 1 + ECHO_RANGE_ATOL):
            raise HilbertError("echo fidelity escaped [0, 1] beyond tolerance")
        if np.any(np.abs(m[:, 0] - 1.0) > ECHO_RANGE_ATOL):
            raise HilbertError("echo(0) must equal 1")


def _echo_member(
    H: HermitianOperator,
    deltaH: HermitianOperator,
    psi0: StateVector,
    grid: TimeGrid,
    convention: str = "perturbed-forward",
) -> np.ndarray:
    nominal = spectral_decompose(H)
    perturbed = spectral_decompose(HermitianOperator(H.matrix + deltaH.matrix, role=H.role))
    v = psi0.amplitudes
    # forward under the perturbed generator, reversal under the nominal one;
    # the opposite convention conjugates the amplitude, leaving |.|^2 as is
    fwd, rev = (perturbed, nominal) if convention == "perturbed-forward" else (nominal, perturbed)
    fwd_coeff = fwd.eigenvectors.conj().T @ v
    rev_coeff = rev.eigenvectors.conj().T @ v
    out = np.empty(grid.points.size)
    for k, t in enumerate(grid.points):
        forward = fwd.eigenvectors @ (np.exp(1j * fwd.eigenvalues * t) * fwd_coeff)
        reversed_ = rev.eigenvectors @ (np.exp(1j * rev.eigenvalues * t) * rev_coeff)
        amp = np.vdot(reversed_, forward)
        out[k] = abs(amp) ** 2
    return out


def echo_experiment(
    H: HermitianOperator,
    deltaH: HermitianOperator,
    psi0: StateVector,
    grid: TimeGrid,
    convention: str = "perturbed-forward",
) -> EchoCurve:
    """Echo curve of a single ensemble member."""
    if not (H.dim == deltaH.dim == psi0.dim):
        raise HilbertError(
            f"dimension mismatch: H {H.dim}, deltaH {deltaH.dim}, psi {psi0.dim}"
        )
    if abs(psi0.norm - 1.0) > 1e-12:
        raise HilbertError("echo experiment requires a normalized initial state")
    members = _echo_member(H, deltaH, psi0, grid, convention)[None, :]
    return EchoCurve(
        grid=grid, members=members, mean=members[0],
        std=np.zeros_like(members[0]), minimum=members[0], maximum=members[0],
    )


def member_perturbation(spec: EnsembleSpec, member: int) -> HermitianOperator:
    """delta * G / ||G|| for the member's sub-seeded GUE sample G."""
    if spec.delta == 0.0:
        return HermitianOperator(np.zeros((spec.dim, spec.dim)), role="hamiltonian")
    g = sample_gue(spec.dim, 1.0, [spec.seed, STREAM_ECHO_MEMBER, member])
    return HermitianOperator(spec.delta * g.matrix / operator_norm(g), role="hamiltonian")


def ensemble_echo(
    spec: EnsembleSpec,
    psi0: StateVector,
    grid: TimeGrid,
    threads: int = 1,
) -> EchoCurve:
    """Mean echo over the sub-seeded ensemble, with dispersion.

    Members evaluate independently (optionally in a thread pool); assembly
    and averaging run in member order, so the curve is identical for any
    worker count.
    """
    H = spec.nominal()
    if psi0.dim != spec.dim:
        raise HilbertError(f"state dimension {psi0.dim} does not match ensemble dim {spec.dim}")

    def one(member: int) -> np.ndarray:
        return _echo_member(H, member_perturbation(spec, member), psi0, grid,
                            spec.reverse_convention)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            curves = list(pool.map(one, range(spec.size)))
    else:
        curves = [one(m) for m in range(spec.size)]
    members = np.stack(curves, axis=0)
    return EchoCurve(
        grid=grid, members=members, mean=members.mean(axis=0),
        std=members.std(axis=0), minimum=members.min(axis=0), maximum=members.max(axis=0),
    )
