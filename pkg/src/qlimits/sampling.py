"""Seeded random builders: GUE matrices, states, devices, composite models.

Sub-seed scheme: every builder takes ``seed``, either a plain integer or a
tuple of integers.  Tuples feed numpy's SeedSequence entropy directly, so
``(master, stream, index)`` defines a documented counter scheme: independent
streams per component, reproducible and scheduling-independent.  The stream
constants below are the reserved component ids.
"""
from __future__ import annotations

from typing import Sequence, Union

import numpy as np

from .hilbert import HermitianOperator, HilbertError, StateVector
from .measurement import CompositeModel, MeasurementDevice

SeedLike = Union[int, Sequence[int]]

# reserved stream ids for (master, stream, index...) sub-seeding
STREAM_HAMILTONIAN = 1
STREAM_INTERACTION = 2
STREAM_STATE = 3
STREAM_DEVICE = 4
STREAM_MODEL = 5
STREAM_ECHO_MEMBER = 6
STREAM_OBSERVABLE = 7

TAIL_PROFILES = ("inverse-square", "uniform", "aligned")


def rng_from(seed: SeedLike) -> np.random.Generator:
    """Generator from an integer seed or an integer tuple (sub-seed path)."""
    entropy = [int(seed)] if np.isscalar(seed) else [int(s) for s in seed]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def sample_gue(dim: int, scale: float, seed: SeedLike, role: str = "hamiltonian") -> HermitianOperator:
    """GUE-distributed Hermitian matrix: H = scale * (A + A^dagger) / 2.

    A has independent standard complex-Gaussian entries, so the diagonal is
    real Gaussian and off-diagonal moduli have unit mean square (before the
    scale factor).  Deterministic per seed.
    """
    if scale < 0:
        raise HilbertError(f"scale must be nonnegative, got {scale}")
    g = rng_from(seed)
    a = g.standard_normal((dim, dim)) + 1j * g.standard_normal((dim, dim))
    return HermitianOperator(scale * (a + a.conj().T) / 2, role=role)


def sample_state(dim: int, seed: SeedLike) -> StateVector:
    """Haar-like random normalized state (complex Gaussian, normalized)."""
    g = rng_from(seed)
    v = g.standard_normal(dim) + 1j * g.standard_normal(dim)
    return StateVector(v / np.linalg.norm(v), normalized=True)


def sample_device(channels: int, dim: int, seed: SeedLike) -> MeasurementDevice:
    """Random device: positive weights, columns normalized to unit sum."""
    g = rng_from(seed)
    w = g.random((channels, dim)) + 1e-3  # keep channels strictly coupled
    return MeasurementDevice(w / w.sum(axis=0, keepdims=True))


def tail_amplitudes(count: int, first_index: int, profile: str, g: np.random.Generator) -> np.ndarray:
    """Unnormalized particle amplitudes d_j for j = first_index..(1-indexed).

    inverse-square: |d_j| ~ j^-2 with independent random phases;
    uniform: equal moduli, random phases; aligned: equal moduli, zero phases
    (the worst case for tail-sum decay).
    """
    j = np.arange(first_index, first_index + count, dtype=float)
    if profile == "inverse-square":
        return j**-2.0 * np.exp(2j * np.pi * g.random(count))
    if profile == "uniform":
        return np.ones(count) * np.exp(2j * np.pi * g.random(count))
    if profile == "aligned":
        return np.ones(count, dtype=np.complex128)
    raise HilbertError(f"unknown tail profile {profile!r}; expected one of {TAIL_PROFILES}")


def sample_composite_model(
    dim: int,
    apparatus_size: int,
    seed: SeedLike,
    v_scale: float = 1.0,
    tail: str = "inverse-square",
    energy_scale: float = 1.0,
) -> CompositeModel:
    """Composite model with random amplitudes, energies and a GUE interaction."""
    if not 1 <= apparatus_size < dim:
        raise HilbertError(f"apparatus size must satisfy 1 <= N < D, got N={apparatus_size}, D={dim}")
    base = [int(seed)] if np.isscalar(seed) else [int(s) for s in seed]
    g = rng_from(base + [STREAM_MODEL])
    c = g.standard_normal(apparatus_size) + 1j * g.standard_normal(apparatus_size)
    d = tail_amplitudes(dim - apparatus_size, apparatus_size + 1, tail, g)
    z = np.concatenate([c, d])
    z = z / np.linalg.norm(z)
    energies = energy_scale * g.standard_normal(dim)
    v = sample_gue(dim, v_scale, base + [STREAM_INTERACTION], role="interaction")
    return CompositeModel(
        apparatus=z[:apparatus_size], particle=z[apparatus_size:],
        energies=energies, interaction=v,
    )
