"""Measurement devices, composite apparatus/particle models and readouts.

A device is a family of channels alpha with nonnegative weights rho[alpha, k]
over all D basis states, normalized so every column sums to one (each basis
state distributes its probability over the channels).

The composite model splits the proxy space into an apparatus block
(amplitudes c, basis states 1..N) and a particle block (amplitudes d, basis
states N+1..D), with unperturbed energies E and an interaction V treated as
the perturbation generating the readout dynamics.

The interacting readout per channel is

    P_a(t) = sum_i |c_i|^2 rho[a,i] |W_ii|^2
           + 2 Re sum_{i,j} c_i conj(d_j) gamma_ij(t) rho[a,i] |W_ij|^2
           + sum_j |d_j|^2 rho[a,j] |W_jj|^2

with W = exp(i V t / hbar) and gamma_ij(t) = exp(i (E_i - E_j) t / hbar).
The two cross-term families are exact complex conjugates of each other, so
every readout probability is real; the ``cutoff`` argument truncates all
particle sums to basis states <= cutoff (a coarse device; cutoff = D is the
perfect device).  The free readout keeps only the diagonal terms: apparatus
and particle never brought in contact.

Measurement quality is the Kolmogorov-Smirnov-style statistic
Q_a = max_t |P_a(t) - P'_a(t)| between interacting and free readouts.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from . import kernels
from .hilbert import (
    HermitianOperator,
    HilbertError,
    SpectralDecomposition,
    TimeGrid,
    spectral_decompose,
)

DEVICE_NORMALIZATION_ATOL = 1e-9
READOUT_REALITY_ATOL = 1e-12


class DeviceNormalizationError(ValueError):
    """Device weights violate positivity or column normalization."""


@dataclass(frozen=True)
class MeasurementDevice:
    """Channel weights rho[alpha, k] >= 0 with unit column sums."""

    weights: np.ndarray  # (channels, dim)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.ndim != 2 or w.shape[0] < 1:
            raise DeviceNormalizationError(f"weights must be (channels, dim), got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise DeviceNormalizationError("weights contain non-finite entries")
        if np.any(w < 0):
            k = np.argwhere(w < 0)[0]
            raise DeviceNormalizationError(
                f"negative weight {w[tuple(k)]:.3e} at channel {k[0]}, state {k[1]}"
            )
        if np.any(w > 1 + DEVICE_NORMALIZATION_ATOL):
            raise DeviceNormalizationError("weights must lie in [0, 1]")
        colsum = w.sum(axis=0)
        worst = np.max(np.abs(colsum - 1.0))
        if worst > DEVICE_NORMALIZATION_ATOL:
            k = int(np.argmax(np.abs(colsum - 1.0)))
            raise DeviceNormalizationError(
                f"column {k} sums to {colsum[k]!r}, off unity by {worst:.3e} "
                "(weights are never renormalized silently)"
            )
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def channels(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def build_device(weights) -> MeasurementDevice:
    """Validated, immutable measurement device from raw channel weights."""
    return MeasurementDevice(np.asarray(weights, dtype=np.float64))


@dataclass(frozen=True)
class CompositeModel:
    """Apparatus + particle state, unperturbed energies and interaction."""

    apparatus: np.ndarray   # c, (N,) complex
    particle: np.ndarray    # d, (D - N,) complex
    energies: np.ndarray    # E, (D,) real
    interaction: HermitianOperator  # V, (D, D)

    def __post_init__(self):
        c = np.array(self.apparatus, dtype=np.complex128, copy=True).ravel()
        d = np.array(self.particle, dtype=np.complex128, copy=True).ravel()
        e = np.array(self.energies, dtype=np.float64, copy=True).ravel()
        if c.size < 1 or d.size < 1:
            raise HilbertError("apparatus and particle blocks must both be non-empty")
        dim = c.size + d.size
        if e.size != dim:
            raise HilbertError(f"energies size {e.size} does not match D = {dim}")
        if self.interaction.dim != dim:
            raise HilbertError(
                f"interaction dimension {self.interaction.dim} does not match D = {dim}"
            )
        total = np.sum(np.abs(c) ** 2) + np.sum(np.abs(d) ** 2)
        if abs(total - 1.0) > 1e-12:
            raise HilbertError(f"|c|^2 + |d|^2 = {total!r} is off unity beyond 1e-12")
        for arr in (c, d, e):
            arr.setflags(write=False)
        object.__setattr__(self, "apparatus", c)
        object.__setattr__(self, "particle", d)
        object.__setattr__(self, "energies", e)

    @property
    def dim(self) -> int:
        return self.energies.size

    @property
    def apparatus_size(self) -> int:
        return self.apparatus.size

    @cached_property
    def interaction_eig(self) -> SpectralDecomposition:
        return spectral_decompose(self.interaction)


@dataclass(frozen=True)
class ReadoutCurve:
    """Per-channel probabilities over a time grid."""

    grid: TimeGrid
    probabilities: np.ndarray  # (channels, T)
    kind: str                  # interacting | free | exact-oracle
    cutoff: int

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=np.float64, copy=True)
        if not np.all(np.isfinite(p)):
            raise HilbertError("readout probabilities contain non-finite values")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)


def gamma_phase(e_i: float, e_j: float, t: float, hbar: float = 1.0) -> complex:
    """Unimodular relative phase exp(i (E_i - E_j) t / hbar)."""
    return complex(np.exp(1j * (e_i - e_j) * t / hbar))


def _check_cutoff(model: CompositeModel, cutoff: Optional[int]) -> int:
    n, dim = model.apparatus_size, model.dim
    if cutoff is None:
        return dim
    if not (n <= cutoff <= dim):
        raise HilbertError(f"cutoff must lie in [{n}, {dim}], got {cutoff}")
    return int(cutoff)


def _diagonal_part(model, device, grid, cutoff, hbar):
    dec = model.interaction_eig
    n = model.apparatus_size
    dd = kernels.diag_abs2(dec.eigenvectors, dec.eigenvalues, grid.points / hbar)  # (T, D)
    rho = device.weights
    w_app = np.abs(model.apparatus) ** 2
    w_par = np.abs(model.particle[: cutoff - n]) ** 2
    out = (rho[:, :n] * w_app) @ dd[:, :n].T
    out += (rho[:, n:cutoff] * w_par) @ dd[:, n:cutoff].T
    return out  # (channels, T)


def cross_readout_part(
    model: CompositeModel,
    device: MeasurementDevice,
    grid: TimeGrid,
    cutoff: Optional[int] = None,
    hbar: float = 1.0,
    j_start: Optional[int] = None,
) -> np.ndarray:
    """Signed cross-term contribution per channel, shape (channels, T).

    Sums 2 Re[M_ij] |W_ij|^2 over the particle window [j_start, cutoff)
    (absolute indices, defaults to the full window starting at N).
    """
    cutoff = _check_cutoff(model, cutoff)
    n = model.apparatus_size
    lo = n if j_start is None else int(j_start)
    dec = model.interaction_eig
    rows = kernels.cross_sums(
        dec.eigenvectors, dec.eigenvalues, grid.points / hbar,
        model.apparatus, model.particle, model.energies, lo, cutoff,
    )  # (T, N); times carry the 1/hbar factor for both W and gamma
    return 2.0 * (device.weights[:, :n] @ rows.T)


def interacting_readout(
    model: CompositeModel,
    device: MeasurementDevice,
    grid: TimeGrid,
    cutoff: Optional[int] = None,
    hbar: float = 1.0,
) -> ReadoutCurve:
    """Readout with apparatus and particle in contact (cross terms kept)."""
    if device.dim != model.dim:
        raise HilbertError(f"device dim {device.dim} does not match model D = {model.dim}")
    cutoff = _check_cutoff(model, cutoff)
    probs = _diagonal_part(model, device, grid, cutoff, hbar)
    probs += cross_readout_part(model, device, grid, cutoff, hbar)
    return ReadoutCurve(grid=grid, probabilities=probs, kind="interacting", cutoff=cutoff)


def free_readout(
    model: CompositeModel,
    device: MeasurementDevice,
    grid: TimeGrid,
    cutoff: Optional[int] = None,
    hbar: float = 1.0,
) -> ReadoutCurve:
    """Readout with the blocks never brought in contact (diagonal terms only)."""
    if device.dim != model.dim:
        raise HilbertError(f"device dim {device.dim} does not match model D = {model.dim}")
    cutoff = _check_cutoff(model, cutoff)
    probs = _diagonal_part(model, device, grid, cutoff, hbar)
    return ReadoutCurve(grid=grid, probabilities=probs, kind="free", cutoff=cutoff)


@dataclass(frozen=True)
class ExactReadout:
    """Exact composite-evolution readout and its gap to the factorized one."""

    curve: ReadoutCurve
    max_deviation: float
    deviation: np.ndarray  # (channels, T)


def exact_oracle_readout(
    model: CompositeModel,
    device: MeasurementDevice,
    grid: TimeGrid,
    hbar: float = 1.0,
) -> ExactReadout:
    """Readout from exact evolution under diag(E) + V, with deviation report.

    Quantifies the factorized-evolution approximation behind the interacting
    readout: the state evolves under the full exp(i (H0 + V) t / hbar) and is
    projected onto the device weights; the report carries the per-point and
    max-over-grid deviation from the perfect interacting readout.
    """
    if device.dim != model.dim:
        raise HilbertError(f"device dim {device.dim} does not match model D = {model.dim}")
    h_full = HermitianOperator(
        np.diag(model.energies).astype(np.complex128) + model.interaction.matrix,
        role="hamiltonian",
    )
    dec = spectral_decompose(h_full)
    psi0 = np.concatenate([model.apparatus, model.particle])
    coeff = dec.eigenvectors.conj().T @ psi0
    phases = np.exp(1j * np.outer(dec.eigenvalues, grid.points) / hbar)  # (D, T)
    states = dec.eigenvectors @ (phases * coeff[:, None])  # (D, T)
    probs = device.weights @ (np.abs(states) ** 2)
    curve = ReadoutCurve(grid=grid, probabilities=probs, kind="exact-oracle", cutoff=model.dim)
    reference = interacting_readout(model, device, grid, hbar=hbar)
    dev = np.abs(probs - reference.probabilities)
    return ExactReadout(curve=curve, max_deviation=float(dev.max()), deviation=dev)


@dataclass(frozen=True)
class QualityResult:
    """K-S style quality per channel, its achieving times, and the max."""

    per_channel: np.ndarray   # (channels,)
    achieved_at: np.ndarray   # (channels,) times of the per-channel max
    aggregate: float


def quality(interacting: ReadoutCurve, free: ReadoutCurve) -> QualityResult:
    """Max-over-time gap between interacting and free readouts, per channel."""
    if interacting.probabilities.shape != free.probabilities.shape:
        raise HilbertError("readout curves have mismatched shapes")
    if not np.array_equal(interacting.grid.points, free.grid.points):
        raise HilbertError("readout curves use different time grids")
    diff = np.abs(interacting.probabilities - free.probabilities)
    idx = np.argmax(diff, axis=1)
    per_channel = diff[np.arange(diff.shape[0]), idx]
    return QualityResult(
        per_channel=per_channel,
        achieved_at=interacting.grid.points[idx],
        aggregate=float(per_channel.max()),
    )
