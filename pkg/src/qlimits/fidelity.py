"""Perfect vs. coarse device quality, tail-sum decay, and time bounds.

A coarse device truncates the particle sums of the readout at basis state
N1 <= D.  Writing q(t) for the signed cross-term readout gap of the perfect
device and qt(t) for the coarse one, the module computes

    Q  = max_t |q(t)|,   Qt = max_t |qt(t)|,   F = Q - Qt,

together with the triangle bound |F| <= max_t |q(t) - qt(t)|.  F is reported
signed: for random models the coarse partial sum can exceed the full one, so
Q >= Qt is a checked claim, not an identity, and violations are flagged
rather than clipped.

The tail-sum measure over the mixing matrix M_ij = c_i conj(d_j) gamma_ij,

    eps(N1) = max_i max( |sum_{j>=N1} Re M_ij|, |sum_{j>=N1} Im M_ij| ),

is the operational smallness parameter (a stochasticity condition on the
tail).  Below the characteristic time

    t0 = (pi/2) hbar / max_{i<=N, j>=N1} |V_ij|

the per-channel gap admits the three-step bound chain evaluated here:

    sin form        2 rho_ai |sum_j Re[M_ij] <i|sin(V t/hbar)|j>|
    comparison form 4 rho_ai sum_j |Re M_ij| sin(2 |V_ij| t / hbar)
    linear form     4 rho_ai sum_j |Re M_ij| (|V_ij| t / hbar)

with sin form <= K * comparison and comparison <= 2 * linear (the second
link is exact termwise since 0 <= 2|V_ij|t/hbar <= pi below t0; the sums
carry termwise moduli, without which sign cancellations would falsify both
links).  The enclosing slope A with F(t) <= A t eps over admissible grid
times is fitted exactly, not by regression.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import kernels
from .hilbert import (
    HermitianOperator,
    HilbertError,
    StateVector,
    TimeGrid,
    spectral_decompose,
)
from .measurement import (
    CompositeModel,
    MeasurementDevice,
    QualityResult,
    cross_readout_part,
    free_readout,
    interacting_readout,
    quality,
)

CHAIN_RTOL = 1e-9
CHAIN_ATOL = 1e-15


class RegimeError(ValueError):
    """Bound evaluation requested outside its admissible time window."""


class AdmissibleGridError(ValueError):
    """No grid time lies strictly between 0 and the characteristic time."""


@dataclass(frozen=True)
class CoarseningSpec:
    """Particle cutoff N1 of the coarse device, apparatus-exclusive."""

    cutoff: int

    def __post_init__(self):
        if self.cutoff < 1:
            raise HilbertError(f"cutoff must be a positive basis index, got {self.cutoff}")

    def validate(self, model: CompositeModel) -> None:
        n, dim = model.apparatus_size, model.dim
        if not (n < self.cutoff <= dim):
            raise HilbertError(
                f"cutoff must satisfy N < N1 <= D ({n} < N1 <= {dim}), got {self.cutoff}"
            )


@dataclass(frozen=True)
class MixingMatrix:
    """M_ij = c_i conj(d_j) gamma_ij(t) on the full particle block."""

    values: np.ndarray  # (N, D - N)
    time: float

    def __post_init__(self):
        m = np.array(self.values, dtype=np.complex128, copy=True)
        m.setflags(write=False)
        object.__setattr__(self, "values", m)


def mixing_matrix(model: CompositeModel, t: float, hbar: float = 1.0) -> MixingMatrix:
    """Apparatus/particle mixing matrix at time t."""
    n = model.apparatus_size
    gamma = np.exp(1j * (model.energies[:n, None] - model.energies[None, n:]) * t / hbar)
    return MixingMatrix(values=np.outer(model.apparatus, model.particle.conj()) * gamma, time=t)


def quality_with_cutoff(
    model: CompositeModel,
    device: MeasurementDevice,
    grid: TimeGrid,
    cutoff: int,
    hbar: float = 1.0,
) -> QualityResult:
    """Measurement quality with all particle sums truncated at ``cutoff``.

    Both readouts carry the same cutoff, so the diagonal terms cancel in the
    difference and only the truncated cross terms survive; cutoff = D
    reproduces the perfect-device quality.
    """
    inter = interacting_readout(model, device, grid, cutoff=cutoff, hbar=hbar)
    free = free_readout(model, device, grid, cutoff=cutoff, hbar=hbar)
    return quality(inter, free)


@dataclass(frozen=True)
class FidelityGap:
    """Perfect vs. coarse quality, per channel, with the triangle bound."""

    cutoff: int
    q_perfect: np.ndarray    # (channels, T) signed cross-term curves
    q_coarse: np.ndarray     # (channels, T)
    quality_perfect: np.ndarray   # Q, (channels,)
    quality_coarse: np.ndarray    # Qt, (channels,)
    gap: np.ndarray               # F = Q - Qt, signed, (channels,)
    triangle_bound: np.ndarray    # max_t |q - qt|, (channels,)
    ordering_violations: Tuple[int, ...]  # channels with Qt > Q


def fidelity_gap(
    model: CompositeModel,
    device: MeasurementDevice,
    grid: TimeGrid,
    spec: CoarseningSpec,
    hbar: float = 1.0,
) -> FidelityGap:
    """Distinguishability F = Q - Qt of perfect and coarse devices."""
    spec.validate(model)
    q = cross_readout_part(model, device, grid, cutoff=model.dim, hbar=hbar)
    qt = cross_readout_part(model, device, grid, cutoff=spec.cutoff, hbar=hbar)
    q_max = np.max(np.abs(q), axis=1)
    qt_max = np.max(np.abs(qt), axis=1)
    gap = q_max - qt_max
    triangle = np.max(np.abs(q - qt), axis=1)
    if np.any(np.abs(gap) > triangle + 1e-10):
        raise HilbertError("triangle inequality |Q - Qt| <= max|q - qt| violated numerically")
    violations = tuple(int(a) for a in np.nonzero(gap < 0)[0])
    return FidelityGap(
        cutoff=spec.cutoff, q_perfect=q, q_coarse=qt,
        quality_perfect=q_max, quality_coarse=qt_max, gap=gap,
        triangle_bound=triangle, ordering_violations=violations,
    )


@dataclass(frozen=True)
class PeresThresholds:
    """Decay threshold for the tail measure and plateau tolerance."""

    decay_threshold: float = 1e-3
    plateau_rtol: float = 0.05


@dataclass(frozen=True)
class TailProfile:
    """Tail-sum measure eps(N1) over all cutoffs, with decay verdict."""

    cutoffs: np.ndarray          # 1-indexed N1 values, N+1..D
    eps: np.ndarray              # (C,) max over grid times
    eps_by_time: np.ndarray      # (C, T)
    threshold: float
    first_below: Optional[int]   # smallest N1 with eps <= threshold
    verdict: bool                # decays below threshold before N1 = D
    series_tail_fraction: np.ndarray  # (N,) last-quarter share of sum_j |V_ij|
    series_plateau: np.ndarray        # (N,) bool, partial sums plateaued


def _tail_eps_by_time(model: CompositeModel, times: np.ndarray, hbar: float) -> np.ndarray:
    """eps(N1, t) for every cutoff N+1..D and time, shape (D - N, T)."""
    n, dim = model.apparatus_size, model.dim
    out = np.empty((dim - n, times.size))
    for k, t in enumerate(times):
        m = mixing_matrix(model, float(t), hbar=hbar).values
        tail_re = np.cumsum(m.real[:, ::-1], axis=1)[:, ::-1]  # sums j >= column
        tail_im = np.cumsum(m.imag[:, ::-1], axis=1)[:, ::-1]
        per_cut = np.maximum(np.abs(tail_re), np.abs(tail_im)).max(axis=0)
        out[:, k] = per_cut
    return out


def peres_condition_check(
    model: CompositeModel,
    grid: TimeGrid,
    thresholds: PeresThresholds = PeresThresholds(),
    hbar: float = 1.0,
) -> TailProfile:
    """Decay profile of the mixing-matrix tail sums over all cutoffs.

    eps(N1) aggregates max over grid times and apparatus rows of the moduli
    of the real and imaginary tail sums (j >= N1).  The verdict records
    whether the profile falls below the threshold at some N1 < D.  The
    convergence prerequisite on sum_j |V_ij| is reported through plateau
    detection on its partial sums (share of the last quarter of terms).
    """
    n, dim = model.apparatus_size, model.dim
    eps_by_time = _tail_eps_by_time(model, grid.points, hbar)
    eps = eps_by_time.max(axis=1)
    cutoffs = np.arange(n + 1, dim + 1)
    below = np.nonzero(eps <= thresholds.decay_threshold)[0]
    first_below = int(cutoffs[below[0]]) if below.size else None
    verdict = first_below is not None and first_below < dim
    vt = np.abs(model.interaction.matrix[:n, n:])
    totals = vt.sum(axis=1)
    quarter = max(1, vt.shape[1] // 4)
    tail_fraction = vt[:, -quarter:].sum(axis=1) / np.maximum(totals, 1e-300)
    plateau = tail_fraction <= thresholds.plateau_rtol
    return TailProfile(
        cutoffs=cutoffs, eps=eps, eps_by_time=eps_by_time,
        threshold=thresholds.decay_threshold, first_below=first_below, verdict=verdict,
        series_tail_fraction=tail_fraction, series_plateau=plateau,
    )


def characteristic_time(
    model: CompositeModel, spec: CoarseningSpec, hbar: float = 1.0
) -> float:
    """t0 = (pi/2) hbar / max |V_ij| over apparatus rows and tail columns.

    Returns inf when the interaction block vanishes (flagged, not an error).
    """
    spec.validate(model)
    n = model.apparatus_size
    block = np.abs(model.interaction.matrix[:n, spec.cutoff - 1 :])
    vmax = float(block.max()) if block.size else 0.0
    if vmax == 0.0:
        return float("inf")
    return float((np.pi / 2) * hbar / vmax)


@dataclass(frozen=True)
class BoundChainTerms:
    """The three per-(channel, apparatus-state) bound forms at one time."""

    time: float
    t0: float
    sin_form: np.ndarray         # (channels, N)
    comparison_form: np.ndarray  # (channels, N), K excluded
    linear_form: np.ndarray      # (channels, N), K excluded


def _chain_over_grid(
    model: CompositeModel,
    device: MeasurementDevice,
    spec: CoarseningSpec,
    times: np.ndarray,
    hbar: float,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(T, channels, N) arrays of the sin, comparison and linear forms."""
    n = model.apparatus_size
    tail0 = spec.cutoff - 1
    dec = model.interaction_eig
    sin_rows = kernels.sin_cross_sums(
        dec.eigenvectors, dec.eigenvalues, times / hbar,
        model.apparatus, model.particle, model.energies, tail0, model.dim,
    )  # (T, N) complex
    rho = device.weights[:, :n]  # (A, N)
    a8 = 2.0 * rho[None, :, :] * np.abs(sin_rows)[:, None, :]
    vt = np.abs(model.interaction.matrix[:n, tail0:])  # (N, J)
    gamma = np.exp(
        1j * times[:, None, None]
        * (model.energies[:n, None] - model.energies[None, tail0:]) / hbar
    )
    m_re_abs = np.abs(
        (np.outer(model.apparatus, model.particle[tail0 - n :].conj())[None] * gamma).real
    )  # (T, N, J)
    comp_rows = np.einsum("tij,tij->ti", m_re_abs, np.sin(2.0 * vt[None] * times[:, None, None] / hbar))
    lin_rows = (m_re_abs * vt[None]).sum(axis=2) * (times[:, None] / hbar)
    a9 = 4.0 * rho[None] * comp_rows[:, None, :]
    a10 = 4.0 * rho[None] * lin_rows[:, None, :]
    return a8, a9, a10


def bound_chain_rhs(
    model: CompositeModel,
    device: MeasurementDevice,
    spec: CoarseningSpec,
    t: float,
    hbar: float = 1.0,
    enforce_regime: bool = True,
) -> BoundChainTerms:
    """Evaluate the three bound forms at one time (tail j >= N1).

    Outside t < t0 the comparison loses its sign guarantee; by default the
    call refuses (``RegimeError``), pass ``enforce_regime=False`` to evaluate
    anyway for breakdown reporting.
    """
    spec.validate(model)
    t0 = characteristic_time(model, spec, hbar=hbar)
    if enforce_regime and not t < t0:
        raise RegimeError(f"t = {t} is not below the characteristic time t0 = {t0}")
    a8, a9, a10 = _chain_over_grid(model, device, spec, np.array([float(t)]), hbar)
    return BoundChainTerms(
        time=float(t), t0=t0, sin_form=a8[0], comparison_form=a9[0], linear_form=a10[0]
    )


@dataclass(frozen=True)
class ChannelFidelity:
    alpha: int
    quality_perfect: float
    quality_coarse: float
    gap: float


@dataclass(frozen=True)
class FidelityReport:
    """Fitted linear bound F(t) <= A t eps with its full evidence trail."""

    dim: int
    apparatus_size: int
    cutoff: int
    t0: float
    admissible: np.ndarray        # (T,) bool, t < t0
    excluded_times: np.ndarray    # grid times at or beyond t0 (flagged)
    epsilon: float                # tail measure at the cutoff, admissible times
    epsilon_profile: Tuple[Tuple[int, float], ...]  # (N1, eps) pairs, full grid
    a_fitted: float
    ceiling: float
    constants: dict               # {"K": assumed, "C": fitted, "C_tilde": fitted}
    channels: Tuple[ChannelFidelity, ...]
    gap_curve: np.ndarray         # (T,) max over channels of |q|-|qt|
    bound_curve: np.ndarray       # (T,) A * t * eps
    bound_satisfied: np.ndarray   # (channels, T) F(a,t) <= A t eps on admissible
    chain_violations: Tuple[dict, ...]   # sin form exceeding K * comparison below t0
    ordering_violations: Tuple[int, ...]
    verdict: bool

    @property
    def gap_aggregate(self) -> float:
        return float(max((c.gap for c in self.channels), default=0.0))


def fit_bound_constant(
    model: CompositeModel,
    device: MeasurementDevice,
    grid: TimeGrid,
    spec: CoarseningSpec,
    K: float = 1.0,
    ceiling: float = 1e3,
    hbar: float = 1.0,
) -> FidelityReport:
    """Fit the least slope A with F(t) <= A t eps on admissible grid times.

    Grid times at or beyond t0 are excluded from the fit and listed; the fit
    is the exact enclosing slope over (channel, time) points, not a
    regression.  The verdict requires a finite A below the ceiling and a
    clean bound chain (sin form <= K * comparison <= 2K * linear) at every
    admissible time.
    """
    spec.validate(model)
    t0 = characteristic_time(model, spec, hbar=hbar)
    times = grid.points
    admissible = times < t0
    excluded = times[~admissible]
    fit_mask = admissible & (times > 0)
    if not np.any(fit_mask):
        raise AdmissibleGridError(
            f"no admissible times: t0 = {t0} does not exceed any nonzero grid point"
        )

    gap = fidelity_gap(model, device, grid, spec, hbar=hbar)
    f_curve = np.abs(gap.q_perfect) - np.abs(gap.q_coarse)  # (A, T) signed

    eps_by_time = _tail_eps_by_time(model, times, hbar)  # (C, T)
    cut_index = spec.cutoff - (model.apparatus_size + 1)
    epsilon = float(eps_by_time[cut_index, admissible].max())
    profile = tuple(
        (int(n1), float(e))
        for n1, e in zip(range(model.apparatus_size + 1, model.dim + 1), eps_by_time.max(axis=1))
    )

    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = f_curve[:, fit_mask] / (times[fit_mask] * epsilon)
    if epsilon > 0:
        a_fitted = float(max(0.0, ratios.max()))
    else:
        a_fitted = 0.0 if float(f_curve[:, fit_mask].max(initial=0.0)) <= CHAIN_ATOL else float("inf")

    bound_curve = np.where(admissible, a_fitted * times * epsilon, np.nan)
    slack = CHAIN_ATOL + CHAIN_RTOL * max(a_fitted, 1.0) * max(epsilon, 1.0)
    bound_satisfied = f_curve <= a_fitted * times[None, :] * epsilon + slack
    bound_satisfied[:, ~admissible] = False

    a8, a9, a10 = _chain_over_grid(model, device, spec, times[fit_mask], hbar)
    tol = CHAIN_ATOL + CHAIN_RTOL * np.maximum(a9, a10)
    chain_violations = []
    bad8 = a8 > K * a9 + tol
    bad9 = a9 > 2.0 * a10 + tol
    for t_idx, alpha, i in zip(*np.nonzero(bad8 | bad9)):
        chain_violations.append({
            "t": float(times[fit_mask][t_idx]), "channel": int(alpha), "state": int(i),
            "sin_form": float(a8[t_idx, alpha, i]),
            "comparison_form": float(a9[t_idx, alpha, i]),
            "linear_form": float(a10[t_idx, alpha, i]),
        })

    # printed linear-tail report and its enclosing constants: the chained
    # claim is lhs <= C * eps * (t/hbar) * sum_j |V_ij| <= C_tilde * (t/hbar) * eps
    n = model.apparatus_size
    tail0 = spec.cutoff - 1
    vt = np.abs(model.interaction.matrix[:n, tail0:])
    t_fit = times[fit_mask]
    gamma = np.exp(
        1j * t_fit[:, None, None]
        * (model.energies[:n, None] - model.energies[None, tail0:]) / hbar
    )
    m_re = (np.outer(model.apparatus, model.particle[tail0 - n :].conj())[None] * gamma).real
    lhs_rows = 8.0 * K * np.abs((m_re * vt[None]).sum(axis=2)) * (t_fit[:, None] / hbar)
    lhs = device.weights[None, :, :n] * lhs_rows[:, None, :]  # (T, A, N)
    v_row_sums = vt.sum(axis=1)  # (N,)
    c_fit = 0.0
    c_tilde_fit = 0.0
    if epsilon > 0:
        denom_core = epsilon * (t_fit[:, None, None] / hbar) * v_row_sums[None, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            c_ratio = np.where(denom_core > 0, lhs / denom_core, 0.0)
        c_fit = float(c_ratio.max(initial=0.0))
        c_tilde_fit = float((lhs / (epsilon * t_fit[:, None, None] / hbar)).max(initial=0.0))

    rows = tuple(
        ChannelFidelity(
            alpha=a,
            quality_perfect=float(gap.quality_perfect[a]),
            quality_coarse=float(gap.quality_coarse[a]),
            gap=float(gap.gap[a]),
        )
        for a in range(device.channels)
    )
    verdict = np.isfinite(a_fitted) and a_fitted <= ceiling and not chain_violations
    return FidelityReport(
        dim=model.dim, apparatus_size=model.apparatus_size, cutoff=spec.cutoff,
        t0=t0, admissible=admissible, excluded_times=excluded,
        epsilon=epsilon, epsilon_profile=profile,
        a_fitted=a_fitted, ceiling=ceiling,
        constants={"K": K, "C": c_fit, "C_tilde": c_tilde_fit},
        channels=rows,
        gap_curve=f_curve.max(axis=0), bound_curve=bound_curve,
        bound_satisfied=bound_satisfied,
        chain_violations=tuple(chain_violations),
        ordering_violations=gap.ordering_violations,
        verdict=bool(verdict),
    )


@dataclass(frozen=True)
class SpeedLimitResult:
    """Survival probability against the energy-spread speed-limit bound."""

    times: np.ndarray
    survival: np.ndarray
    bound: np.ndarray          # cos^2(dE t / hbar) where admissible, else nan
    admissible: np.ndarray     # dE t / hbar <= pi/2
    energy_spread: float
    min_margin: float          # min of survival - bound over admissible points
    verdict: bool


def speed_limit_check(
    H: HermitianOperator,
    psi: StateVector,
    grid: TimeGrid,
    hbar: float = 1.0,
) -> SpeedLimitResult:
    """Check S(t) = |<psi|U(t)|psi>|^2 >= cos^2(dE t / hbar) up to pi/2.

    The bound is the energy-spread quantum speed limit on the survival
    probability; it binds only while dE t / hbar <= pi/2.
    """
    v = psi.amplitudes
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise HilbertError("speed limit check requires a normalized state")
    if H.dim != v.size:
        raise HilbertError(f"dimension mismatch: H {H.dim}, psi {v.size}")
    dec = spectral_decompose(H)
    w = np.abs(dec.eigenvectors.conj().T @ v) ** 2
    mean = float(w @ dec.eigenvalues)
    var = float(w @ dec.eigenvalues**2) - mean**2
    de = float(np.sqrt(max(var, 0.0)))
    amp = np.exp(1j * np.outer(grid.points, dec.eigenvalues) / hbar) @ w
    survival = np.abs(amp) ** 2
    admissible = de * grid.points / hbar <= np.pi / 2 + 1e-15
    bound = np.where(admissible, np.cos(de * grid.points / hbar) ** 2, np.nan)
    margins = survival[admissible] - bound[admissible]
    min_margin = float(margins.min()) if margins.size else float("inf")
    return SpeedLimitResult(
        times=grid.points, survival=survival, bound=bound, admissible=admissible,
        energy_spread=de, min_margin=min_margin, verdict=bool(min_margin >= -1e-10),
    )
