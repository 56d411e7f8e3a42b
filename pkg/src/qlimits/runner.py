"""Experiment orchestration: build models from config, run, persist.

Every run writes a manifest before touching data files and finalizes it with
checksums afterwards; all machine-readable data goes to CSV/JSON files in
the output directory while stdout carries a short human summary.  Exit
status: 0 success, 1 input error, 2 a checked invariant or bound failed.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Tuple

import numpy as np

from . import fidelity as fid
from . import measurement as meas
from . import truncation as trunc
from .config import ConfigError, ExperimentConfig, complex_array
from .echo import EnsembleSpec, ensemble_echo
from .hilbert import HermitianOperator, HilbertError, StateVector, TimeGrid, spectral_decompose
from .manifest import finalize_manifest, start_manifest
from .sampling import (
    STREAM_DEVICE,
    STREAM_HAMILTONIAN,
    STREAM_OBSERVABLE,
    STREAM_STATE,
    sample_composite_model,
    sample_device,
    sample_gue,
    sample_state,
)
from .serialize import write_csv, write_json

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_VIOLATION = 2


@dataclass
class RunResult:
    exit_code: int
    summary: List[str]
    files: List[str]


def _time_grid(config: ExperimentConfig) -> TimeGrid:
    return TimeGrid(t_max=float(config.grid["t_max"]), steps=int(config.grid["steps"]))


def _build_hamiltonian(config: ExperimentConfig, dim: int) -> HermitianOperator:
    model = config.model
    if model["source"] == "explicit":
        if "H" not in model:
            raise ConfigError("model.H: required when model.source = 'explicit'")
        return HermitianOperator(complex_array(model["H"], "model.H", 2), role="hamiltonian")
    return sample_gue(dim, model["h_scale"], [config.seed, STREAM_HAMILTONIAN])


def _build_state(config: ExperimentConfig, dim: int) -> StateVector:
    model = config.model
    if model["source"] == "explicit" and "psi" in model:
        vec = complex_array(model["psi"], "model.psi", 1)
        return StateVector(vec / np.linalg.norm(vec), normalized=True)
    return sample_state(dim, [config.seed, STREAM_STATE])


def _build_composite(config: ExperimentConfig) -> Tuple[meas.CompositeModel, meas.MeasurementDevice]:
    dims, model = config.dimensions, config.model
    d, n = dims["D"], dims["N"]
    if model["source"] == "explicit":
        for key in ("c", "d", "E", "V", "weights"):
            if key not in model:
                raise ConfigError(f"model.{key}: required when model.source = 'explicit'")
        composite = meas.CompositeModel(
            apparatus=complex_array(model["c"], "model.c", 1),
            particle=complex_array(model["d"], "model.d", 1),
            energies=np.asarray(model["E"], dtype=np.float64),
            interaction=HermitianOperator(
                complex_array(model["V"], "model.V", 2), role="interaction"
            ),
        )
        device = meas.build_device(model["weights"])
    else:
        composite = sample_composite_model(
            d, n, config.seed, v_scale=model["v_scale"], tail=model["tail"],
            energy_scale=model["energy_scale"],
        )
        device = sample_device(model["channels"], d, [config.seed, STREAM_DEVICE])
    if device.dim != composite.dim:
        raise ConfigError("model.weights: device dimension does not match D")
    return composite, device


def _run_truncate_sweep(config: ExperimentConfig, out: Path) -> RunResult:
    dims = config.dimensions
    d = dims["D"]
    grid = _time_grid(config)
    epsilon = config.tolerances["epsilon"]
    h = _build_hamiltonian(config, d)
    if config.model["source"] == "explicit":
        if "A0" not in config.model:
            raise ConfigError("model.A0: required when model.source = 'explicit'")
        a0 = HermitianOperator(complex_array(config.model["A0"], "model.A0", 2))
    else:
        a0 = sample_gue(d, config.model["a_scale"], [config.seed, STREAM_OBSERVABLE],
                        role="observable")
    psi = _build_state(config, d)
    basis = config.model["basis"]

    profile = trunc.rank_error_profile(psi, a0, h, grid, basis=basis)
    n_min = int(np.nonzero(profile <= epsilon)[0][0])
    rank = dims.get("n", n_min)
    pair_basis = spectral_decompose(h) if basis == "energy" else None
    pair = trunc.make_truncation(rank, dim=d, basis=pair_basis)
    report = trunc.truncation_error(psi, a0, h, pair, grid, epsilon=epsilon)

    write_csv(out / "sweep.csv", ["n", "max_error"],
              [(k, float(e)) for k, e in enumerate(profile)])
    write_csv(
        out / "report.csv",
        ["t", "error", "termQQ", "termCross", "termComm"],
        [
            (float(t), float(e), abs(qq), abs(cr), abs(cm))
            for t, e, qq, cr, cm in zip(
                grid.points, report.errors, report.term_qq, report.term_cross, report.term_comm
            )
        ],
    )
    full_rank_error = float(profile[-1])
    payload = {
        "kind": config.kind, "seed": config.seed, "D": d, "basis": basis,
        "epsilon": epsilon, "n_min": n_min, "rank_reported": rank,
        "max_error_at_rank": report.relative_error,
        "error_at_full_rank": full_rank_error,
    }
    write_json(out / "result.json", payload)

    ok = profile[n_min] <= epsilon and full_rank_error <= 1e-12
    summary = [
        f"minimal rank for epsilon={epsilon:g}: n = {n_min} (D = {d}, basis = {basis})",
        f"max error at reported rank {rank}: {report.relative_error:.3e}",
        f"error at full rank: {full_rank_error:.3e}",
    ]
    return RunResult(EXIT_OK if ok else EXIT_VIOLATION, summary,
                     ["sweep.csv", "report.csv", "result.json"])


def _run_readout(config: ExperimentConfig, out: Path) -> RunResult:
    grid = _time_grid(config)
    hbar = config.constants["hbar"]
    composite, device = _build_composite(config)
    inter = meas.interacting_readout(composite, device, grid, hbar=hbar)
    free = meas.free_readout(composite, device, grid, hbar=hbar)
    exact = meas.exact_oracle_readout(composite, device, grid, hbar=hbar)
    qual = meas.quality(inter, free)

    rows = []
    for k, t in enumerate(grid.points):
        for a in range(device.channels):
            pi = float(inter.probabilities[a, k])
            pf = float(free.probabilities[a, k])
            rows.append((float(t), a, pi, pf, abs(pi - pf)))
    write_csv(out / "readout.csv", ["t", "channel", "P_interacting", "P_free", "abs_diff"], rows)
    payload = {
        "kind": config.kind, "seed": config.seed,
        "D": composite.dim, "N": composite.apparatus_size,
        "quality_per_channel": [float(q) for q in qual.per_channel],
        "quality_achieved_at": [float(t) for t in qual.achieved_at],
        "quality_aggregate": qual.aggregate,
        "exact_oracle_max_deviation": exact.max_deviation,
    }
    write_json(out / "result.json", payload)

    t0_gap = float(np.max(np.abs(inter.probabilities[:, 0] - free.probabilities[:, 0])))
    ok = t0_gap <= 1e-12
    summary = [
        f"quality per channel: {[round(float(q), 6) for q in qual.per_channel]}",
        f"aggregate quality: {qual.aggregate:.6f}",
        f"exact-oracle max deviation from factorized readout: {exact.max_deviation:.3e}",
    ]
    if not ok:
        summary.append(f"INVARIANT VIOLATED: readouts differ at t=0 by {t0_gap:.3e}")
    return RunResult(EXIT_OK if ok else EXIT_VIOLATION, summary, ["readout.csv", "result.json"])


def _run_fidelity(config: ExperimentConfig, out: Path) -> RunResult:
    grid = _time_grid(config)
    composite, device = _build_composite(config)
    spec = fid.CoarseningSpec(cutoff=config.dimensions["N1"])
    report = fid.fit_bound_constant(
        composite, device, grid, spec,
        K=config.constants["K"], ceiling=config.tolerances["bound_ceiling"],
        hbar=config.constants["hbar"],
    )
    eps = report.epsilon
    write_csv(
        out / "fidelity.csv", ["t", "F", "bound"],
        [
            (float(t), float(f), report.a_fitted * float(t) * eps)
            for t, f in zip(grid.points, report.gap_curve)
        ],
    )
    payload = {
        "kind": config.kind, "seed": config.seed,
        "D": report.dim, "N": report.apparatus_size, "N1": report.cutoff,
        "t0": report.t0, "A_fitted": report.a_fitted, "K": report.constants["K"],
        "epsilon": eps,
        "epsilon_profile": [[n1, e] for n1, e in report.epsilon_profile],
        "channels": [
            {"alpha": c.alpha, "Q": c.quality_perfect, "Qt": c.quality_coarse, "F": c.gap}
            for c in report.channels
        ],
        "violations": list(report.chain_violations),
        "ordering_violations": list(report.ordering_violations),
        "excluded_times": [float(t) for t in report.excluded_times],
        "constants": report.constants,
        "verdict": report.verdict,
    }
    write_json(out / "fidelity.json", payload)
    summary = [
        f"t0 = {report.t0:.6g}; {int(report.admissible.sum())} of {grid.points.size} grid times admissible"
        + (f" ({report.excluded_times.size} excluded)" if report.excluded_times.size else ""),
        f"epsilon(N1={report.cutoff}) = {eps:.6g}; fitted A = {report.a_fitted:.6g} "
        f"(ceiling {report.ceiling:g})",
        f"chain violations below t0: {len(report.chain_violations)}; "
        f"ordering violations (Qt > Q): {len(report.ordering_violations)}",
        f"verdict: {'ok' if report.verdict else 'BOUND FAILED'}",
    ]
    return RunResult(EXIT_OK if report.verdict else EXIT_VIOLATION, summary,
                     ["fidelity.csv", "fidelity.json"])


def _run_peres_condition(config: ExperimentConfig, out: Path) -> RunResult:
    grid = _time_grid(config)
    composite, _ = _build_composite(config)
    thresholds = fid.PeresThresholds(decay_threshold=config.tolerances["peres_threshold"])
    profile = fid.peres_condition_check(composite, grid, thresholds,
                                        hbar=config.constants["hbar"])
    write_csv(out / "profile.csv", ["N1", "eps"],
              [(int(n1), float(e)) for n1, e in zip(profile.cutoffs, profile.eps)])
    payload = {
        "kind": config.kind, "seed": config.seed,
        "D": composite.dim, "N": composite.apparatus_size,
        "threshold": profile.threshold,
        "first_cutoff_below_threshold": profile.first_below,
        "verdict": profile.verdict,
        "series_tail_fraction": [float(x) for x in profile.series_tail_fraction],
        "series_plateau": [bool(b) for b in profile.series_plateau],
    }
    write_json(out / "result.json", payload)
    summary = [
        f"eps(N1) spans [{profile.eps.min():.3e}, {profile.eps.max():.3e}] over N1 = "
        f"{int(profile.cutoffs[0])}..{int(profile.cutoffs[-1])}",
        f"first cutoff below threshold {profile.threshold:g}: {profile.first_below}",
        f"verdict (decays before N1 = D): {'ok' if profile.verdict else 'FAILED'}",
    ]
    return RunResult(EXIT_OK if profile.verdict else EXIT_VIOLATION, summary,
                     ["profile.csv", "result.json"])


def _run_peres_echo(config: ExperimentConfig, out: Path, threads: int) -> RunResult:
    dims = config.dimensions
    grid = _time_grid(config)
    base = None
    if config.model["source"] == "explicit":
        base = _build_hamiltonian(config, dims["D"])
    spec = EnsembleSpec(
        dim=dims["D"], size=config.ensemble["size"], delta=config.ensemble["delta"],
        seed=config.seed, base=base, base_scale=config.model["h_scale"],
    )
    psi0 = _build_state(config, dims["D"])
    curve = ensemble_echo(spec, psi0, grid, threads=threads)
    write_csv(
        out / "echo.csv", ["t", "mean_echo", "std_echo", "min", "max"],
        [
            (float(t), float(m), float(s), float(lo), float(hi))
            for t, m, s, lo, hi in zip(grid.points, curve.mean, curve.std,
                                       curve.minimum, curve.maximum)
        ],
    )
    time_avg = float(curve.mean.mean())
    payload = {
        "kind": config.kind, "seed": config.seed, "D": spec.dim,
        "ensemble_size": spec.size, "delta": spec.delta,
        "time_averaged_mean_echo": time_avg,
        "final_mean_echo": float(curve.mean[-1]),
    }
    write_json(out / "result.json", payload)
    summary = [
        f"ensemble of {spec.size} members, delta = {spec.delta:g}",
        f"mean echo: initial {curve.mean[0]:.6f}, final {curve.mean[-1]:.6f}, "
        f"time-averaged {time_avg:.6f}",
    ]
    return RunResult(EXIT_OK, summary, ["echo.csv", "result.json"])


def _run_speed_limit(config: ExperimentConfig, out: Path) -> RunResult:
    dims = config.dimensions
    grid = _time_grid(config)
    h = _build_hamiltonian(config, dims["D"])
    psi = _build_state(config, dims["D"])
    result = fid.speed_limit_check(h, psi, grid, hbar=config.constants["hbar"])
    write_csv(
        out / "speedlimit.csv", ["t", "survival", "bound"],
        [
            (float(t), float(s), float(b) if np.isfinite(b) else None)
            for t, s, b in zip(result.times, result.survival, result.bound)
        ],
    )
    payload = {
        "kind": config.kind, "seed": config.seed, "D": dims["D"],
        "energy_spread": result.energy_spread,
        "min_margin": result.min_margin,
        "admissible_points": int(result.admissible.sum()),
        "verdict": result.verdict,
    }
    write_json(out / "result.json", payload)
    summary = [
        f"energy spread = {result.energy_spread:.6g}; "
        f"{int(result.admissible.sum())} admissible grid points",
        f"min margin survival - bound: {result.min_margin:.3e}",
        f"verdict: {'ok' if result.verdict else 'BOUND VIOLATED'}",
    ]
    return RunResult(EXIT_OK if result.verdict else EXIT_VIOLATION, summary,
                     ["speedlimit.csv", "result.json"])


def run_experiment(
    config: ExperimentConfig,
    out_dir=None,
    threads: int = 1,
    seed_source: str = "config",
) -> int:
    """Run one configured experiment; returns the process exit status."""
    out = Path(out_dir or config.out_dir or f"runs/{config.kind}")
    try:
        manifest = start_manifest(out, config, seed_source)
    except OSError as exc:
        print(f"error: cannot prepare output directory {out}: {exc}")
        return EXIT_INPUT_ERROR

    runners: Dict[str, Callable[[], RunResult]] = {
        "truncate-sweep": lambda: _run_truncate_sweep(config, out),
        "readout": lambda: _run_readout(config, out),
        "fidelity": lambda: _run_fidelity(config, out),
        "peres-condition": lambda: _run_peres_condition(config, out),
        "peres-echo": lambda: _run_peres_echo(config, out, threads),
        "speed-limit": lambda: _run_speed_limit(config, out),
    }
    try:
        result = runners[config.kind]()
    except (ConfigError, fid.AdmissibleGridError) as exc:
        print(f"error: {exc}")
        return EXIT_INPUT_ERROR
    except HilbertError as exc:
        print(f"invariant violated during run: {exc}")
        return EXIT_VIOLATION

    finalize_manifest(out, manifest, result.files)
    print(f"[{config.kind}] seed={config.seed} out={out}")
    for line in result.summary:
        print(f"  {line}")
    print(f"  files: {', '.join(result.files)} (+ manifest.json)")
    return result.exit_code
