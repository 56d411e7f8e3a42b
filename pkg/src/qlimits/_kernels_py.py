"""Pure-numpy backend for the grid-evaluation kernels.

Shared contract with the compiled backend (``qlimits._kernels_cy``): the
generator X is given by its eigenpairs (S, lam) with X = S diag(lam)
S^dagger; ``times`` already carries any 1/hbar factor; the apparatus block
is the first len(c) basis states and ``d`` holds particle amplitudes for
absolute indices len(c)..D-1.  Column windows [j_lo, j_hi) are absolute
0-based indices.
"""
from __future__ import annotations

import numpy as np


def diag_abs2(S: np.ndarray, lam: np.ndarray, times: np.ndarray) -> np.ndarray:
    """|<k| exp(i X t) |k>|^2 for every basis state k, shape (T, D)."""
    p2 = np.abs(S) ** 2  # (D, D), rows k, cols m
    amp = np.exp(1j * np.outer(times, lam)) @ p2.T  # (T, D)
    return np.abs(amp) ** 2


def _window_block(S, phases, j_lo, j_hi, n_app):
    # <i| f(X) |j> for i < n_app, j in [j_lo, j_hi), all times at once
    return np.einsum(
        "im,tm,jm->tij", S[:n_app], phases, S[j_lo:j_hi].conj(), optimize=True
    )


def cross_sums(
    S: np.ndarray,
    lam: np.ndarray,
    times: np.ndarray,
    c: np.ndarray,
    d: np.ndarray,
    E: np.ndarray,
    j_lo: int,
    j_hi: int,
) -> np.ndarray:
    """Row sums sum_j Re[M_ij(t)] |<i|exp(iXt)|j>|^2, shape (T, N).

    M_ij(t) = c_i conj(d_j) exp(i (E_i - E_j) t) is the apparatus/particle
    mixing matrix on the column window.
    """
    n_app = c.size
    if j_hi <= j_lo:
        return np.zeros((times.size, n_app))
    w = _window_block(S, np.exp(1j * np.outer(times, lam)), j_lo, j_hi, n_app)
    gamma = np.exp(1j * times[:, None, None] * (E[:n_app, None] - E[None, j_lo:j_hi]))
    m_re = (np.outer(c, d[j_lo - n_app : j_hi - n_app].conj())[None, :, :] * gamma).real
    return np.einsum("tij,tij->ti", m_re, np.abs(w) ** 2, optimize=True)


def sin_cross_sums(
    S: np.ndarray,
    lam: np.ndarray,
    times: np.ndarray,
    c: np.ndarray,
    d: np.ndarray,
    E: np.ndarray,
    j_lo: int,
    j_hi: int,
) -> np.ndarray:
    """Complex row sums sum_j Re[M_ij(t)] <i|sin(X t)|j>, shape (T, N)."""
    n_app = c.size
    if j_hi <= j_lo:
        return np.zeros((times.size, n_app), dtype=np.complex128)
    w = _window_block(S, np.sin(np.outer(times, lam)), j_lo, j_hi, n_app)
    gamma = np.exp(1j * times[:, None, None] * (E[:n_app, None] - E[None, j_lo:j_hi]))
    m_re = (np.outer(c, d[j_lo - n_app : j_hi - n_app].conj())[None, :, :] * gamma).real
    return np.einsum("tij,tij->ti", m_re.astype(np.complex128), w, optimize=True)
