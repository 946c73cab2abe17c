"""Least-squares channel estimation from Hadamard pilot books.

The receiver solves sqrt(B/P) F^+ Z Omega_e^+ for the stacked unknowns
[h_d, V^T], where Omega_e is the intended pilot matrix extended with an
all-ones row for the uncontrollable path.  The estimates live in the
absorbed sign convention: whatever complex scalar maps the intended +/-1
entries to physical reflection values is part of the estimated channel.

Also provided: noise-PSD estimation from repeated pilot configurations,
discovery of the per-column spatial structure, and the dimension-reduced
solve that models every surface column with one coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .channel import ChannelRealization, ScenarioConfig
from .circuit import state_reflection_pair
from .geometry import ArrayGeometry
from .pilots import PilotBook, PilotObservations

GRAM_CONDITION_LIMIT = 1e10


class RankDeficientError(np.linalg.LinAlgError):
    """The extended pilot matrix does not have full row rank."""


@dataclass(frozen=True)
class EstimateFull:
    h_d: np.ndarray              # (M,) complex
    v: np.ndarray                # (N, M) complex
    residual_norm: float
    gram_cond: float


@dataclass(frozen=True)
class EstimateReduced:
    h_d: np.ndarray              # (M,) complex
    v_row: np.ndarray            # (N_H, M) complex
    residual_norm: float
    gram_cond: float


@dataclass(frozen=True)
class StructureReport:
    """Within-column dispersion of the estimated cascaded channel."""

    deviation: np.ndarray = field(repr=False)  # (N_H, M) std/|mean| per column+tap
    score: float                               # fraction of energetic cells that agree
    grouping: str                              # "column-constant" | "none"


def estimate_noise_psd(obs: PilotObservations, book: PilotBook) -> float:
    """Noise PSD from repeated configurations.

    Identical intended states null the channel exactly even under
    coupling, so the difference of two such blocks is pure noise with
    twice the per-entry variance; halving the mean squared magnitude
    recovers N0.
    """
    if not book.repeated_pairs:
        raise ValueError("pilot book has no repeated configurations; "
                         "use a dataset1-style book for noise estimation")
    a, b = np.array(book.repeated_pairs).T
    diff = obs.z[:, a] - obs.z[:, b]
    return float(np.mean(np.abs(diff) ** 2) / 2.0)


def dft_unmix(z: np.ndarray, k: int, m: int) -> np.ndarray:
    """Apply F^+ = F^H / K: recover M time-domain taps per pilot block."""
    if z.shape[0] != k:
        raise ValueError("observation block count does not match K")
    return np.fft.ifft(z, axis=0)[:m]


def _extended_rows(omega_hat: np.ndarray) -> int:
    return omega_hat.shape[0] + 1


def _gram_and_cross(x: np.ndarray, omega_hat: np.ndarray, block: int = 4096):
    """Gram matrix of the extended pilot rows and X @ extended^H.

    The extended matrix [1...1; omega_hat] is +/-1 valued and can be huge
    at full scale, so both products are accumulated over column blocks.
    """
    rows = _extended_rows(omega_hat)
    c = omega_hat.shape[1]
    gram = np.zeros((rows, rows))
    cross = np.zeros((x.shape[0], rows), dtype=complex)
    for start in range(0, c, block):
        cols = slice(start, min(start + block, c))
        ext = np.empty((rows, cols.stop - start))
        ext[0] = 1.0
        ext[1:] = omega_hat[:, cols]
        gram += ext @ ext.T
        cross += x[:, cols] @ ext.T
    return gram, cross


def _solve_right_pinv(x: np.ndarray, omega_hat: np.ndarray):
    """Solve Y = X @ pinv([1...1; omega_hat]) via the Gram system.

    Requires full row rank; raises :class:`RankDeficientError` otherwise
    instead of silently returning a minimum-norm guess.  Ill-conditioned
    but nonsingular Gram matrices fall back to an SVD solve.
    """
    rows = _extended_rows(omega_hat)
    if omega_hat.shape[1] < rows:
        raise RankDeficientError(
            f"{omega_hat.shape[1]} pilot blocks cannot determine {rows} unknowns "
            "per tap; use a book with C >= N+1 or the reduced estimator")
    gram, cross = _gram_and_cross(x, omega_hat)
    evals = np.linalg.eigvalsh(gram)
    tol = evals[-1] * rows * np.finfo(float).eps
    if evals[0] <= tol:
        raise RankDeficientError("extended pilot matrix is rank deficient")
    cond = evals[-1] / evals[0]
    if cond > GRAM_CONDITION_LIMIT:
        est = np.linalg.lstsq(gram, cross.T, rcond=None)[0].T
    else:
        est = cho_solve(cho_factor(gram), cross.T).T
    return est, float(cond)


def _model_residual(z, est, omega_hat, amp, k):
    taps = est[:, :1] + est[:, 1:] @ omega_hat
    return float(np.linalg.norm(z - amp * np.fft.fft(taps, n=k, axis=0)))


def ls_full(obs: PilotObservations, book: PilotBook, cfg: ScenarioConfig) -> EstimateFull:
    """Full least-squares estimate of h_d and V from exhaustive pilots.

    Needs C >= N+1 pilot blocks and a full-row-rank extended book.  The
    pseudo-inverse is never materialised: the estimate comes from the
    right-side Gram system, whose condition number is reported.
    """
    amp = np.sqrt(cfg.power / cfg.bandwidth)
    x = dft_unmix(obs.z, cfg.k, cfg.m) / amp
    est, cond = _solve_right_pinv(x, book.omega_hat.astype(np.int8))
    h_d = est[:, 0].copy()
    v = est[:, 1:].T.copy()
    resid = _model_residual(obs.z, est, book.omega_hat, amp, cfg.k)
    return EstimateFull(h_d=h_d, v=v, residual_norm=resid, gram_cond=cond)


def reduce_book(omega_hat: np.ndarray, g: ArrayGeometry) -> np.ndarray:
    """A^T omega_hat: sum intended signs over each surface column.

    The reduction matrix A = 1_{N_V} (x) I_{N_H} is never materialised;
    rows are summed per horizontal index.
    """
    if omega_hat.shape[0] != g.n:
        raise ValueError("pilot book size does not match the array geometry")
    return omega_hat.reshape(g.n_v, g.n_h, -1).sum(axis=0)


def ls_reduced(obs: PilotObservations, book: PilotBook, g: ArrayGeometry,
               cfg: ScenarioConfig) -> EstimateReduced:
    """Dimension-reduced least squares assuming column-constant channels.

    Substituting V = A V_row shrinks the unknowns per tap from N+1 to
    N_H+1, which a plain N-column Hadamard book determines uniquely.
    """
    amp = np.sqrt(cfg.power / cfg.bandwidth)
    x = dft_unmix(obs.z, cfg.k, cfg.m) / amp
    reduced = reduce_book(book.omega_hat, g)
    est, cond = _solve_right_pinv(x, reduced)
    resid = _model_residual(obs.z, est, reduced, amp, cfg.k)
    return EstimateReduced(h_d=est[:, 0].copy(), v_row=est[:, 1:].T.copy(),
                           residual_norm=resid, gram_cond=cond)


def discover_structure(est: EstimateFull, g: ArrayGeometry,
                       deviation_threshold: float = 0.1,
                       score_threshold: float = 0.9,
                       energy_floor: float = 0.01) -> StructureReport:
    """Quantify how constant the estimated V is within each surface column.

    For every (column, tap) cell the relative deviation std/|mean| over
    the column members is computed; the score is the fraction of cells
    below ``deviation_threshold`` among cells holding at least
    ``energy_floor`` of the peak cell energy.
    """
    v = est.v.reshape(g.n_v, g.n_h, -1)
    mean = v.mean(axis=0)
    std = v.std(axis=0)
    mean_mag = np.abs(mean)
    deviation = np.where(mean_mag > 0, std / np.where(mean_mag > 0, mean_mag, 1.0),
                         np.where(std > 0, 1.0, 0.0))
    energy = mean_mag ** 2 + std ** 2
    energetic = energy >= energy_floor * energy.max() if energy.max() > 0 else energy > 0
    if energetic.any():
        score = float(np.mean(deviation[energetic] < deviation_threshold))
    else:
        score = 0.0
    grouping = "column-constant" if score > score_threshold else "none"
    return StructureReport(deviation=deviation, score=score, grouping=grouping)


def absorbed_truth(ch: ChannelRealization, cfg: ScenarioConfig):
    """Ground truth in the absorbed sign convention, for ideal hardware.

    Without coupling each element's reflection is one of two constants
    (gamma_off, gamma_on), i.e. mean + swing * sign.  The estimators see
    the +/-1 signs as pilots, so they recover h_d + mean * V^T 1 and
    swing * V; this helper computes that pair for comparing against.
    """
    g_off, g_on = state_reflection_pair(cfg.circuit, cfg.f_c)
    mean = (g_on + g_off) / 2.0
    swing = (g_on - g_off) / 2.0
    h_d_eff = ch.h_d + mean * ch.v.T.sum(axis=1)
    return h_d_eff, swing * ch.v
