"""Binary surface configuration via the sign-projected power method.

The total received power is a quadratic form c^H B c in the sign vector
c = [1; column signs], with B the Gram matrix of the estimated channel.
A power iteration whose iterates are projected onto {+1,-1} entries
climbs this form; two reference configurators (best pilot column, all
elements off) serve as benchmarks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, ScenarioConfig, ofdm_response, sum_rate
from .circuit import ON_SIGN, CouplingKernel, coupling_kernel, reflection_vector
from .estimation import EstimateReduced
from .geometry import ArrayGeometry, column_index_map
from .pilots import PilotBook, PilotObservations

TERMINATION_CONVERGED = "converged"
TERMINATION_CYCLE = "cycle_detected"
TERMINATION_ITERATION_CAP = "iteration_cap"


@dataclass(frozen=True)
class QuadraticForm:
    """Hermitian PSD matrix of the received-power objective."""

    b: np.ndarray = field(repr=False)  # (N_H+1, N_H+1) complex

    @property
    def size(self) -> int:
        return self.b.shape[0]

    def objective(self, c: np.ndarray) -> float:
        c = np.asarray(c, dtype=float)
        return float(np.real(c @ self.b @ c))


@dataclass(frozen=True)
class ConfigurationResult:
    c: np.ndarray                     # (N_H+1,) +/-1, first entry +1
    objective: float
    iterations: int
    termination: str
    states: np.ndarray | None = None  # per-element bool, column-replicated


def build_quadratic_form(est: EstimateReduced, n_v: int) -> QuadraticForm:
    """B = G^H G with G = [h_d, N_V * V_row^T]; PSD by construction."""
    g = np.concatenate([est.h_d[:, None], n_v * est.v_row.T], axis=1)
    return QuadraticForm(b=g.conj().T @ g)


def sign_pm(x: np.ndarray) -> np.ndarray:
    """Project onto +/-1 entries: +1 when the real part is >= 0."""
    return np.where(np.real(x) >= 0.0, 1.0, -1.0)


def binary_power_method(q: QuadraticForm, init: np.ndarray | None = None,
                        max_iters: int = 200,
                        geometry: ArrayGeometry | None = None) -> ConfigurationResult:
    """Power iteration projected onto binary sign vectors.

    Each step computes d = B c and takes the sign of conj(d_1) * d,
    which pins the uncontrollable path to +1.  Sign iterations can
    cycle, so visited states are tracked and the best iterate seen is
    returned; exact zeros of the real part deterministically map to +1.
    """
    if init is None:
        c = np.ones(q.size)
    else:
        c = np.asarray(init, dtype=float)
        if c.shape != (q.size,) or not np.isin(c, (-1.0, 1.0)).all():
            raise ValueError("init must be a +/-1 vector matching the form size")
        c = c * c[0]  # canonical orbit: flipping all signs leaves c^H B c unchanged
    best_c, best_obj = c, q.objective(c)
    seen = {c.astype(np.int8).tobytes()}
    termination = TERMINATION_ITERATION_CAP
    iterations = max_iters
    for it in range(1, max_iters + 1):
        d = q.b @ c
        c_next = sign_pm(np.conj(d[0]) * d)
        obj = q.objective(c_next)
        if obj > best_obj:
            best_c, best_obj = c_next, obj
        if np.array_equal(c_next, c):
            termination, iterations = TERMINATION_CONVERGED, it
            break
        key = c_next.astype(np.int8).tobytes()
        if key in seen:
            termination, iterations = TERMINATION_CYCLE, it
            break
        seen.add(key)
        c = c_next
    states = states_from_c(best_c, geometry) if geometry is not None else None
    return ConfigurationResult(c=best_c, objective=best_obj,
                               iterations=iterations, termination=termination,
                               states=states)


def multi_start_power_method(q: QuadraticForm, restarts: int = 8, seed: int = 0,
                             max_iters: int = 200,
                             geometry: ArrayGeometry | None = None) -> ConfigurationResult:
    """Run the power method from all-ones plus random inits, keep the best.

    Ties are broken towards the earliest init, so results are
    reproducible for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    best = binary_power_method(q, None, max_iters, geometry)
    for _ in range(max(0, restarts - 1)):
        init = np.where(rng.integers(0, 2, q.size) > 0, 1.0, -1.0)
        res = binary_power_method(q, init, max_iters, geometry)
        if res.objective > best.objective:
            best = res
    return best


def states_from_c(c: np.ndarray, g: ArrayGeometry) -> np.ndarray:
    """Replicate the per-column signs of c over the surface (True = on)."""
    c = np.asarray(c)
    if c.shape != (g.n_h + 1,):
        raise ValueError(f"c must have length N_H+1={g.n_h + 1}, got {c.shape}")
    if c[0] != 1:
        raise ValueError("first entry of c must be +1")
    return c[1 + column_index_map(g)] == ON_SIGN


def best_pilot_benchmark(obs: PilotObservations, book: PilotBook,
                         cfg: ScenarioConfig) -> tuple[int, float]:
    """Best configuration among those tried during pilot transmission.

    Per column the direct channel estimate is sqrt(B/P) z; returns the
    column index with the highest estimated rate and that rate.
    """
    h_hat = np.sqrt(cfg.bandwidth / cfg.power) * obs.z
    rates = [sum_rate(h_hat[:, c], cfg) for c in range(book.c)]
    best = int(np.argmax(rates))
    return best, float(rates[best])


def all_off_benchmark(g: ArrayGeometry) -> np.ndarray:
    """Uniform metal surface: every element off."""
    return np.zeros(g.n, dtype=bool)


def evaluate_configuration(states: np.ndarray, ch: ChannelRealization,
                           cfg: ScenarioConfig, coupling_enabled: bool = True,
                           kernel: CouplingKernel | None = None) -> float:
    """Achieved rate of a state vector on the true channel.

    Coupling defaults to on: honest evaluation uses the full hardware
    model regardless of what the configurator assumed.
    """
    if kernel is None and coupling_enabled:
        kernel = coupling_kernel(cfg.geometry)
    omega = reflection_vector(states, kernel, cfg.circuit, cfg.f_c, coupling_enabled)
    h_bar = ofdm_response(ch.h_d, ch.v, omega, cfg.k)
    return sum_rate(h_bar, cfg)
