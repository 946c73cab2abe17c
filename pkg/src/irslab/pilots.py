"""Hadamard pilot books and synthesis of received pilot blocks.

A pilot book is a sequence of intended +/-1 surface configurations, one
OFDM block per column.  Because the two element states are roughly 180
degrees apart, +/-1 entries are transmittable directly (+1 = on); any
complex scalar relating the signs to the physical reflection values is
absorbed into the estimated channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import hadamard as _sylvester

from . import circuit as _circuit
from .channel import ScenarioConfig
from .circuit import ON_SIGN, CouplingKernel, coupling_kernel


@dataclass(frozen=True)
class PilotBook:
    """Intended +/-1 configuration matrix, one column per pilot block.

    ``omega_hat`` doubles as the intended state matrix: +1 means "on".
    ``repeated_pairs`` lists disjoint column pairs with bit-identical
    states, found by exact matching; they carry no new channel
    information but let the receiver estimate the noise level.
    """

    omega_hat: np.ndarray = field(repr=False)   # (N, C) int8
    layout: str
    repeated_pairs: tuple[tuple[int, int], ...]

    @property
    def n(self) -> int:
        return self.omega_hat.shape[0]

    @property
    def c(self) -> int:
        return self.omega_hat.shape[1]

    def states(self, col: int) -> np.ndarray:
        """Boolean (True = on) state vector of one pilot column."""
        return self.omega_hat[:, col] == ON_SIGN


@dataclass(frozen=True)
class PilotObservations:
    """Received frequency-domain pilot blocks for one UE."""

    z: np.ndarray                # (K, C) complex
    ue_id: int | str | None = None
    noise_seed: int | None = None


def hadamard(n: int) -> np.ndarray:
    """Sylvester Hadamard matrix of order n (a power of two), int8 entries."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"Hadamard order must be a power of two, got {n}")
    return _sylvester(n, dtype=np.int8)


def find_repeated_pairs(omega_hat: np.ndarray) -> tuple[tuple[int, int], ...]:
    """Disjoint pairs of identical columns, matched exactly."""
    groups: dict[bytes, list[int]] = {}
    for c in range(omega_hat.shape[1]):
        groups.setdefault(omega_hat[:, c].tobytes(), []).append(c)
    pairs = []
    for cols in groups.values():
        pairs += [(cols[i], cols[i + 1]) for i in range(0, len(cols) - 1, 2)]
    return tuple(sorted(pairs))


def build_pilot_book(layout: str, n: int) -> PilotBook:
    """Construct the dataset1 (C = 4N) or dataset2 (C = N) pilot book.

    dataset1 stacks [H, -H, H_flip, -H_flip] where H_flip reverses each
    column top to bottom; dataset2 is the plain Hadamard matrix.
    """
    h = hadamard(n)
    layout = layout.lower()
    if layout == "dataset1":
        h_flip = h[::-1, :]
        omega_hat = np.concatenate([h, -h, h_flip, -h_flip], axis=1)
    elif layout == "dataset2":
        omega_hat = h
    else:
        raise ValueError(f"unknown pilot layout {layout!r}")
    return PilotBook(omega_hat=omega_hat, layout=layout,
                     repeated_pairs=find_repeated_pairs(omega_hat))


def custom_book(omega_hat: np.ndarray) -> PilotBook:
    """Wrap an explicit +/-1 matrix as a pilot book."""
    omega_hat = np.asarray(omega_hat)
    if not np.isin(omega_hat, (-1, 1)).all():
        raise ValueError("pilot book entries must be +/-1")
    omega_hat = omega_hat.astype(np.int8)
    return PilotBook(omega_hat=omega_hat, layout="custom",
                     repeated_pairs=find_repeated_pairs(omega_hat))


def noise_block(noise_seed, cols, k: int, n0: float) -> np.ndarray:
    """CN(0, n0) receiver noise for the given pilot columns.

    Each column draws from its own substream seeded by (noise_seed,
    column index), so results do not depend on block sizes or on the
    order in which columns are produced.
    """
    out = np.empty((k, len(cols)), dtype=complex)
    scale = np.sqrt(n0 / 2.0)
    for j, c in enumerate(cols):
        rng = np.random.default_rng([noise_seed, int(c)])
        re_im = rng.standard_normal((2, k))
        out[:, j] = scale * (re_im[0] + 1j * re_im[1])
    return out


def simulate_reception(ch, book: PilotBook, cfg: ScenarioConfig,
                       coupling_enabled: bool = True, noise_enabled: bool = True,
                       noise_seed: int = 0, ue_id=None,
                       kernel: CouplingKernel | None = None,
                       block_size: int = 2048) -> PilotObservations:
    """Received frequency-domain blocks Z (K x C) for a whole pilot book.

    Column c is sqrt(P/B) * F (h_d + V.T omega_c) + noise, where omega_c
    comes from the circuit model (with or without coupling leakage).
    Columns are processed in blocks so full-scale books never materialise
    an N x C reflection matrix.
    """
    if book.n != cfg.geometry.n:
        raise ValueError("pilot book size does not match the array geometry")
    if ch.v.shape != (cfg.geometry.n, cfg.m):
        raise ValueError("channel realisation does not match the scenario config")
    if coupling_enabled and kernel is None:
        kernel = coupling_kernel(cfg.geometry)

    amp = np.sqrt(cfg.power / cfg.bandwidth)
    z = np.empty((cfg.k, book.c), dtype=complex)
    for start in range(0, book.c, block_size):
        cols = np.arange(start, min(start + block_size, book.c))
        states = book.omega_hat[:, cols] == ON_SIGN
        caps = cfg.circuit.state_capacitances(states)
        if coupling_enabled:
            caps = kernel.weights @ caps
        omega = _circuit.reflection_coefficient(caps, cfg.f_c, cfg.circuit)
        taps = ch.h_d[:, None] + ch.v.T @ omega          # (M, block)
        z[:, cols] = amp * np.fft.fft(taps, n=cfg.k, axis=0)
        if noise_enabled:
            z[:, cols] += noise_block(noise_seed, cols, cfg.k, cfg.noise_psd)
    return PilotObservations(z=z, ue_id=ue_id,
                             noise_seed=noise_seed if noise_enabled else None)
