"""Per-element reflection circuit and mutual-coupling model of a binary IRS.

Each surface element is a lumped resonant circuit whose capacitance is
switched between two values by a diode.  Coupling between neighbouring
elements leaks intended capacitance, so the realised capacitance of an
element is a distance-weighted convex combination of the intended ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .geometry import ArrayGeometry

# Global sign convention shared by pilot synthesis and the configurator:
# +1 maps to the "on" state, -1 to "off".  Estimated channels absorb the
# complex scalar relating these signs to the physical reflection values.
ON_SIGN = +1


@dataclass(frozen=True)
class CircuitParams:
    """Lumped-circuit element values; defaults are the 4 GHz design."""

    l1: float = 2.8e-9      # series-branch inductance (H)
    l2: float = 0.8e-9      # varactor-branch inductance (H)
    r: float = 1.0          # effective resistance (ohm)
    z0: float = 377.0       # free-space impedance (ohm)
    c_off: float = 0.37e-12  # off-state capacitance (F)
    c_on: float = 0.5e-12    # on-state capacitance (F)

    def __post_init__(self):
        for name in ("l1", "l2", "r", "z0", "c_off", "c_on"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.c_off >= self.c_on:
            raise ValueError("c_off must be smaller than c_on")

    def state_capacitances(self, states: np.ndarray) -> np.ndarray:
        """Map a boolean state vector (True = on) to intended capacitances."""
        return np.where(np.asarray(states, dtype=bool), self.c_on, self.c_off)


@dataclass(frozen=True)
class CouplingKernel:
    """Row-stochastic capacitance-leakage weights between elements.

    ``weights`` is sparse CSR; entries below the truncation cutoff
    (relative to the diagonal) are dropped and rows re-normalised, which
    keeps 64x64 surfaces tractable without visibly changing the result.
    """

    weights: sparse.csr_matrix = field(repr=False)
    cutoff: float

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def toarray(self) -> np.ndarray:
        return self.weights.toarray()


def impedance(c: float | np.ndarray, f: float, params: CircuitParams) -> complex | np.ndarray:
    """Element input impedance for capacitance ``c`` at frequency ``f`` (Hz).

    Parallel combination of the mounting inductance with the series
    varactor branch (inductor, capacitor, loss resistance).
    """
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise ValueError("capacitance must be strictly positive")
    if f <= 0:
        raise ValueError("frequency must be strictly positive")
    jw = 1j * 2.0 * np.pi * f
    series = jw * params.l2 + 1.0 / (jw * c) + params.r
    z = (jw * params.l1 * series) / (jw * params.l1 + series)
    return complex(z) if z.ndim == 0 else z


def reflection_coefficient(c: float | np.ndarray, f: float, params: CircuitParams) -> complex | np.ndarray:
    """Reflection coefficient (Z - Z0)/(Z + Z0) of one element."""
    z = impedance(c, f, params)
    denom = z + params.z0
    if np.any(np.abs(denom) == 0.0):
        raise ZeroDivisionError("element impedance equals -Z0; reflection undefined")
    return (z - params.z0) / denom


def reflection_sweep(frequencies: np.ndarray, capacitances: np.ndarray,
                     params: CircuitParams) -> np.ndarray:
    """Diagnostic sweep: Gamma on a (capacitance x frequency) grid."""
    frequencies = np.atleast_1d(np.asarray(frequencies, dtype=float))
    capacitances = np.atleast_1d(np.asarray(capacitances, dtype=float))
    out = np.empty((capacitances.size, frequencies.size), dtype=complex)
    for j, f in enumerate(frequencies):
        out[:, j] = reflection_coefficient(capacitances, float(f), params)
    return out


def coupling_kernel(geometry: ArrayGeometry, wavelength: float | None = None,
                    cutoff: float = 1e-9) -> CouplingKernel:
    """Distance-decay leakage weights 100^(-d/lambda), row-normalised.

    The decay formally runs over every element pair, but entries below
    ``cutoff`` relative to the diagonal are dropped before normalising;
    with the default 1e-9 that is a radius of 4.5 wavelengths, and the
    resulting capacitances match the dense kernel to far better than 1e-6.
    """
    if wavelength is None:
        wavelength = geometry.wavelength
    n_h, n_v = geometry.n_h, geometry.n_v
    n = geometry.n
    # element grid pitch measured in units of the decay wavelength
    pitch = geometry.spacing * geometry.wavelength / wavelength
    # unnormalised weight 100^(-d/lambda) >= cutoff  <=>  grid distance <= reach
    reach = int(np.floor(np.log10(cutoff) / (-2.0 * pitch))) if cutoff > 0 else max(n_h, n_v)
    reach = min(reach, max(n_h, n_v) - 1)

    ii, jj = np.meshgrid(np.arange(n_h), np.arange(n_v), indexing="xy")
    ii = ii.ravel()  # horizontal index i(n) of each element, row-major order
    jj = jj.ravel()

    rows, cols, vals = [], [], []
    for di in range(-reach, reach + 1):
        for dj in range(-reach, reach + 1):
            dist = pitch * np.hypot(di, dj)
            w = 100.0 ** (-dist)
            if w < cutoff:
                continue
            keep = ((ii + di >= 0) & (ii + di < n_h)
                    & (jj + dj >= 0) & (jj + dj < n_v))
            src = np.flatnonzero(keep)
            rows.append(src)
            cols.append(src + di + dj * n_h)
            vals.append(np.full(src.size, w))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    weights = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    row_sums = np.asarray(weights.sum(axis=1)).ravel()
    weights = sparse.diags(1.0 / row_sums) @ weights
    return CouplingKernel(weights=weights.tocsr(), cutoff=cutoff)


def effective_capacitances(intended: np.ndarray, kernel: CouplingKernel,
                           params: CircuitParams) -> np.ndarray:
    """Realised capacitances: leakage-weighted mix of the intended ones."""
    intended = np.asarray(intended, dtype=bool)
    if intended.shape != (kernel.n,):
        raise ValueError(f"state vector has length {intended.shape}, kernel expects {kernel.n}")
    return kernel.weights @ params.state_capacitances(intended)


def reflection_vector(intended: np.ndarray, kernel: CouplingKernel,
                      params: CircuitParams, f_c: float,
                      coupling_enabled: bool = True) -> np.ndarray:
    """Per-element reflection coefficients omega for an intended state vector.

    With ``coupling_enabled=False`` the intended capacitances are used
    directly (ideal hardware), which is the regime where the pilot model
    has zero mismatch between intended and realised reflection.
    """
    intended = np.asarray(intended, dtype=bool)
    if coupling_enabled:
        caps = effective_capacitances(intended, kernel, params)
    else:
        caps = params.state_capacitances(intended)
    return np.asarray(reflection_coefficient(caps, f_c, params))


def state_reflection_pair(params: CircuitParams, f_c: float) -> tuple[complex, complex]:
    """(Gamma_off, Gamma_on) at the carrier, the two ideal-hardware values."""
    g_off = reflection_coefficient(params.c_off, f_c, params)
    g_on = reflection_coefficient(params.c_on, f_c, params)
    return complex(g_off), complex(g_on)
