"""Uniform planar array geometry: element positions and response vectors.

Elements sit in the yz-plane on a rectangular grid with the first element
at the origin, indexed row by row.  Boresight is the +x axis; azimuth is
measured in the xy-plane and elevation towards +z.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayGeometry:
    n_h: int                  # elements per horizontal row
    n_v: int                  # elements per vertical column
    spacing: float = 0.4      # element pitch in wavelengths
    wavelength: float = SPEED_OF_LIGHT / 4e9  # metres

    def __post_init__(self):
        if self.n_h < 1 or self.n_v < 1:
            raise ValueError("array must have at least one element per axis")
        if self.spacing <= 0 or self.wavelength <= 0:
            raise ValueError("spacing and wavelength must be positive")

    @property
    def n(self) -> int:
        return self.n_h * self.n_v


def horizontal_index(n: np.ndarray | int, g: ArrayGeometry):
    """i(n) = mod(n-1, N_H) for 1-based element index n."""
    return np.mod(np.asarray(n) - 1, g.n_h)


def vertical_index(n: np.ndarray | int, g: ArrayGeometry):
    """j(n) = floor((n-1)/N_H) for 1-based element index n."""
    return (np.asarray(n) - 1) // g.n_h


def element_position(n: int, g: ArrayGeometry) -> np.ndarray:
    """Position [0, i(n)*s*lambda, j(n)*s*lambda] of 1-based element n."""
    if not 1 <= n <= g.n:
        raise IndexError(f"element index {n} out of range 1..{g.n}")
    step = g.spacing * g.wavelength
    return np.array([0.0, horizontal_index(n, g) * step, vertical_index(n, g) * step])


def element_positions(g: ArrayGeometry) -> np.ndarray:
    """All element positions as an (N, 3) array, row-major element order."""
    ns = np.arange(1, g.n + 1)
    step = g.spacing * g.wavelength
    return np.column_stack([
        np.zeros(g.n),
        horizontal_index(ns, g) * step,
        vertical_index(ns, g) * step,
    ])


def directivity(azimuth: float, elevation: float) -> float:
    """Element gain pattern cos^2(azimuth) * cos(elevation), in [0, 1]."""
    if abs(azimuth) > np.pi / 2 or abs(elevation) > np.pi / 2:
        raise ValueError("angles must lie in [-pi/2, pi/2]")
    return float(np.cos(azimuth) ** 2 * np.cos(elevation))


def wave_vector(azimuth: float, elevation: float, wavelength: float) -> np.ndarray:
    return (2.0 * np.pi / wavelength) * np.array([
        np.cos(elevation) * np.cos(azimuth),
        np.cos(elevation) * np.sin(azimuth),
        np.sin(elevation),
    ])


def array_response(azimuth: float, elevation: float, g: ArrayGeometry) -> np.ndarray:
    """Plane-wave response: sqrt(gain) * exp(j k . u_n) for every element."""
    gain = directivity(azimuth, elevation)
    k = wave_vector(azimuth, elevation, g.wavelength)
    phases = element_positions(g) @ k
    return np.sqrt(gain) * np.exp(1j * phases)


def azimuth_response(azimuth: float, g: ArrayGeometry) -> np.ndarray:
    """Horizontal-plane response cos(phi) * exp(j 2 pi s sin(phi) i(n)).

    Equal to :func:`array_response` at zero elevation; the phase depends
    only on the horizontal index, so all elements of one column see
    identical signal copies.
    """
    if abs(azimuth) > np.pi / 2:
        raise ValueError("azimuth must lie in [-pi/2, pi/2]")
    i = horizontal_index(np.arange(1, g.n + 1), g)
    phase = 2.0 * np.pi * g.spacing * np.sin(azimuth)
    return np.cos(azimuth) * np.exp(1j * phase * i)


def column_index_map(g: ArrayGeometry) -> np.ndarray:
    """Element -> IRS-column map n |-> i(n), used for dimension reduction."""
    return horizontal_index(np.arange(1, g.n + 1), g)
