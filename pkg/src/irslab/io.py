"""Bit-exact file formats: binary matrices, scenario documents, rate CSVs.

Matrix files use a minimal fixed-layout binary format (magic "IRSZ",
little-endian header and payload) so any platform reads back exactly the
bytes another wrote, NaN payloads included.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass

import numpy as np

from .channel import ScenarioConfig
from .circuit import CircuitParams
from .geometry import ArrayGeometry

MAGIC = b"IRSZ"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHQQ")  # magic, version, element kind, rows, cols
_KIND_COMPLEX = 1                   # pair of little-endian f64 per entry
_KIND_FLOAT = 2                     # one little-endian f64 per entry
_KIND_DTYPE = {_KIND_COMPLEX: np.dtype("<c16"), _KIND_FLOAT: np.dtype("<f8")}


class MatrixFileError(IOError):
    """Base class for matrix-file format errors."""


class BadMagicError(MatrixFileError):
    pass


class VersionMismatchError(MatrixFileError):
    pass


class TruncatedPayloadError(MatrixFileError):
    pass


def write_matrix(path, matrix: np.ndarray) -> None:
    """Write a 2-D real or complex matrix; round-trips bit-exactly."""
    matrix = np.ascontiguousarray(matrix)
    if matrix.ndim != 2:
        raise ValueError("only 2-D matrices are supported")
    if np.iscomplexobj(matrix):
        kind, dtype = _KIND_COMPLEX, _KIND_DTYPE[_KIND_COMPLEX]
    else:
        kind, dtype = _KIND_FLOAT, _KIND_DTYPE[_KIND_FLOAT]
    payload = matrix.astype(dtype, copy=False)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, kind, *matrix.shape))
        fh.write(payload.tobytes())


def read_matrix(path) -> np.ndarray:
    """Read a matrix written by :func:`write_matrix`."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise TruncatedPayloadError(f"{path}: file shorter than the header")
        magic, version, kind, rows, cols = _HEADER.unpack(header)
        if magic != MAGIC:
            raise BadMagicError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise VersionMismatchError(f"{path}: format version {version}, "
                                       f"expected {FORMAT_VERSION}")
        if kind not in _KIND_DTYPE:
            raise MatrixFileError(f"{path}: unknown element kind {kind}")
        dtype = _KIND_DTYPE[kind]
        payload = fh.read()
    expected = rows * cols * dtype.itemsize
    if len(payload) != expected:
        raise TruncatedPayloadError(f"{path}: payload is {len(payload)} bytes, "
                                    f"expected {expected}")
    return np.frombuffer(payload, dtype=dtype).reshape(rows, cols).copy()


# ---------------------------------------------------------------------------
# scenario documents


@dataclass(frozen=True)
class UeSpec:
    id: int
    x_m: float
    y_m: float
    los: bool


_SCENARIO_KEYS = {"carrier_hz", "bandwidth_hz", "subcarriers", "taps", "power_w",
                  "noise_psd_w_per_hz", "nh", "nv", "spacing_wavelengths",
                  "circuit", "rng_seed", "ues"}
_CIRCUIT_KEYS = {"l1_h", "l2_h", "r_ohm", "z0_ohm", "c_off_f", "c_on_f"}


def scenario_to_dict(cfg: ScenarioConfig, ues) -> dict:
    return {
        "carrier_hz": cfg.f_c,
        "bandwidth_hz": cfg.bandwidth,
        "subcarriers": cfg.k,
        "taps": cfg.m,
        "power_w": cfg.power,
        "noise_psd_w_per_hz": cfg.noise_psd,
        "nh": cfg.geometry.n_h,
        "nv": cfg.geometry.n_v,
        "spacing_wavelengths": cfg.geometry.spacing,
        "circuit": {
            "l1_h": cfg.circuit.l1,
            "l2_h": cfg.circuit.l2,
            "r_ohm": cfg.circuit.r,
            "z0_ohm": cfg.circuit.z0,
            "c_off_f": cfg.circuit.c_off,
            "c_on_f": cfg.circuit.c_on,
        },
        "rng_seed": cfg.rng_seed,
        "ues": [{"id": u.id, "x_m": u.x_m, "y_m": u.y_m, "los": u.los} for u in ues],
    }


def write_scenario(path, cfg: ScenarioConfig, ues) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(cfg, ues), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_scenario(path):
    """Load a scenario document; returns (ScenarioConfig, [UeSpec])."""
    with open(path) as fh:
        doc = json.load(fh)
    missing = _SCENARIO_KEYS - set(doc)
    if missing:
        raise KeyError(f"scenario file {path} missing keys: {sorted(missing)}")
    missing_circuit = _CIRCUIT_KEYS - set(doc["circuit"])
    if missing_circuit:
        raise KeyError(f"scenario file {path} missing circuit keys: "
                       f"{sorted(missing_circuit)}")
    circ = doc["circuit"]
    wavelength = 299_792_458.0 / doc["carrier_hz"]
    cfg = ScenarioConfig(
        f_c=doc["carrier_hz"],
        bandwidth=doc["bandwidth_hz"],
        k=int(doc["subcarriers"]),
        m=int(doc["taps"]),
        power=doc["power_w"],
        noise_psd=doc["noise_psd_w_per_hz"],
        geometry=ArrayGeometry(int(doc["nh"]), int(doc["nv"]),
                               doc["spacing_wavelengths"], wavelength),
        circuit=CircuitParams(circ["l1_h"], circ["l2_h"], circ["r_ohm"],
                              circ["z0_ohm"], circ["c_off_f"], circ["c_on_f"]),
        rng_seed=int(doc["rng_seed"]),
    )
    ues = [UeSpec(int(u["id"]), float(u["x_m"]), float(u["y_m"]), bool(u["los"]))
           for u in doc["ues"]]
    return cfg, ues


# ---------------------------------------------------------------------------
# result reporting

RATE_CSV_FIELDS = ("ue_id", "los", "rate_all_off", "rate_best_pilot",
                   "rate_power_method")


def export_rate_csv(path, rows) -> None:
    """Write per-UE rates, ordered by increasing power-method rate.

    ``rows`` is an iterable of dicts with the RATE_CSV_FIELDS keys.
    """
    rows = sorted(rows, key=lambda r: r["rate_power_method"])
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RATE_CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in RATE_CSV_FIELDS})
