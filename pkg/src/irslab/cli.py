"""File-based pipeline runner: scenario-gen -> pilots -> estimate -> configure -> report.

Stages communicate only through files inside one run directory, so every
intermediate is inspectable and each stage can be rerun in isolation.
Reruns with identical flags and seeds produce bit-identical outputs; the
IRSLAB_SEED environment variable overrides the scenario seed.

Exit codes: 0 success, 2 configuration error, 3 rank error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io as irsio
from .channel import (ScenarioConfig, ScenarioError, SERVICE_CENTER,
                      SERVICE_HALF_X, SERVICE_HALF_Y, ChannelRealization,
                      generate_scenario, ofdm_response, sum_rate)
from .circuit import CircuitParams, coupling_kernel
from .configurator import (all_off_benchmark, best_pilot_benchmark,
                           binary_power_method, build_quadratic_form,
                           evaluate_configuration, states_from_c)
from .estimation import (RankDeficientError, discover_structure,
                         estimate_noise_psd, ls_full, ls_reduced)
from .geometry import ArrayGeometry
from .pilots import PilotObservations, build_pilot_book, simulate_reception

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RANK = 3
EXIT_IO = 4

PAPER_SCALE = {"nh": 64, "nv": 64, "k": 500, "m": 20}


class ConfigError(ValueError):
    pass


def _manifest_hash(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path: Path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _ue_tag(ue_id: int) -> str:
    return f"ue{ue_id:03d}"


def _noise_seed(seed: int, ue_id: int) -> int:
    return seed * 1_000_003 + ue_id


def _states_to_bits(states: np.ndarray) -> str:
    return "".join("1" if s else "0" for s in states)


def _bits_to_states(bits: str) -> np.ndarray:
    return np.array([ch == "1" for ch in bits], dtype=bool)


def _load_scenario(run: Path):
    path = run / "scenario.json"
    if not path.exists():
        raise ConfigError(f"{path} not found; run scenario-gen first")
    return irsio.read_scenario(path)


def _load_channel(run: Path, cfg: ScenarioConfig, ue: irsio.UeSpec) -> ChannelRealization:
    tag = _ue_tag(ue.id)
    h_d = irsio.read_matrix(run / "channels" / f"{tag}_hd.irsz").ravel()
    v = irsio.read_matrix(run / "channels" / f"{tag}_v.irsz")
    meta = _read_json(run / "channels" / f"{tag}_meta.json")
    return ChannelRealization(h_d=h_d, v=v, eta=meta["eta_s"], paths_direct=(),
                              paths_ap_irs=(), paths_irs_ue=(), los=meta["los"])


def _parallel(jobs: int, fn, items):
    if jobs <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# stages


def cmd_scenario_gen(args) -> int:
    seed = int(os.environ.get("IRSLAB_SEED", args.seed))
    if args.scale == "paper":
        print("warning: paper scale (64x64, K=500, dataset1 pilots) is a "
              "long-running, memory-heavy job", file=sys.stderr)
        for key, value in PAPER_SCALE.items():
            setattr(args, key, value)
    n = args.nh * args.nv
    if n < 1 or n & (n - 1):
        raise ConfigError(f"N = nh*nv = {n} must be a power of two for the "
                          "Hadamard pilot layouts")
    if not 0.0 <= args.nlos_fraction <= 1.0:
        raise ConfigError("--nlos-fraction must lie in [0, 1]")

    geometry = ArrayGeometry(args.nh, args.nv, wavelength=299_792_458.0 / args.carrier)
    cfg = ScenarioConfig(f_c=args.carrier, bandwidth=args.bandwidth, k=args.k,
                         m=args.m, power=args.power, geometry=geometry,
                         circuit=CircuitParams(), rng_seed=seed)

    rng = np.random.default_rng([seed, 0xC0FFEE])
    n_nlos = round(args.nlos_fraction * args.ues)
    nlos_ids = set(rng.choice(args.ues, size=n_nlos, replace=False).tolist()) \
        if args.ues else set()
    ues = []
    for ue_id in range(args.ues):
        x = SERVICE_CENTER[0] + rng.uniform(-SERVICE_HALF_X, SERVICE_HALF_X)
        y = SERVICE_CENTER[1] + rng.uniform(-SERVICE_HALF_Y, SERVICE_HALF_Y)
        ues.append(irsio.UeSpec(ue_id, float(x), float(y), ue_id not in nlos_ids))

    run = Path(args.run)
    run.mkdir(parents=True, exist_ok=True)
    irsio.write_scenario(run / "scenario.json", cfg, ues)
    manifest = {"stage": "scenario-gen", "seed": seed, "nh": args.nh, "nv": args.nv,
                "k": args.k, "m": args.m, "power": args.power, "ues": args.ues,
                "nlos_fraction": args.nlos_fraction}
    manifest["manifest_hash"] = _manifest_hash(manifest)
    _write_json(run / "scenario.manifest.json", manifest)

    (run / "channels").mkdir(exist_ok=True)
    for ue in ues:
        ch = generate_scenario(cfg, (ue.x_m, ue.y_m), ue.los, seed=[seed, 1, ue.id])
        tag = _ue_tag(ue.id)
        irsio.write_matrix(run / "channels" / f"{tag}_hd.irsz", ch.h_d[:, None])
        irsio.write_matrix(run / "channels" / f"{tag}_v.irsz", ch.v)
        _write_json(run / "channels" / f"{tag}_meta.json",
                    {"ue_id": ue.id, "eta_s": ch.eta, "los": ue.los,
                     "manifest_hash": manifest["manifest_hash"]})
    print(f"scenario: {args.ues} UEs ({n_nlos} NLOS), N={n}, K={args.k}, "
          f"M={args.m}, seed={seed} -> {run}")
    return EXIT_OK


def cmd_pilots(args) -> int:
    run = Path(args.run)
    cfg, ues = _load_scenario(run)
    book = build_pilot_book(args.layout, cfg.geometry.n)
    kernel = coupling_kernel(cfg.geometry) if args.coupling == "on" else None
    manifest = {"stage": "pilots", "layout": args.layout, "noise": args.noise,
                "coupling": args.coupling, "seed": cfg.rng_seed}
    manifest["manifest_hash"] = _manifest_hash(manifest)
    out = run / "pilots"
    out.mkdir(exist_ok=True)
    _write_json(out / "manifest.json", manifest)

    def one(ue: irsio.UeSpec):
        ch = _load_channel(run, cfg, ue)
        obs = simulate_reception(ch, book, cfg,
                                 coupling_enabled=args.coupling == "on",
                                 noise_enabled=args.noise == "on",
                                 noise_seed=_noise_seed(cfg.rng_seed, ue.id),
                                 ue_id=ue.id, kernel=kernel)
        irsio.write_matrix(out / f"{_ue_tag(ue.id)}_z.irsz", obs.z)

    _parallel(args.jobs, one, ues)
    print(f"pilots: layout={args.layout} C={book.c} noise={args.noise} "
          f"coupling={args.coupling} for {len(ues)} UEs")
    return EXIT_OK


def _load_observations(run: Path, cfg: ScenarioConfig, ue: irsio.UeSpec) -> PilotObservations:
    z = irsio.read_matrix(run / "pilots" / f"{_ue_tag(ue.id)}_z.irsz")
    return PilotObservations(z=z, ue_id=ue.id,
                             noise_seed=_noise_seed(cfg.rng_seed, ue.id))


def cmd_estimate(args) -> int:
    run = Path(args.run)
    cfg, ues = _load_scenario(run)
    pilots_manifest = _read_json(run / "pilots" / "manifest.json")
    book = build_pilot_book(pilots_manifest["layout"], cfg.geometry.n)
    out = run / "estimates"
    out.mkdir(exist_ok=True)
    manifest = {"stage": "estimate", "mode": args.mode,
                "pilots_hash": pilots_manifest["manifest_hash"]}
    manifest["manifest_hash"] = _manifest_hash(manifest)
    _write_json(out / f"manifest_{args.mode}.json", manifest)

    if args.mode == "noise":
        per_ue = {}
        for ue in ues:
            obs = _load_observations(run, cfg, ue)
            per_ue[_ue_tag(ue.id)] = estimate_noise_psd(obs, book)
        doc = {"n0_hat_w_per_hz": float(np.mean(list(per_ue.values()))),
               "per_ue": per_ue, "manifest_hash": manifest["manifest_hash"]}
        _write_json(out / "noise.json", doc)
        print(f"noise PSD estimate: {doc['n0_hat_w_per_hz']:.4e} W/Hz "
              f"(true {cfg.noise_psd:.4e})")
        return EXIT_OK

    if args.mode == "full":
        structure = {}

        def one(ue: irsio.UeSpec):
            obs = _load_observations(run, cfg, ue)
            est = ls_full(obs, book, cfg)
            tag = _ue_tag(ue.id)
            irsio.write_matrix(out / f"{tag}_hd_full.irsz", est.h_d[:, None])
            irsio.write_matrix(out / f"{tag}_v_full.irsz", est.v)
            report = discover_structure(est, cfg.geometry)
            structure[tag] = {"score": report.score, "grouping": report.grouping}

        _parallel(args.jobs, one, ues)
        _write_json(out / "structure.json",
                    {"per_ue": structure, "manifest_hash": manifest["manifest_hash"]})
        print(f"full LS estimates for {len(ues)} UEs; structure report written")
        return EXIT_OK

    def one(ue: irsio.UeSpec):
        obs = _load_observations(run, cfg, ue)
        est = ls_reduced(obs, book, cfg.geometry, cfg)
        tag = _ue_tag(ue.id)
        irsio.write_matrix(out / f"{tag}_hd_reduced.irsz", est.h_d[:, None])
        irsio.write_matrix(out / f"{tag}_vrow.irsz", est.v_row)

    _parallel(args.jobs, one, ues)
    print(f"reduced LS estimates for {len(ues)} UEs")
    return EXIT_OK


def cmd_configure(args) -> int:
    run = Path(args.run)
    cfg, ues = _load_scenario(run)
    out = run / "results"
    out.mkdir(exist_ok=True)
    kernel = coupling_kernel(cfg.geometry)
    manifest = {"stage": "configure", "method": args.method}
    manifest["manifest_hash"] = _manifest_hash(manifest)
    _write_json(out / f"manifest_{args.method}.json", manifest)

    book = None
    if args.method == "best-pilot":
        pilots_manifest = _read_json(run / "pilots" / "manifest.json")
        book = build_pilot_book(pilots_manifest["layout"], cfg.geometry.n)

    def one(ue: irsio.UeSpec):
        ch = _load_channel(run, cfg, ue)
        tag = _ue_tag(ue.id)
        doc = {"ue_id": ue.id, "method": args.method,
               "manifest_hash": manifest["manifest_hash"]}
        if args.method == "power":
            h_d = irsio.read_matrix(run / "estimates" / f"{tag}_hd_reduced.irsz").ravel()
            v_row = irsio.read_matrix(run / "estimates" / f"{tag}_vrow.irsz")
            from .estimation import EstimateReduced
            est = EstimateReduced(h_d=h_d, v_row=v_row, residual_norm=0.0, gram_cond=0.0)
            result = binary_power_method(build_quadratic_form(est, cfg.geometry.n_v),
                                         geometry=cfg.geometry)
            states = result.states
            doc.update(objective=result.objective, iterations=result.iterations,
                       termination=result.termination,
                       c="".join("+" if x > 0 else "-" for x in result.c))
        elif args.method == "best-pilot":
            obs = _load_observations(run, cfg, ue)
            col, est_rate = best_pilot_benchmark(obs, book, cfg)
            states = book.states(col)
            doc.update(column=col, estimated_rate_bps=est_rate)
        else:
            states = all_off_benchmark(cfg.geometry)
        doc["states"] = _states_to_bits(states)
        doc["rate_bps"] = evaluate_configuration(states, ch, cfg,
                                                 coupling_enabled=True, kernel=kernel)
        _write_json(out / f"{tag}_{args.method}.json", doc)
        return doc["rate_bps"]

    rates = _parallel(args.jobs, one, ues)
    print(f"configure[{args.method}]: mean rate "
          f"{np.mean(rates) / 1e6:.3f} Mbit/s over {len(ues)} UEs")
    return EXIT_OK


def cmd_report(args) -> int:
    run = Path(args.run)
    cfg, ues = _load_scenario(run)
    rows = []
    for ue in ues:
        tag = _ue_tag(ue.id)
        row = {"ue_id": ue.id, "los": ue.los}
        for method, field in (("all-off", "rate_all_off"),
                              ("best-pilot", "rate_best_pilot"),
                              ("power", "rate_power_method")):
            path = run / "results" / f"{tag}_{method}.json"
            if not path.exists():
                raise ConfigError(f"{path} missing; run configure --method {method}")
            row[field] = _read_json(path)["rate_bps"]
        rows.append(row)
    irsio.export_rate_csv(run / "rates.csv", rows)

    sums = {k: sum(r[k] for r in rows) or 0.0
            for k in ("rate_all_off", "rate_best_pilot", "rate_power_method")}
    wins = sum(r["rate_power_method"] >= r["rate_best_pilot"] for r in rows)
    summary = {
        "ue_count": len(rows),
        "sum_rate_bps": sums,
        "ratio_power_over_all_off":
            sums["rate_power_method"] / sums["rate_all_off"] if sums["rate_all_off"] else None,
        "ratio_power_over_best_pilot":
            sums["rate_power_method"] / sums["rate_best_pilot"] if sums["rate_best_pilot"] else None,
        "fraction_power_ge_best_pilot": wins / len(rows) if rows else None,
    }
    _write_json(run / "summary.json", summary)
    if rows:
        print(f"report: sum-rate power/all-off = "
              f"{summary['ratio_power_over_all_off']:.2f}x, "
              f"power >= best-pilot for {wins}/{len(rows)} UEs")
    else:
        print("report: no UEs")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irslab",
        description="binary-IRS OFDM pipeline: synthesize, estimate, configure, report")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario-gen", help="generate scenario + per-UE channels")
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--scale", choices=("desk", "paper"), default="desk")
    p.add_argument("--nh", type=int, default=8)
    p.add_argument("--nv", type=int, default=8)
    p.add_argument("--k", type=int, default=64, help="subcarriers")
    p.add_argument("--m", type=int, default=8, help="FIR taps")
    p.add_argument("--carrier", type=float, default=4e9)
    p.add_argument("--bandwidth", type=float, default=1e7)
    p.add_argument("--power", type=float, default=10.0, help="transmit power (W)")
    p.add_argument("--ues", type=int, default=10)
    p.add_argument("--nlos-fraction", type=float, default=0.27)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_scenario_gen)

    p = sub.add_parser("pilots", help="synthesize received pilot blocks")
    p.add_argument("--run", required=True)
    p.add_argument("--layout", choices=("dataset1", "dataset2"), required=True)
    p.add_argument("--noise", choices=("on", "off"), default="on")
    p.add_argument("--coupling", choices=("on", "off"), default="on")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_pilots)

    p = sub.add_parser("estimate", help="noise / full LS / reduced LS estimation")
    p.add_argument("--run", required=True)
    p.add_argument("--mode", choices=("full", "reduced", "noise"), required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("configure", help="choose a surface configuration per UE")
    p.add_argument("--run", required=True)
    p.add_argument("--method", choices=("power", "best-pilot", "all-off"), required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_configure)

    p = sub.add_parser("report", help="rates CSV + sum-rate summary")
    p.add_argument("--run", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RankDeficientError as exc:
        print(f"rank error: {exc}", file=sys.stderr)
        return EXIT_RANK
    except (irsio.MatrixFileError, FileNotFoundError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ScenarioError, KeyError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
