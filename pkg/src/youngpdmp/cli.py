"""Command-line interface.

Every command writes ``manifest.json`` into ``--out``; ``youngpdmp replay``
reruns a manifest and reproduces the same files byte for byte.

Exit codes: 0 pass (or inconclusive), 1 fail, 2 error (bad parameters,
explosion alarm, malformed input).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, gibbs, jump_chain, pdmp, verify
from .params import DEFAULT, ParameterError, from_complex, parse_complex
from .partitions import YoungDiagram

log = logging.getLogger("youngpdmp")

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _versions() -> dict:
    return {"youngpdmp": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _write_distribution(path: Path, dist: dict) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["diagram", "probability"])
        for key, p in dist.items():
            label = "overflow" if key == jump_chain.OVERFLOW else YoungDiagram(key).to_json()
            writer.writerow([label, repr(float(p))])


def params_from_args(args):
    z_text = args.z if args.z is not None else "0.5"
    z = parse_complex(z_text)
    if args.z_prime is not None:
        zp = parse_complex(args.z_prime)
    else:
        zp = z.conjugate()
    return from_complex(z, zp, args.r)


def _manifest(args, command: str, extra: dict) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "func")}
    return {"command": command, "flags": flags, "versions": _versions(), **extra}


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- simulate ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    params = params_from_args(args)
    cfg = pdmp.SimConfig(params, mode=args.mode, subdiagram=args.subdiagram,
                         horizon=args.time, seed=args.seed, event_cap=args.event_cap)
    out = _out_dir(args)
    extra = {"params": params.describe(), "seed_rule": "SeedSequence(seed, spawn_key=(replica,))"}
    try:
        results = pdmp.run_ensemble(cfg, args.replicas, log_events=args.log_events,
                                    workers=args.workers)
    except pdmp.ExplosionError as err:
        log.error("explosion alarm: %s", err)
        _write_json(out / "manifest.json", _manifest(args, "simulate", {
            **extra, "explosion": True, "message": str(err)}))
        return EXIT_ERROR
    if args.log_events:
        for res in results:
            with (out / f"events-{res.index}.jsonl").open("w") as fh:
                for ev in res.events:
                    fh.write(ev.to_json() + "\n")
    _write_json(out / "finals.json", [res.final.to_dict() for res in results])
    hist = verify.histogram(res.final.shape_rows() for res in results)
    _write_distribution(out / "shapes.csv", hist)
    counts = [res.n_events for res in results]
    _write_json(out / "manifest.json", _manifest(args, "simulate", {
        **extra, "explosion": False, "mean_events": float(np.mean(counts)) if counts else 0.0,
        "max_events": max(counts, default=0)}))
    return EXIT_OK


# -- chain ---------------------------------------------------------------------

def cmd_chain(args) -> int:
    params = params_from_args(args)
    out = _out_dir(args)
    extra = {"params": params.describe()}
    if args.chain_cmd == "gillespie":
        cache: dict = {}
        finals = []
        counts = []
        for k in range(args.replicas):
            path = jump_chain.gillespie_run((), params, args.time, pdmp.replica_rng(args.seed, k),
                                            args.event_cap, cache)
            finals.append(path[-1][1].rows)
            counts.append(len(path) - 1)
        dist = verify.histogram(finals)
        extra.update({"mean_events": float(np.mean(counts)), "max_events": max(counts)})
    else:
        gen = jump_chain.build_generator(args.max_size, params)
        if args.chain_cmd == "transient":
            tr = jump_chain.transient_distribution(gen, (), args.time)
            dist = {lam.rows: p for lam, p in zip(tr.states, tr.probs)}
            dist[jump_chain.OVERFLOW] = tr.overflow_mass
            extra.update({"overflow_mass": tr.overflow_mass, "series_error": tr.series_error})
        else:
            st = jump_chain.stationary_distribution(gen)
            dist = {lam.rows: p for lam, p in zip(st.states, st.probs)}
            extra.update({"residual": st.residual, "boundary_mass": st.boundary_mass})
            if not st.converged:
                log.warning("stationary mass %.3g at the size boundary; raise --max-size",
                            st.boundary_mass)
    _write_distribution(out / "shapes.csv", dist)
    _write_json(out / "manifest.json", _manifest(args, f"chain {args.chain_cmd}", extra))
    return EXIT_OK


# -- verify ----------------------------------------------------------------------

def cmd_verify(args) -> int:
    name = args.verify_cmd
    if name == "rowsums":
        report = verify.rowsums_check(args.max_size)
    elif name == "identity":
        report = verify.identity_trials(args.trials, args.seed)
    elif name == "combinatorics":
        report = verify.combinatorics_check(args.max_size)
    else:
        params = params_from_args(args)
        if name == "claim4a":
            report = verify.claim_4a_test(params, args.time, args.replicas, args.max_size,
                                          args.seed, args.workers, event_cap=args.event_cap)
        elif name == "claim5a":
            report = verify.claim_5a_test(params, args.r_prime, args.time, args.replicas,
                                          args.seed, args.workers, event_cap=args.event_cap)
        elif name == "stationarity":
            report = verify.stationarity_test(params, args.max_size, args.burn_in, args.time,
                                              args.replicas, args.seed, args.workers,
                                              gibbs_start_horizon=args.gibbs_start,
                                              event_cap=args.event_cap)
        else:
            report = verify.single_particle_test(params, args.replicas, args.seed,
                                                 event_cap=args.event_cap)
    out = _out_dir(args)
    _write_json(out / "report.json", report)
    _write_json(out / "manifest.json", _manifest(args, f"verify {name}", {
        "verdict": report["verdict"],
        **{k: report[k] for k in ("mean_events", "max_events", "native_events",
                                  "lifted_events") if k in report}}))
    print(f"{name}: {report['verdict']}")
    return {verify.FAIL: EXIT_FAIL, verify.ERROR: EXIT_ERROR}.get(report["verdict"], EXIT_OK)


# -- gibbs-sample -------------------------------------------------------------------

def cmd_gibbs_sample(args) -> int:
    if (args.shape is None) == (args.dist is None):
        raise ValueError("give exactly one of --shape or --dist")
    if args.shape is not None:
        dist = {YoungDiagram.from_json(args.shape): 1.0}
    else:
        with open(args.dist, newline="") as fh:
            rows = list(csv.DictReader(fh))
        dist = {YoungDiagram.from_json(row["diagram"]): float(row["probability"]) for row in rows
                if row["diagram"] != "overflow" and float(row["probability"]) > 0}
        dist = verify.normalize(dist)
    rng = np.random.default_rng(args.seed)
    states = [gibbs.sample_gibbs(dist, args.r, rng) for _ in range(args.n)]
    out = _out_dir(args)
    with (out / "samples.jsonl").open("w") as fh:
        for state in states:
            fh.write(state.to_json() + "\n")
    _write_json(out / "manifest.json", _manifest(args, "gibbs-sample", {}))
    return EXIT_OK


# -- replay -----------------------------------------------------------------------

def cmd_replay(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    command = manifest["command"].split()
    flags = dict(manifest["flags"])
    flags["out"] = args.out
    argv = command[:1] + command[1:]
    parser = build_parser()
    ns = parser.parse_args(argv + ["--out", args.out])
    for key, value in flags.items():
        setattr(ns, key, value)
    return ns.func(ns)


# -- parser -----------------------------------------------------------------------

def _add_param_flags(p) -> None:
    p.add_argument("--z", default=None, help='z as "a+bi" or a decimal (default 0.5)')
    p.add_argument("--z-prime", default=None, help="z' (default: conjugate of z)")
    p.add_argument("--r", type=float, default=float(DEFAULT.r), help="truncation level")


def _add_run_flags(p, time=1.0, replicas=10**4) -> None:
    p.add_argument("--time", type=float, default=time,
                   help=f"horizon (default {time}; 30 for verify stationarity)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicas", type=int, default=replicas)
    p.add_argument("--event-cap", type=int, default=pdmp.DEFAULT_EVENT_CAP)
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (capped by ${pdmp.WORKERS_ENV})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="youngpdmp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run replicas of the particle process")
    _add_param_flags(p)
    _add_run_flags(p)
    p.add_argument("--mode", choices=pdmp.MODES, default=pdmp.FULL)
    p.add_argument("--subdiagram", default=None, help='JSON rows, "single" or "row:k"')
    p.add_argument("--log-events", action="store_true")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("chain", help="jump process on diagrams")
    p.add_argument("chain_cmd", choices=("gillespie", "transient", "stationary"))
    _add_param_flags(p)
    _add_run_flags(p)
    p.add_argument("--max-size", type=int, default=12)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_chain)

    p = sub.add_parser("verify", help="exact identities and claim tests")
    p.add_argument("verify_cmd", choices=("rowsums", "identity", "combinatorics", "claim4a",
                                          "claim5a", "stationarity", "single-particle"))
    _add_param_flags(p)
    _add_run_flags(p, time=None)
    p.add_argument("--max-size", type=int, default=None,
                   help="8 for rowsums/combinatorics, 14 for claim tests")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--r-prime", type=float, default=2.0)
    p.add_argument("--burn-in", type=float, default=10.0)
    p.add_argument("--gibbs-start", type=float, default=0.0,
                   help="also start an ensemble from the stationary Gibbs measure")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gibbs-sample", help="sample Gibbs states")
    p.add_argument("--shape", default=None, help='diagram as JSON rows, e.g. "[2,1]"')
    p.add_argument("--dist", default=None, help="CSV with diagram,probability columns")
    p.add_argument("-n", type=int, default=1)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_gibbs_sample)

    p = sub.add_parser("replay", help="rerun a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "command", None) == "verify" and args.max_size is None:
        args.max_size = 8 if args.verify_cmd in ("rowsums", "combinatorics") else 14
    if getattr(args, "command", None) == "verify" and args.time is None:
        args.time = 30.0 if args.verify_cmd == "stationarity" else 1.0
    try:
        return args.func(args)
    except ParameterError as err:
        witness = f" (witness k={err.witness})" if err.witness is not None else ""
        log.error("invalid parameters: %s%s", err, witness)
        return EXIT_ERROR
    except (ValueError, OSError, json.JSONDecodeError) as err:
        log.error("%s", err)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
