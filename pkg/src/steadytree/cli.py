"""Experiment runner.

Subcommands: exact-masses, sample, growth, conditioned, meanfield, ffh,
verify.  Every run is fully determined by (config, seed, build): a seed
is mandatory (no wall-clock seeding), per-replica streams are derived by
counter-based spawning from the master seed, and outputs carry a JSON
manifest.  A plain key=value config file (INI sections) supplies
defaults which command-line flags override.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__


def _child_seed(master: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=(index,))


def _rng(master: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(_child_seed(master, index))


def _write_manifest(path: Path, command: str, params: dict, seed: int) -> None:
    manifest = {
        "command": command,
        "params": {k: v for k, v in sorted(params.items()) if v is not None},
        "seed": seed,
        "seed_derivation": "numpy SeedSequence(seed, spawn_key=(replica,))",
        "build": "steadytree-" + __version__,
    }
    path.write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")


def _outdir(args) -> Path:
    out = args.out_dir or os.environ.get("STEADYTREE_OUTDIR", ".")
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    return max(1, int(os.environ.get("STEADYTREE_WORKERS", "1")))


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------


def cmd_exact_masses(args) -> int:
    from .exact_enum import class_mass_table

    out = _outdir(args) / (args.out or "masses_n%d.csv" % args.n)
    table = class_mass_table(args.n)
    with open(out, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["n", "canonical_code", "mass_num", "mass_den"])
        for code in sorted(table):
            m = table[code]
            wr.writerow([args.n, code.hex(), m.numerator, m.denominator])
    _write_manifest(out.with_suffix(".manifest.json"), "exact-masses",
                    {"n": args.n}, args.seed)
    print("wrote %s (%d classes)" % (out, len(table)))
    return 0


def _sample_one(payload):
    from . import samplers as sm

    law, seed_entropy, spawn, k, x, root_age, size_cap = payload
    rng = np.random.default_rng(np.random.SeedSequence(seed_entropy,
                                                       spawn_key=(spawn,)))
    try:
        if law == "rde":
            t = sm.sample_rde(rng, size_cap=size_cap)
            return len(t), t.degrees()[t.root], None
        if law == "genealogy":
            pair = sm.sample_genealogy_pair(rng, leaf_cap=size_cap)
            t = pair.cluster
            return len(t), t.degrees()[t.root], pair.aged.to_json()
        if law == "cluster-given-size":
            aged = sm.sample_cluster_given_size(k, rng)
            return len(aged), aged.tree.degrees()[aged.tree.root], aged.to_json()
        if law == "mgw":
            aged = sm.sample_mgw(rng, root_age=root_age, size_cap=size_cap)
            return len(aged), aged.tree.degrees()[aged.tree.root], aged.to_json()
        if law == "hx":
            aged = sm.sample_hx(x, rng, root_age=root_age, size_cap=size_cap)
            return len(aged), aged.tree.degrees()[aged.tree.root], aged.to_json()
        if law == "spinal":
            sp = sm.sample_spinal(x, rng, root_age=root_age, size_cap=size_cap)
            return (len(sp.aged), sp.aged.tree.degrees()[0],
                    sp.aged.to_json())
        if law == "age-vector":
            ages = sm.sample_age_vector_given_size(k, rng)
            return len(ages), 0, json.dumps(ages.tolist())
        if law == "wst":
            ages = sm.sample_age_vector_given_size(k, rng)
            t = sm.sample_weighted_spanning_tree(ages, rng)
            return len(t), t.degrees()[t.root], None
        raise ValueError("unknown law %r" % (law,))
    except sm.SizeCapExceeded:
        return -1, -1, None


def cmd_sample(args) -> int:
    outdir = _outdir(args)
    stem = args.out or ("sample_%s" % args.law)
    payloads = [
        (args.law, args.seed, i, args.k, args.x, args.root_age, args.size_cap)
        for i in range(args.replicas)
    ]
    nworkers = _workers(args)
    if nworkers > 1 and args.replicas >= 64:
        with ProcessPoolExecutor(max_workers=nworkers) as pool:
            results = list(pool.map(_sample_one, payloads, chunksize=256))
    else:
        results = [_sample_one(p) for p in payloads]
    sizes = np.array([r[0] for r in results], dtype=np.int64)
    degrees = np.array([r[1] for r in results], dtype=np.int64)
    aborted = int((sizes < 0).sum())
    npz = outdir / (stem + ".npz")
    np.savez_compressed(npz, sizes=sizes, root_degrees=degrees)
    if args.trees:
        with open(outdir / (stem + ".jsonl"), "w") as fh:
            written = 0
            for r in results:
                if r[2] is not None and written < args.trees:
                    fh.write(r[2] + "\n")
                    written += 1
    _write_manifest(outdir / (stem + ".manifest.json"), "sample", {
        "law": args.law, "replicas": args.replicas, "k": args.k, "x": args.x,
        "root_age": args.root_age, "size_cap": args.size_cap,
        "aborted": aborted,
    }, args.seed)
    print("wrote %s (%d replicas, %d cap-aborted)" % (npz, args.replicas, aborted))
    return 0


def cmd_growth(args) -> int:
    from . import growth as gr

    outdir = _outdir(args)
    rng = _rng(args.seed)
    stem = args.out or ("growth_%s" % args.mode)
    if args.mode == "explosion":
        x = gr.bulk_explosion_times(args.replicas, rng)
        np.savez_compressed(outdir / (stem + ".npz"), t_inf=x)
    elif args.mode == "jumps":
        j = gr.jumps_to_exceed(args.target, rng, args.replicas)
        np.savez_compressed(outdir / (stem + ".npz"), jumps=j)
    elif args.mode == "scaling":
        taus = [float(v) for v in args.taus.split(",")]
        stats = gr.bulk_explosion_scaling(args.replicas, rng, taus)
        with open(outdir / (stem + ".csv"), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["seed", "tau", "statistic"])
            for tau in taus:
                for v in stats[tau]:
                    wr.writerow([args.seed, tau, repr(float(v))])
    elif args.mode == "trace":
        trace = gr.run_growth(rng, init_size=args.init_size)
        trace.to_csv(outdir / (stem + ".csv"))
    elif args.mode == "stationary-trace":
        trace = gr.run_stationary(rng, args.horizon)
        trace.to_csv(outdir / (stem + ".csv"))
    else:
        raise ValueError("unknown growth mode %r" % (args.mode,))
    _write_manifest(outdir / (stem + ".manifest.json"), "growth", {
        "mode": args.mode, "replicas": args.replicas, "target": args.target,
        "taus": args.taus, "init_size": args.init_size, "horizon": args.horizon,
    }, args.seed)
    print("wrote %s outputs to %s" % (args.mode, outdir / stem))
    return 0


def cmd_conditioned(args) -> int:
    from . import growth as gr
    from .closed_forms import EXPLODE, SURVIVE, ConditionalKernel

    outdir = _outdir(args)
    stem = args.out or "conditioned"
    mode = EXPLODE if args.mode == "explode" else SURVIVE
    kern = ConditionalKernel(s=args.s, t=args.t, mode=mode,
                             stationary=args.stationary)
    rng = _rng(args.seed)
    sizes = np.empty(args.replicas, dtype=np.int64)
    for i in range(args.replicas):
        tr = gr.run_conditioned(rng, kern, size_cap=args.size_cap)
        sizes[i] = tr.sizes_after[-1] if len(tr.sizes_after) else 1
        if tr.aborted:
            sizes[i] = -1
    np.savez_compressed(outdir / (stem + ".npz"), sizes=sizes)
    _write_manifest(outdir / (stem + ".manifest.json"), "conditioned", {
        "mode": args.mode, "s": args.s, "t": args.t,
        "stationary": args.stationary, "replicas": args.replicas,
    }, args.seed)
    print("wrote %s" % (outdir / (stem + ".npz")))
    return 0


def cmd_meanfield(args) -> int:
    from . import meanfield as mf

    outdir = _outdir(args)
    stem = args.out or "meanfield"
    lam = args.lam if args.lam is not None else args.n ** -0.5
    snap_times = ([float(v) for v in args.snapshots.split(",")]
                  if args.snapshots else [args.horizon])
    state, events, snaps = mf.mf_run(args.n, lam, args.horizon,
                                     _rng(args.seed),
                                     snapshot_times=snap_times,
                                     keep_events=False)
    with open(outdir / (stem + ".csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "k", "v_k"])
        for t in sorted(snaps):
            for k, v in snaps[t].items():
                wr.writerow([t, k, repr(v)])
    _write_manifest(outdir / (stem + ".manifest.json"), "meanfield", {
        "n": args.n, "lambda": lam, "horizon": args.horizon,
        "snapshots": snap_times,
    }, args.seed)
    print("wrote %s" % (outdir / (stem + ".csv")))
    return 0


def cmd_ffh(args) -> int:
    from . import infinite_ff as ff

    outdir = _outdir(args)
    stem = args.out or ("ffh_h%d" % args.height)
    all_fires = []
    for i in range(args.replicas):
        seed = int(_child_seed(args.seed, i).generate_state(1)[0])
        state = ff.ffh_init(args.height, seed, args.horizon)
        fires, _, _ = ff.ffh_run(state, args.horizon)
        all_fires.extend((i,) + f for f in fires)
        if i == 0 and args.snapshot:
            (outdir / (stem + "_state.json")).write_text(
                ff.state_snapshot_json(state))
    with open(outdir / (stem + "_fires.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["replica", "t", "igniting_leaf", "component_size"])
        for rep, t, key, size in all_fires:
            wr.writerow([rep, repr(float(t)), ".".join(map(str, key)), size])
    _write_manifest(outdir / (stem + ".manifest.json"), "ffh", {
        "height": args.height, "horizon": args.horizon,
        "replicas": args.replicas,
    }, args.seed)
    print("wrote %s (%d fires)" % (outdir / (stem + "_fires.csv"), len(all_fires)))
    return 0


def cmd_verify(args) -> int:
    from . import verify
    from .stattest import reports_to_jsonl, reports_to_markdown

    reports, ok = verify.run_suite(args.suite)
    outdir = _outdir(args)
    if args.report:
        reports_to_jsonl(reports, outdir / (args.report + ".jsonl"))
        (outdir / (args.report + ".md")).write_text(
            reports_to_markdown(reports, "suite %s" % args.suite))
    print("suite %s: %s" % (args.suite, "PASS" if ok else "FAIL"))
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    out = {}
    for section in parser.sections():
        for key, val in parser.items(section):
            out["%s.%s" % (section, key)] = val
    return out


def _apply_config(args, config: dict, section: str) -> None:
    casts = {int: int, float: float}
    for key, val in config.items():
        sec, _, name = key.partition(".")
        if sec not in (section, "common"):
            continue
        name = name.replace("-", "_")
        if getattr(args, name, None) is None:
            current_default = args.__dict__.get(name)
            try:
                setattr(args, name, json.loads(val))
            except (json.JSONDecodeError, ValueError):
                setattr(args, name, val)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="steadytree",
        description="steady state cluster simulators and verification",
    )
    ap.add_argument("--config", help="key=value config file with sections")
    ap.add_argument("--seed", type=int, default=None,
                    help="master seed (required; no wall-clock seeding)")
    ap.add_argument("--out-dir", default=None,
                    help="output directory (env STEADYTREE_OUTDIR)")
    ap.add_argument("--workers", type=int, default=None,
                    help="replica worker pool size (env STEADYTREE_WORKERS)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact-masses", help="exact class-mass table")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_exact_masses)

    p = sub.add_parser("sample", help="draw replicas from a static law")
    p.add_argument("--law", required=True,
                   choices=["rde", "genealogy", "mgw", "hx", "spinal",
                            "cluster-given-size", "age-vector", "wst"])
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--root-age", type=float, default=None)
    p.add_argument("--size-cap", type=int, default=10**6)
    p.add_argument("--trees", type=int, default=0,
                   help="also write this many trees as JSON lines")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("growth", help="growth-process trajectories")
    p.add_argument("--mode", default="explosion",
                   choices=["explosion", "jumps", "scaling", "trace",
                            "stationary-trace"])
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--target", type=int, default=10**4)
    p.add_argument("--taus", default="10,20")
    p.add_argument("--init-size", type=int, default=1)
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_growth)

    p = sub.add_parser("conditioned", help="explosion-conditioned size runs")
    p.add_argument("--mode", required=True, choices=["survive", "explode"])
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--stationary", action="store_true")
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--size-cap", type=int, default=10**6)
    p.add_argument("--out")
    p.set_defaults(func=cmd_conditioned)

    p = sub.add_parser("meanfield", help="mean field forest fire run")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--lam", type=float, default=None,
                   help="lightning rate per vertex (default n^-1/2)")
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--snapshots", default=None,
                   help="comma separated snapshot times")
    p.add_argument("--out")
    p.set_defaults(func=cmd_meanfield)

    p = sub.add_parser("ffh", help="truncated infinite forest fire")
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--horizon", type=float, default=4.0)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--snapshot", action="store_true",
                   help="dump the first replica's initial state as JSON")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ffh)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", default="figure1")
    p.add_argument("--report", default=None,
                   help="basename for jsonl + markdown reports")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    config = _load_config(args.config)
    _apply_config(args, config, args.command.replace("-", "_"))
    if args.seed is None:
        ap.error("--seed is required (wall-clock seeding is not allowed)")
    if getattr(args, "replicas", 1) is None:
        args.replicas = 1000
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
