"""Command-line interface.

Subcommands: synth (scene generation), select (band selection), unmix
(abundance estimation), clique (maximum-clique utility), bench
(experiment harness). Exit codes: 0 success, 2 usage error, 3 input or
parse error, 4 numeric failure.

Conventions: machine-readable files use 0-based band indices and 17
significant digits; DIMACS files and the clique printout are 1-based.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataio, harness
from .cliques import (
    build_adjacency,
    dimacs_read,
    maximum_clique,
    maximum_clique_bruteforce,
)
from .exceptions import (
    BudgetExceededError,
    ConvergenceError,
    DegenerateSolutionError,
    DimacsParseError,
    InputError,
    ParameterError,
    SolverError,
)
from .kernels import gram_matrix
from .mixing import random_endmembers, synth_scene
from .selection import ccbs, gcbs, gkkm_select
from .params import auto_params
from .kernels import gram_power
from .unmixing import unmix_scene

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4


def _add_seed(parser, help_extra=""):
    parser.add_argument(
        "--seed", type=int, default=0,
        help="random seed; deterministic subcommands accept it for "
             "interface uniformity" + help_extra,
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bandclique",
        description="Coherence-based band selection and kernel unmixing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser(
        "synth", help="generate a synthetic mixed scene",
        description="Writes <out>_pixels.csv, <out>_abundances.csv, "
                    "<out>_endmembers.csv and <out>_meta.json.",
    )
    src = p_synth.add_mutually_exclusive_group(required=True)
    src.add_argument("--endmembers", help="endmember CSV (L rows x R columns)")
    src.add_argument(
        "--random-endmembers", metavar="L,R",
        help="generate smooth random endmembers of this size",
    )
    p_synth.add_argument("--model", choices=("lmm", "gbm", "pnmm"), required=True)
    p_synth.add_argument("--delta", type=float, help="bilinear weight (gbm only)")
    p_synth.add_argument("--xi", type=float, help="elementwise exponent (pnmm only)")
    p_synth.add_argument("--snr-db", type=float, help="noise SNR in dB (omit for noiseless)")
    p_synth.add_argument("--pixels", type=int, required=True)
    p_synth.add_argument("--out", required=True, help="output path prefix")
    _add_seed(p_synth)
    p_synth.set_defaults(func=cmd_synth)

    p_select = sub.add_parser(
        "select", help="select a band dictionary",
        description="Writes a JSON dictionary with 0-based sorted indices.",
    )
    p_select.add_argument("--endmembers", required=True)
    p_select.add_argument("--strategy", choices=("gcbs", "ccbs", "gkkm"), required=True)
    p_select.add_argument(
        "--target-m", type=int, default=30,
        help="target dictionary size (sets threshold and bandwidth)",
    )
    p_select.add_argument(
        "--permute-seed", type=int,
        help="gcbs only: randomize the band order with this seed",
    )
    p_select.add_argument("--lambda", dest="penalty", type=float, default=4.0,
                          help="gkkm only: size penalty")
    p_select.add_argument("--restarts", type=int, default=3, help="gkkm only")
    p_select.add_argument("--m-grid", metavar="LO,HI",
                          help="gkkm only: cluster-count range")
    p_select.add_argument("--sigma2", type=float,
                          help="gkkm only: bandwidth override")
    p_select.add_argument("--node-budget", type=int,
                          help="ccbs only: abort the clique search after this many nodes")
    p_select.add_argument("--out", required=True, help="output JSON path")
    _add_seed(p_select)
    p_select.set_defaults(func=cmd_select)

    p_unmix = sub.add_parser(
        "unmix", help="estimate abundances for a scene",
        description="Writes <out>_abundances.csv (NaN rows for failed "
                    "pixels; all-NaN for --method lssvr, which fits "
                    "reflectances only) and <out>_details.csv; prints a "
                    "timing summary.",
    )
    p_unmix.add_argument("--pixels", required=True)
    p_unmix.add_argument("--endmembers", required=True)
    p_unmix.add_argument("--dictionary", help="band dictionary JSON from 'select'")
    p_unmix.add_argument("--mu-reg", type=float, default=1e-2)
    p_unmix.add_argument("--method", choices=("skhype", "lssvr"), default="skhype")
    p_unmix.add_argument("--sigma2", type=float, help="bandwidth override")
    p_unmix.add_argument("--threads", type=int, default=1,
                         help="worker cap; results do not depend on it")
    p_unmix.add_argument("--out", required=True, help="output path prefix")
    _add_seed(p_unmix)
    p_unmix.set_defaults(func=cmd_unmix)

    p_clique = sub.add_parser(
        "clique", help="exact maximum clique of a graph",
        description="Prints '<size>: <vertices>' with 1-based vertices "
                    "(DIMACS convention).",
    )
    csrc = p_clique.add_mutually_exclusive_group(required=True)
    csrc.add_argument("--dimacs", help="DIMACS ascii graph file")
    csrc.add_argument("--gram", help="kernel matrix CSV (use with --mu0)")
    p_clique.add_argument("--mu0", type=float,
                          help="coherence threshold for --gram adjacency")
    p_clique.add_argument("--oracle", action="store_true",
                          help="use the exhaustive reference solver")
    p_clique.add_argument("--node-budget", type=int)
    _add_seed(p_clique)
    p_clique.set_defaults(func=cmd_clique)

    p_bench = sub.add_parser(
        "bench", help="run a benchmark experiment",
        description="Writes <out>_results.csv/.txt, <out>_nb_vs_rmse.dat, "
                    "<out>_raw.json and <out>_meta.json.",
    )
    p_bench.add_argument("--config", required=True, help="experiment config JSON")
    p_bench.add_argument("--out", required=True, help="output path prefix")
    p_bench.add_argument("--seed", type=int, help="override the config seed")
    p_bench.set_defaults(func=cmd_bench)

    return parser


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args, parser):
    if args.model != "gbm" and args.delta is not None:
        parser.error("--delta only applies to --model gbm")
    if args.model != "pnmm" and args.xi is not None:
        parser.error("--xi only applies to --model pnmm")
    if args.model == "gbm" and args.delta is None:
        parser.error("--model gbm requires --delta")
    if args.model == "pnmm" and args.xi is None:
        parser.error("--model pnmm requires --xi")

    if args.endmembers:
        M = dataio.read_endmembers_csv(args.endmembers)
    else:
        try:
            L, R = (int(tok) for tok in args.random_endmembers.split(","))
        except ValueError:
            parser.error("--random-endmembers expects 'L,R' (two integers)")
        M = random_endmembers(L, R, seed=np.random.SeedSequence([args.seed, 1]))

    scene = synth_scene(
        M, args.pixels, args.model, delta=args.delta, xi=args.xi,
        snr_db=args.snr_db, seed=args.seed,
    )
    paths = dataio.save_scene(scene, args.out)
    print(f"wrote {paths['pixels']} ({scene.n_pixels} pixels x {scene.n_bands} bands)")
    return EXIT_OK


def cmd_select(args, parser):
    if args.strategy in ("gcbs", "ccbs") and args.target_m < 2:
        parser.error("--target-m must be >= 2 for coherence strategies")
    M = dataio.read_endmembers_csv(args.endmembers)
    K1 = gram_matrix(M, 1.0)
    if args.strategy == "gcbs":
        order = None
        if args.permute_seed is not None:
            order = np.random.default_rng(args.permute_seed).permutation(M.shape[0])
        dictionary = gcbs(K1, args.target_m, order=order)
    elif args.strategy == "ccbs":
        dictionary = ccbs(K1, args.target_m, node_budget=args.node_budget)
    else:
        if args.sigma2 is not None:
            sigma2 = args.sigma2
        else:
            sigma2 = auto_params(K1, args.target_m).sigma2
        if args.m_grid:
            try:
                lo, hi = (int(tok) for tok in args.m_grid.split(","))
            except ValueError:
                parser.error("--m-grid expects 'LO,HI' (two integers)")
        else:
            lo, hi = 2, max(3, M.shape[0] // 5)
        dictionary = gkkm_select(
            gram_power(K1, sigma2), args.penalty, range(lo, hi + 1),
            restarts=args.restarts, seed=args.seed,
        )
    dataio.save_dictionary(dictionary, args.out)
    print(
        f"{dictionary.strategy.lower()}: {dictionary.size} bands, "
        f"coherence {dictionary.coherence:.4f} -> {args.out}"
    )
    return EXIT_OK


def cmd_unmix(args, parser):
    pixels = dataio.read_matrix_csv(args.pixels, "pixels")
    M = dataio.read_endmembers_csv(args.endmembers)
    dictionary = None
    if args.dictionary:
        dictionary = dataio.load_dictionary(args.dictionary)
    result = unmix_scene(
        pixels, M, dictionary=dictionary, mu_reg=args.mu_reg,
        sigma2=args.sigma2, method=args.method, n_threads=args.threads,
    )
    out = str(args.out)
    dataio.write_matrix_csv(out + "_abundances.csv", result.abundances())
    details = np.column_stack([
        np.arange(result.n_pixels, dtype=float),
        result.balances(),
        result.residual_norms(),
    ])
    header = "pixel,u,residual_norm"
    lines = ["# " + header]
    failed = {i for i, _ in result.failures}
    for i in range(result.n_pixels):
        status = "failed" if i in failed else "ok"
        lines.append(
            f"{i},{dataio.MACHINE_FLOAT_FMT % details[i, 1]},"
            f"{dataio.MACHINE_FLOAT_FMT % details[i, 2]},{status}"
        )
    Path(out + "_details.csv").write_text("\n".join(lines) + "\n")

    n_bands_used = len(dictionary.indices) if dictionary else M.shape[0]
    print(
        f"method={args.method} bands={n_bands_used}/{M.shape[0]} "
        f"pixels={result.n_pixels} failures={result.n_failures} "
        f"unmix_time={result.elapsed_seconds:.3f}s"
    )
    return EXIT_OK


def cmd_clique(args, parser):
    if args.gram and args.mu0 is None:
        parser.error("--gram requires --mu0")
    if args.dimacs:
        path = Path(args.dimacs)
        if not path.exists():
            raise InputError(f"DIMACS file not found: {path}")
        graph = dimacs_read(path.read_text())
    else:
        K = dataio.read_matrix_csv(args.gram, "gram")
        if K.shape[0] != K.shape[1]:
            raise InputError("gram CSV must be square")
        if np.max(np.abs(K - K.T)) > 1e-12:
            raise InputError("gram CSV must be symmetric")
        K = np.triu(K, 1)
        K = K + K.T  # exact symmetry; diagonal ignored by the adjacency rule
        graph = build_adjacency(K, args.mu0)
    solver = maximum_clique_bruteforce if args.oracle else maximum_clique
    if args.oracle:
        clique = solver(graph)
    else:
        clique = solver(graph, node_budget=args.node_budget)
    vertices = " ".join(str(v + 1) for v in clique.vertices)
    print(f"{clique.size}: {vertices}")
    return EXIT_OK


def cmd_bench(args, parser):
    path = Path(args.config)
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"could not parse config JSON {path}: {exc}") from None
    if args.seed is not None:
        payload = dict(payload)
        payload["seed"] = args.seed
    try:
        config = harness.parse_config(payload)
    except ParameterError as exc:
        parser.error(str(exc))
    rows, records = harness.run_experiment(
        config, progress=lambda msg: print(f"[bench] {msg}", file=sys.stderr)
    )
    table = harness.write_experiment_outputs(config, rows, records, args.out)
    print(table)
    return EXIT_OK


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (DimacsParseError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, SolverError, BudgetExceededError,
            DegenerateSolutionError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
