"""Command-line entry point: ``wmsnsim run|batch|compare|gen-mobility|gen-trace``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .batch import BatchSpec, compare_golden, parse_emit, run_batch, run_single
from .config import ConfigError
from .engine import RngStream
from .mobility import (
    GmParams,
    RwpParams,
    WalkParams,
    generate_gauss_markov,
    generate_intruder_walk,
    generate_random_waypoint,
    serialize_bonnmotion,
)
from .video import DEFAULT_FPS, GopPattern, SizeParams, serialize_encoder_trace, synthesize_trace

EXIT_OK, EXIT_MISMATCH, EXIT_ERROR = 0, 1, 2


def _pair(text: str) -> tuple[float, float]:
    sep = "x" if "x" in text else ","
    try:
        a, b = (float(v) for v in text.split(sep))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two numbers like 80x80 or 0,0, got {text!r}") from None
    return a, b


def _seed_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wmsnsim", description="Simulate video delivery over multimedia sensor networks.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="one replication of a config")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--seed", type=int, default=None, help="overrides seed-set")
    r.add_argument("--out", required=True, type=Path)
    r.add_argument("--emit", default="result,debug,rtrace", help="comma list of result, debug, rtrace")

    b = sub.add_parser("batch", help="seeds x sweep points with a CSV summary")
    b.add_argument("--config", required=True, type=Path)
    g = b.add_mutually_exclusive_group()
    g.add_argument("--seeds", type=int, default=20, help="replications, seeds base..base+N-1")
    g.add_argument("--seed-list", type=_seed_list, default=None)
    b.add_argument("--base-seed", type=int, default=1)
    b.add_argument("--out", required=True, type=Path)
    b.add_argument("--emit", default="", help="per-run files to keep as well as the CSV")
    b.add_argument("--jobs", type=int, default=1)

    c = sub.add_parser("compare", help="byte comparison against golden files")
    c.add_argument("--golden", required=True, type=Path)
    c.add_argument("--produced", required=True, type=Path)

    m = sub.add_parser("gen-mobility", help="write a BonnMotion trace")
    m.add_argument("--model", choices=("rwp", "gauss-markov", "walk"), required=True)
    m.add_argument("--out", required=True, type=Path)
    m.add_argument("--seed", type=int, default=1)
    m.add_argument("--nodes", type=int, default=1)
    m.add_argument("--duration", type=float, default=100.0)
    m.add_argument("--field", type=_pair, default=(80.0, 80.0))
    m.add_argument("--v-min", type=float, default=0.5)
    m.add_argument("--v-max", type=float, default=1.5)
    m.add_argument("--pause", type=float, default=0.0)
    m.add_argument("--alpha", type=float, default=0.75)
    m.add_argument("--mean-speed", type=float, default=1.0)
    m.add_argument("--speed-sigma", type=float, default=0.2)
    m.add_argument("--direction-sigma", type=float, default=0.3)
    m.add_argument("--interval", type=float, default=1.0)
    m.add_argument("--speed", type=float, default=1.5, help="walk step speed")
    m.add_argument("--start", type=_pair, default=(0.0, 0.0), help="walk start x,y")

    t = sub.add_parser("gen-trace", help="write a synthetic encoder trace")
    t.add_argument("--out", required=True, type=Path)
    t.add_argument("--seed", type=int, default=1)
    t.add_argument("--pattern", default="IBBPBBPBBPBB")
    t.add_argument("--frames", type=int, default=132)
    t.add_argument("--fps", type=float, default=DEFAULT_FPS)
    t.add_argument("--size-i", type=float, default=SizeParams.mean_i)
    t.add_argument("--size-p", type=float, default=SizeParams.mean_p)
    t.add_argument("--size-b", type=float, default=SizeParams.mean_b)
    t.add_argument("--cv", type=float, default=SizeParams.cv)
    return p


def _cmd_run(a) -> int:
    run_single(a.config, a.seed, a.out, parse_emit(a.emit))
    return EXIT_OK


def _cmd_batch(a) -> int:
    seeds = a.seed_list if a.seed_list is not None else BatchSpec.replicate(a.base_seed, a.seeds)
    spec = BatchSpec(a.config, seeds, a.out, parse_emit(a.emit), jobs=a.jobs)
    result = run_batch(spec)
    print(f"{len(result.rows)} rows written to {spec.out_dir / 'summary.csv'}")
    return EXIT_OK


def _cmd_compare(a) -> int:
    ok, report = compare_golden(a.produced, a.golden)
    print("\n".join(report))
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_MISMATCH


def _cmd_gen_mobility(a) -> int:
    rng = RngStream(a.seed, "mobility")
    if a.model == "rwp":
        trace = generate_random_waypoint(RwpParams(a.v_min, a.v_max, a.pause, a.duration), a.field, rng, a.nodes)
    elif a.model == "gauss-markov":
        params = GmParams(a.alpha, a.mean_speed, a.speed_sigma, a.direction_sigma, a.interval, a.duration)
        trace = generate_gauss_markov(params, a.field, rng, a.nodes)
    else:
        trace = generate_intruder_walk(WalkParams(a.speed, a.interval, a.duration), a.start, a.field, rng)
    a.out.write_text(serialize_bonnmotion(trace))
    return EXIT_OK


def _cmd_gen_trace(a) -> int:
    sizes = SizeParams(a.size_i, a.size_p, a.size_b, a.cv)
    frames = synthesize_trace(GopPattern(a.pattern), a.frames, sizes, RngStream(a.seed, "video"), a.fps)
    a.out.write_text(serialize_encoder_trace(frames))
    return EXIT_OK


COMMANDS = {
    "run": _cmd_run,
    "batch": _cmd_batch,
    "compare": _cmd_compare,
    "gen-mobility": _cmd_gen_mobility,
    "gen-trace": _cmd_gen_trace,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
