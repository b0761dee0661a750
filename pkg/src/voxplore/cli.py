"""Command-line entry point: ``explore --world W --config C --seed S --out DIR``."""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, load_config
from .mission import AbortedMission, Mission, warmup
from .world import WorldError, load_world


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="explore",
                                description="Run one simulated autonomous exploration mission.")
    p.add_argument("--world", required=True, help="world JSON file")
    p.add_argument("--config", help="mission config JSON (defaults for omitted keys)")
    p.add_argument("--seed", type=int, default=None,
                   help="unsigned 64-bit RNG seed (overrides the config's seed)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--ticks-max", type=int, default=None,
                   help="stop after this many simulation ticks")
    p.add_argument("--export-map", action="store_true", help="write map.txt")
    p.add_argument("--export-graph", action="store_true", help="write graph.json")
    p.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("explore: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    if args.ticks_max is not None and args.ticks_max < 0:
        print("explore: --ticks-max must be >= 0", file=sys.stderr)
        return 2
    try:
        world = load_world(args.world)
        config = load_config(args.config)
    except (WorldError, ConfigError, OSError) as e:
        print(f"explore: {e}", file=sys.stderr)
        return 2

    warmup()
    mission = Mission(world, config, args.seed, args.out, args.ticks_max)
    code = 0
    try:
        mission.run()
    except AbortedMission as e:
        print(f"explore: mission aborted: {e}", file=sys.stderr)
        code = 1
    summary = mission.write_outputs(args.export_map, args.export_graph)
    if not args.no_figures:
        from .plotting import write_figures
        write_figures(mission, args.out)
    print(json.dumps({k: summary[k] for k in ("status", "explored_fraction", "score",
                                              "return_home_success", "t_end")}))
    return code


if __name__ == "__main__":
    sys.exit(main())
