"""Command line entry point: ``dotswarm run`` and ``dotswarm summarize``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .batch import BatchSummary, TrialOutcome, run_batch
from .config import OUT_ENV, ConfigError, default_output_dir, load_config, parse_seeds
from .export import ExportError, write_summary


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dotswarm", description="Seeded batch runs of the swarm retrieval task.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run trials and write tracks, events and a summary")
    run.add_argument("--config", help="JSON experiment config (defaults apply when omitted)")
    run.add_argument("--seeds", help='seed list or range, e.g. "0-9" or "1,4,7" (overrides the config)')
    run.add_argument("--out", help=f"output directory (default: config output_dir, then ${OUT_ENV})")
    run.add_argument("--trials", type=int, help="number of trials: first N seeds, or seeds 0..N-1 without --seeds")
    run.add_argument("--dump-grids", action="store_true", help="write each robot's collision map once per second")
    run.add_argument("--quiet", action="store_true", help="only print the summary")
    run.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on this)")
    summ = sub.add_parser("summarize", help="rebuild the summary of an output directory")
    summ.add_argument("--in", dest="indir", required=True, help="directory written by 'run'")
    return ap


def _seeds(args, cfg) -> list[int]:
    if args.seeds is not None:
        seeds = list(parse_seeds(args.seeds))
        if args.trials is not None:
            if args.trials > len(seeds):
                raise ConfigError(f"--trials {args.trials} exceeds the {len(seeds)} seeds given")
            seeds = seeds[: args.trials]
        return seeds
    if args.trials is not None:
        return list(range(args.trials))
    return list(cfg.seeds)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        seeds = _seeds(args, cfg)
        if args.trials is not None and args.trials < 1:
            raise ConfigError("--trials must be at least 1")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    cfg = cfg.with_seeds(seeds)
    out = Path(args.out) if args.out else default_output_dir(cfg)

    def progress(o: TrialOutcome) -> None:
        if args.quiet:
            return
        if o.result is None:
            print(f"seed {o.seed}: error: {o.error}", file=sys.stderr)
        else:
            r = o.result
            print(f"seed {o.seed}: retrieved {r.retrieved_count}/{r.carriers} time {r.time_label} "
                  f"(wall {o.wall_s:.1f} s)", flush=True)

    summary, _ = run_batch(cfg, jobs=args.jobs, out=out, dump_grids=args.dump_grids, progress=progress)
    try:
        write_summary(summary, out)
        cfg_path = out / "config.json"
        cfg_path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True, default=str) + "\n")
    except (ExportError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(summary.format())
    print(f"wrote {out}")
    return 0 if summary.errors == 0 else 1


def cmd_summarize(args) -> int:
    root = Path(args.indir)
    files = sorted(root.glob("seed_*/result.json"))
    if not files:
        print(f"no trial results under {root}", file=sys.stderr)
        return 1
    try:
        rows = [json.loads(p.read_text()) for p in files]
    except (OSError, json.JSONDecodeError) as e:
        print(f"cannot read results under {root}: {e}", file=sys.stderr)
        return 1
    summary = BatchSummary(rows)
    try:
        write_summary(summary, root)
    except ExportError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(summary.format())
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    return cmd_run(args) if args.command == "run" else cmd_summarize(args)


if __name__ == "__main__":
    sys.exit(main())
