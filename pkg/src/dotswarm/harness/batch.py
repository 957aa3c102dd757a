"""Run many seeds, sequentially or across worker processes, and summarise them."""

from __future__ import annotations

import statistics
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from contextlib import ExitStack
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .config import ExperimentConfig
from .export import export_tracks, trial_dir
from .trial import TIMEOUT, TrialResult, run_trial

ERROR = "ERROR"


@dataclass
class TrialOutcome:
    seed: int
    result: TrialResult | None
    error: str | None
    wall_s: float

    def row(self) -> dict:
        if self.result is not None:
            return self.result.row()
        return {"seed": self.seed, "retrieved": 0, "carriers": 0, "completion_time_s": None,
                "status": ERROR, "error": self.error}


@dataclass
class BatchSummary:
    rows: list[dict]

    @property
    def completed_times(self) -> list[float]:
        return [r["completion_time_s"] for r in self.rows if r["status"] == "completed"]

    @property
    def any_timeout(self) -> bool:
        return any(r["status"] == TIMEOUT for r in self.rows)

    @property
    def errors(self) -> int:
        return sum(r["status"] == ERROR for r in self.rows)

    @property
    def mean_time(self) -> float | None:
        t = self.completed_times
        return statistics.fmean(t) if t else None

    @property
    def min_time(self) -> float | None:
        return min(self.completed_times, default=None)

    @property
    def max_time(self) -> float | None:
        return max(self.completed_times, default=None)

    @property
    def retrieval_rate(self) -> float:
        """Delivered carriers over carriers spawned, across all successful runs."""
        ok = [r for r in self.rows if r["status"] != ERROR]
        total = sum(r["carriers"] for r in ok)
        return sum(r["retrieved"] for r in ok) / total if total else 1.0

    @property
    def all_retrieved(self) -> int:
        return sum(r["status"] != ERROR and r["retrieved"] == r["carriers"] for r in self.rows)

    def to_dict(self) -> dict:
        return {"trials": len(self.rows), "completed": len(self.completed_times),
                "all_retrieved": self.all_retrieved, "retrieval_rate": self.retrieval_rate,
                "mean_time_s": self.mean_time, "min_time_s": self.min_time, "max_time_s": self.max_time,
                "timeout_flag": self.any_timeout, "errors": self.errors, "rows": self.rows}

    def format(self) -> str:
        lines = [f"{'seed':>6} {'retrieved':>9} {'time_s':>9}"]
        for r in self.rows:
            t = r["completion_time_s"]
            shown = r["status"] if r["status"] != "completed" else f"{t:.1f}"
            lines.append(f"{r['seed']:>6} {r['retrieved']:>5}/{r['carriers']:<3} {shown:>9}")
        mean = "n/a" if self.mean_time is None else f"{self.mean_time:.1f}"
        flag = " (mean over completed trials only; some timed out)" if self.any_timeout else ""
        lines.append(f"mean {mean} s  min {self.min_time}  max {self.max_time}  "
                     f"retrieval {self.retrieval_rate:.0%}{flag}")
        return "\n".join(lines)


def run_one(config: ExperimentConfig, seed: int, out: str | Path | None = None,
            dump_grids: bool = False) -> TrialOutcome:
    """One isolated trial; failures are captured, never raised."""
    t0 = time.perf_counter()
    try:
        with ExitStack() as stack:
            sink = None
            if dump_grids and out is not None:
                gdir = trial_dir(out, seed) / "grids"
                gdir.mkdir(parents=True, exist_ok=True)
                files = {}

                def sink(rid, now, grid):
                    if rid not in files:
                        files[rid] = stack.enter_context(open(gdir / f"robot_{rid}.bin", "wb"))
                    grid.dump(files[rid], round(now, 3))
            res = run_trial(config, seed, grid_sink=sink)
        if out is not None:
            export_tracks(res, trial_dir(out, seed))
        return TrialOutcome(seed, res, None, time.perf_counter() - t0)
    except Exception as e:  # noqa: BLE001 - recorded per trial
        msg = f"{type(e).__name__}: {e}"
        if not isinstance(e, (ValueError, OSError, RuntimeError)):
            msg += "\n" + traceback.format_exc()
        return TrialOutcome(seed, None, msg, time.perf_counter() - t0)


def _strip(o: TrialOutcome) -> TrialOutcome:
    # tracks already live on disk; don't ship them back across processes
    if o.result is not None:
        o.result.tracks = []
        o.result.events = []
    return o


def _run_stripped(args) -> TrialOutcome:
    o = run_one(*args)
    return _strip(o) if args[2] is not None else o


def run_batch(config: ExperimentConfig, seeds: Sequence[int] | None = None, jobs: int = 1,
              out: str | Path | None = None, dump_grids: bool = False,
              progress: Callable[[TrialOutcome], None] | None = None) -> tuple[BatchSummary, list[TrialOutcome]]:
    """Rows come back in seed-list order whatever the number of workers."""
    seeds = list(config.seeds if seeds is None else seeds)
    outcomes: list[TrialOutcome] = []
    if jobs <= 1 or len(seeds) <= 1:
        for s in seeds:
            o = run_one(config, s, out, dump_grids)
            if progress:
                progress(o)
            outcomes.append(o)
    else:
        args = [(config, s, out, dump_grids) for s in seeds]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            for o in ex.map(_run_stripped, args):
                if progress:
                    progress(o)
                outcomes.append(o)
    return BatchSummary([o.row() for o in outcomes]), outcomes
