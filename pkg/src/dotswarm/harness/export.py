"""CSV and JSON writers for trial results. Output is byte-stable for a fixed seed."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .trial import TIMEOUT, TrialResult

TRACK_HEADER = ("time_s", "x_m", "y_m", "theta_rad", "carrying")
EVENT_HEADER = ("time_s", "robot", "event", "detail")
SUMMARY_HEADER = ("seed", "retrieved", "carriers", "completion_time_s", "status")


class ExportError(OSError):
    pass


def _f(x: float, digits: int = 6) -> str:
    return f"{float(x):.{digits}f}"


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as e:
        raise ExportError(f"cannot write {path}: {e.strerror or e}") from e


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def track_csv(rows) -> str:
    return _csv(TRACK_HEADER, ((_f(t, 2), _f(x), _f(y), _f(th), c) for t, x, y, th, c in rows))


def events_csv(events) -> str:
    return _csv(EVENT_HEADER, ((_f(t, 2), r, ev, d) for t, r, ev, d in events))


def trial_dir(root: str | Path, seed: int) -> Path:
    return Path(root) / f"seed_{seed:04d}"


def export_tracks(result: TrialResult, path: str | Path) -> list[Path]:
    """Write ``robot_<k>.csv`` per robot and ``events.csv`` into ``path``."""
    path = Path(path)
    out = []
    for k, rows in enumerate(result.tracks):
        p = path / f"robot_{k}.csv"
        _write(p, track_csv(rows))
        out.append(p)
    p = path / "events.csv"
    _write(p, events_csv(result.events))
    out.append(p)
    p = path / "result.json"
    _write(p, json.dumps(result.row(), indent=2, sort_keys=True) + "\n")
    out.append(p)
    return out


def read_track(path: str | Path) -> list[tuple[float, float, float, float, int]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != TRACK_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [(float(t), float(x), float(y), float(th), int(c)) for t, x, y, th, c in r]


def read_events(path: str | Path) -> list[tuple[float, int, str, str]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        return [(float(t), int(k), ev, d) for t, k, ev, d in r]


def summary_csv(rows: list[dict]) -> str:
    def cell(row, k):
        v = row[k]
        if k == "completion_time_s":
            return TIMEOUT if v is None else _f(v, 2)
        return v
    return _csv(SUMMARY_HEADER, ([cell(r, k) for k in SUMMARY_HEADER] for r in rows))


def write_summary(summary, root: str | Path) -> list[Path]:
    root = Path(root)
    a, b = root / "summary.csv", root / "summary.json"
    _write(a, summary_csv(summary.rows))
    _write(b, json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
    return [a, b]
