"""End-to-end demo on the synthetic lockdown scenario.

Writes events.csv, daily.csv and did.csv into OUTDIR, then runs every
``shiftlab`` subcommand on them and leaves the JSON reports next to the data.

    python scripts/lockdown_demo.py --outdir demo_out --seed 1
"""

import argparse
import datetime as dt
from collections import Counter
from pathlib import Path

from shiftlab.cli import main as shiftlab
from shiftlab.cohort import did_records, previous_year
from shiftlab.io import write_events_csv
from shiftlab.synth import lockdown_scenario

ANCHOR = dt.date(2020, 3, 19)
ATTRS = ["age", "gender", "severity", "mode"]


def write_daily(path: Path, events) -> None:
    per_day = Counter(e.date for e in events)
    first, last = min(per_day), max(per_day)
    lines = ["date,count"]
    d = first
    while d <= last:
        lines.append(f"{d.isoformat()},{per_day.get(d, 0)}")
        d += dt.timedelta(days=1)
    path.write_text("\n".join(lines) + "\n")


def write_did(path: Path, events) -> None:
    recs = did_records(events, ANCHOR, previous_year(ANCHOR), 30, "age")
    lines = ["y,year,lockdown,age"] + [f"{r.y!r},{r.time},{r.lockdown},{r.x}" for r in recs]
    path.write_text("\n".join(lines) + "\n")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="demo_out")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--boot", type=int, default=999)
    ap.add_argument("--permutations", type=int, default=999)
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    events = lockdown_scenario(seed=args.seed, anchor=ANCHOR)
    write_events_csv(out / "events.csv", events, ATTRS)
    write_daily(out / "daily.csv", events)
    write_did(out / "did.csv", events)
    print(f"{len(events)} events written to {out}", flush=True)

    seed = ["--seed", str(args.seed)]
    runs = [
        ["changepoint", "--input", str(out / "daily.csv"), "--value-col", "count", "--date-col", "date",
         "--cost", "poisson", "--solver", "exact", "--min-seg-len", "7", "--penalty", "30",
         "--breaks-out", str(out / "daily_breaks.csv"), "-o", str(out / "changepoint.json")],
        ["did", "--input", str(out / "did.csv"), "--y", "y", "--time", "year", "--lockdown", "lockdown",
         "--x", "age", "--vcov", "hc1", "-o", str(out / "did.json")],
        ["kde-shift", "--input", str(out / "events.csv"), "--anchor", ANCHOR.isoformat(), "--window", "30",
         "--permutations", str(args.permutations), "--density-out", str(out / "density.csv"),
         "-o", str(out / "kde.json"), *seed],
        ["cohort", "--input", str(out / "events.csv"), "--anchor", "auto", "--factor", "age", "--seasonal",
         "--boot", str(args.boot), "--severity-split", "-o", str(out / "cohort.json"), *seed],
    ]
    for argv in runs:
        code = shiftlab(argv)
        if code:
            raise SystemExit(code)


if __name__ == "__main__":
    main()
