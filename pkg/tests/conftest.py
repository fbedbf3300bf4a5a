import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


import datetime as dt  # noqa: E402

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from shiftlab.io import write_events_csv  # noqa: E402
from shiftlab.synth import lockdown_scenario, piecewise_constant  # noqa: E402


@pytest.fixture(scope="session")
def series_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "series.csv"
    vals = piecewise_constant([0, 4, 1], [40, 30, 50], 1.0, np.random.default_rng(0))
    start = dt.date(2020, 1, 1)
    rows = ["date,value"] + [f"{start + dt.timedelta(days=i)},{float(v)!r}" for i, v in enumerate(vals)]
    path.write_text("\n".join(rows) + "\n")
    return path


@pytest.fixture(scope="session")
def did_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "did.csv"
    rng = np.random.default_rng(1)
    rows = ["y,year,lockdown,age"]
    for year in (2019, 2020):
        for lock in (0, 1):
            for age in ("a", "b", "c"):
                for _ in range(20):
                    y = 1.0 + 0.5 * (year == 2020 and lock == 1 and age == "b") + float(rng.normal(0, 0.3))
                    rows.append(f"{y!r},{year},{lock},{age}")
    path.write_text("\n".join(rows) + "\n")
    return path


@pytest.fixture(scope="session")
def events_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "events.csv"
    write_events_csv(path, lockdown_scenario(seed=3, days_each_side=70), ["age", "gender", "severity", "mode"])
    return path


from verdicts import KEY  # noqa: E402


def pytest_configure(config):
    config.stash[KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
