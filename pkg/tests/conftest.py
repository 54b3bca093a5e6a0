import numpy as np
import pytest

from v2x_loadcast.road import POINTS_PER_DAY, SLOT_SECONDS, RoadRecord, RoadSeries


def steady_series(days: int, flow: int, speed: float, start: int = 0) -> RoadSeries:
    """Constant flow/speed series, used for simulator statistics."""
    records = tuple(
        RoadRecord(start + i * SLOT_SECONDS, flow, speed)
        for i in range(days * POINTS_PER_DAY)
    )
    return RoadSeries(records)


@pytest.fixture(scope="session")
def one_day_csv(tmp_path_factory):
    """A valid single-day road CSV with epoch-second timestamps."""
    path = tmp_path_factory.mktemp("road") / "day.csv"
    rng = np.random.default_rng(5)
    lines = ["timestamp,flow,speed"]
    for k in range(POINTS_PER_DAY):
        flow = int(rng.integers(0, 500))
        speed = round(float(rng.uniform(5, 75)), 2)
        lines.append(f"{k * SLOT_SECONDS},{flow},{speed}")
    path.write_text("\n".join(lines) + "\n")
    return path
