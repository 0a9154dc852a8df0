import numpy as np
import pytest

from logcave.geometry import AxisBox, Ball, Intersection, Polytope


def hexagon():
    ang = np.arange(6) * np.pi / 3
    return Polytope(np.c_[np.cos(ang), np.sin(ang)], np.ones(6))


def box_and_ball(radius=1.2):
    return Intersection(AxisBox.cube(2), Ball(radius, 2))


BODIES = {
    "ball": lambda: Ball(1.5, 3),
    "box": lambda: AxisBox([-1.0, -2.0, -0.5], [2.0, 1.0, 0.5]),
    "polytope": hexagon,
    "intersection": box_and_ball,
}


@pytest.fixture(params=sorted(BODIES))
def body(request):
    return BODIES[request.param]()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
