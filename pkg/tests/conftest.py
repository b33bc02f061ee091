"""Shared builders for the worked line instance and small star graphs."""

import math
import sys

import pytest

from onroute.metric import GeneralSpace, LineSpace
from onroute.model import Instance, Request

INF = math.inf


def worked_line_instance(ending="nomadic", arrival="general"):
    """Segment [-10, 10], radius 6, three pickups: the running example."""
    return Instance(
        space=LineSpace(10, 10),
        mode="tsp",
        ending=ending,
        k=1,
        locality=6.0,
        arrival=arrival,
        requests=(
            Request(1, 0.0, -4.0, -4.0),
            Request(2, 0.0, 6.0, 6.0),
            Request(3, 5.0, 3.0, 3.0),
        ),
    )


def star_space(n_tips, spoke=2.0):
    """Center 0 plus ``n_tips`` leaves, each one edge of length ``spoke``."""
    n = n_tips + 1
    mat = [[INF] * n for _ in range(n)]
    for i in range(n):
        mat[i][i] = 0.0
    for leaf in range(1, n):
        mat[0][leaf] = mat[leaf][0] = spoke
    for a in range(1, n):
        for b in range(1, n):
            if a != b:
                mat[a][b] = 2 * spoke
    return GeneralSpace(mat)


@pytest.fixture
def worked():
    return worked_line_instance()


@pytest.fixture
def worked_homing():
    return worked_line_instance(ending="homing")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "AC_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
