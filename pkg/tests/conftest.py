import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ife_elasticity.basis import reference_element  # noqa: E402
from ife_elasticity.geometry import LameField, build_interface_data  # noqa: E402

ACCEPTANCE_LINES = []


def random_lame(rng, lo=1e-3, hi=1e3, interface=None):
    v = np.exp(rng.uniform(np.log(lo), np.log(hi), 4))
    return LameField(*v, interface=interface)


def random_cut(space_kind, rng, h=1.0, origin=(0.0, 0.0), edges=None, margin=1e-3):
    """Interface data for a random straight cut through an element.

    Cut points are uniform in the interior of two distinct edges; the
    physical plus side is chosen at random so both labelings occur.
    """
    geom = reference_element(space_kind, h=h, origin=origin)
    P = geom.polygon
    nv = len(P)
    if edges is None:
        edges = tuple(rng.choice(nv, size=2, replace=False))
    pts = []
    for k in edges:
        t = rng.uniform(margin, 1 - margin)
        pts.append(P[k] + t * (P[(k + 1) % nv] - P[k]))
    D, E = pts
    tang = E - D
    nrm = np.array([tang[1], -tang[0]])
    far = int(np.argmax(np.abs((P - D) @ nrm)))
    side = int(rng.choice([-1, 1]))
    return build_interface_data(geom, D, E, int(edges[0]), int(edges[1]), plus_point=P[far], plus_side=side)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
