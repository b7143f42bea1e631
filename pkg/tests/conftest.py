import math

import pytest
from hypothesis import HealthCheck, settings

from radcomp.profile import constant_curvature, flat, sphere, von_mangoldt
from radcomp.surface import Surface

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def sphere_surface():
    return Surface(sphere())


@pytest.fixture(scope="session")
def flat_surface():
    return Surface(flat())


@pytest.fixture(scope="session")
def hyperbolic_surface():
    return Surface(constant_curvature(-1.0, r_max=8.0))


@pytest.fixture(scope="session")
def vm_surface():
    return Surface(von_mangoldt())


def sph_dist(r1, t1, r2, t2):
    """Unit-sphere spherical law of cosines."""
    c = math.cos(r1) * math.cos(r2) + math.sin(r1) * math.sin(r2) * math.cos(t1 - t2)
    return math.acos(max(-1.0, min(1.0, c)))


def flat_dist(r1, t1, r2, t2):
    return math.sqrt(max(r1 * r1 + r2 * r2 - 2 * r1 * r2 * math.cos(t1 - t2), 0.0))


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
