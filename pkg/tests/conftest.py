import numpy as np
import pytest

import orbitlab as ol
from orbitlab.profiles import (mini_schedule, reference_schedule,
                               reference_schedule_bcal,
                               reference_schedule_companion)


@pytest.fixture(scope="session")
def r1():
    sched, fams = reference_schedule()
    return ol.assemble(sched, fams)


@pytest.fixture(scope="session")
def r1_rational():
    sched, fams = reference_schedule(weight_mode=ol.RATIONAL)
    return ol.assemble(sched, fams)


@pytest.fixture(scope="session")
def r1_companion():
    sched, fams = reference_schedule_companion()
    return ol.assemble(sched, fams)


@pytest.fixture(scope="session")
def r1_companion_rational():
    sched, fams = reference_schedule_companion(weight_mode=ol.RATIONAL)
    return ol.assemble(sched, fams)


@pytest.fixture(scope="session")
def r1b():
    sched, fams = reference_schedule_bcal()
    return ol.assemble(sched, fams)


@pytest.fixture(scope="session")
def mini():
    sched, fams = mini_schedule()
    return ol.assemble(sched, fams)


@pytest.fixture(scope="session")
def mini_rational():
    sched, fams = mini_schedule(weight_mode=ol.RATIONAL)
    return ol.assemble(sched, fams)


@pytest.fixture()
def rng():
    return np.random.default_rng(20250810)
