import time

import numpy as np
import pytest

from consensus_rhc import qcqp
from consensus_rhc.design import design_semistable, design_unstable
from consensus_rhc.rhc import make_controller
from consensus_rhc.scenarios import get_scenario
from consensus_rhc.sim import SimConfig, run


def pytest_addoption(parser):
    parser.addoption("--solver-backend", default=None,
                     help="force a qcqp backend for the whole suite")


@pytest.fixture(scope="session")
def backends(request):
    forced = request.config.getoption("--solver-backend")
    return (forced,) if forced else qcqp.available_backends()


@pytest.fixture(scope="session")
def scenario_semistable():
    return get_scenario("semistable")


@pytest.fixture(scope="session")
def scenario_unstable():
    return get_scenario("unstable")


@pytest.fixture(scope="session")
def cfg_semistable(scenario_semistable):
    return scenario_semistable.parsed()


@pytest.fixture(scope="session")
def cfg_unstable(scenario_unstable):
    return scenario_unstable.parsed()


@pytest.fixture(scope="session")
def design_semi(cfg_semistable):
    c = cfg_semistable
    return design_semistable(c.sys, c.graph, c.params, allow_boundary_c=True)


@pytest.fixture(scope="session")
def design_unst(cfg_unstable):
    c = cfg_unstable
    return design_unstable(c.sys, c.graph, c.params, allow_boundary_c=True)


@pytest.fixture(scope="session")
def ctrl_semi(cfg_semistable, design_semi):
    c = cfg_semistable
    return make_controller(design_semi, c.sys, c.graph, horizon=c.horizon,
                           boxes=(c.u_lo, c.u_hi))


@pytest.fixture(scope="session")
def ctrl_unst(cfg_unstable, design_unst):
    c = cfg_unstable
    return make_controller(design_unst, c.sys, c.graph, horizon=c.horizon,
                           boxes=(c.u_lo, c.u_hi))


@pytest.fixture(scope="session")
def run_semi(cfg_semistable, ctrl_semi):
    t0 = time.perf_counter()
    res = run(SimConfig(steps=cfg_semistable.steps, X0=cfg_semistable.X0,
                        controller=ctrl_semi))
    res.wall_time = time.perf_counter() - t0
    return res


@pytest.fixture(scope="session")
def run_unst(cfg_unstable, ctrl_unst):
    t0 = time.perf_counter()
    res = run(SimConfig(steps=cfg_unstable.steps, X0=cfg_unstable.X0,
                        controller=ctrl_unst))
    res.wall_time = time.perf_counter() - t0
    return res


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
