from __future__ import annotations

import json
import random
import sys
from types import SimpleNamespace

import pytest

from scms.ee import PROFILES, EndEntity
from scms.nodes import PkiConfig, bootstrap_pki
from tests.oracles import VECTORS


@pytest.fixture(scope="session")
def vectors():
    return json.loads(VECTORS.read_text())


def make_world(seed: int = 1):
    pki = bootstrap_pki(PkiConfig(seed=seed))
    return SimpleNamespace(pki=pki, transport=pki.loopback())


def make_ee(world, profile: str = "obu", seed=None, register: bool = True) -> EndEntity:
    rng = random.Random(seed) if seed is not None else None
    ee = EndEntity.create(PROFILES[profile], world.pki.store, world.transport, rng=rng)
    if register:
        world.pki.eca.register(ee.state.ee_id, ee.state.canonical.public)
    return ee


def provision(world, profile: str = "obu", seed=None) -> EndEntity:
    ee = make_ee(world, profile, seed)
    ee.enroll()
    ee.authorize()
    ee.download()
    return ee


@pytest.fixture(scope="session")
def world():
    return make_world(1)


@pytest.fixture
def fresh_world():
    return make_world(2)


@pytest.fixture(scope="session")
def obu(world):
    return provision(world, "obu", seed=11)


@pytest.fixture(scope="session")
def rsu(world):
    return provision(world, "rsu", seed=12)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, 11):
        ok, text = mod.RESULTS.get(number, (False, "not run"))
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {text}")
