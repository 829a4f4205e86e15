"""Both scalar-multiplication backends against each other and the oracle."""

from __future__ import annotations

import os
import random
import subprocess
import sys

import pytest

from scms import _kernel
from scms._p256_py import GX, GY, N
from tests import oracles

BACKENDS = _kernel.available_backends()


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    return BACKENDS[request.param]


def test_compiled_backend_built():
    # the package is expected to ship with its extension; the fallback still works without it
    assert "python" in BACKENDS
    if os.environ.get("SCMS_REQUIRE_EXTENSION"):
        assert "compiled" in BACKENDS


def test_edge_scalars(backend):
    assert backend.mul(0, GX, GY) is None
    assert backend.mul(N, GX, GY) is None
    assert backend.mul_base(0) is None
    assert backend.mul(1, GX, GY) == (GX, GY)
    assert backend.mul(N - 1, GX, GY) == (GX, oracles.P - GY)
    assert backend.mul(N + 2, GX, GY) == oracles.affine_mul(2)


def test_frozen_vectors(backend, vectors):
    for case in vectors["scalar_mult_G"]:
        k = int(case["k"], 16)
        want = (int(case["x"], 16), int(case["y"], 16))
        assert backend.mul_base(k) == want
        assert backend.mul(k, GX, GY) == want


def test_random_against_oracle(backend):
    rng = random.Random(77)
    for _ in range(20):
        k, m = rng.randrange(1, N), rng.randrange(1, N)
        base = oracles.affine_mul(m)
        assert backend.mul(k, *base) == oracles.affine_mul(k, base)


def test_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("compiled extension not built")
    rng = random.Random(3)
    c, p = BACKENDS["compiled"], BACKENDS["python"]
    for _ in range(50):
        k = rng.randrange(N)
        base = p.mul_base(rng.randrange(1, N))
        assert c.mul(k, *base) == p.mul(k, *base)
        assert c.mul_base(k) == p.mul_base(k)


def test_env_forces_pure_python():
    env = dict(os.environ, SCMS_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import scms; print(scms.BACKEND)"], env=env, capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == "python"
