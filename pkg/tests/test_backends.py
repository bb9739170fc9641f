"""The numba kernels and the pure-numpy fallback must agree."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from scooterloco import _accel, kernels
from scooterloco.mapping import MotionParams
from scooterloco.tasks import default_map

PROBE = r"""
import json, sys
import numpy as np
from scooterloco import _accel, kernels
from scooterloco.mapping import MotionParams
from scooterloco.tasks import default_map

rng = np.random.default_rng(7)
inputs = rng.uniform(-1, 1, size=(20000, 2))
city = default_map()
state = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
out = kernels.rollout(state, inputs, MotionParams().as_array(), 0.01, city.walls, 0.4)
ranks = np.array([2, 4, 6, 6, 9, 12, 14, 16, 18, 20, 22, 24, 26, 28], dtype=np.int64)
counts = kernels.signed_rank_counts(ranks)
json.dump({"backend": _accel.BACKEND, "rollout": out.tolist(), "counts": counts.tolist()}, sys.stdout)
"""


def _probe(disable):
    env = dict(os.environ)
    env.pop("SCOOTERLOCO_DISABLE_NUMBA", None)
    if disable:
        env["SCOOTERLOCO_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", PROBE], capture_output=True, text=True, env=env, timeout=300)
    assert out.returncode == 0, out.stderr
    return json.loads(out.stdout)


@pytest.mark.slow
@pytest.mark.skipif(not _accel._have_numba(), reason="numba not installed")
def test_numba_and_numpy_backends_agree():
    fast = _probe(disable=False)
    slow = _probe(disable=True)
    assert (fast["backend"], slow["backend"]) == ("numba", "numpy")
    assert fast["counts"] == slow["counts"]
    a = np.array(fast["rollout"])
    b = np.array(slow["rollout"])
    assert np.max(np.abs(a - b)) < 1e-9


def test_env_flag_parsing(monkeypatch):
    monkeypatch.setenv("X_FLAG", " Yes ")
    assert _accel._flag("X_FLAG")
    monkeypatch.setenv("X_FLAG", "0")
    assert not _accel._flag("X_FLAG")


def test_noop_jit_forms():
    def f(x):
        return x + 1

    assert _accel._noop_jit(f) is f
    assert _accel._noop_jit(cache=True)(f) is f


def test_signed_rank_counts_total():
    counts = kernels.signed_rank_counts(np.array([2, 4, 6], dtype=np.int64))
    assert counts.sum() == 8
    assert [s for s, c in enumerate(counts) if c] == [0, 2, 4, 6, 8, 10, 12]


def test_resolve_collisions_counts_contacts():
    walls = np.array([[-5.0, 0.0, 5.0, 0.0], [0.0, -5.0, 0.0, 5.0]])
    state = np.array([0.2, 0.2, 225.0, 1.0, 0.0, 0.0])
    assert kernels.resolve_collisions(state, walls, 0.4) == 2
    assert state[0] >= 0.4 - 1e-12 and state[1] >= 0.4 - 1e-12
    # sliding response applied once per wall: cos^2(45) twice
    assert state[3] == pytest.approx(0.25, abs=1e-12)
