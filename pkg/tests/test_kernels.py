import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from milpcbf import _pykernels, kernels
from milpcbf.milp import LinearProgram, MILPProblem, solve_lp, solve_milp
from milpcbf.verify import random_configuration, random_milp

compiled = pytest.mark.skipif("compiled" not in kernels.BACKENDS, reason="extension not built")


def test_backend_registry():
    assert kernels.get("python") is _pykernels
    assert kernels.BACKEND in kernels.BACKENDS
    with pytest.raises(ValueError):
        kernels.get("fortran")


def test_use_switches_and_restores():
    prev = kernels.use("python")
    try:
        assert kernels.get() is _pykernels
    finally:
        kernels.use(prev)
    assert kernels.BACKEND == prev


def test_env_var_forces_fallback():
    env = dict(os.environ, MILPCBF_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from milpcbf import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@compiled
@given(st.integers(0, 2**31 - 1))
def test_project_origin_agrees(seed):
    rng = np.random.default_rng(seed)
    _, _, co, p = random_configuration(rng, -1.0, 3.0)
    V0 = np.ascontiguousarray(co.vertices0)
    Ac = np.ascontiguousarray(co.Ac)
    args = (V0, Ac, np.ascontiguousarray(co.bc0), float(p[0]), float(p[1]))
    a = kernels.get("python").project_origin(*args)
    b = kernels.get("compiled").project_origin(*args)
    assert a[0] == b[0] and a[3] == b[3]
    assert np.allclose(a[1:3], b[1:3], rtol=0, atol=1e-14)


@compiled
def test_lp_and_milp_agree_across_backends(rng):
    prev = kernels.BACKEND
    try:
        for _ in range(20):
            k = int(rng.integers(0, 7))
            c_y, c_t, G, H, g, lo, hi = random_milp(rng, max(k, 1))
            lp = LinearProgram(np.concatenate([c_y, c_t]), np.hstack([G, H]), g,
                               lower=np.concatenate([lo, np.zeros(len(c_t))]),
                               upper=np.concatenate([hi, np.ones(len(c_t))]))
            res = {}
            for name in ("python", "compiled"):
                kernels.use(name)
                res[name] = (solve_lp(lp), solve_milp(MILPProblem(lp, tuple(range(len(c_y), lp.n)))))
            for i in range(2):
                a, b = res["python"][i], res["compiled"][i]
                assert a.status is b.status
                if a.ok:
                    assert a.objective == pytest.approx(b.objective, abs=1e-9)
                    assert a.lp_iterations == b.lp_iterations
    finally:
        kernels.use(prev)
