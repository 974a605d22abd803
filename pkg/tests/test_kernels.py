import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gluelab import _kernels_py as pure

compiled = pytest.importorskip("gluelab._kernels")


def _axis(n_src, n_dst, rng):
    i = rng.integers(0, n_src - 1, n_dst)
    u = rng.uniform(size=n_dst)
    w = np.stack([1 - u, u], axis=1)
    w[rng.uniform(size=n_dst) < 0.2] = 0.0  # points off the source box
    return np.ascontiguousarray(np.stack([i, i + 1], axis=1).astype(np.int64)), np.ascontiguousarray(w)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.sampled_from([4, 8, 9]), m=st.sampled_from([3, 8, 16]),
       comps=st.sampled_from([1, 3, 9]))
def test_interp_parity(seed, n, m, comps):
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(comps, n, n, n))
    args = [f]
    for _ in range(3):
        args += list(_axis(n, m, rng))
    assert np.allclose(compiled.interp_tensor(*args), pure.interp_tensor(*args), rtol=1e-13, atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), zeta=st.sampled_from([0.0, 1.5, 4.0, 5.0]),
       p=st.sampled_from([1.0, 2.0, 2.5, 10.0]), scale=st.floats(0.5, 4.0))
def test_weighted_parity(seed, zeta, p, scale):
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(3, 6, 7, 8))
    f[:, 0, 0, 0] = 0.0
    x, y, z = (np.linspace(-3, 3, k) for k in (6, 7, 8))
    a = compiled.weighted_lp_sum(f, x, y, z, zeta, p, scale)
    b = pure.weighted_lp_sum(f, x, y, z, zeta, p, scale)
    assert a == pytest.approx(b, rel=1e-12)
    assert compiled.weighted_max(f, x, y, z, zeta) == pytest.approx(pure.weighted_max(f, x, y, z, zeta), rel=1e-13)


def test_outer_product_parity():
    rng = np.random.default_rng(1)
    u, v = rng.normal(size=(2, 3, 5, 5, 5))
    assert np.array_equal(compiled.outer_product(u, v), pure.outer_product(u, v))


def test_pure_switch():
    code = "import gluelab; print(gluelab.BACKEND)"
    env = dict(os.environ, GLUELAB_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env.pop("GLUELAB_PURE")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "cython"
