import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from genbo import _tanimoto_py, tanimoto
from oracles import tanimoto_bits

try:
    from genbo import _tanimoto as _compiled
except ImportError:  # extension not built
    _compiled = None

IMPLS = [pytest.param(_tanimoto_py, id="python"),
         pytest.param(_compiled, id="compiled",
                      marks=pytest.mark.skipif(_compiled is None, reason="extension not built"))]

bit_matrices = st.integers(1, 6).flatmap(
    lambda n: st.integers(1, 150).flatmap(
        lambda length: st.tuples(arrays(bool, (n, length)), arrays(bool, (n + 1, length)))))


@pytest.mark.parametrize("impl", IMPLS)
@settings(max_examples=50, deadline=None)
@given(bit_matrices)
def test_matrix_matches_bit_count_oracle(impl, pair):
    a, b = pair
    got = tanimoto.tanimoto_matrix(a, b, impl=impl)
    want = np.array([[tanimoto_bits(r, s) for s in b] for r in a])
    assert np.allclose(got, want, atol=1e-15)


@pytest.mark.parametrize("impl", IMPLS)
def test_intersections_cross_word_boundaries(impl):
    rng = np.random.default_rng(3)
    a = rng.random((4, 200)) < 0.5
    b = rng.random((3, 200)) < 0.5
    got = tanimoto.intersection_counts(a, b, impl=impl)
    assert np.array_equal(got, a.astype(int) @ b.astype(int).T)


@pytest.mark.parametrize("impl", IMPLS)
def test_pair_kernel_matches_joint_fingerprints(impl):
    rng = np.random.default_rng(4)
    xb = rng.random((5, 40)) < 0.3
    wb = rng.random((3, 24)) < 0.3
    wb[0] = False
    xb[1] = False
    sx, sw = xb.astype(int) @ xb.T.astype(int), wb.astype(int) @ wb.T.astype(int)
    cx, cw = np.diag(sx).copy(), np.diag(sw).copy()
    a = np.array([[0, 0], [1, 0], [4, 2], [2, 1]])
    b = np.array([[1, 0], [3, 1], [4, 2]])
    got = tanimoto.pair_tanimoto(sx, sw, cx, cw, a[:, 0], a[:, 1], b[:, 0], b[:, 1], impl=impl)
    joint = lambda p: np.concatenate([xb[p[0]], wb[p[1]]])  # noqa: E731
    want = np.array([[tanimoto_bits(joint(p), joint(q)) for q in b] for p in a])
    assert np.allclose(got, want, atol=1e-15)
    assert got[1, 0] == 0.0  # both joint vectors empty


def test_backends_agree():
    if _compiled is None:
        pytest.skip("extension not built")
    rng = np.random.default_rng(5)
    a = rng.random((30, 1024)) < 0.05
    assert np.array_equal(tanimoto.tanimoto_matrix(a, a, impl=_compiled),
                          tanimoto.tanimoto_matrix(a, a, impl=_tanimoto_py))


def test_length_mismatch():
    with pytest.raises(ValueError):
        tanimoto.tanimoto_matrix(np.ones((1, 3), bool), np.ones((1, 4), bool))


def test_env_var_forces_fallback():
    code = "from genbo import tanimoto; print(tanimoto.BACKEND)"
    env = dict(os.environ, GENBO_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "python"
