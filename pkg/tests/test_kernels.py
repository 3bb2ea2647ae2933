"""The compiled kernels and their pure-Python twin must agree exactly."""
import os
import subprocess
import sys

import pytest
from hypothesis import given, strategies as st

from simulact import _kernels
from simulact._kernels import _pykernels

ck = pytest.importorskip("simulact._kernels._ckernels", reason="compiled kernels not built")

seqs = st.lists(st.integers(0, 4), max_size=14)


@given(seqs, seqs)
def test_edit_distance(a, b):
    assert ck.edit_distance(a, b) == _pykernels.edit_distance(a, b)


@given(seqs, seqs, st.integers(1, 6))
def test_ngram_stats(a, b, order):
    assert ck.ngram_stats(a, b, order) == _pykernels.ngram_stats(a, b, order)


@given(seqs, seqs, st.integers(1, 10), st.integers(1, 10))
def test_shift_candidates(a, b, span, dist):
    c_cur, c_gain, c_cands = ck.shift_candidates(a, b, span, dist)
    p_cur, p_gain, p_cands = _pykernels.shift_candidates(a, b, span, dist)
    assert (c_cur, c_gain) == (p_cur, p_gain)
    assert sorted(c_cands) == sorted(p_cands)


def test_large_token_ids():
    a, b = [10**12, 3, 7], [3, 10**12]
    assert ck.edit_distance(a, b) == _pykernels.edit_distance(a, b)


def test_env_var_forces_fallback():
    code = "from simulact._kernels import BACKEND; print(BACKEND)"
    env = {**os.environ, "SIMULACT_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
    assert _kernels.BACKEND in ("python", "cython")
