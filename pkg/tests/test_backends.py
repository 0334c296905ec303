import os
import subprocess
import sys

import numpy as np
import pytest

from bernoulli_diffuse import kernels
from bernoulli_diffuse._backend import BACKEND_ENV, requested_backend

pytestmark = pytest.mark.skipif(kernels.numba_impl is None, reason="numba not installed")


@pytest.fixture
def field():
    return np.random.default_rng(4).random((23, 31))


def test_laplacians_identical(field):
    for name in ("lap_dirichlet", "lap_periodic"):
        a = getattr(kernels.numpy_impl, name)(field, 0.01)
        b = getattr(kernels.numba_impl, name)(field, 0.01)
        assert np.array_equal(a, b)


@pytest.mark.parametrize("alpha", [4.0, 2.5])
def test_gm_backends(field, alpha):
    mus = 0.3 / (1 + 0.0118 * np.arange(30))
    a = kernels.numpy_impl.gm_diffuse(field, alpha, 0.0118, mus)
    b = kernels.numba_impl.gm_diffuse(field, alpha, 0.0118, mus)
    if alpha == 4.0:
        assert np.array_equal(a, b)
    else:
        assert np.max(np.abs(a - b)) < 1e-13


def test_pm_backends(field):
    a = kernels.numpy_impl.pm_diffuse(field, 0.2, 20, 0.1)
    b = kernels.numba_impl.pm_diffuse(field, 0.2, 20, 0.1)
    assert np.max(np.abs(a - b)) < 1e-13


def test_integer_exponent():
    assert kernels.integer_exponent(4.0) == 4
    assert kernels.integer_exponent(2.5) == -1


def test_env_flag(monkeypatch):
    monkeypatch.setenv(BACKEND_ENV, "numpy")
    assert requested_backend() == "numpy"
    monkeypatch.setenv(BACKEND_ENV, "fortran")
    with pytest.raises(ValueError):
        requested_backend()


def test_env_flag_selects_numpy_in_fresh_process():
    code = "import bernoulli_diffuse as b, bernoulli_diffuse.kernels as k; print(b.BACKEND, k.active is k.numpy_impl)"
    env = dict(os.environ, **{BACKEND_ENV: "numpy"})
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True"]
