"""Shared helpers: random stable parameters and an independent reference recursion."""
import math

import numpy as np
import pytest

from tvsq.model import HWParams


def random_params(rng, r, feedback_l1=0.9, gain=1.0):
    """Stable parameters: ``sum |f| <= feedback_l1 < 1`` guarantees ``rho(f) < 1``."""
    f = rng.normal(0.0, 1.0, r)
    f *= rng.uniform(0.1, feedback_l1) / np.abs(f).sum()
    b = rng.uniform(0.0, 1.0, r + 1)
    b *= gain * (1.0 - f.sum()) / b.sum()
    beta = (rng.uniform(0.02, 0.06), rng.uniform(-3.0, -1.0), rng.uniform(-5.0, 5.0), rng.uniform(80.0, 120.0))
    gamma = (rng.uniform(0.02, 0.06), rng.uniform(-3.0, -1.0), rng.uniform(-5.0, 5.0), rng.uniform(80.0, 120.0))
    return HWParams(b=b, f=f, beta=beta, gamma=gamma)


def naive_simulate(stsq, b, f, beta, gamma, v_init):
    """Sample-by-sample model written from the defining equations, in plain Python floats."""
    r = len(f)
    sig = lambda x: 1.0 / (1.0 + math.exp(-x))  # noqa: E731
    u = [beta[2] + beta[3] * sig(beta[0] * q + beta[1]) for q in stsq]
    v = list(v_init)
    for t in range(r, len(stsq)):
        acc = 0.0
        for d in range(r + 1):
            acc += b[d] * u[t - d]
        for d in range(1, r + 1):
            acc += f[d - 1] * v[t - d]
        v.append(acc)
    return np.array([gamma[2] + gamma[3] * sig(gamma[0] * x + gamma[1]) for x in v])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
