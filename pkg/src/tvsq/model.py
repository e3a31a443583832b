"""Hammerstein-Wiener model for time-varying subjective quality.

The model maps a per-second short-time quality series ``q_st`` (RDMOS) to a
predicted time-varying quality ``q_hat`` through three stages::

    u[t]     = beta3 + beta4 * sigmoid(beta1 * q_st[t] + beta2)
    v[t]     = sum_{d=0..r} b[d] u[t-d] + sum_{d=1..r} f[d] v[t-d]
    q_hat[t] = gamma3 + gamma4 * sigmoid(gamma1 * v[t] + gamma2)

The first ``r`` latent samples ``v[0..r-1]`` are not produced by the recursion;
they come from an initialisation policy (zero state, pinned values, or the
steady state under the first input).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import companion
from scipy.signal import lfilter
from scipy.special import expit, logit

from .errors import ContractError, InversionRangeError, StabilityError

__all__ = [
    "HWParams",
    "LinearOutputParams",
    "PredictedTrace",
    "NEAR_IDENTITY",
    "REFERENCE_LINEAR_OUTPUT",
    "INVERSION_MARGIN",
    "spectral_radius",
    "radius_below",
    "input_nonlinearity",
    "output_nonlinearity",
    "invert_output_nonlinearity",
    "pinned_latents",
    "filter_step",
    "fir",
    "filter_latent",
    "initial_latents",
    "simulate",
    "simulate_linear_output",
]

#: Nonlinearity parameters that map [0, 100] onto a gently curved, increasing line.
NEAR_IDENTITY = (0.04, -2.0, 0.0, 108.5)

#: Relative margin used when clipping measured quality into the output sigmoid's range.
INVERSION_MARGIN = 1e-3


def _as_vector(x, name, length=None):
    arr = np.array(x, dtype=float).reshape(-1)
    if length is not None and arr.size != length:
        raise ContractError(f"{name} must have length {length}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def spectral_radius(f) -> float:
    """Root radius of ``z^r - f1 z^(r-1) - ... - fr``.

    Computed as the largest eigenvalue modulus of the companion matrix. An
    empty or all-zero ``f`` gives 0.
    """
    f = np.asarray(f, dtype=float).reshape(-1)
    if not np.all(np.isfinite(f)):
        raise ContractError("feedback coefficients must be finite")
    if f.size == 0 or not np.any(f):
        return 0.0
    poly = np.concatenate(([1.0], -f))
    return float(np.max(np.abs(np.linalg.eigvals(companion(poly)))))


def radius_below(f, bound: float) -> bool:
    """``spectral_radius(f) < bound`` without an eigenvalue solve.

    A cheap sufficient test goes first: any root ``z`` with ``|z| >= bound``
    would satisfy ``1 <= sum |f_d| bound**-d``, so a sum below one settles it.
    Otherwise the polynomial is rescaled so the question becomes whether all
    roots lie inside the unit circle, which the Schur-Cohn step-down recursion
    answers exactly: every reflection coefficient must have modulus below one.
    """
    f = np.asarray(f, dtype=float).reshape(-1)
    if not np.all(np.isfinite(f)) or bound <= 0:
        return False
    if f.size == 0:
        return True
    g = f * bound ** -np.arange(1.0, f.size + 1)
    if np.sum(np.abs(g)) < 1.0:
        return True
    a = np.concatenate(([1.0], -g))
    while a.size > 1:
        k = a[-1] / a[0]
        if not abs(k) < 1.0:
            return False
        a = (a - k * a[::-1])[:-1]
    return True


@dataclass(frozen=True)
class HWParams:
    """Parameter vector ``theta = (b, f, beta, gamma)`` of an order-``r`` model."""

    b: np.ndarray
    f: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    r: int = field(init=False)

    def __post_init__(self):
        f = _as_vector(self.f, "f")
        r = f.size
        if r < 1:
            raise ContractError("model order r must be at least 1")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "b", _as_vector(self.b, "b", r + 1))
        object.__setattr__(self, "beta", _as_vector(self.beta, "beta", 4))
        object.__setattr__(self, "gamma", _as_vector(self.gamma, "gamma", 4))
        object.__setattr__(self, "r", r)

    @classmethod
    def initial(cls, r: int, b0: float = 0.3) -> "HWParams":
        """Default training start: near-identity sigmoids, ``b = (b0, 0, ...)``, ``f = 0``."""
        b = np.zeros(r + 1)
        b[0] = b0
        return cls(b=b, f=np.zeros(r), beta=NEAR_IDENTITY, gamma=NEAR_IDENTITY)

    @property
    def n_params(self) -> int:
        return 2 * self.r + 9

    @property
    def rho(self) -> float:
        return spectral_radius(self.f)

    def is_stable(self, margin: float = 1.0) -> bool:
        return self.rho < margin

    def dc_gain(self) -> float:
        """Steady-state latent gain ``sum(b) / (1 - sum(f))`` of the linear filter."""
        return float(np.sum(self.b) / (1.0 - np.sum(self.f)))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.b, self.f, self.beta, self.gamma])

    @classmethod
    def from_vector(cls, theta, r: int) -> "HWParams":
        theta = np.asarray(theta, dtype=float)
        if theta.size != 2 * r + 9:
            raise ContractError(f"parameter vector for r={r} must have length {2 * r + 9}")
        return cls(
            b=theta[: r + 1],
            f=theta[r + 1 : 2 * r + 1],
            beta=theta[2 * r + 1 : 2 * r + 5],
            gamma=theta[2 * r + 5 :],
        )

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "b": self.b.tolist(),
            "f": self.f.tolist(),
            "beta": self.beta.tolist(),
            "gamma": self.gamma.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HWParams":
        missing = [k for k in ("b", "f", "beta", "gamma") if k not in d]
        if missing:
            raise ContractError(f"model parameters missing keys: {missing}")
        params = cls(b=d["b"], f=d["f"], beta=d["beta"], gamma=d["gamma"])
        if "r" in d and int(d["r"]) != params.r:
            raise ContractError(f"declared order r={d['r']} does not match len(f)={params.r}")
        return params


@dataclass(frozen=True)
class LinearOutputParams:
    """Affine output map ``q_hat = a * v + b_off`` replacing the output sigmoid."""

    a: float
    b_off: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b_off)):
            raise ContractError("linear output parameters must be finite")
        if self.a <= 0:
            raise ContractError("linear output slope must be positive")

    def __call__(self, v):
        return self.a * np.asarray(v, dtype=float) + self.b_off


#: Fitted affine output map reported for the simplified model.
REFERENCE_LINEAR_OUTPUT = LinearOutputParams(a=0.7013, b_off=49.9794)


@dataclass(frozen=True)
class PredictedTrace:
    """Simulated quality; ``values[:warmup]`` come from the initial state, not the recursion."""

    values: np.ndarray
    warmup: int
    init_policy: str
    latent: np.ndarray | None = None

    def __len__(self):
        return self.values.shape[-1]

    @property
    def predictions(self) -> np.ndarray:
        """Post-warm-up samples, the only ones any error metric should see."""
        return self.values[..., self.warmup :]


def _sigmoid_map(x, p):
    x = np.asarray(x, dtype=float)
    return p[2] + p[3] * expit(p[0] * x + p[1])


def input_nonlinearity(q_st, beta):
    """Generalised logistic ``beta3 + beta4 / (1 + exp(-(beta1 q + beta2)))``."""
    return _sigmoid_map(q_st, np.asarray(beta, dtype=float))


def output_nonlinearity(v, gamma):
    """Generalised logistic ``gamma3 + gamma4 / (1 + exp(-(gamma1 v + gamma2)))``."""
    return _sigmoid_map(v, np.asarray(gamma, dtype=float))


def _check_invertible(gamma):
    if gamma[0] == 0 or gamma[3] == 0:
        raise ContractError("output nonlinearity is not invertible when gamma1 or gamma4 is zero")


def invert_output_nonlinearity(q, gamma, *, margin: float | None = None):
    """Latent value ``v`` with ``output_nonlinearity(v, gamma) == q``.

    Without ``margin`` every ``q`` must lie strictly between ``gamma3`` and
    ``gamma3 + gamma4``, otherwise :class:`InversionRangeError` is raised. With
    a margin ``m`` the normalised level ``(q - gamma3) / gamma4`` is first
    clipped into ``[m, 1 - m]``.
    """
    gamma = np.asarray(gamma, dtype=float)
    _check_invertible(gamma)
    q = np.asarray(q, dtype=float)
    s = (q - gamma[2]) / gamma[3]
    if margin is None:
        bad = ~((s > 0) & (s < 1))
        if np.any(bad):
            idx = np.argwhere(bad)[0]
            lo, hi = sorted((gamma[2], gamma[2] + gamma[3]))
            where = tuple(int(i) for i in idx) if q.ndim else None
            raise InversionRangeError(q[tuple(idx)] if q.ndim else q, lo, hi, where=where)
    else:
        s = np.clip(s, margin, 1.0 - margin)
    return (logit(s) - gamma[1]) / gamma[0]


def pinned_latents(tvsq, gamma, r: int, margin: float = INVERSION_MARGIN):
    """Initial latent state ``v[0..r-1]`` that reproduces the first ``r`` measured samples."""
    tvsq = np.asarray(tvsq, dtype=float)
    return invert_output_nonlinearity(tvsq[..., :r], gamma, margin=margin)


def filter_step(u_window, v_window, b, f) -> float:
    """One step of the IIR recursion.

    ``u_window`` holds ``u[t-r..t]`` and ``v_window`` holds ``v[t-r..t-1]``, both
    in chronological order.
    """
    b = np.asarray(b, dtype=float)
    f = np.asarray(f, dtype=float)
    u_window = np.asarray(u_window, dtype=float)
    v_window = np.asarray(v_window, dtype=float)
    r = f.size
    if b.size != r + 1 or u_window.size != r + 1 or v_window.size != r:
        raise ContractError(
            f"filter_step expects len(b)=len(u_window)=r+1 and len(f)=len(v_window)=r, "
            f"got b={b.size}, f={f.size}, u={u_window.size}, v={v_window.size}"
        )
    return float(b @ u_window[::-1] + f @ v_window[::-1])


def fir(b, x):
    """Causal FIR ``y[t] = sum_d b[d] x[t-d]`` along the last axis with zero history."""
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    n = b.size
    pad = np.zeros(x.shape[:-1] + (n - 1,))
    windows = sliding_window_view(np.concatenate([pad, x], axis=-1), n, axis=-1)
    return windows @ b[::-1]


def _state_maps(b, f):
    """Matrices ``(Mb, Mf)`` with ``zi = u[:r] @ Mb + v[:r] @ Mf``.

    ``zi`` is the transposed direct-form II state of ``b(z) / a(z)`` just
    before sample ``r``: ``zi[k] = sum_{m=k+1..r} (b[m] u[r+k-m] + f[m] v[r+k-m])``.
    """
    r = f.size
    j, k = np.indices((r, r))
    m = r + k - j
    mask = j >= k
    mb = np.where(mask, b[np.where(mask, m, 0)], 0.0)
    mf = np.where(mask, f[np.where(mask, m - 1, 0)], 0.0)
    return mb, mf


def filter_latent(u, b, f, v_init):
    """Run the IIR filter over ``u`` (last axis is time) from the initial state ``v_init``.

    Returns ``v`` with ``v[..., :r]`` equal to ``v_init`` and the recursion for
    every later sample. Leading axes are batch axes.
    """
    u = np.asarray(u, dtype=float)
    b = np.asarray(b, dtype=float)
    f = np.asarray(f, dtype=float)
    r = f.size
    v_init = np.broadcast_to(np.asarray(v_init, dtype=float), u.shape[:-1] + (r,))
    mb, mf = _state_maps(b, f)
    zi = u[..., :r] @ mb + v_init @ mf
    v = np.empty(u.shape)
    v[..., :r] = v_init
    v[..., r:] = lfilter(b, np.concatenate(([1.0], -f)), u[..., r:], axis=-1, zi=zi)[0]
    return v


def initial_latents(policy, u, params: HWParams):
    """Resolve an init policy to ``(name, v_init)``.

    ``policy`` is ``"zero"``, ``"hold"`` (steady state under constant ``u[0]``),
    or an explicit array of ``r`` latent values (pinned).
    """
    r = params.r
    batch = u.shape[:-1]
    if isinstance(policy, str):
        if policy == "zero":
            return "zero", np.zeros(batch + (r,))
        if policy == "hold":
            gain = params.dc_gain()
            return "hold", np.repeat(u[..., :1] * gain, r, axis=-1)
        raise ContractError(f"unknown init policy {policy!r}; expected 'zero', 'hold' or an array")
    v_init = np.asarray(policy, dtype=float)
    if v_init.shape[-1] != r:
        raise ContractError(f"pinned initial state must have {r} samples, got {v_init.shape[-1]}")
    return "pinned", np.broadcast_to(v_init, batch + (r,))


def _prepare(stsq, params: HWParams, allow_unstable: bool):
    q = np.asarray(stsq, dtype=float)
    if q.ndim == 0 or q.shape[-1] < params.r + 1:
        raise ContractError(f"trace must have at least r+1={params.r + 1} samples")
    if not np.all(np.isfinite(q)):
        raise ContractError("input trace contains non-finite values")
    if not allow_unstable:
        rho = params.rho
        if rho >= 1.0:
            raise StabilityError(rho)
    return q


def simulate(stsq, params: HWParams, init="zero", *, allow_unstable: bool = False) -> PredictedTrace:
    """Predict time-varying quality for one trace (or a batch along leading axes)."""
    q = _prepare(stsq, params, allow_unstable)
    u = input_nonlinearity(q, params.beta)
    name, v_init = initial_latents(init, u, params)
    v = filter_latent(u, params.b, params.f, v_init)
    return PredictedTrace(output_nonlinearity(v, params.gamma), params.r, name, v)


def simulate_linear_output(
    stsq,
    params: HWParams,
    lin: LinearOutputParams = REFERENCE_LINEAR_OUTPUT,
    init="zero",
    *,
    allow_unstable: bool = False,
) -> PredictedTrace:
    """Like :func:`simulate` with the output sigmoid replaced by ``lin``; ``params.gamma`` is ignored."""
    q = _prepare(stsq, params, allow_unstable)
    u = input_nonlinearity(q, params.beta)
    name, v_init = initial_latents(init, u, params)
    v = filter_latent(u, params.b, params.f, v_init)
    return PredictedTrace(lin(v), params.r, name, v)
