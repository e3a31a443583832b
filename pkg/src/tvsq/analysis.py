"""Diagnostics for a fitted model: memory horizon, impulse response, output bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter
from scipy.special import expit

from .errors import ContractError, StabilityError
from .model import HWParams, input_nonlinearity, output_nonlinearity, simulate, spectral_radius

__all__ = [
    "StabilityReport",
    "NonlinearityProfile",
    "memory_constant",
    "impulse_response",
    "bibo_range",
    "coarse_bibo_range",
    "initial_state_decay",
    "nonlinearity_profile",
    "stability_report",
]

DEFAULT_IMPULSE_TOL = 1e-9
_MAX_IMPULSE_LEN = 1_000_000


def _radius(f) -> float:
    f = np.asarray(f, dtype=float)
    rho = spectral_radius(f) if f.size else 0.0
    if rho >= 1.0:
        raise StabilityError(rho)
    return rho


def memory_constant(f) -> float:
    """Seconds ``tau = -3 / ln(rho)`` for the initial-state influence to fall to ``e**-3``.

    An FIR filter (``rho == 0``) forgets its state after exactly ``r`` samples; we
    report ``tau = 0`` for it.
    """
    rho = _radius(f)
    if rho == 0.0:
        return 0.0
    return -3.0 / math.log(rho)


def impulse_response(b, f, tol: float = DEFAULT_IMPULSE_TOL) -> np.ndarray:
    """Impulse response ``h[0..L]`` truncated once the remaining tail is below ``tol``.

    After the input ends the response follows the homogeneous recursion, so
    ``|h[L+k]|`` is bounded by roughly ``M rho**k`` with ``M`` the largest of the
    last ``r`` samples. We stop at the first ``L >= r`` where ``r M rho / (1 - rho)``
    drops below ``tol``. The factor ``r`` covers the mixing of the ``r`` modes.
    """
    if tol <= 0:
        raise ContractError("tol must be positive")
    b = np.asarray(b, dtype=float)
    f = np.asarray(f, dtype=float)
    r = f.size
    if b.size != r + 1:
        raise ContractError(f"expected len(b) = len(f) + 1, got {b.size} and {r}")
    rho = _radius(f)
    if rho == 0.0:
        return b.copy()
    a = np.concatenate(([1.0], -f))
    n = max(64, 4 * (r + 1))
    while True:
        impulse = np.zeros(n)
        impulse[0] = 1.0
        h = lfilter(b, a, impulse)
        mags = np.abs(h)
        # Running max over the trailing r samples, evaluated at every L >= r.
        trail = np.lib.stride_tricks.sliding_window_view(mags, r)[1:]  # window ends at L = r..n-1
        bound = r * trail.max(axis=1) * rho / (1.0 - rho)
        hit = np.flatnonzero(bound < tol)
        if hit.size:
            return h[: r + hit[0] + 1]
        if n >= _MAX_IMPULSE_LEN:
            raise ContractError(f"impulse response did not decay below tol={tol} within {n} samples")
        n *= 4


def _output_bounds(v_lo, v_hi, gamma):
    # The output map is monotone; its direction is the sign of gamma1 * gamma4.
    y = output_nonlinearity(np.array([v_lo, v_hi]), gamma)
    return float(y.min()), float(y.max())


def _u_range(params: HWParams, input_range):
    lo, hi = (float(x) for x in input_range)
    if lo > hi:
        raise ContractError("input_range must be (low, high) with low <= high")
    u = input_nonlinearity(np.array([lo, hi]), params.beta)
    return float(u.min()), float(u.max())


def bibo_range(params: HWParams, input_range=(0.0, 100.0), tol: float = DEFAULT_IMPULSE_TOL):
    """Tight output interval for inputs confined to ``input_range``.

    Positive impulse-response taps push the latent value up with the largest
    input, negative taps with the smallest, so ``v_max = sum_{h>0} h u_max +
    sum_{h<0} h u_min`` and symmetrically for ``v_min``.
    """
    h = impulse_response(params.b, params.f, tol)
    u_min, u_max = _u_range(params, input_range)
    pos, neg = h[h > 0].sum(), h[h < 0].sum()
    v_max = pos * u_max + neg * u_min
    v_min = pos * u_min + neg * u_max
    return _output_bounds(v_min, v_max, params.gamma)


def coarse_bibo_range(params: HWParams, input_range=(0.0, 100.0), tol: float = DEFAULT_IMPULSE_TOL):
    """Output interval from ``||v||_inf <= ||h||_1 ||u||_inf`` alone (never tighter than :func:`bibo_range`)."""
    h = impulse_response(params.b, params.f, tol)
    u_min, u_max = _u_range(params, input_range)
    vmax = np.abs(h).sum() * max(abs(u_min), abs(u_max))
    return _output_bounds(-vmax, vmax, params.gamma)


def initial_state_decay(params: HWParams, stsq, init_a="zero", init_b="hold") -> np.ndarray:
    """Per-second gap ``|q_a[t] - q_b[t]|`` between two simulations that differ only in their initial state."""
    qa = simulate(stsq, params, init_a).values
    qb = simulate(stsq, params, init_b).values
    return np.abs(qa - qb)


@dataclass(frozen=True)
class NonlinearityProfile:
    """Sampled input and output curves with their slopes.

    ``input_concave`` is true when the input slope never increases along the
    grid. ``output_chord_deviation`` is the largest distance between the output
    curve and the straight line through its end points, measured only where the
    output lies in ``output_band``.
    """

    input_x: np.ndarray
    input_y: np.ndarray
    input_slope: np.ndarray
    input_concave: bool
    output_x: np.ndarray
    output_y: np.ndarray
    output_slope: np.ndarray
    output_chord_deviation: float
    output_band: tuple


def _logistic_slope(x, p):
    s = expit(p[0] * np.asarray(x, dtype=float) + p[1])
    return p[3] * p[0] * s * (1.0 - s)


def nonlinearity_profile(params: HWParams, grid=None, output_grid=None,
                         output_band=(30.0, 70.0)) -> NonlinearityProfile:
    """Evaluate both nonlinearities and their analytic slopes on grids.

    The input grid defaults to 101 points over ``[0, 100]``; the output grid
    defaults to 101 points spanning the latent values reached by ``bibo_range``.
    """
    x_in = np.linspace(0.0, 100.0, 101) if grid is None else np.asarray(grid, dtype=float)
    if output_grid is None:
        h = impulse_response(params.b, params.f)
        u_min, u_max = _u_range(params, (x_in.min(), x_in.max()))
        pos, neg = h[h > 0].sum(), h[h < 0].sum()
        lo, hi = pos * u_min + neg * u_max, pos * u_max + neg * u_min
        if hi <= lo:
            hi = lo + 1.0
        x_out = np.linspace(lo, hi, 101)
    else:
        x_out = np.asarray(output_grid, dtype=float)
    y_in = input_nonlinearity(x_in, params.beta)
    s_in = _logistic_slope(x_in, params.beta)
    y_out = output_nonlinearity(x_out, params.gamma)
    s_out = _logistic_slope(x_out, params.gamma)

    lo_b, hi_b = output_band
    band = (y_out >= lo_b) & (y_out <= hi_b)
    dev = math.nan
    if np.count_nonzero(band) >= 2:
        xb, yb = x_out[band], y_out[band]
        chord = yb[0] + (yb[-1] - yb[0]) * (xb - xb[0]) / (xb[-1] - xb[0])
        dev = float(np.max(np.abs(yb - chord)))
    concave = bool(np.all(np.diff(s_in) <= 0.0))
    return NonlinearityProfile(x_in, y_in, s_in, concave, x_out, y_out, s_out, dev, (lo_b, hi_b))


@dataclass(frozen=True)
class StabilityReport:
    rho: float
    tau: float
    impulse: np.ndarray
    l1_norm: float
    peak_lag: int
    output_range: tuple
    coarse_output_range: tuple

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "kind": "tvsq.StabilityReport",
            "rho": self.rho,
            "tau": self.tau,
            "l1_norm": self.l1_norm,
            "peak_lag": self.peak_lag,
            "output_range": list(self.output_range),
            "coarse_output_range": list(self.coarse_output_range),
            "impulse": self.impulse.tolist(),
        }


def stability_report(params: HWParams, input_range=(0.0, 100.0),
                     tol: float = DEFAULT_IMPULSE_TOL) -> StabilityReport:
    rho = _radius(params.f)
    h = impulse_response(params.b, params.f, tol)
    return StabilityReport(
        rho=rho,
        tau=memory_constant(params.f),
        impulse=h,
        l1_norm=float(np.abs(h).sum()),
        peak_lag=int(np.argmax(h)),
        output_range=bibo_range(params, input_range, tol),
        coarse_output_range=coarse_bibo_range(params, input_range, tol),
    )
