"""Parameter identification by outage-rate minimisation.

The outage rate counts post-warm-up seconds where the prediction misses the
measured quality by more than twice its confidence half-width. Training
replaces the indicator by a smooth two-sided logistic penalty of sharpness
``nu`` and runs backtracking gradient descent for an increasing sequence of
``nu`` values (continuation), keeping the feedback polynomial stable at every
accepted step.

Gradients are exact for the implemented objective: the latent sensitivities
are propagated forward through the same IIR feedback as the model, and the
dependence of the pinned initial state on the output-sigmoid parameters is
included.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, NamedTuple

import numpy as np
from scipy.signal import lfilter
from scipy.special import expit, logit

from .data import TrainingDataset
from .errors import ContractError, StabilityError
from .model import (
    INVERSION_MARGIN,
    NEAR_IDENTITY,
    HWParams,
    PredictedTrace,
    filter_latent,
    fir,
    input_nonlinearity,
    invert_output_nonlinearity,
    radius_below,
    spectral_radius,
)

__all__ = [
    "spectral_radius",
    "penalty",
    "penalty_derivative",
    "outage_rate",
    "approx_objective",
    "true_objective",
    "objective_and_gradient",
    "gradient",
    "nu_schedule",
    "TrainConfig",
    "DescentResult",
    "TrainReport",
    "descend",
    "gradient_descent",
    "initial_guess",
    "train",
    "REPORT_VERSION",
]

log = logging.getLogger(__name__)

REPORT_VERSION = 1


def penalty(x, eps, nu):
    """Smooth surrogate of ``1(|x| > 2 eps)``, valued in ``(0, 2)`` and even in ``x``."""
    x = np.asarray(x, dtype=float)
    eps = np.asarray(eps, dtype=float)
    # 1 - expit(z) is written as expit(-z): exact evenness and no cancellation.
    return expit(nu * (x - 2 * eps)) + expit(-nu * (x + 2 * eps))


def penalty_derivative(x, eps, nu):
    """Derivative of :func:`penalty` with respect to ``x``."""
    x = np.asarray(x, dtype=float)
    eps = np.asarray(eps, dtype=float)
    z1 = nu * (x - 2 * eps)
    z2 = nu * (x + 2 * eps)
    return nu * (expit(z1) * expit(-z1) - expit(z2) * expit(-z2))


def outage_rate(pred, meas, warmup=None, ci=None) -> float:
    """Fraction of post-warm-up samples with ``|pred - meas| > 2 ci``.

    ``pred`` may be a :class:`PredictedTrace` (its warm-up is used unless one is
    given) or an array; ``meas`` a :class:`TVSQTrace` or an array with ``ci``.
    Leading batch axes are pooled.
    """
    if isinstance(pred, PredictedTrace):
        warmup = pred.warmup if warmup is None else warmup
        pred = pred.values
    if ci is None:
        meas, ci = meas.values, meas.ci
    pred = np.asarray(pred, dtype=float)
    meas = np.asarray(meas, dtype=float)
    ci = np.broadcast_to(np.asarray(ci, dtype=float), meas.shape)
    if pred.shape != meas.shape:
        raise ContractError(f"prediction shape {pred.shape} != measurement shape {meas.shape}")
    w = int(warmup or 0)
    miss = np.abs(pred[..., w:] - meas[..., w:]) > 2 * ci[..., w:]
    if miss.size == 0:
        raise ContractError("no samples after warm-up")
    return float(np.mean(miss))


def nu_schedule(nu_init=0.8, nu_factor=1.2, nu_max=20.0) -> list[float]:
    """Sharpness values visited by the continuation loop (``nu < nu_max``)."""
    out = []
    nu = nu_init
    while nu < nu_max:
        out.append(nu)
        nu *= nu_factor
    return out


class _Theta(NamedTuple):
    """Unvalidated view of a flat parameter vector, for the inner descent loop."""

    b: np.ndarray
    f: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    r: int

    @property
    def rho(self) -> float:
        return spectral_radius(self.f)

    @classmethod
    def split(cls, x, r):
        return cls(x[: r + 1], x[r + 1 : 2 * r + 1], x[2 * r + 1 : 2 * r + 5], x[2 * r + 5 :], r)


def _check_data(theta: HWParams, data: TrainingDataset):
    if data.length <= theta.r:
        raise ContractError(f"traces of length {data.length} are too short for order r={theta.r}")


def _forward(theta: HWParams, data: TrainingDataset, margin: float, check: bool = True):
    """Pinned-init simulation of every trace; returns intermediates for the gradient."""
    if check and not radius_below(theta.f, 1.0):
        raise StabilityError(theta.rho)
    _check_data(theta, data)
    r = theta.r
    beta, gamma = theta.beta, theta.gamma
    if gamma[0] == 0 or gamma[3] == 0:
        raise ContractError("gamma1 and gamma4 must be nonzero to pin the initial state")
    q = data.stsq
    sin = expit(beta[0] * q + beta[1])
    u = beta[2] + beta[3] * sin
    s_raw = (data.tvsq[:, :r] - gamma[2]) / gamma[3]
    s = np.clip(s_raw, margin, 1.0 - margin)
    v_init = (logit(s) - gamma[1]) / gamma[0]
    v = filter_latent(u, theta.b, theta.f, v_init)
    sout = expit(gamma[0] * v + gamma[1])
    qhat = gamma[2] + gamma[3] * sout
    return {"q": q, "sin": sin, "u": u, "s": s, "clipped": s != s_raw, "v_init": v_init,
            "v": v, "sout": sout, "qhat": qhat}


def true_objective(theta: HWParams, data: TrainingDataset, margin: float = INVERSION_MARGIN) -> float:
    """Outage rate of pinned-init predictions over ``t > r`` pooled across traces."""
    fw = _forward(theta, data, margin)
    return outage_rate(fw["qhat"], data.tvsq, theta.r, data.ci)


def approx_objective(theta: HWParams, data: TrainingDataset, nu: float,
                     margin: float = INVERSION_MARGIN, *, check: bool = True) -> float:
    """Mean smoothed penalty over all traces and ``t > r``."""
    r = theta.r
    fw = _forward(theta, data, margin, check)
    x = fw["qhat"][:, r:] - data.tvsq[:, r:]
    return float(np.mean(penalty(x, data.ci[:, r:], nu)))


def objective_and_gradient(theta: HWParams, data: TrainingDataset, nu: float,
                           margin: float = INVERSION_MARGIN):
    """Smoothed objective and its exact gradient in ``(b, f, beta, gamma)`` order."""
    r = theta.r
    b, f, beta, gamma = theta.b, theta.f, theta.beta, theta.gamma
    fw = _forward(theta, data, margin)
    n, T = data.stsq.shape
    meas = data.tvsq[:, r:]
    eps = data.ci[:, r:]
    x = fw["qhat"][:, r:] - meas
    value = float(np.mean(penalty(x, eps, nu)))
    w = penalty_derivative(x, eps, nu) / x.size

    u, v, sout = fw["u"], fw["v"], fw["sout"]
    so = sout[:, r:]
    dsig_out = so * (1 - so)
    # d qhat / d v, weighted by the penalty slope: drives every latent sensitivity
    c = w * gamma[3] * gamma[0] * dsig_out
    a = np.concatenate(([1.0], -f))

    # Regressor windows for t >= r: u[t-k] (k = 0..r) and v[t-k] (k = 1..r).
    xb = np.stack([u[:, r - k : T - k] for k in range(r + 1)], axis=1)
    xf = np.stack([v[:, r - k : T - k] for k in range(1, r + 1)], axis=1)
    sin = fw["sin"]
    dsig_in = sin * (1 - sin)
    du = np.stack([beta[3] * dsig_in * fw["q"], beta[3] * dsig_in, np.ones_like(sin), sin], axis=1)
    xbeta = fir(b, du)[..., r:]
    sens = lfilter([1.0], a, np.concatenate([xb, xf, xbeta], axis=1), axis=-1)
    g_lin = np.einsum("nt,npt->p", c, sens)

    # Pinned initial state depends on gamma; its influence decays through 1/a(z).
    g1 = gamma[0]
    s = fw["s"]
    free = ~fw["clipped"]
    dlogit = 1.0 / (s * (1 - s))
    dvinit = np.stack([
        -fw["v_init"] / g1,
        np.full_like(s, -1.0 / g1),
        np.where(free, -dlogit / (g1 * gamma[3]), 0.0),
        np.where(free, -dlogit * s / (g1 * gamma[3]), 0.0),
    ], axis=1)
    sgamma = filter_latent(np.zeros(dvinit.shape[:-1] + (T,)), np.zeros(r + 1), f, dvinit)[..., r:]
    g_gamma = np.einsum("nt,npt->p", c, sgamma)
    vv = v[:, r:]
    g_gamma += np.array([
        np.sum(w * gamma[3] * dsig_out * vv),
        np.sum(w * gamma[3] * dsig_out),
        np.sum(w),
        np.sum(w * so),
    ])
    return value, np.concatenate([g_lin, g_gamma])


def gradient(theta: HWParams, data: TrainingDataset, nu: float, margin: float = INVERSION_MARGIN):
    """Gradient of :func:`approx_objective` with respect to the flattened parameters."""
    return objective_and_gradient(theta, data, nu, margin)[1]


SCALINGS = ("none", "magnitude")

# Per-role lower bounds on the coordinate scale: b and f, then each
# (slope, shift, offset, amplitude) entry of beta and gamma.
_ROLE_FLOOR = {"b": 0.1, "f": 0.1, "sig": (0.01, 1.0, 10.0, 10.0)}


def parameter_scale(theta: HWParams, scaling: str = "magnitude") -> np.ndarray:
    """Diagonal coordinate scale ``D`` for descent in ``phi = theta / D``.

    ``"magnitude"`` uses ``max(|theta_i|, floor_i)`` with a floor per parameter
    role, so a unit step in ``phi`` moves every parameter by a comparable
    relative amount; ``"none"`` returns ones (plain steepest descent).
    """
    if scaling == "none":
        return np.ones(theta.n_params)
    if scaling != "magnitude":
        raise ContractError(f"unknown scaling {scaling!r}")
    r = theta.r
    floor = np.concatenate([
        np.full(r + 1, _ROLE_FLOOR["b"]), np.full(r, _ROLE_FLOOR["f"]),
        _ROLE_FLOOR["sig"], _ROLE_FLOOR["sig"],
    ])
    return np.maximum(np.abs(theta.to_vector()), floor)


@dataclass(frozen=True)
class TrainConfig:
    nu_init: float = 0.8
    nu_factor: float = 1.2
    nu_max: float = 20.0
    armijo_coeff: float = 0.1
    backtrack_factor: float = 0.7
    descent_tol: float = 1e-5
    initial_step: float = 1.0
    stability_margin: float = 1.0 - 1e-6
    min_step: float = 1e-12
    max_outer_iters: int = 100
    max_descent_iters: int = 500
    inversion_margin: float = INVERSION_MARGIN
    scaling: str = "magnitude"

    def __post_init__(self):
        if self.scaling not in SCALINGS:
            raise ContractError(f"scaling must be one of {SCALINGS}, got {self.scaling!r}")
        if not 0 < self.backtrack_factor < 1:
            raise ContractError("backtrack_factor must lie in (0, 1)")
        if self.nu_factor <= 1:
            raise ContractError("nu_factor must exceed 1")
        if self.descent_tol <= 0 or self.nu_init <= 0 or self.initial_step <= 0:
            raise ContractError("descent_tol, nu_init and initial_step must be positive")
        if not 0 < self.stability_margin <= 1:
            raise ContractError("stability_margin must lie in (0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DescentResult:
    x: np.ndarray
    fun: float
    iterations: int
    stalled: bool
    grad_norms: list = field(default_factory=list)
    values: list = field(default_factory=list)


def descend(fun: Callable, grad: Callable, x0, config: TrainConfig = TrainConfig(), *,
            admissible: Callable | None = None, on_accept: Callable | None = None) -> DescentResult:
    """Steepest descent with Armijo backtracking on a flat parameter vector.

    ``fun(x)`` returns the objective; ``grad(x)`` returns ``(value, gradient)``.
    A trial point must pass ``admissible`` (checked first, so ``fun`` never
    sees inadmissible points) and the sufficient-decrease test before it is
    accepted. Stops once one accepted step lowers the objective by less than
    ``descent_tol``.
    """
    x = np.asarray(x0, dtype=float).copy()
    fx, g = grad(x)
    res = DescentResult(x, fx, 0, False, values=[fx])
    for it in range(1, config.max_descent_iters + 1):
        res.iterations = it
        gn2 = float(g @ g)
        res.grad_norms.append(math.sqrt(gn2))
        if gn2 == 0.0:
            break
        step = -g
        omega = config.initial_step
        while True:
            trial = x + omega * step
            if admissible is None or admissible(trial):
                ft = fun(trial)
                if ft <= fx - config.armijo_coeff * omega * gn2:
                    break
            omega *= config.backtrack_factor
            if omega < config.min_step:
                res.stalled = True
                return res
        decrease = fx - ft
        x, fx = trial, ft
        res.x, res.fun = x, fx
        res.values.append(fx)
        if on_accept is not None:
            on_accept(x)
        if decrease < config.descent_tol:
            break
        fx, g = grad(x)
    return res


def gradient_descent(theta0: HWParams, data: TrainingDataset, nu: float,
                     config: TrainConfig = TrainConfig(), on_accept: Callable | None = None,
                     scale=None):
    """Minimise the smoothed objective at fixed ``nu``; returns ``(theta, DescentResult)``.

    The descent runs in ``phi = theta / scale`` (elementwise); ``scale``
    defaults to :func:`parameter_scale` of ``theta0`` under ``config.scaling``.
    ``on_accept`` receives accepted points in ``theta`` coordinates.
    """
    r = theta0.r
    D = parameter_scale(theta0, config.scaling) if scale is None else np.asarray(scale, dtype=float)
    if not radius_below(theta0.f, config.stability_margin):
        raise StabilityError(theta0.rho)
    margin = config.inversion_margin

    def unpack(phi):
        return _Theta.split(phi * D, r)

    def admissible(phi):
        f = phi[r + 1 : 2 * r + 1] * D[r + 1 : 2 * r + 1]
        return bool(np.all(np.isfinite(phi))) and radius_below(f, config.stability_margin)

    def fun(phi):
        return approx_objective(unpack(phi), data, nu, margin, check=False)

    def grad(phi):
        value, g = objective_and_gradient(unpack(phi), data, nu, margin)
        return value, g * D

    accept = None if on_accept is None else (lambda phi: on_accept(phi * D))
    res = descend(fun, grad, theta0.to_vector() / D, config, admissible=admissible, on_accept=accept)
    res.x = res.x * D
    return HWParams.from_vector(res.x, r), res


@dataclass
class TrainReport:
    theta_star: HWParams
    final_outage: float
    objective_history: list
    gradient_norm_history: list
    wall_time: float
    accepted_rho: list = field(default_factory=list)
    descent_iterations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    config: TrainConfig = field(default_factory=TrainConfig)

    @property
    def max_accepted_rho(self) -> float:
        return max(self.accepted_rho, default=self.theta_star.rho)

    def to_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "kind": "tvsq.TrainReport",
            "theta_star": self.theta_star.to_dict(),
            "final_outage": self.final_outage,
            "objective_history": [
                {"nu": nu, "approx_objective": ea, "outage": e} for nu, ea, e in self.objective_history
            ],
            "gradient_norm_history": self.gradient_norm_history,
            "wall_time": self.wall_time,
            "accepted_rho": self.accepted_rho,
            "descent_iterations": self.descent_iterations,
            "warnings": self.warnings,
            "config": self.config.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainReport":
        if d.get("version") != REPORT_VERSION:
            raise ContractError(f"unsupported report version {d.get('version')!r}")
        return cls(
            theta_star=HWParams.from_dict(d["theta_star"]),
            final_outage=float(d["final_outage"]),
            objective_history=[(h["nu"], h["approx_objective"], h["outage"]) for h in d["objective_history"]],
            gradient_norm_history=list(d["gradient_norm_history"]),
            wall_time=float(d["wall_time"]),
            accepted_rho=list(d.get("accepted_rho", [])),
            descent_iterations=list(d.get("descent_iterations", [])),
            warnings=list(d.get("warnings", [])),
            config=TrainConfig.from_dict(d.get("config", {})),
        )


def initial_guess(data: TrainingDataset, r: int, stability_margin: float = 0.99,
                  margin: float = INVERSION_MARGIN) -> HWParams:
    """Equation-error start for training.

    With both sigmoids fixed at :data:`NEAR_IDENTITY`, the measured quality is
    mapped back to the latent domain and ``b, f`` are fitted by linear least
    squares on ``v[t] ~ sum b_d u[t-d] + sum f_d v[t-d]``. If that fit is not
    stable within ``stability_margin`` the feedback is dropped and an FIR fit
    is used instead.
    """
    if data.length <= 2 * r + 1:
        return HWParams.initial(r)
    u = input_nonlinearity(data.stsq, NEAR_IDENTITY)
    v = invert_output_nonlinearity(data.tvsq, NEAR_IDENTITY, margin=margin)
    T = data.length
    ub = np.concatenate([np.stack([u[:, r - k : T - k] for k in range(r + 1)], axis=-1)], axis=0)
    vf = np.stack([v[:, r - k : T - k] for k in range(1, r + 1)], axis=-1)
    target = v[:, r:].reshape(-1)
    arx = np.concatenate([ub, vf], axis=-1).reshape(target.size, -1)
    coef, *_ = np.linalg.lstsq(arx, target, rcond=None)
    b, f = coef[: r + 1], coef[r + 1 :]
    if spectral_radius(f) >= stability_margin:
        b, *_ = np.linalg.lstsq(ub.reshape(target.size, -1), target, rcond=None)
        f = np.zeros(r)
    return HWParams(b=b, f=f, beta=NEAR_IDENTITY, gamma=NEAR_IDENTITY)


def train(data: TrainingDataset, r: int, config: TrainConfig = TrainConfig(), *,
          warm_start: HWParams | None = None) -> TrainReport:
    """Continuation over ``nu``: one gradient-descent stage per sharpness level.

    Starts from ``warm_start`` when given, otherwise from :func:`initial_guess`.
    """
    if r < 1:
        raise ContractError("model order r must be at least 1")
    if data.length <= r:
        raise ContractError(f"traces of length {data.length} are too short for order r={r}")
    theta = warm_start if warm_start is not None else initial_guess(data, r, margin=config.inversion_margin)
    if theta.r != r:
        raise ContractError(f"warm start has order {theta.r}, expected {r}")
    scale = parameter_scale(theta, config.scaling)
    start = time.perf_counter()
    history, grad_norms, accepted_rho, iters, warnings = [], [], [], [], []

    def record(x):
        accepted_rho.append(spectral_radius(x[r + 1 : 2 * r + 1]))

    for stage, nu in enumerate(nu_schedule(config.nu_init, config.nu_factor, config.nu_max)):
        if stage >= config.max_outer_iters:
            warnings.append(f"stopped after max_outer_iters={config.max_outer_iters} stages")
            break
        theta, res = gradient_descent(theta, data, nu, config, on_accept=record, scale=scale)
        e = true_objective(theta, data, config.inversion_margin)
        history.append((nu, res.fun, e))
        grad_norms.append(res.grad_norms[-1] if res.grad_norms else 0.0)
        iters.append(res.iterations)
        if res.stalled:
            msg = f"line search stalled at nu={nu:.6g} after {res.iterations} iterations"
            warnings.append(msg)
            log.warning(msg)
        log.debug("nu=%.4g E_apx=%.6f E=%.4f iters=%d", nu, res.fun, e, res.iterations)

    return TrainReport(
        theta_star=theta,
        final_outage=true_objective(theta, data, config.inversion_margin),
        objective_history=history,
        gradient_norm_history=grad_norms,
        wall_time=time.perf_counter() - start,
        accepted_rho=accepted_rho,
        descent_iterations=iters,
        warnings=warnings,
        config=config,
    )
