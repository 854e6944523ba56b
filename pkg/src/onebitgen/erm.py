"""Empirical risk for one-bit recovery with a generative prior.

The risk is::

    L(x) = ||G(x)||^2 - (2 lam / m) sum_i y_i <a_i, G(x)>
         = ||G(x)||^2 - 2 <b, G(x)>,      b = (lam / m) sum_i y_i a_i

so every function here reduces a :class:`MeasurementSet` to its correlation
vector ``b`` once.  With ``b = G(x0)`` the same formulas give the
infinite-sample surrogate ``||G(x)||^2 - 2 <G(x0), G(x)>``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import ConfigurationError, DomainError, NumericalFailure
from .generator import ReluNetwork, active_branch, forward
from .sensing import MeasurementSet

__all__ = [
    "SolverOptions",
    "RecoveryResult",
    "signal_loss",
    "loss",
    "subgradient",
    "directional_derivative",
    "surrogate_loss",
    "surrogate_subgradient",
    "finite_diff_gradient",
    "recover",
    "relative_error",
]

log = logging.getLogger(__name__)

REL_ERROR_FLOOR = 1e-15


def _target(ms_or_b, d):
    b = ms_or_b.correlation if isinstance(ms_or_b, MeasurementSet) else np.asarray(ms_or_b, dtype=float)
    if b.shape != (d,):
        raise DomainError(f"measurements live in R^{b.shape[0]}, network outputs R^{d}")
    return b


def _risk(net, b, x):
    g = forward(net, x)
    return float(g @ g - 2.0 * (b @ g))


def _grad(net, b, x, anchor=None):
    comp = active_branch(net, x if anchor is None else anchor).composite
    return 2.0 * (comp.T @ (comp @ np.asarray(x, dtype=float) - b))


def signal_loss(ms: MeasurementSet, theta) -> float:
    """Risk evaluated directly at a signal ``theta = G(x)``."""
    theta = np.asarray(theta, dtype=float)
    b = _target(ms, theta.size)
    return float(theta @ theta - 2.0 * (b @ theta))


def loss(net: ReluNetwork, ms: MeasurementSet, x) -> float:
    """Empirical risk ``L(x)``."""
    return _risk(net, _target(ms, net.output_dim), x)


def subgradient(net: ReluNetwork, ms: MeasurementSet, x) -> np.ndarray:
    """``v_x = 2 H^T H x - (2 lam / m) sum_i y_i H^T a_i`` with ``H`` the active branch at ``x``.

    This is the gradient wherever ``L`` is differentiable; at kinks it uses
    the strict-positivity mask convention.
    """
    return _grad(net, _target(ms, net.output_dim), x)


def _probe_derivative(net, b, x, w):
    w = np.asarray(w, dtype=float)
    norm = np.linalg.norm(w)
    if norm == 0:
        raise DomainError("direction must be nonzero")
    w_hat = w / norm
    x = np.asarray(x, dtype=float)
    t0 = 1e-9 * max(1.0, float(np.linalg.norm(x)))
    return float(_grad(net, b, x, anchor=x + t0 * w_hat) @ w_hat)


def directional_derivative(net: ReluNetwork, ms: MeasurementSet, x, w) -> float:
    """One-sided derivative of ``L`` at ``x`` along ``w / ||w||``.

    The limit is realized by taking the masks of the probe point
    ``x + t0 w_hat`` with ``t0 = 1e-9 max(1, ||x||)``; the risk is quadratic
    on the segment between ``x`` and the probe, so the derivative of that
    quadratic at ``x`` is returned.
    """
    return _probe_derivative(net, _target(ms, net.output_dim), x, w)


def surrogate_loss(net: ReluNetwork, x, x0) -> float:
    """Infinite-sample risk ``||G(x)||^2 - 2 <G(x0), G(x)>``."""
    return _risk(net, forward(net, x0), x)


def surrogate_subgradient(net: ReluNetwork, x, x0) -> np.ndarray:
    return _grad(net, forward(net, x0), x)


def finite_diff_gradient(net: ReluNetwork, ms: MeasurementSet, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of :func:`loss`."""
    if not h > 0:
        raise DomainError("step must be positive")
    x = np.asarray(x, dtype=float)
    b = _target(ms, net.output_dim)
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (_risk(net, b, x + e) - _risk(net, b, x - e)) / (2.0 * h)
    return grad


def relative_error(net: ReluNetwork, x_hat, x0) -> float:
    g0 = forward(net, x0)
    return float(np.linalg.norm(forward(net, x_hat) - g0) / max(np.linalg.norm(g0), REL_ERROR_FLOOR))


@dataclass
class SolverOptions:
    """Settings for :func:`recover`.

    Iteration stops when ``||v_x|| <= tol_grad``, when the relative loss
    change over the last 10 iterations is at most ``tol_loss``, or when the
    line search cannot find any decrease.
    """

    step: float = 0.1
    max_iters: int = 2000
    tol_grad: float = 1e-8
    tol_loss: float = 1e-12
    negation_period: int = 50
    init_radius: float = 0.1
    seed: int = 0
    init: list | None = None
    negation_restarts: bool = True
    backtrack_factor: float = 0.5
    sufficient_decrease: float = 1e-4
    max_backtracks: int = 60

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigurationError("step must be positive")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be at least 1")
        if self.negation_period < 1:
            raise ConfigurationError("negation_period must be at least 1")
        if not 0 < self.backtrack_factor < 1:
            raise ConfigurationError("backtrack_factor must lie in (0, 1)")

    @classmethod
    def from_dict(cls, doc: dict | None) -> "SolverOptions":
        doc = dict(doc or {})
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown solver options {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RecoveryResult:
    x_hat: np.ndarray
    g_x_hat: np.ndarray
    loss_trace: list
    restarts: int
    converged: bool
    iterations: int
    relative_error: float | None = None
    config_echo: dict = field(default_factory=dict)

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1][1]

    def to_dict(self) -> dict:
        return {
            "x_hat": self.x_hat.tolist(),
            "g_x_hat": self.g_x_hat.tolist(),
            "loss_trace": [[int(i), float(v)] for i, v in self.loss_trace],
            "restarts": self.restarts,
            "converged": self.converged,
            "iterations": self.iterations,
            "relative_error": self.relative_error,
            "config_echo": self.config_echo,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def trace_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "loss"])
        writer.writerows((i, repr(float(v))) for i, v in self.loss_trace)
        return buf.getvalue()


def recover(net: ReluNetwork, ms, opts: SolverOptions | None = None, x0=None) -> RecoveryResult:
    """Minimize the empirical risk by subgradient descent.

    Each iteration steps along ``-v_x`` with Armijo backtracking, so accepted
    losses never increase.  Every ``negation_period`` iterations, and again
    whenever the iteration stalls, the solver compares ``L(-x)`` with
    ``L(x)`` and jumps to ``-x`` if that is strictly better; this escapes
    the spurious basin on the far side of the origin.

    Args:
        net: generator.
        ms: a :class:`MeasurementSet`, or a correlation vector ``b`` directly.
        opts: solver settings; defaults if omitted.
        x0: true representation, only used to report ``relative_error``.

    Raises:
        NumericalFailure: if a non-finite loss is encountered.
    """
    opts = opts or SolverOptions()
    b = _target(ms, net.output_dim)
    k = net.input_dim
    if opts.init is not None:
        x = np.asarray(opts.init, dtype=float)
        if x.shape != (k,):
            raise ConfigurationError(f"init must have length {k}")
    else:
        u = np.random.default_rng(opts.seed).standard_normal(k)
        x = opts.init_radius * u / np.linalg.norm(u)

    cur = _risk(net, b, x)
    if not np.isfinite(cur):
        raise NumericalFailure("non-finite loss at initial point", trace=[(0, cur)])
    trace = [(0, cur)]
    restarts = 0
    converged = False
    it = 0

    # fixed probe directions for kink escapes: +-e_i and the -v_x direction
    kink_dirs = [s * e for e in np.eye(k) for s in (1.0, -1.0)]

    def line_search(v):
        nonlocal x, cur
        gnorm2 = float(v @ v)
        step = opts.step
        for _ in range(opts.max_backtracks):
            cand = x - step * v
            val = _risk(net, b, cand)
            if not np.isfinite(val):
                raise NumericalFailure(f"non-finite loss at iteration {it}", trace=trace)
            if val <= cur - opts.sufficient_decrease * step * gnorm2:
                x, cur = cand, val
                return True
            step *= opts.backtrack_factor
        return False

    def try_negation():
        nonlocal x, cur, restarts
        if not opts.negation_restarts:
            return False
        alt = _risk(net, b, -x)
        if alt < cur:
            x, cur = -x, alt
            restarts += 1
            return True
        return False

    while it < opts.max_iters:
        it += 1
        v = _grad(net, b, x)
        gnorm = float(np.linalg.norm(v))
        stalled = gnorm <= opts.tol_grad
        if not stalled:
            accepted = line_search(v)
            if not accepted:
                # x sits on a kink where -v_x is not a descent direction;
                # retry with subgradients of the neighbouring pieces
                radius = 1e-6 * max(1.0, float(np.linalg.norm(x)))
                for u in kink_dirs:
                    vu = _grad(net, b, x, anchor=x + radius * u)
                    if np.linalg.norm(vu) > opts.tol_grad and line_search(vu):
                        accepted = True
                        break
            stalled = not accepted
        if not stalled and len(trace) > 10:
            ref = trace[-10][1]
            stalled = abs(ref - cur) <= opts.tol_loss * max(abs(ref), abs(cur), 1e-300)
        if stalled:
            if try_negation():
                trace.append((it, cur))
                continue
            trace.append((it, cur))
            converged = True
            break
        if it % opts.negation_period == 0:
            try_negation()
        trace.append((it, cur))

    g = forward(net, x)
    rel = relative_error(net, x, x0) if x0 is not None else None
    log.debug("recover: %d iterations, loss %.6g, restarts %d", it, cur, restarts)
    return RecoveryResult(x_hat=x, g_x_hat=g, loss_trace=trace, restarts=restarts,
                          converged=converged, iterations=it, relative_error=rel,
                          config_echo=opts.to_dict())
