"""Dithered one-bit measurement channel.

Each measurement is ``y_i = sign(<a_i, theta0> + xi_i + tau_i)`` with
pre-quantization noise ``xi_i`` and a uniform dither ``tau_i ~ U[-lam, lam]``.
``sign(0)`` is taken to be ``+1``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, DomainError

__all__ = [
    "DISTRIBUTIONS",
    "NOISE_KINDS",
    "MeasurementSet",
    "sample_sensing",
    "quantize",
    "measure",
    "expected_sign",
    "sign_difference_fraction",
    "onebit_sign",
]

DISTRIBUTIONS = ("gaussian", "rademacher", "laplace")
NOISE_KINDS = ("none", "gaussian", "laplace")


def onebit_sign(v):
    """Elementwise sign with ``sign(0) = +1``."""
    return np.where(np.asarray(v) >= 0, 1.0, -1.0)


def _frozen(arr, dtype=float):
    arr = np.array(arr, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Sensing vectors, noise, dither and quantized labels.

    Attributes:
        a: ``(m, d)`` sensing matrix, one measurement per row.
        xi: pre-quantization noise, length ``m``.
        tau: dither draws, length ``m``; all zero if ``dither_disabled``.
        y: labels in ``{-1, +1}``.
        lam: dither half-width.
        dist: name of the sensing distribution (metadata).
        seed: seed used for ``xi`` and ``tau`` (metadata).
        noise: noise kind and ``noise_scale`` its parameter (metadata).
        dither_disabled: test-only switch that removes the dither.
    """

    a: np.ndarray
    xi: np.ndarray
    tau: np.ndarray
    y: np.ndarray
    lam: float
    dist: str = "gaussian"
    seed: int | None = None
    noise: str = "none"
    noise_scale: float = 0.0
    dither_disabled: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = _frozen(self.a)
        if a.ndim != 2 or a.shape[0] < 1:
            raise ConfigurationError(f"sensing matrix must be (m, d) with m >= 1, got {a.shape}")
        m = a.shape[0]
        xi, tau, y = _frozen(self.xi), _frozen(self.tau), _frozen(self.y)
        for name, v in (("xi", xi), ("tau", tau), ("y", y)):
            if v.shape != (m,):
                raise ConfigurationError(f"{name} has shape {v.shape}, expected ({m},)")
        if not self.lam > 0:
            raise ConfigurationError(f"dither half-width must be positive, got {self.lam}")
        if np.any(np.abs(tau) > self.lam):
            raise ConfigurationError("dither draws exceed the half-width")
        if not np.all(np.abs(y) == 1):
            raise ConfigurationError("labels must be +1 or -1")
        for name, v in (("a", a), ("xi", xi), ("tau", tau), ("y", y)):
            object.__setattr__(self, name, v)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def d(self) -> int:
        return self.a.shape[1]

    @cached_property
    def correlation(self) -> np.ndarray:
        """``(lam / m) * sum_i y_i a_i``, the only statistic the risk needs."""
        b = (self.lam / self.m) * (self.a.T @ self.y)
        b.flags.writeable = False
        return b

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "dist": self.dist,
            "seed": self.seed,
            "noise": self.noise,
            "noise_scale": self.noise_scale,
            "dither_disabled": self.dither_disabled,
            "a": self.a.tolist(),
            "xi": self.xi.tolist(),
            "tau": self.tau.tolist(),
            "y": [int(v) for v in self.y],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MeasurementSet":
        try:
            return cls(a=doc["a"], xi=doc["xi"], tau=doc["tau"], y=doc["y"], lam=doc["lambda"],
                       dist=doc.get("dist", "gaussian"), seed=doc.get("seed"),
                       noise=doc.get("noise", "none"), noise_scale=doc.get("noise_scale", 0.0),
                       dither_disabled=doc.get("dither_disabled", False))
        except KeyError as exc:
            raise ConfigurationError(f"measurement document lacks key {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "MeasurementSet":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "MeasurementSet":
        with open(path) as fh:
            return cls.from_json(fh.read())

    def labels_csv(self) -> str:
        """CSV text with columns ``i, y``."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["i", "y"])
        writer.writerows((i, int(v)) for i, v in enumerate(self.y))
        return buf.getvalue()


def sample_sensing(dist: str, m: int, d: int, seed: int) -> np.ndarray:
    """Draw an ``(m, d)`` matrix with i.i.d. zero-mean, unit-variance entries.

    ``laplace`` uses scale ``1/sqrt(2)`` so that rows stay isotropic.
    """
    if m < 1 or d < 1:
        raise ConfigurationError(f"need m, d >= 1, got m={m}, d={d}")
    rng = np.random.default_rng(seed)
    if dist == "gaussian":
        return rng.standard_normal((m, d))
    if dist == "rademacher":
        return rng.choice(np.array([-1.0, 1.0]), size=(m, d))
    if dist == "laplace":
        return rng.laplace(0.0, 1.0 / np.sqrt(2.0), size=(m, d))
    raise ConfigurationError(f"unknown sensing distribution {dist!r}; choose from {DISTRIBUTIONS}")


def _draw_noise(rng, kind, scale, m):
    if kind == "none":
        return np.zeros(m)
    if scale < 0:
        raise ConfigurationError(f"noise scale must be nonnegative, got {scale}")
    if kind == "gaussian":
        return rng.normal(0.0, scale, size=m)
    if kind == "laplace":
        return rng.laplace(0.0, scale, size=m)
    raise ConfigurationError(f"unknown noise kind {kind!r}; choose from {NOISE_KINDS}")


def quantize(a, theta0, noise: str = "none", noise_scale: float = 0.0, lam: float = 10.0,
             seed: int = 0, *, dist: str = "gaussian",
             dither_disabled: bool = False) -> MeasurementSet:
    """Quantize ``theta0`` against the rows of ``a``.

    Args:
        a: ``(m, d)`` sensing matrix.
        theta0: signal in ``R^d``.
        noise: ``"none"``, ``"gaussian"`` (``noise_scale`` is the standard
            deviation) or ``"laplace"`` (``noise_scale`` is the Laplace scale).
        lam: dither half-width, must be positive.
        seed: seed for noise and dither.
        dist: recorded as metadata only.
        dither_disabled: sets every ``tau_i`` to zero.  Only meant for
            demonstrating why dithering is needed.
    """
    if not lam > 0:
        raise ConfigurationError(f"dither half-width must be positive, got {lam}")
    a = np.asarray(a, dtype=float)
    theta0 = np.asarray(theta0, dtype=float)
    if a.ndim != 2 or theta0.shape != (a.shape[1],):
        raise DomainError(f"theta0 of shape {theta0.shape} incompatible with sensing matrix {a.shape}")
    if not np.all(np.isfinite(theta0)):
        raise DomainError("theta0 must be finite")
    m = a.shape[0]
    rng = np.random.default_rng(seed)
    xi = _draw_noise(rng, noise, noise_scale, m)
    tau = np.zeros(m) if dither_disabled else rng.uniform(-lam, lam, size=m)
    y = onebit_sign(a @ theta0 + xi + tau)
    return MeasurementSet(a=a, xi=xi, tau=tau, y=y, lam=lam, dist=dist, seed=seed,
                          noise=noise, noise_scale=noise_scale, dither_disabled=dither_disabled)


def measure(theta0, m: int, dist: str = "gaussian", noise: str = "none",
            noise_scale: float = 0.0, lam: float = 10.0, seed: int = 0,
            dither_disabled: bool = False) -> MeasurementSet:
    """Sample a sensing matrix and quantize ``theta0`` in one call.

    The sensing matrix and the noise/dither use independent streams spawned
    from ``seed``.
    """
    theta0 = np.asarray(theta0, dtype=float)
    s_a, s_q = np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64)
    a = sample_sensing(dist, m, theta0.size, int(s_a))
    ms = quantize(a, theta0, noise, noise_scale, lam, int(s_q), dist=dist,
                  dither_disabled=dither_disabled)
    object.__setattr__(ms, "seed", seed)
    return ms


def expected_sign(v, lam: float):
    """``E_tau[sign(v + tau)]`` for ``tau ~ U[-lam, lam]``.

    Equals ``v / lam`` on ``|v| <= lam`` and saturates at ``+-1`` outside.
    """
    if not lam > 0:
        raise DomainError(f"lam must be positive, got {lam}")
    out = np.clip(np.asarray(v, dtype=float) / lam, -1.0, 1.0)
    return float(out) if out.ndim == 0 else out


def sign_difference_fraction(ms: MeasurementSet, theta1, theta2) -> float:
    """Fraction of measurements whose label flips between two signals.

    Both signals see the same ``(a_i, xi_i, tau_i)``.
    """
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    if theta1.shape != (ms.d,) or theta2.shape != (ms.d,):
        raise DomainError(f"signals must have shape ({ms.d},)")
    shift = ms.xi + ms.tau
    s1 = onebit_sign(ms.a @ theta1 + shift)
    s2 = onebit_sign(ms.a @ theta2 + shift)
    return float(np.mean(s1 != s2))
