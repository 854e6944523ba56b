"""Landscape analysis of the empirical risk.

Contents:

* the Weight Distribution Condition (WDC): ``M``/``Q`` matrices, the
  deviation ``||W_{+,x}^T W_{+,z} - Q_{x,z}||_2`` and a sampled estimate of
  its supremum;
* the angle map ``g`` and the constants ``rho_n`` that locate the spurious
  stationary point at ``-rho_n x0``;
* the expected half-gradient ``h_{x,x0}``;
* radii of the exceptional balls and zone classification;
* grid evaluation of the risk for two-dimensional latent spaces.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .erm import _probe_derivative, _grad, _risk, _target
from .errors import DomainError, NumericalFailure, ConfigurationError
from .generator import ReluNetwork, forward
from .sensing import MeasurementSet

__all__ = [
    "ZONES",
    "WdcReport",
    "LandscapeReport",
    "Radii",
    "angle",
    "m_matrix",
    "q_matrix",
    "spectral_norm",
    "wdc_deviation",
    "estimate_wdc",
    "g_angle",
    "rho_check_sequence",
    "rho_n",
    "h_vector",
    "radii",
    "epsilon_conditions",
    "classify",
    "landscape_grid",
]

ZONES = ("near_x0", "near_neg_rho_x0", "near_zero", "outside")

PROOF_C4 = 616.0
PROOF_C5 = 5500.0


def angle(x, z) -> float:
    """Angle between two nonzero vectors, via a clamped arccos."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    nx, nz = np.linalg.norm(x), np.linalg.norm(z)
    if nx == 0 or nz == 0:
        raise DomainError("angle undefined for a zero vector")
    return float(np.arccos(np.clip((x @ z) / (nx * nz), -1.0, 1.0)))


def m_matrix(x_hat, z_hat) -> np.ndarray:
    """Symmetric map sending ``x_hat -> z_hat``, ``z_hat -> x_hat`` and the
    orthogonal complement of their span to zero.

    Built as ``U^T B U`` with ``B = [[cos, sin], [sin, -cos]]`` acting on an
    orthonormal basis ``(x_hat, u2)`` of the span.  Collinear inputs give
    ``x_hat x_hat^T`` (angle 0) or ``-x_hat x_hat^T`` (angle pi).
    """
    x_hat = np.asarray(x_hat, dtype=float)
    z_hat = np.asarray(z_hat, dtype=float)
    if x_hat.shape != z_hat.shape or x_hat.ndim != 1:
        raise DomainError("x_hat and z_hat must be vectors of equal length")
    if abs(np.linalg.norm(x_hat) - 1) > 1e-10 or abs(np.linalg.norm(z_hat) - 1) > 1e-10:
        raise DomainError("m_matrix needs unit vectors")
    c = float(np.clip(x_hat @ z_hat, -1.0, 1.0))
    perp = z_hat - c * x_hat
    s = float(np.linalg.norm(perp))
    if s < 1e-12:
        sign = 1.0 if c > 0 else -1.0
        return sign * np.outer(x_hat, x_hat)
    basis = np.stack([x_hat, perp / s])         # rows: U restricted to the span
    block = np.array([[c, s], [s, -c]])
    return basis.T @ block @ basis


def q_matrix(x, z) -> np.ndarray:
    """``Q_{x,z} = (pi - a) / (2 pi) I + sin(a) / (2 pi) M``, ``a`` the angle."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    a = angle(x, z)
    eye = np.eye(x.size)
    if a == math.pi:
        return 0.0 * eye
    m = m_matrix(x / np.linalg.norm(x), z / np.linalg.norm(z))
    return (math.pi - a) / (2 * math.pi) * eye + math.sin(a) / (2 * math.pi) * m


def spectral_norm(a, tol: float = 1e-10, max_iter: int = 5000) -> float:
    """Largest singular value by power iteration on ``A^T A``.

    The start vector is the normalized all-ones vector, so results are
    deterministic.  Iteration stops once the Rayleigh quotient changes by
    less than ``tol`` relative.

    Raises:
        NumericalFailure: if ``max_iter`` is reached first.
    """
    a = np.asarray(a, dtype=float)
    ata = a.T @ a
    v = np.ones(ata.shape[0]) / math.sqrt(ata.shape[0])
    lam = float(v @ ata @ v)
    for _ in range(max_iter):
        w = ata @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        new = float(v @ ata @ v)
        if abs(new - lam) <= tol * max(abs(new), 1e-300):
            return math.sqrt(max(new, 0.0))
        lam = new
    raise NumericalFailure(f"power iteration did not converge in {max_iter} iterations")


def _masked(w, x):
    return w * (w @ x > 0)[:, None]


def wdc_deviation(w, x, z) -> float:
    """``||W_{+,x}^T W_{+,z} - Q_{x,z}||_2`` for a single layer ``W``."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if w.ndim != 2 or x.shape != (w.shape[1],) or z.shape != (w.shape[1],):
        raise DomainError("x and z must match the column count of W")
    dev = _masked(w, x).T @ _masked(w, z) - q_matrix(x, z)
    return spectral_norm(dev)


@dataclass
class WdcReport:
    """Sampled WDC deviations for one layer.

    ``epsilon_hat`` is a maximum over finitely many pairs, hence a lower
    bound on the true WDC constant.
    """

    layer_index: int
    epsilon_hat: float
    pair_count: int
    worst_pair: dict
    deviation_quantiles: list

    def to_dict(self) -> dict:
        return {
            "layer_index": self.layer_index,
            "epsilon_hat": self.epsilon_hat,
            "pair_count": self.pair_count,
            "worst_pair": self.worst_pair,
            "deviation_quantiles": [[q, v] for q, v in self.deviation_quantiles],
        }


def estimate_wdc(w, n_pairs: int, seed: int, layer_index: int = 1) -> WdcReport:
    """Maximum WDC deviation over sampled direction pairs.

    Besides ``n_pairs`` uniformly random pairs, the special pairs
    ``(x, x)``, ``(x, -x)`` and ten near-parallel pairs are always included.
    """
    if n_pairs < 1:
        raise ConfigurationError("n_pairs must be at least 1")
    w = np.asarray(w, dtype=float)
    p = w.shape[1]
    rng = np.random.default_rng(seed)

    def unit():
        u = rng.standard_normal(p)
        return u / np.linalg.norm(u)

    pairs = [(unit(), unit()) for _ in range(n_pairs)]
    base = unit()
    pairs.append((base, base))
    pairs.append((base, -base))
    for j in range(10):
        tilt = unit()
        pairs.append((base, base + 10.0 ** -(j + 1) * tilt))

    devs = np.array([wdc_deviation(w, x, z) for x, z in pairs])
    worst = int(np.argmax(devs))
    x, z = pairs[worst]
    qs = (0.5, 0.9, 0.99, 1.0)
    return WdcReport(
        layer_index=layer_index,
        epsilon_hat=float(devs[worst]),
        pair_count=len(pairs),
        worst_pair={"x": x.tolist(), "z": z.tolist(), "angle": angle(x, z),
                    "deviation": float(devs[worst])},
        deviation_quantiles=[(q, float(np.quantile(devs, q))) for q in qs],
    )


def g_angle(rho: float) -> float:
    """``g(r) = arccos(((pi - r) cos r + sin r) / pi)`` on ``[0, pi]``."""
    if not 0.0 <= rho <= math.pi:
        raise DomainError(f"angle {rho} outside [0, pi]")
    arg = ((math.pi - rho) * math.cos(rho) + math.sin(rho)) / math.pi
    return math.acos(min(1.0, max(-1.0, arg)))


def _sin(a):
    # sin(pi) is not exactly 0 in floating point; the recursions start at pi
    return 0.0 if a == math.pi else math.sin(a)


def _angle_chain(start, n):
    chain = [start]
    for _ in range(n - 1):
        chain.append(g_angle(chain[-1]))
    return chain


def _sum_product(chain):
    n = len(chain)
    total = 0.0
    for i in range(n):
        prod = 1.0
        for j in range(i + 1, n):
            prod *= (math.pi - chain[j]) / math.pi
        total += _sin(chain[i]) / math.pi * prod
    return total


def rho_check_sequence(n: int) -> list:
    """Angles ``[pi, g(pi), g(g(pi)), ...]`` of length ``n``."""
    if n < 1:
        raise DomainError("n must be at least 1")
    return _angle_chain(math.pi, n)


def rho_n(n: int) -> float:
    """Scale of the spurious stationary point ``-rho_n x0`` for depth ``n``."""
    return _sum_product(rho_check_sequence(n))


def h_vector(x, x0, n: int) -> np.ndarray:
    """Expected half-gradient ``h_{x,x0}`` of the surrogate risk.

    ``2^n h = x - [prod_i (pi - r_i)/pi] x0
    - [sum_i sin(r_i)/pi prod_{j>i} (pi - r_j)/pi] (||x0|| / ||x||) x``
    with ``r_0 = angle(x, x0)`` and ``r_i = g(r_{i-1})``, indices running
    over ``0 .. n-1``.
    """
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    chain = _angle_chain(angle(x, x0), n)
    prod_all = 1.0
    for r in chain:
        prod_all *= (math.pi - r) / math.pi
    coef = _sum_product(chain) * np.linalg.norm(x0) / np.linalg.norm(x)
    return (x - prod_all * x0 - coef * x) / 2.0 ** n


@dataclass(frozen=True)
class Radii:
    delta_check: float
    delta_1: float
    delta_2: float

    def as_tuple(self):
        return (self.delta_check, self.delta_1, self.delta_2)


def radii(n: int, eps_wdc: float, x0_norm: float, c4: float = PROOF_C4,
          c5: float = PROOF_C5) -> Radii:
    """Radii of the balls excluded by the descent-direction guarantee.

    ``delta_check = 2^{n/2} eps^{1/2}``, ``delta_1 = c4 n^3 eps^{1/4} ||x0||``
    and ``delta_2 = c5 n^14 eps^{1/4} ||x0||``.
    """
    if not eps_wdc > 0:
        raise DomainError("eps_wdc must be positive")
    q = eps_wdc ** 0.25
    return Radii(2.0 ** (n / 2) * math.sqrt(eps_wdc), c4 * n ** 3 * q * x0_norm,
                 c5 * n ** 14 * q * x0_norm)


def epsilon_conditions(n: int, eps_wdc: float) -> dict:
    """Checkable smallness conditions on ``eps_wdc`` used by the proofs."""
    return {
        "8*pi*n^6*sqrt(eps) <= 1": 8 * math.pi * n ** 6 * math.sqrt(eps_wdc) <= 1,
        "88*pi*n^6*eps^(1/4) < 1": 88 * math.pi * n ** 6 * eps_wdc ** 0.25 < 1,
    }


def classify(x, x0, r, rho: float) -> str:
    """Zone of ``x``; the first matching ball in the order of :data:`ZONES` wins."""
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if isinstance(r, Radii):
        r = r.as_tuple()
    delta_check, delta_1, delta_2 = r
    if np.linalg.norm(x - x0) <= delta_1:
        return "near_x0"
    if np.linalg.norm(x + rho * x0) <= delta_2:
        return "near_neg_rho_x0"
    if np.linalg.norm(x) <= delta_check:
        return "near_zero"
    return "outside"


@dataclass
class LandscapeReport:
    """Risk evaluated on a regular 2-D grid.

    ``loss``, ``grad_norm`` and ``descent_ok`` are arrays indexed
    ``[i, j]`` with ``i`` running over the first coordinate ``axis1[i]``.
    ``descent_ok`` records whether the derivative along ``-v_x`` is negative.
    Zones use ``zone_radii``; the proof radii are reported alongside when an
    ``eps_wdc`` was supplied.
    """

    axis1: np.ndarray
    axis2: np.ndarray
    loss: np.ndarray
    grad_norm: np.ndarray
    descent_ok: np.ndarray
    zone: np.ndarray
    rho_n: float
    zone_radii: Radii
    theory_radii: Radii | None
    mode: str
    m: int | None
    x0: np.ndarray
    depth: int
    extra: dict = field(default_factory=dict)

    def cells(self):
        """Iterate ``(x1, x2, loss, grad_norm, descent_ok, zone)`` in row-major order."""
        for i, a in enumerate(self.axis1):
            for j, b in enumerate(self.axis2):
                yield (float(a), float(b), float(self.loss[i, j]), float(self.grad_norm[i, j]),
                       bool(self.descent_ok[i, j]), str(self.zone[i, j]))

    def coordinates(self) -> np.ndarray:
        return np.array([[c[0], c[1]] for c in self.cells()])

    def argmin(self) -> np.ndarray:
        i, j = np.unravel_index(np.argmin(self.loss), self.loss.shape)
        return np.array([self.axis1[i], self.axis2[j]])

    def strict_local_minima(self) -> list:
        """Grid points whose loss is strictly below all (up to 8) neighbours."""
        out = []
        n1, n2 = self.loss.shape
        for i in range(n1):
            for j in range(n2):
                v = self.loss[i, j]
                nb = self.loss[max(i - 1, 0):i + 2, max(j - 1, 0):j + 2]
                if np.sum(nb <= v) == 1:
                    out.append(np.array([self.axis1[i], self.axis2[j]]))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x1", "x2", "loss", "grad_norm", "descent_ok", "zone"])
        for x1, x2, lo, gn, ok, zone in self.cells():
            writer.writerow([repr(x1), repr(x2), repr(lo), repr(gn), int(ok), zone])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "m": self.m,
            "x0": self.x0.tolist(),
            "depth": self.depth,
            "rho_n": self.rho_n,
            "zone_radii": list(self.zone_radii.as_tuple()),
            "theory_radii": None if self.theory_radii is None else list(self.theory_radii.as_tuple()),
            "axis1": self.axis1.tolist(),
            "axis2": self.axis2.tolist(),
            "loss": self.loss.tolist(),
            "grad_norm": self.grad_norm.tolist(),
            "descent_ok": self.descent_ok.astype(int).tolist(),
            "zone": self.zone.tolist(),
            "extra": self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def landscape_grid(net: ReluNetwork, x0, lo: float = -2.0, hi: float = 2.0,
                   resolution: int = 81, ms: MeasurementSet | None = None,
                   zone_radii=None, eps_wdc: float | None = None) -> LandscapeReport:
    """Evaluate the risk on a ``resolution x resolution`` grid over ``[lo, hi]^2``.

    With ``ms`` the empirical risk is used; without it the surrogate
    ``||G(x)||^2 - 2 <G(x0), G(x)>``.

    Args:
        zone_radii: ``(delta_check, delta_1, delta_2)`` used for the zone
            labels; defaults to ``(0.1, 0.3 ||x0||, 0.3 ||x0||)`` because the
            proof radii are far larger than the plotted window.
        eps_wdc: if given, the proof radii for this WDC constant are
            attached as ``theory_radii``.

    Raises:
        DomainError: if the latent dimension is not 2.
    """
    if net.input_dim != 2:
        raise DomainError(f"grid evaluation needs a 2-D latent space, got k={net.input_dim}")
    if resolution < 2:
        raise ConfigurationError("resolution must be at least 2")
    x0 = np.asarray(x0, dtype=float)
    x0_norm = float(np.linalg.norm(x0))
    if ms is None:
        b, mode, m = forward(net, x0), "surrogate", None
    else:
        b, mode, m = _target(ms, net.output_dim), "empirical", ms.m
    n = net.depth
    rho = rho_n(n)
    if zone_radii is None:
        zone_radii = Radii(0.1, 0.3 * x0_norm, 0.3 * x0_norm)
    elif not isinstance(zone_radii, Radii):
        zone_radii = Radii(*zone_radii)
    theory = radii(n, eps_wdc, x0_norm) if eps_wdc is not None else None

    axis = np.linspace(lo, hi, resolution)
    shape = (resolution, resolution)
    loss = np.empty(shape)
    gnorm = np.empty(shape)
    ok = np.zeros(shape, dtype=bool)
    zone = np.empty(shape, dtype=object)
    for i, a in enumerate(axis):
        for j, c in enumerate(axis):
            x = np.array([a, c])
            loss[i, j] = _risk(net, b, x)
            v = _grad(net, b, x)
            gnorm[i, j] = np.linalg.norm(v)
            if gnorm[i, j] > 0:
                ok[i, j] = _probe_derivative(net, b, x, -v) < 0
            zone[i, j] = classify(x, x0, zone_radii, rho)
    return LandscapeReport(axis1=axis, axis2=axis.copy(), loss=loss, grad_norm=gnorm,
                           descent_ok=ok, zone=zone.astype(str), rho_n=rho,
                           zone_radii=zone_radii, theory_radii=theory, mode=mode, m=m,
                           x0=x0, depth=n)
