"""Offset-free ReLU generators G: R^k -> R^d.

A network is ``G(x) = relu(W_n relu(... relu(W_1 x)))`` with no bias terms,
so it is positively homogeneous and piecewise linear.  Around any anchor
``x`` the network coincides with the linear map ``H_x`` obtained by zeroing
the rows of each ``W_i`` whose pre-activation at ``x`` is not strictly
positive; :func:`active_branch` builds that map.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DomainError

__all__ = [
    "ReluNetwork",
    "ActiveBranch",
    "new_random_gaussian",
    "forward",
    "active_branch",
    "branch_apply",
    "group_sparse_network",
    "encode_group_sparse",
    "relu",
]


def relu(v):
    return np.maximum(v, 0.0)


def _readonly(arr):
    arr = np.array(arr, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ReluNetwork:
    """Dense offset-free ReLU network.

    Attributes:
        dims: layer widths ``[k, d_1, ..., d_n]``; ``dims[-1]`` is the output
            dimension ``d``.
        weights: ``n`` matrices, ``weights[i]`` of shape
            ``(dims[i + 1], dims[i])``.
        label: free-form provenance string.
    """

    dims: tuple
    weights: tuple
    label: str = ""

    def __post_init__(self):
        dims = tuple(int(v) for v in self.dims)
        if len(dims) < 2 or any(v < 1 for v in dims):
            raise ConfigurationError(f"invalid layer widths {list(self.dims)}")
        if len(self.weights) != len(dims) - 1:
            raise ConfigurationError(
                f"{len(dims) - 1} layers implied by dims but {len(self.weights)} weight matrices given")
        weights = []
        for i, w in enumerate(self.weights):
            w = _readonly(w)
            if w.shape != (dims[i + 1], dims[i]):
                raise ConfigurationError(
                    f"layer {i + 1}: weight shape {w.shape} != {(dims[i + 1], dims[i])}")
            if not np.all(np.isfinite(w)):
                raise ConfigurationError(f"layer {i + 1}: non-finite weights")
            weights.append(w)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "weights", tuple(weights))

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def output_dim(self) -> int:
        return self.dims[-1]

    @property
    def depth(self) -> int:
        return len(self.weights)

    def __call__(self, x):
        return forward(self, x)

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "weights": [w.tolist() for w in self.weights],
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ReluNetwork":
        try:
            return cls(dims=doc["dims"], weights=doc["weights"], label=doc.get("label", ""))
        except KeyError as exc:
            raise ConfigurationError(f"network document lacks key {exc}") from None

    def to_json(self) -> str:
        # json renders floats with repr(), which round-trips IEEE doubles
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ReluNetwork":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "ReluNetwork":
        with open(path) as fh:
            return cls.from_json(fh.read())


@dataclass(frozen=True)
class ActiveBranch:
    """Linear piece of a network around an anchor point.

    Attributes:
        masks: per-layer 0/1 vectors; ``masks[i][j] == 1`` iff node ``j`` of
            layer ``i + 1`` has strictly positive pre-activation at the anchor.
        composite: the ``d x k`` product of the masked weight matrices.
        weights: the unmasked layer weights, kept so that :func:`branch_apply`
            can evaluate layer by layer.
    """

    masks: tuple
    composite: np.ndarray
    weights: tuple

    def apply(self, z):
        return branch_apply(self, z)


def new_random_gaussian(dims: Sequence[int], seed: int,
                        weight_scale_rule: str = "variance_one_over_fanout") -> ReluNetwork:
    """Draw a network with i.i.d. ``N(0, 1/d_i)`` entries in layer ``i``.

    ``d_i`` is the output width of the layer (the row count of ``W_i``).
    """
    if weight_scale_rule != "variance_one_over_fanout":
        raise ConfigurationError(f"unknown weight scale rule {weight_scale_rule!r}")
    dims = [int(v) for v in dims]
    if len(dims) < 2 or any(v < 1 for v in dims):
        raise ConfigurationError(f"invalid layer widths {dims}")
    rng = np.random.default_rng(seed)
    weights = [rng.normal(0.0, 1.0 / np.sqrt(d_out), size=(d_out, d_in))
               for d_in, d_out in zip(dims[:-1], dims[1:])]
    return ReluNetwork(dims=dims, weights=weights, label=f"gaussian seed={seed}")


def _check_input(net, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (net.input_dim,):
        raise DomainError(f"input has shape {x.shape}, network expects ({net.input_dim},)")
    return x


def forward(net: ReluNetwork, x) -> np.ndarray:
    """Evaluate ``G(x)``; ReLU is applied after every layer, the last included."""
    h = _check_input(net, x)
    for w in net.weights:
        h = relu(w @ h)
    return h


def active_branch(net: ReluNetwork, x) -> ActiveBranch:
    """Masks and composite matrix ``prod_i W_{i,+,x}`` at anchor ``x``.

    A pre-activation of exactly zero counts as inactive, so ``x = 0`` yields
    all-zero masks.
    """
    h = _check_input(net, x)
    masks = []
    composite = None
    for w in net.weights:
        pre = w @ h
        mask = (pre > 0).astype(float)
        h = mask * pre
        masked = w * mask[:, None]
        composite = masked if composite is None else masked @ composite
        mask.flags.writeable = False
        masks.append(mask)
    composite.flags.writeable = False
    return ActiveBranch(masks=tuple(masks), composite=composite, weights=net.weights)


def branch_apply(branch: ActiveBranch, z) -> np.ndarray:
    """Evaluate ``H_x(z)`` layer by layer.

    Masks multiply the layer outputs rather than the matrices, which follows
    the same floating-point path as :func:`forward`; hence
    ``branch_apply(active_branch(net, x), x)`` equals ``forward(net, x)``
    bit for bit.
    """
    h = np.asarray(z, dtype=float)
    k = branch.composite.shape[1]
    if h.shape != (k,):
        raise DomainError(f"input has shape {h.shape}, branch expects ({k},)")
    for w, mask in zip(branch.weights, branch.masks):
        h = mask * (w @ h)
    return h


def group_sparse_network(k: int, d: int) -> ReluNetwork:
    """Three-layer offset-free net generating nonnegative k-group-sparse vectors.

    Input is ``[x_1, ..., x_k, z]`` with ``z = 1`` in normal use.  Block ``i``
    of the output holds ``d/k`` triangle bumps of width 2 and height 1 in
    ``x_i``; bump ``r`` (1-based) rises on ``[2r, 2r + 1]``.  Offsets are
    built from the ``z`` input: the first hidden layer carries
    ``relu(x_i)`` and ``relu(r z)`` for ``r = 1 .. 2d/k``.
    """
    k, d = int(k), int(d)
    if k < 1 or d < 1:
        raise ConfigurationError("k and d must be positive")
    if d % k:
        raise ConfigurationError(f"d={d} is not divisible by k={k}")
    b = d // k
    n_off = 2 * b
    width1 = k + n_off
    z_col = k

    w1 = np.zeros((width1, k + 1))
    w1[np.arange(k), np.arange(k)] = 1.0
    w1[k:, z_col] = np.arange(1, n_off + 1)

    # rows [0, d) hold Upsilon_r, rows [d, 2d) hold Upsilon'_r
    w2 = np.zeros((2 * d, width1))
    w3 = np.zeros((d, 2 * d))
    for i in range(k):
        for r in range(1, b + 1):
            q = i * b + (r - 1)
            offset_col = k + (r - 1)        # relu(r z)
            w2[q, i] = 1.0
            w2[q, offset_col] = -2.0
            w2[d + q, i] = 1.0
            w2[d + q, offset_col] = -2.0
            w2[d + q, k] -= 1.0             # relu(1 * z); shares the column when r = 1
            w3[q, q] = 1.0
            w3[q, d + q] = -2.0
    return ReluNetwork(dims=[k + 1, width1, 2 * d, d], weights=[w1, w2, w3],
                       label=f"group_sparse k={k} d={d}")


def encode_group_sparse(target, k: int) -> np.ndarray:
    """Input for :func:`group_sparse_network` that reproduces ``target``.

    A block whose single nonzero entry ``v`` sits at slot ``r`` (1-based) is
    encoded on the rising edge of bump ``r``, ``x_i = 2r + v``; an all-zero
    block is encoded as ``x_i = 0``.  The last coordinate is always 1.
    """
    target = np.asarray(target, dtype=float)
    k = int(k)
    if target.ndim != 1 or k < 1 or target.size % k:
        raise DomainError(f"target of length {target.size} cannot be split into {k} blocks")
    if not np.all(np.isfinite(target)) or np.any(target < 0) or np.any(target > 1):
        raise DomainError("target entries must lie in [0, 1]")
    blocks = target.reshape(k, -1)
    code = np.zeros(k + 1)
    code[k] = 1.0
    for i, block in enumerate(blocks):
        nz = np.flatnonzero(block)
        if nz.size > 1:
            raise DomainError(f"block {i} has {nz.size} nonzero entries")
        if nz.size == 1:
            r = nz[0] + 1
            code[i] = 2.0 * r + block[nz[0]]
    return code
