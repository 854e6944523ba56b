"""Counting the linear pieces of a hyperplane arrangement.

:func:`count_pieces_bound` is the closed-form bound on the number of cells
cut out of ``R^k`` by ``d`` hyperplanes.  :func:`brute_force_region_count`
is an independent oracle that enumerates realized sign patterns; it is
meant for checking the bound at desk scale, not for production use.
"""
from __future__ import annotations

import itertools
from math import comb

import numpy as np

from .errors import OracleScaleError

__all__ = ["count_pieces_bound", "brute_force_region_count"]

MAX_ORACLE_DIM = 3
MAX_ORACLE_PLANES = 12


def count_pieces_bound(d: int, k: int) -> int:
    """Return ``C(d, k) = sum_{i=0}^{k} binom(d, i)``.

    This is the number of cells of ``d`` affine hyperplanes in general
    position in ``R^k`` and an upper bound for any arrangement of ``d``
    hyperplanes.
    """
    if d < 0 or k < 0:
        raise ValueError("d and k must be nonnegative")
    return sum(comb(d, i) for i in range(k + 1))


def _sign_codes(points, normals, offsets, tol):
    vals = points @ normals.T + offsets
    ok = np.all(np.abs(vals) > tol, axis=1)
    bits = vals[ok] > 0
    weights = 1 << np.arange(normals.shape[0], dtype=np.int64)
    return set((bits @ weights).tolist())


def brute_force_region_count(hyperplane_normals, offsets=None, *,
                             n_samples: int = 1_000_000, seed: int = 0) -> int:
    """Count the open cells of the arrangement ``{u : <n_j, u> + c_j = 0}``.

    Cells are identified by the sign pattern of a point strictly inside them.
    Points come from two sources:

    * uniform samples in a box that contains every vertex of the arrangement;
    * a deterministic refinement pass: for every subset ``S`` of at most
      ``k`` hyperplanes with independent normals, points on the flat
      ``cap_{j in S} H_j`` are nudged into each of the ``2^|S|`` adjacent
      orthants by solving ``N_S u = eta * s`` for every sign vector ``s``.

    Without offsets all hyperplanes pass through the origin, as in the
    layers of an offset-free ReLU network.

    Args:
        hyperplane_normals: ``(h, k)`` array-like of normals.
        offsets: optional length-``h`` offsets ``c_j``.
        n_samples: size of the Monte-Carlo pass.
        seed: seed for the Monte-Carlo pass.

    Raises:
        OracleScaleError: if ``k > 3`` or more than 12 hyperplanes are given.
    """
    normals = np.atleast_2d(np.asarray(hyperplane_normals, dtype=float))
    h, k = normals.shape
    if k > MAX_ORACLE_DIM or h > MAX_ORACLE_PLANES:
        raise OracleScaleError(
            f"oracle limited to k <= {MAX_ORACLE_DIM} and <= {MAX_ORACLE_PLANES} hyperplanes, "
            f"got k={k}, {h} hyperplanes")
    if h == 0:
        return 1
    offsets = np.zeros(h) if offsets is None else np.asarray(offsets, dtype=float)
    scale = np.linalg.norm(normals, axis=1)
    normals = normals / scale[:, None]
    offsets = offsets / scale
    tol = 1e-12

    base_points = []
    flats = []
    for size in range(1, min(k, h) + 1):
        for subset in itertools.combinations(range(h), size):
            n_s = normals[list(subset)]
            if np.linalg.matrix_rank(n_s) < size:
                continue
            pinv = np.linalg.pinv(n_s)
            anchor = pinv @ -offsets[list(subset)]
            # directions along the flat, so that central arrangements are
            # probed away from the origin as well
            _, _, vt = np.linalg.svd(n_s)
            along = vt[size:]
            flats.append((subset, pinv, anchor, along))
            base_points.append(anchor)

    radius = 1.0 + 2.0 * max(np.linalg.norm(p) for p in base_points)
    rng = np.random.default_rng(seed)
    samples = rng.uniform(-radius, radius, size=(n_samples, k))
    codes = set()
    for chunk in np.array_split(samples, max(1, n_samples // 200_000)):
        codes |= _sign_codes(chunk, normals, offsets, tol)

    refine = []
    signs_cache = {}
    for subset, pinv, anchor, along in flats:
        size = len(subset)
        starts = [anchor]
        for v in along:
            starts.extend([anchor + radius * v, anchor - radius * v])
        if along.shape[0] == 2:
            for a, b in itertools.product((1, -1), repeat=2):
                starts.append(anchor + radius * (a * along[0] + b * along[1]) / np.sqrt(2))
        others = [j for j in range(h) if j not in subset]
        if size not in signs_cache:
            signs_cache[size] = np.array(list(itertools.product((1.0, -1.0), repeat=size)))
        moves = signs_cache[size] @ pinv.T
        for q in starts:
            dist = np.abs(normals[others] @ q + offsets[others]) if others else np.array([])
            dist = dist[dist > 1e-9]
            gap = dist.min() if dist.size else radius
            step = 0.25 * gap / max(np.linalg.norm(moves, axis=1).max(), 1e-300)
            refine.append(q + step * moves)
    if refine:
        codes |= _sign_codes(np.vstack(refine), normals, offsets, tol)
    return len(codes)
