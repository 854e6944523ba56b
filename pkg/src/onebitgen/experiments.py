"""Reproducible experiment harness.

Every output is a pure function of the :class:`ExperimentConfig`: random
streams are derived from ``base_seed`` with :func:`derive_seed`, and results
are assembled in a fixed order even when trials run on several threads.

Config files are JSON; see ``docs/config_schema.md`` for the keys.
"""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .erm import SolverOptions, recover, signal_loss
from .errors import ConfigurationError, NumericalFailure
from .generator import ReluNetwork, forward, group_sparse_network, new_random_gaussian
from .landscape import estimate_wdc, landscape_grid
from .sensing import measure, quantize, sample_sensing, sign_difference_fraction
from .svg import heatmap_svg, rate_curve_svg

__all__ = [
    "SCHEMA_VERSION",
    "EXPERIMENTS",
    "ExperimentConfig",
    "RateRow",
    "derive_seed",
    "build_network",
    "rate_sweep",
    "fit_slope",
    "dither_ablation",
    "run_landscape",
    "run_wdc_check",
    "run",
    "git_blob_hash",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXPERIMENTS = ("rate_sweep", "dither_ablation", "landscape", "wdc_check")
SATURATION_FLOOR = 1e-3

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base: int, tags) -> int:
    """Derive a 64-bit seed from ``base`` and a sequence of tags.

    Tags are serialized as ``"i:<int>"`` or ``"s:<str>"`` joined by ``0x1f``
    and hashed with BLAKE2b (8-byte digest, keyed by ``base``); the digest is
    passed through the splitmix64 finalizer.
    """
    if isinstance(tags, (str, int)):
        tags = [tags]
    parts = []
    for t in tags:
        if isinstance(t, bool) or not isinstance(t, (int, str)):
            raise TypeError(f"seed tags must be int or str, got {type(t).__name__}")
        parts.append(f"i:{t}" if isinstance(t, int) else f"s:{t}")
    key = (int(base) & _MASK64).to_bytes(8, "little")
    digest = hashlib.blake2b("\x1f".join(parts).encode(), digest_size=8, key=key).digest()
    return _splitmix64(int.from_bytes(digest, "little"))


def git_blob_hash(data: bytes) -> str:
    """SHA-1 of ``data`` as git would store it in a blob object."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


_SENSING_DEFAULTS = {"dist": "gaussian", "noise": "gaussian", "noise_scale": 0.1, "lambda": 10.0}
_GRID_DEFAULTS = {"lo": -2.0, "hi": 2.0, "resolution": 81, "mode": "surrogate", "m": 100_000,
                  "eps_wdc": None}
_WDC_DEFAULTS = {"n_pairs": 500}
_ABLATION_DEFAULTS = {"d": 10, "m": 10_000, "separation_m": 100_000}


def _merge(defaults, given, section):
    given = dict(given or {})
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigurationError(f"unknown keys in {section}: {sorted(unknown)}")
    return {**defaults, **given}


@dataclass
class ExperimentConfig:
    """Parsed experiment configuration.

    ``net`` is one of ``{"dims": [...], "seed": s}``, ``{"path": file}`` or
    ``{"group_sparse": {"k": k, "d": d}}``.  ``x0`` fixes the latent target;
    when omitted, rate sweeps draw it uniformly on the sphere of radius
    ``x0_norm`` and the other experiments use ``[1, 1]``.
    """

    experiment: str
    net: dict = field(default_factory=lambda: {"dims": [2, 64, 1024], "seed": 7})
    sensing: dict = field(default_factory=dict)
    m_list: list = field(default_factory=list)
    trials: int = 1
    solver: dict = field(default_factory=dict)
    output_dir: str | None = None
    base_seed: int = 0
    x0: list | None = None
    x0_norm: float = 2.0
    grid: dict = field(default_factory=dict)
    wdc: dict = field(default_factory=dict)
    ablation: dict = field(default_factory=dict)
    timestamps: bool = False
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported schema_version {self.schema_version}")
        self.sensing = _merge(_SENSING_DEFAULTS, self.sensing, "sensing")
        self.grid = _merge(_GRID_DEFAULTS, self.grid, "grid")
        self.wdc = _merge(_WDC_DEFAULTS, self.wdc, "wdc")
        self.ablation = _merge(_ABLATION_DEFAULTS, self.ablation, "ablation")
        self.m_list = [int(m) for m in self.m_list]
        if self.trials < 1:
            raise ConfigurationError("trials must be at least 1")
        if self.experiment == "rate_sweep":
            if not self.m_list:
                raise ConfigurationError("rate_sweep needs a nonempty m_list")
            if any(b <= a for a, b in zip(self.m_list, self.m_list[1:])):
                raise ConfigurationError("m_list must be strictly increasing")
        SolverOptions.from_dict(self.solver)
        if self.grid["mode"] not in ("surrogate", "empirical"):
            raise ConfigurationError(f"grid.mode must be surrogate or empirical, got {self.grid['mode']!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
        if "experiment" not in doc:
            raise ConfigurationError("config must name an experiment")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def solver_options(self) -> SolverOptions:
        return SolverOptions.from_dict(self.solver)


@dataclass
class RateRow:
    m: int
    median_rel_error: float
    q25: float
    q75: float
    mean_iters: float
    failures: int


def build_network(spec: dict) -> ReluNetwork:
    if "path" in spec:
        return ReluNetwork.load(spec["path"])
    if "group_sparse" in spec:
        gs = spec["group_sparse"]
        return group_sparse_network(gs["k"], gs["d"])
    if "dims" in spec:
        return new_random_gaussian(spec["dims"], int(spec.get("seed", 0)))
    raise ConfigurationError(f"cannot build a network from {spec}")


def _sweep_x0(cfg, k):
    if cfg.x0 is not None:
        x0 = np.asarray(cfg.x0, dtype=float)
        if x0.shape != (k,):
            raise ConfigurationError(f"x0 must have length {k}")
        return x0
    u = np.random.default_rng(derive_seed(cfg.base_seed, ["x0"])).standard_normal(k)
    return cfg.x0_norm * u / np.linalg.norm(u)


def _fmt(v) -> str:
    return repr(float(v))


def _timestamp(cfg):
    if not cfg.timestamps:
        return None
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _write_outputs(cfg, files: dict, seeds: dict, net: ReluNetwork | None):
    """Write ``files`` (name -> text) plus ``manifest.json`` under ``output_dir``."""
    if cfg.output_dir is None:
        return None
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for name, text in files.items():
        data = text.encode()
        (out / name).write_bytes(data)
        hashes[name] = git_blob_hash(data)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "base_seed": cfg.base_seed,
        "seeds": seeds,
        "net_hash": None if net is None else hashlib.sha256(net.to_json().encode()).hexdigest(),
        "outputs": hashes,
    }
    ts = _timestamp(cfg)
    if ts:
        manifest["created"] = ts
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def _run_trial(net, x0, g0, cfg, m, trial):
    s = cfg.sensing
    ms_seed = derive_seed(cfg.base_seed, ["measure", m, trial])
    init_seed = derive_seed(cfg.base_seed, ["init", m, trial])
    ms = measure(g0, m, dist=s["dist"], noise=s["noise"], noise_scale=s["noise_scale"],
                 lam=s["lambda"], seed=ms_seed)
    opts = SolverOptions.from_dict({**cfg.solver, "seed": init_seed})
    try:
        res = recover(net, ms, opts, x0=x0)
    except NumericalFailure as exc:
        log.warning("m=%d trial=%d failed: %s", m, trial, exc)
        return None
    return res.relative_error, res.iterations


def fit_slope(rows) -> dict:
    """Least-squares slope of log(median error) against log(m).

    Points whose median error is below ``SATURATION_FLOOR`` are excluded.
    """
    pts = [(r.m, r.median_rel_error) for r in rows if r.median_rel_error >= SATURATION_FLOOR]
    if len(pts) < 2:
        return {"slope": None, "intercept": None, "points_used": [p[0] for p in pts]}
    lx = np.log([p[0] for p in pts])
    ly = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    return {"slope": float(slope), "intercept": float(intercept), "points_used": [p[0] for p in pts]}


def rate_sweep(cfg: ExperimentConfig, workers: int = 1) -> list:
    """Median recovery error across sample sizes for a fixed target.

    Each ``(m, trial)`` pair gets fresh measurements and a fresh solver
    initialization.  Failed trials are counted; a sample size at which every
    trial fails aborts the sweep.

    Writes ``rate_sweep.csv``, ``slope.json``, ``rate_curve.svg`` and
    ``manifest.json`` when ``cfg.output_dir`` is set.
    """
    if cfg.experiment != "rate_sweep":
        raise ConfigurationError("config is not a rate_sweep")
    net = build_network(cfg.net)
    x0 = _sweep_x0(cfg, net.input_dim)
    g0 = forward(net, x0)
    jobs = [(m, t) for m in cfg.m_list for t in range(cfg.trials)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: _run_trial(net, x0, g0, cfg, *job), jobs))
    else:
        results = [_run_trial(net, x0, g0, cfg, *job) for job in jobs]

    rows = []
    for i, m in enumerate(cfg.m_list):
        chunk = results[i * cfg.trials:(i + 1) * cfg.trials]
        ok = [r for r in chunk if r is not None]
        failures = len(chunk) - len(ok)
        if not ok:
            raise NumericalFailure(f"all {cfg.trials} trials failed at m={m}")
        errs = np.array([r[0] for r in ok])
        q25, med, q75 = np.quantile(errs, [0.25, 0.5, 0.75])
        rows.append(RateRow(m=m, median_rel_error=float(med), q25=float(q25), q75=float(q75),
                            mean_iters=float(np.mean([r[1] for r in ok])), failures=failures))
        log.info("m=%d median relative error %.4g", m, med)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["m", "median", "q25", "q75", "mean_iters", "failures"])
    for r in rows:
        writer.writerow([r.m, _fmt(r.median_rel_error), _fmt(r.q25), _fmt(r.q75),
                         _fmt(r.mean_iters), r.failures])
    fit = fit_slope(rows)
    fit["x0"] = x0.tolist()
    ts = _timestamp(cfg)
    _write_outputs(cfg, {
        "rate_sweep.csv": buf.getvalue(),
        "slope.json": json.dumps(fit, indent=2, sort_keys=True) + "\n",
        "rate_curve.svg": rate_curve_svg(rows, timestamp=ts),
    }, {"x0": derive_seed(cfg.base_seed, ["x0"]),
        "trials": {f"{m}/{t}": [derive_seed(cfg.base_seed, ["measure", m, t]),
                                derive_seed(cfg.base_seed, ["init", m, t])] for m, t in jobs}}, net)
    return rows


def dither_ablation(cfg: ExperimentConfig) -> dict:
    """Two sparse signals that undithered Rademacher sensing cannot tell apart.

    ``theta1 = e_1`` and ``theta2 = e_1 - e_2 / 2`` have identical signs
    ``sign(<a, theta>)`` for every ``+-1`` vector ``a``.  For each of
    ``cfg.trials`` seeds the report records, with and without dither, the
    fraction of flipped labels and whether the empirical risk evaluated at
    the two candidates prefers the signal that generated the data (in both
    directions).  Flip fractions use ``ablation.m`` measurements; the risk
    comparison is reported at that size and at ``ablation.separation_m``,
    since the risk gap of 0.25 is only about ``2.5 lam / sqrt(m)`` standard
    deviations wide.  The signals are evaluated directly, i.e. through an
    identity generator; measurements are noiseless.
    """
    if cfg.experiment != "dither_ablation":
        raise ConfigurationError("config is not a dither_ablation")
    d = int(cfg.ablation["d"])
    m = int(cfg.ablation["m"])
    m_sep = int(cfg.ablation["separation_m"])
    lam = float(cfg.sensing["lambda"])
    if d < 2:
        raise ConfigurationError("ablation needs d >= 2")
    theta1 = np.zeros(d)
    theta1[0] = 1.0
    theta2 = theta1.copy()
    theta2[1] = -0.5

    def separated(a, q_seed, disabled):
        ms1 = quantize(a, theta1, lam=lam, seed=q_seed, dist="rademacher", dither_disabled=disabled)
        ms2 = quantize(a, theta2, lam=lam, seed=q_seed, dist="rademacher", dither_disabled=disabled)
        ok = (signal_loss(ms1, theta1) < signal_loss(ms1, theta2)
              and signal_loss(ms2, theta2) < signal_loss(ms2, theta1))
        return ms1, bool(ok)

    branches = {}
    for name, disabled in (("no_dither", True), ("dither", False)):
        d_h, sep, sep_large = [], [], []
        for t in range(cfg.trials):
            a = sample_sensing("rademacher", m, d, derive_seed(cfg.base_seed, ["ablation_a", t]))
            ms1, ok = separated(a, derive_seed(cfg.base_seed, ["ablation_q", t]), disabled)
            d_h.append(sign_difference_fraction(ms1, theta1, theta2))
            sep.append(ok)
            a = sample_sensing("rademacher", m_sep, d, derive_seed(cfg.base_seed, ["ablation_a_sep", t]))
            sep_large.append(separated(a, derive_seed(cfg.base_seed, ["ablation_q_sep", t]), disabled)[1])
        branches[name] = {"d_H": d_h, "d_H_min": float(min(d_h)), "d_H_max": float(max(d_h)),
                          "separated": sep, "separation_successes": int(sum(sep)),
                          "separated_at_separation_m": sep_large,
                          "separation_successes_at_separation_m": int(sum(sep_large))}
    report = {"m": m, "separation_m": m_sep, "d": d, "lambda": lam, "trials": cfg.trials,
              "theta1": theta1.tolist(), "theta2": theta2.tolist(), **branches}
    _write_outputs(cfg, {"ablation.json": json.dumps(report, indent=2, sort_keys=True) + "\n"},
                   {"trials": [[derive_seed(cfg.base_seed, [tag, t])
                                for tag in ("ablation_a", "ablation_q", "ablation_a_sep", "ablation_q_sep")]
                               for t in range(cfg.trials)]}, None)
    return report


def run_landscape(cfg: ExperimentConfig):
    """Grid evaluation of the risk; writes ``grid.csv``, ``landscape.json``,
    ``heatmap.svg`` and ``manifest.json``."""
    if cfg.experiment != "landscape":
        raise ConfigurationError("config is not a landscape experiment")
    net = build_network(cfg.net)
    x0 = np.asarray(cfg.x0 if cfg.x0 is not None else [1.0, 1.0], dtype=float)
    g = cfg.grid
    seeds = {}
    ms = None
    if g["mode"] == "empirical":
        s = cfg.sensing
        seeds["measure"] = derive_seed(cfg.base_seed, ["landscape"])
        ms = measure(forward(net, x0), int(g["m"]), dist=s["dist"], noise=s["noise"],
                     noise_scale=s["noise_scale"], lam=s["lambda"], seed=seeds["measure"])
    report = landscape_grid(net, x0, g["lo"], g["hi"], int(g["resolution"]), ms=ms,
                            eps_wdc=g["eps_wdc"])
    _write_outputs(cfg, {
        "grid.csv": report.to_csv(),
        "landscape.json": report.to_json(),
        "heatmap.svg": heatmap_svg(report, timestamp=_timestamp(cfg)),
    }, seeds, net)
    return report


def run_wdc_check(cfg: ExperimentConfig) -> list:
    """Sampled WDC constants for every layer; writes ``wdc.json`` and ``manifest.json``."""
    if cfg.experiment != "wdc_check":
        raise ConfigurationError("config is not a wdc_check")
    net = build_network(cfg.net)
    seeds = {f"layer{i + 1}": derive_seed(cfg.base_seed, ["wdc", i + 1]) for i in range(net.depth)}
    reports = [estimate_wdc(w, int(cfg.wdc["n_pairs"]), seeds[f"layer{i + 1}"], layer_index=i + 1)
               for i, w in enumerate(net.weights)]
    doc = [r.to_dict() for r in reports]
    _write_outputs(cfg, {"wdc.json": json.dumps(doc, indent=2, sort_keys=True) + "\n"}, seeds, net)
    return reports


def run(cfg: ExperimentConfig, workers: int | None = None):
    """Dispatch on ``cfg.experiment``."""
    if workers is None:
        workers = int(os.environ.get("ONEBIT_THREADS", "1"))
    if cfg.experiment == "rate_sweep":
        return rate_sweep(cfg, workers=workers)
    if cfg.experiment == "dither_ablation":
        return dither_ablation(cfg)
    if cfg.experiment == "landscape":
        return run_landscape(cfg)
    return run_wdc_check(cfg)
