"""Monte Carlo ground truth for the interference at the origin.

Runs are grouped in fixed-size chunks; chunk ``i`` draws from its own Philox
stream keyed by ``(seed, i)`` and the per-run results are concatenated in
chunk order, so estimates do not depend on the number of workers.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .lattice import LatticeParams
from .scenario import FadingModel, ParameterError, Pathloss, ScenarioParams

N_BATCHES = 100
DEFAULT_CHUNK = 250


class SimModel(enum.Enum):
    HARDCORE = "hardcore"
    PPP = "ppp"
    LATTICE = "lattice"


@dataclass(frozen=True)
class SimConfig:
    runs: int
    seed: int
    half_length: float = 20000.0
    burn_in: float | None = None
    model: SimModel = SimModel.HARDCORE
    chunk_size: int = DEFAULT_CHUNK
    workers: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ParameterError(f"runs must be >= 1 (runs={self.runs})")
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer (seed={self.seed})")
        if not self.half_length > 0:
            raise ParameterError(f"half_length must be > 0 (half_length={self.half_length})")
        if self.burn_in is not None and self.burn_in < 0:
            raise ParameterError(f"burn_in must be >= 0 (burn_in={self.burn_in})")
        if self.chunk_size < 1 or self.workers < 1:
            raise ParameterError("chunk_size and workers must be >= 1")
        object.__setattr__(self, "model", SimModel(self.model))

    def burn_in_for(self, p: ScenarioParams) -> float:
        if self.burn_in is not None:
            return self.burn_in
        if self.model is SimModel.LATTICE:
            return 0.0
        if self.model is SimModel.PPP or p.c == 0:
            return 50.0 / p.lam
        return max(50.0 / p.mu, 50.0 * p.c)

    def as_dict(self) -> dict:
        return {"runs": self.runs, "seed": self.seed, "half_length": self.half_length,
                "burn_in": self.burn_in, "model": self.model.value,
                "chunk_size": self.chunk_size, "workers": self.workers}


@dataclass(frozen=True)
class SimEstimate:
    value: float
    std_error: float
    runs: int
    seed: int


@dataclass(frozen=True)
class SimMoments:
    mean: SimEstimate
    variance: SimEstimate
    std_dev: SimEstimate
    skewness: SimEstimate
    coeff_variation: float
    method: str = "MonteCarlo"


@dataclass(frozen=True)
class Deployment:
    positions: np.ndarray = field(repr=False)

    def __post_init__(self):
        x = np.asarray(self.positions, dtype=float)
        if x.ndim != 1:
            raise ValueError("positions must be one-dimensional")
        if x.size > 1 and not np.all(np.diff(x) > 0):
            raise ValueError("positions must be strictly increasing")
        object.__setattr__(self, "positions", x)

    def gaps(self) -> np.ndarray:
        return np.diff(self.positions)

    def min_gap(self) -> float:
        g = self.gaps()
        return float(g.min()) if g.size else math.inf


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk,))))


# ---------------------------------------------------------------------------
# batched samplers: rows are runs, NaN pads beyond the last point
# ---------------------------------------------------------------------------

def _renewal_batch(lam: float, mu: float, c: float, half_length: float, burn: float,
                   n: int, rng: np.random.Generator) -> np.ndarray:
    start = -(half_length + burn)
    span = 2.0 * (half_length + burn)
    k = int(math.ceil(span * lam + 8.0 * math.sqrt(span * lam) + 16))
    gaps = c + rng.exponential(1.0 / mu, size=(n, k))
    phase = rng.random(n)
    gaps[:, 0] *= phase
    pos = start + np.cumsum(gaps, axis=1)
    while np.any(pos[:, -1] <= half_length):
        more = c + rng.exponential(1.0 / mu, size=(n, k))
        pos = np.concatenate([pos, pos[:, -1:] + np.cumsum(more, axis=1)], axis=1)
    pos[(pos < -half_length) | (pos > half_length)] = np.nan
    return pos


def _lattice_batch(p: LatticeParams, half_length: float, n: int,
                   rng: np.random.Generator) -> np.ndarray:
    c = p.c
    z = c * rng.random(n)
    # first lattice point at or above -half_length, aligned with r0 + z
    k_left = np.floor((p.r0 + z + half_length) / c)
    first = p.r0 + z - k_left * c
    k = int(math.ceil(2.0 * half_length / c)) + 2
    pos = first[:, None] + c * np.arange(k)[None, :]
    pos[pos > half_length] = np.nan
    return pos


def _positions_batch(model: SimModel, p, half_length: float, burn: float, n: int,
                     rng: np.random.Generator) -> np.ndarray:
    if model is SimModel.LATTICE:
        return _lattice_batch(p, half_length, n, rng)
    if model is SimModel.PPP:
        return _renewal_batch(p.lam, p.lam, 0.0, half_length, burn, n, rng)
    return _renewal_batch(p.lam, p.mu, p.c, half_length, burn, n, rng)


def _interference_batch(pos: np.ndarray, r0: float, eta: float, fading: FadingModel,
                        rng: np.random.Generator) -> np.ndarray:
    a = np.abs(pos)
    live = a > r0  # NaN compares False
    g = np.zeros_like(a)
    g[live] = a[live] ** -eta
    if fading is FadingModel.RAYLEIGH_UNIT_MEAN:
        g *= rng.standard_exponential(size=g.shape)
    return g.sum(axis=1)


def _chunk_task(args) -> np.ndarray:
    model, p, half_length, burn, fading, seed, chunk, n = args
    rng = chunk_rng(seed, chunk)
    pos = _positions_batch(model, p, half_length, burn, n, rng)
    return _interference_batch(pos, p.r0, p.eta, fading, rng)


def _check_model(p, cfg: SimConfig):
    if cfg.model is SimModel.LATTICE:
        if not isinstance(p, LatticeParams):
            raise ParameterError("lattice model needs LatticeParams")
    elif not isinstance(p, ScenarioParams):
        raise ParameterError(f"{cfg.model.value} model needs ScenarioParams")
    elif not p.lam > 0:
        raise ParameterError("simulation needs lam > 0")
    if not cfg.half_length > p.r0:
        raise ParameterError(f"half_length {cfg.half_length} must exceed r0 {p.r0}")


def _chunks(cfg: SimConfig):
    full, rest = divmod(cfg.runs, cfg.chunk_size)
    sizes = [cfg.chunk_size] * full + ([rest] if rest else [])
    return list(enumerate(sizes))


def _run_chunks(task, args_list, workers: int) -> list:
    if workers == 1 or len(args_list) == 1:
        return [task(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(task, args_list))


def simulate_interference(p, cfg: SimConfig,
                          fading: FadingModel = FadingModel.RAYLEIGH_UNIT_MEAN) -> np.ndarray:
    """Per-run interference samples, in run order."""
    _check_model(p, cfg)
    burn = 0.0 if cfg.model is SimModel.LATTICE else cfg.burn_in_for(p)
    args = [(cfg.model, p, cfg.half_length, burn, fading, cfg.seed, i, n) for i, n in _chunks(cfg)]
    return np.concatenate(_run_chunks(_chunk_task, args, cfg.workers))


# ---------------------------------------------------------------------------
# single-realization API
# ---------------------------------------------------------------------------

def _deployment_from_row(row: np.ndarray) -> Deployment:
    return Deployment(row[np.isfinite(row)])


def sample_hardcore(p: ScenarioParams, cfg: SimConfig, rng: np.random.Generator) -> Deployment:
    """One stationary hardcore deployment on ``[-half_length, half_length]``."""
    row = _renewal_batch(p.lam, p.mu, p.c, cfg.half_length, cfg.burn_in_for(p), 1, rng)[0]
    return _deployment_from_row(row)


def sample_lattice(p: LatticeParams, cfg: SimConfig, rng: np.random.Generator) -> Deployment:
    """Lattice with one uniform phase; the nearest point right of the cell sits at ``r0 + U(0, c)``."""
    return _deployment_from_row(_lattice_batch(p, cfg.half_length, 1, rng)[0])


def interference_realization(d: Deployment, path: Pathloss, fading: FadingModel,
                             rng: np.random.Generator) -> float:
    """``sum h g(x)`` over the deployment; points in the cell contribute nothing."""
    if d.positions.size == 0:
        return 0.0
    g = np.asarray(path(d.positions))
    if fading is FadingModel.RAYLEIGH_UNIT_MEAN:
        g = g * rng.standard_exponential(size=g.shape)
    return math.fsum(g)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def _sample_stats(x: np.ndarray) -> tuple[float, float, float]:
    n = x.size
    mean = math.fsum(x) / n
    var = math.fsum((x - mean) ** 2) / (n - 1)
    skew = float(stats.skew(x, bias=False)) if n > 2 else math.nan
    return mean, var, skew


def summarize(samples: np.ndarray, seed: int) -> SimMoments:
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < N_BATCHES:
        raise ParameterError(f"need at least {N_BATCHES} runs for batch standard errors (runs={n})")
    mean, var, skew = _sample_stats(x)
    std = math.sqrt(var)
    batches = [_sample_stats(b) for b in np.array_split(x, N_BATCHES)]
    se = [float(np.std(v, ddof=1) / math.sqrt(N_BATCHES)) for v in zip(*batches)]
    std_se = float(np.std([math.sqrt(b[1]) for b in batches], ddof=1) / math.sqrt(N_BATCHES))
    return SimMoments(
        mean=SimEstimate(mean, se[0], n, seed),
        variance=SimEstimate(var, se[1], n, seed),
        std_dev=SimEstimate(std, std_se, n, seed),
        skewness=SimEstimate(skew, se[2], n, seed),
        coeff_variation=std / mean if mean > 0 else math.nan,
    )


def estimate_moments(p, cfg: SimConfig,
                     fading: FadingModel = FadingModel.RAYLEIGH_UNIT_MEAN) -> SimMoments:
    """Sample mean, unbiased variance, adjusted skewness, each with a batch-means standard error."""
    if cfg.runs < N_BATCHES:
        raise ParameterError(f"estimate_moments needs runs >= {N_BATCHES}")
    return summarize(simulate_interference(p, cfg, fading), cfg.seed)


# ---------------------------------------------------------------------------
# oracles for the traffic model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LaneCdf:
    x: np.ndarray
    empirical: np.ndarray
    reference: np.ndarray
    sup_norm: float
    deficit_at_c: float
    n_gaps: int


def _superposed_gaps(p: ScenarioParams, n_lanes: int, cfg: SimConfig, chunk: int, n: int) -> np.ndarray:
    rng = chunk_rng(cfg.seed, chunk)
    burn = cfg.burn_in_for(p)
    out = []
    lanes = [_renewal_batch(p.lam, p.mu, p.c, cfg.half_length, burn, n, rng) for _ in range(n_lanes)]
    merged = np.sort(np.concatenate(lanes, axis=1), axis=1)  # NaN sorts last
    for row in merged:
        row = row[np.isfinite(row)]
        out.append(np.diff(row))
    return np.concatenate(out)


def _lane_task(args):
    return _superposed_gaps(*args)


def lane_superposition_cdf(p: ScenarioParams, n_lanes: int, cfg: SimConfig,
                           x: np.ndarray | None = None) -> LaneCdf:
    """Gap CDF of ``n_lanes`` independent hardcore lanes merged on one line.

    ``sup_norm`` is the exact Kolmogorov distance to ``1 - exp(-n_lanes lam x)``;
    ``deficit_at_c`` is the reference minus the empirical CDF just below ``c``.
    """
    if n_lanes < 1:
        raise ParameterError(f"n_lanes must be >= 1 (n_lanes={n_lanes})")
    if not p.lam > 0:
        raise ParameterError("lane superposition needs lam > 0")
    rate = n_lanes * p.lam
    args = [(p, n_lanes, cfg, i, n) for i, n in _chunks(cfg)]
    gaps = np.sort(np.concatenate(_run_chunks(_lane_task, args, cfg.workers)))
    m = gaps.size
    ref_at = -np.expm1(-rate * gaps)
    hi = np.arange(1, m + 1) / m
    lo = np.arange(0, m) / m
    sup = float(max(np.max(np.abs(hi - ref_at)), np.max(np.abs(ref_at - lo))))
    below_c = np.searchsorted(gaps, p.c, side="left") / m
    deficit = float(-math.expm1(-rate * p.c) - below_c)
    if x is None:
        x = np.linspace(0.0, 6.0 / rate, 241)
    x = np.asarray(x, dtype=float)
    emp = np.searchsorted(gaps, x, side="right") / m
    return LaneCdf(x, emp, -np.expm1(-rate * x), sup, deficit, m)


@dataclass(frozen=True)
class PcfHistogram:
    edges: np.ndarray
    density: np.ndarray
    std_error: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


def _pair_counts(pos: np.ndarray, half_length: float, edges: np.ndarray) -> np.ndarray:
    d_max = edges[-1]
    n_bins = edges.size - 1
    counts = np.zeros((pos.shape[0], n_bins))
    anchor_ok = np.isfinite(pos) & (pos <= half_length - d_max)
    for lag in range(1, pos.shape[1]):
        d = pos[:, lag:] - pos[:, :-lag]
        ok = anchor_ok[:, :-lag] & np.isfinite(d) & (d < d_max)
        if not ok.any():
            break
        rows = np.broadcast_to(np.arange(pos.shape[0])[:, None], d.shape)[ok]
        idx = np.searchsorted(edges, d[ok], side="right") - 1
        keep = (idx >= 0) & (idx < n_bins)
        np.add.at(counts, (rows[keep], idx[keep]), 1.0)
    return counts


def _pcf_task(args):
    p, cfg, edges, chunk, n = args
    rng = chunk_rng(cfg.seed, chunk)
    model = SimModel.PPP if cfg.model is SimModel.PPP else SimModel.HARDCORE
    pos = _positions_batch(model, p, cfg.half_length, cfg.burn_in_for(p), n, rng)
    return _pair_counts(pos, cfg.half_length, edges)


def pcf_histogram(p: ScenarioParams, cfg: SimConfig, bin_width: float,
                  d_max: float | None = None) -> PcfHistogram:
    """Second-order product density estimated from ordered pairs, per separation bin.

    Anchors are restricted to ``x <= half_length - d_max`` so that every
    partner within ``d_max`` lies inside the window.
    """
    if not bin_width > 0:
        raise ParameterError(f"bin_width must be > 0 (bin_width={bin_width})")
    if d_max is None:
        d_max = 6.0 * max(p.c, 1.0 / p.lam)
    n_bins = int(round(d_max / bin_width))
    edges = bin_width * np.arange(n_bins + 1)
    window = 2.0 * cfg.half_length - edges[-1]
    args = [(p, cfg, edges, i, n) for i, n in _chunks(cfg)]
    per_run = np.concatenate(_run_chunks(_pcf_task, args, cfg.workers)) / (window * bin_width)
    density = per_run.mean(axis=0)
    nb = min(N_BATCHES, per_run.shape[0])
    if nb > 1:
        bm = np.array([b.mean(axis=0) for b in np.array_split(per_run, nb)])
        se = bm.std(axis=0, ddof=1) / math.sqrt(nb)
    else:
        se = np.full(n_bins, math.nan)
    return PcfHistogram(edges, density, se)
