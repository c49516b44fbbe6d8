"""Seeded simulation of Levy increments, component by component.

Every component draws from its own ``Philox`` stream, keyed by
``SeedSequence(seed, spawn_key=(component, replicate))``, so that the output
does not depend on evaluation order or on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CapabilityError, DomainError
from .levy_model import (
    AtomMeasure,
    DensityMeasure,
    LevyTriplet,
    StableMeasure,
    drift_beps,
)

COMPONENTS = ("gauss", "small_jumps", "big_jumps", "drift")
_STREAM_ID = {"gauss": 0, "small_jumps": 1, "big_jumps": 2, "refinement": 3}
_CHUNK = 1 << 18
_INV_CDF_GRID = 4096


def make_rng(seed: int, component: int | str, replicate: int = 0) -> np.random.Generator:
    """Counter-based generator for one (component, replicate) substream."""
    if isinstance(component, str):
        component = _STREAM_ID[component]
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(int(component), int(replicate)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class IncrementBatch:
    """Simulated increments ``X_{k Delta} - X_{(k-1) Delta}``."""

    values: np.ndarray
    delta: float
    seed: int
    truncation_eta: float = 0.0
    component_mask: frozenset = field(default_factory=frozenset)
    neglected_variance: float = 0.0

    def __len__(self):
        return int(self.values.size)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("value\n")
            for v in self.values:
                fh.write(f"{v:.17g}\n")

    def to_binary(self, path) -> None:
        np.asarray(self.values, dtype="<f8").tofile(path)

    @staticmethod
    def read_binary(path) -> np.ndarray:
        return np.fromfile(path, dtype="<f8")

    @staticmethod
    def read_csv(path) -> np.ndarray:
        text = Path(path).read_text(encoding="utf-8").split()
        if text and text[0] == "value":
            text = text[1:]
        return np.array([float(v) for v in text], dtype=float)


# --- jump-size samplers ----------------------------------------------------

class _JumpLaw:
    """Normalised law of nu restricted to ``lo < |x| <= hi``."""

    def __init__(self, measure, lo, hi):
        self.measure = measure
        self.lo, self.hi = measure.band.clip(lo, hi)
        self.total = measure.mass(lo, hi) if self.hi > self.lo else 0.0
        if isinstance(measure, DensityMeasure):
            self._table = self._tabulate()

    def _tabulate(self):
        lo, hi = self.lo, self.hi
        if lo <= 0 or math.isinf(hi):
            raise CapabilityError("tabulated jump sampling needs a band bounded away from 0 and inf")
        # geometric grid captures the power-law shape near lo
        grid = np.geomspace(lo, hi, _INV_CDF_GRID)
        fp = self.measure._f(grid)
        fn = self.measure._f(-grid)
        # log-space trapezoid: int f dx = int f x dlog x
        lg = np.diff(np.log(grid))
        cp = np.concatenate([[0.0], np.cumsum(0.5 * lg * (fp[1:] * grid[1:] + fp[:-1] * grid[:-1]))])
        cn = np.concatenate([[0.0], np.cumsum(0.5 * lg * (fn[1:] * grid[1:] + fn[:-1] * grid[:-1]))])
        return grid, cp, cn

    def sample(self, rng, size):
        if size == 0:
            return np.empty(0)
        m = self.measure
        u = rng.random(size)
        if isinstance(m, StableMeasure):
            mp, mn = m.c_plus, m.c_minus
            p_plus = mp / (mp + mn)
            pos = u < p_plus
            # reuse the uniform: rescale within the chosen side
            v = np.empty_like(u)
            v[pos] = u[pos] / p_plus
            v[~pos] = (u[~pos] - p_plus) / (1.0 - p_plus)
            v = np.clip(v, 0.0, np.nextafter(1.0, 0.0))
            size_abs = m.inverse_cdf(v, self.lo, self.hi)
            return np.where(pos, size_abs, -size_abs)
        if isinstance(m, AtomMeasure):
            x, w = m._select(self.lo, self.hi)
            cdf = np.cumsum(w)
            cdf /= cdf[-1]
            idx = np.searchsorted(cdf, u, side="right")
            return x[np.minimum(idx, x.size - 1)]
        grid, cp, cn = self._table
        tot = cp[-1] + cn[-1]
        target = u * tot
        pos = target < cp[-1]
        xp = np.interp(target, cp, grid)
        xn = np.interp(target - cp[-1], cn, grid)
        return np.where(pos, xp, -xn)


def _compound_poisson(rng, law: _JumpLaw, rate: float, n: int) -> np.ndarray:
    """Uncompensated CPP increments: sum of Poisson(rate) i.i.d. jumps."""
    out = np.zeros(n)
    if rate <= 0 or law.total <= 0:
        return out
    counts = rng.poisson(rate, size=n)
    for start in range(0, n, _CHUNK):
        c = counts[start:start + _CHUNK]
        nz = np.flatnonzero(c)
        if nz.size == 0:
            continue
        total = int(c.sum())
        jumps = law.sample(rng, total)
        offsets = np.concatenate([[0], np.cumsum(c[nz])[:-1]])
        out[start + nz] = np.add.reduceat(jumps, offsets)
    return out


def _check_n(n, delta):
    if int(n) < 0:
        raise DomainError("n must be non-negative")
    if not (delta > 0):
        raise DomainError("delta must be positive")


def sample_small_jump_increments(measure, eta: float, epsilon: float, delta: float, n: int,
                                 seed: int, replicate: int = 0,
                                 gaussian_refinement: bool = False) -> IncrementBatch:
    """Compensated CPP approximation ``M_Delta(eta, eps)`` of the small jumps.

    Parameters
    ----------
    measure : StableMeasure, AtomMeasure or DensityMeasure
    eta, epsilon : float
        Jumps with ``eta < |x| <= epsilon`` are simulated exactly.
    gaussian_refinement : bool
        Add an independent ``N(0, Delta sigma^2(0, eta))`` for the sub-``eta``
        remainder.  Off by default.

    Raises
    ------
    CapabilityError
        If ``eta = 0`` while the measure has infinite activity.
    """
    _check_n(n, delta)
    if not (0 <= eta < epsilon):
        raise DomainError("need 0 <= eta < epsilon")
    lam = measure.mass(eta, epsilon)
    if not math.isfinite(lam):
        raise CapabilityError(
            "infinite activity below epsilon: choose eta > 0 for the compound Poisson approximation"
        )
    rng = make_rng(seed, "small_jumps", replicate)
    law = _JumpLaw(measure, eta, epsilon)
    vals = _compound_poisson(rng, law, delta * lam, int(n))
    vals -= delta * measure.moment(1, eta, epsilon)
    neglected = measure.moment(2, 0.0, eta) if eta > 0 else 0.0
    mask = {"small_jumps"}
    if gaussian_refinement and neglected > 0:
        r = make_rng(seed, "refinement", replicate)
        vals += r.normal(0.0, math.sqrt(delta * neglected), size=int(n))
        neglected = 0.0
    return IncrementBatch(vals, delta, seed, eta, frozenset(mask), neglected)


def sample_big_jump_increments(measure, epsilon: float, delta: float, n: int, seed: int,
                               replicate: int = 0) -> IncrementBatch:
    """Uncompensated compound Poisson increments of the jumps with ``|x| > eps``."""
    _check_n(n, delta)
    lam = measure.mass(epsilon, math.inf)
    if not math.isfinite(lam):
        raise CapabilityError("the big-jump intensity is infinite")
    rng = make_rng(seed, "big_jumps", replicate)
    law = _JumpLaw(measure, epsilon, math.inf)
    vals = _compound_poisson(rng, law, delta * lam, int(n))
    return IncrementBatch(vals, delta, seed, 0.0, frozenset({"big_jumps"}))


def sample_gaussian_increments(sigma_sq: float, delta: float, n: int, seed: int,
                               replicate: int = 0) -> IncrementBatch:
    _check_n(n, delta)
    rng = make_rng(seed, "gauss", replicate)
    vals = rng.normal(0.0, math.sqrt(sigma_sq * delta), size=int(n)) if sigma_sq > 0 else np.zeros(int(n))
    return IncrementBatch(vals, delta, seed, 0.0, frozenset({"gauss"}))


def _parse_mask(mask):
    if mask is None:
        return frozenset(COMPONENTS)
    mask = frozenset(mask)
    bad = mask - set(COMPONENTS)
    if bad:
        raise DomainError(f"unknown components {sorted(bad)}")
    return mask


def sample_process_increments(triplet: LevyTriplet, epsilon: float, eta: float, delta: float,
                              n: int, seed: int, mask=None, replicate: int = 0,
                              gaussian_refinement: bool = False,
                              workers: int = 1) -> IncrementBatch:
    """Increments of ``b(eps) t + Sigma W_t + M_t(eta, eps) + Z_t(eps)``.

    Each masked-in component is drawn from its own substream and the results
    are summed; ``workers > 1`` evaluates components concurrently without
    changing the output.
    """
    mask = _parse_mask(mask)
    _check_n(n, delta)
    nu = triplet.measure
    jobs = []
    if "gauss" in mask:
        jobs.append(lambda: sample_gaussian_increments(triplet.sigma_sq, delta, n, seed, replicate))
    if "small_jumps" in mask:
        jobs.append(lambda: sample_small_jump_increments(
            nu, eta, epsilon, delta, n, seed, replicate, gaussian_refinement))
    if "big_jumps" in mask:
        jobs.append(lambda: sample_big_jump_increments(nu, epsilon, delta, n, seed, replicate))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda f: f(), jobs))
    else:
        parts = [f() for f in jobs]
    vals = np.zeros(int(n))
    neglected = 0.0
    for p in parts:
        vals += p.values
        neglected += p.neglected_variance
    if "drift" in mask:
        vals += drift_beps(triplet, epsilon) * delta
    return IncrementBatch(vals, delta, seed, eta if "small_jumps" in mask else 0.0, mask, neglected)


def sample_replicates(triplet: LevyTriplet, epsilon: float, eta: float, delta: float, n: int,
                      seed: int, reps: int, mask=None, workers: int = 1) -> np.ndarray:
    """``reps x n`` array of independent increment vectors, replicate ``i``
    using substream ``i`` so the array is schedule independent."""

    def one(i):
        return sample_process_increments(triplet, epsilon, eta, delta, n, seed, mask, replicate=i).values

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(one, range(reps)))
    else:
        rows = [one(i) for i in range(reps)]
    return np.vstack(rows) if rows else np.empty((0, int(n)))
