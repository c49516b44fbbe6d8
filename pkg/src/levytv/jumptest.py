"""Tests for the absence of small jumps from ``n`` increments.

Statistics are built from the second differences
``Z_i = |(X_{2i} - X_{2i-1}) - (X_{2i-1} - X_{2i-2})|`` and a trimmed mean
``S_n`` of the ``Z_i`` that acts as a robust scale.  Four tests compare
(i) the largest ``Z_i``, (ii) an unbiased third-moment estimate, (iii) an
unbiased fourth-cumulant estimate and (iv) a sixth moment against powers of
``S_n``.  The constants are not known in closed form and are calibrated by
Monte Carlo under the Gaussian null, see :func:`calibrate_constants`.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import stats as sps

from . import sampler
from .errors import CalibrationError, DataError, DomainError, SizeError
from .levy_model import AtomMeasure, LevyTriplet, MomentTable, moment_table

MIN_N = 8
MIN_CALIBRATION_REPS = 500
TEST_NAMES = ("phi_max", "phi3", "phi4", "phi6")
SMALL_SCALE_MASK = frozenset({"gauss", "small_jumps", "drift"})


@dataclass
class StatisticSet:
    n: int
    delta: float
    z: np.ndarray
    s_n: float
    z_max: float
    ybar2: float
    ybar2_prime: float
    ybar3: float
    ybar4: float
    ybar6: float
    t3: float
    t4: float
    xbar_second_half: float

    def to_dict(self, with_z: bool = False) -> dict:
        d = asdict(self)
        if with_z:
            d["z"] = self.z.tolist()
        else:
            d.pop("z")
        return d


def _trim_count(n: int) -> int:
    return math.ceil(2.0 * math.log(n))


def batch_statistics(x: np.ndarray) -> dict:
    """Vectorised statistics for a ``(reps, n)`` array of increments.

    Returns a dict of 1-d arrays keyed like :class:`StatisticSet`.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    reps, n = x.shape
    if n < MIN_N:
        raise SizeError(f"need at least {MIN_N} increments, got {n}")
    if not np.all(np.isfinite(x)):
        raise DataError("increments must be finite")
    nt = n // 2
    nq = n // 4
    keep = max(0, nt - _trim_count(n))
    z = np.abs(x[:, 1:2 * nt:2] - x[:, 0:2 * nt:2])
    zs = np.sort(z, axis=1)
    s_n = zs[:, :keep].sum(axis=1) / nt
    z2 = z * z
    ybar2 = z2[:, :nq].mean(axis=1)
    ybar2p = z2[:, nq:nt].mean(axis=1)
    xbar = x[:, nt:].mean(axis=1)
    ybar3 = ((x[:, :nt] - xbar[:, None]) ** 3).mean(axis=1)
    ybar4 = (z2 * z2).mean(axis=1)
    ybar6 = (z2 * z2 * z2).mean(axis=1)
    m = n - nt
    t3 = ybar3 / (1.0 - m**-2.0)
    # E Z^4 = 2 Delta mu4 + 12 (Delta s^2)^2, so the factor 1/2 centres T4 at Delta mu4
    t4 = 0.5 * (ybar4 - 3.0 * ybar2 * ybar2p)
    return {
        "z": z, "s_n": s_n, "z_max": zs[:, -1], "ybar2": ybar2, "ybar2_prime": ybar2p,
        "ybar3": ybar3, "ybar4": ybar4, "ybar6": ybar6, "t3": t3, "t4": t4,
        "xbar_second_half": xbar,
    }


def compute_statistics(increments, delta: float = 1.0) -> StatisticSet:
    """All intermediate statistics of one increment vector.

    Raises
    ------
    SizeError
        If fewer than 8 increments are given.
    DataError
        On non-finite input.
    """
    x = np.asarray(increments, dtype=float).ravel()
    if x.size < MIN_N:
        raise SizeError(f"need at least {MIN_N} increments, got {x.size}")
    b = batch_statistics(x)
    return StatisticSet(
        n=int(x.size), delta=float(delta), z=b["z"][0],
        **{k: float(v[0]) for k, v in b.items() if k != "z"},
    )


# --- the individual tests ----------------------------------------------------------
# A statistic equal to zero never rejects: with S_n = 0 every threshold is 0
# and "0 >= 0" would otherwise reject degenerate constant data.

def _reject(stat, thr):
    stat = np.asarray(stat)
    return (stat >= thr) & (stat > 0)


def phi_max(stats: StatisticSet, n: int | None = None, adjust: float = 1.0) -> bool:
    n = stats.n if n is None else n
    return bool(_reject(stats.z_max, adjust * math.log(n) ** 1.5 * stats.s_n))


def phi_6(stats: StatisticSet, c6: float) -> bool:
    return bool(_reject(stats.ybar6, c6 * stats.s_n**6))


def phi_3(stats: StatisticSet, c3: float, alpha: float, n: int | None = None) -> bool:
    n = stats.n if n is None else n
    return bool(_reject(abs(stats.t3), c3 / math.sqrt(alpha) * math.sqrt(stats.s_n**6 / n)))


def phi_4(stats: StatisticSet, c4: float, alpha: float, n: int | None = None) -> bool:
    n = stats.n if n is None else n
    return bool(_reject(abs(stats.t4), c4 / math.sqrt(alpha) * stats.s_n**4 / math.sqrt(n)))


# --- constants -------------------------------------------------------------------

@dataclass(frozen=True)
class TestConstants:
    __test__ = False

    c3: float
    c4: float
    c6: float
    cmax_adjust: float = 1.0
    n: int | None = None
    alpha: float | None = None
    source: str = "user"

    def to_dict(self) -> dict:
        return asdict(self)


def _pivots(b: dict, n: int) -> dict:
    with np.errstate(divide="ignore", invalid="ignore"):
        return {
            "c3": np.abs(b["t3"]) * math.sqrt(n) / b["s_n"] ** 3,
            "c4": np.abs(b["t4"]) * math.sqrt(n) / b["s_n"] ** 4,
            "c6": b["ybar6"] / b["s_n"] ** 6,
            "cmax": b["z_max"] / b["s_n"],
        }


def _null_pivots(n, replications, seed, chunk=500):
    """Pivot samples from unit-variance Gaussian increments."""
    out = {k: [] for k in ("c3", "c4", "c6", "cmax")}
    for start in range(0, replications, chunk):
        rows = []
        for i in range(start, min(replications, start + chunk)):
            rng = sampler.make_rng(seed, "gauss", i)
            rows.append(rng.standard_normal(n))
        piv = _pivots(batch_statistics(np.vstack(rows)), n)
        for k in out:
            out[k].append(piv[k])
    return {k: np.concatenate(v) for k, v in out.items()}


def _constants_from_pivots(piv, n, alpha):
    q = 1.0 - alpha / 4.0
    quant = {k: float(np.quantile(v[np.isfinite(v)], q)) for k, v in piv.items()}
    ra = math.sqrt(alpha)
    return {
        "c3": ra * quant["c3"],
        "c4": ra * quant["c4"],
        "c6": quant["c6"],
        "cmax": quant["cmax"],
        "cmax_adjust": max(1.0, quant["cmax"] / math.log(n) ** 1.5),
    }


def calibrate_constants(n: int, delta: float = 1.0, alpha: float = 0.1,
                        replications: int = 4000, seed: int = 0) -> TestConstants:
    """Monte Carlo constants under the Gaussian null.

    Each constant is the ``1 - alpha/4`` quantile of its scale-free pivot, so
    each of the four tests has level about ``alpha/4``.  ``delta`` does not
    enter because the pivots are scale invariant; it is accepted for
    interface symmetry.

    Raises
    ------
    CalibrationError
        If fewer than 500 replications are requested.
    """
    if replications < MIN_CALIBRATION_REPS:
        raise CalibrationError(f"at least {MIN_CALIBRATION_REPS} replications are needed")
    if not (0 < alpha < 1):
        raise DomainError("alpha must lie in (0, 1)")
    if n < 12:
        raise SizeError("calibration needs n >= 12 so that S_n is not identically zero")
    c = _constants_from_pivots(_null_pivots(n, replications, seed), n, alpha)
    return TestConstants(c["c3"], c["c4"], c["c6"], c["cmax_adjust"], n, alpha, "calibrated")


def build_constant_table(n_grid, alpha_grid, replications: int = 4000, seed: int = 0) -> dict:
    """Calibrate on a grid; the result is what :class:`ConstantTable` loads."""
    if replications < MIN_CALIBRATION_REPS:
        raise CalibrationError(f"at least {MIN_CALIBRATION_REPS} replications are needed")
    table = {k: [] for k in ("c3", "c4", "c6", "cmax", "cmax_adjust")}
    for n in n_grid:
        piv = _null_pivots(int(n), replications, seed)
        rows = [_constants_from_pivots(piv, int(n), a) for a in alpha_grid]
        for k in table:
            table[k].append([r[k] for r in rows])
    return {
        "format": 1,
        "replications": replications,
        "seed": seed,
        "n_grid": [int(n) for n in n_grid],
        "alpha_grid": [float(a) for a in alpha_grid],
        "constants": table,
    }


class ConstantTable:
    """Shipped (or user-supplied) calibration grid with interpolation.

    Values are interpolated linearly in ``(log n, log alpha)`` and held
    constant outside the grid, with a warning.
    """

    def __init__(self, data: dict, source: str = "table"):
        self.data = data
        self.source = source
        self.n_grid = np.log(np.asarray(data["n_grid"], dtype=float))
        self.alpha_grid = np.log(np.asarray(data["alpha_grid"], dtype=float))

    @classmethod
    def load(cls, path=None) -> "ConstantTable":
        if path is None:
            text = resources.files("levytv").joinpath("data/constants.json").read_text("utf-8")
            return cls(json.loads(text), "shipped")
        return cls(json.loads(Path(path).read_text(encoding="utf-8")), str(path))

    def _interp(self, key, n, alpha):
        vals = np.asarray(self.data["constants"][key], dtype=float)
        ln, la = math.log(n), math.log(alpha)
        if not (self.n_grid[0] <= ln <= self.n_grid[-1]) or not (
                self.alpha_grid[0] <= la <= self.alpha_grid[-1]):
            warnings.warn(f"(n={n}, alpha={alpha}) lies outside the calibration grid; clamping",
                          stacklevel=3)
        ln = min(max(ln, self.n_grid[0]), self.n_grid[-1])
        la = min(max(la, self.alpha_grid[0]), self.alpha_grid[-1])
        # interpolate along alpha for each n, then along n
        col = np.array([np.interp(la, self.alpha_grid, row) for row in vals])
        return float(np.interp(ln, self.n_grid, col))

    def lookup(self, n: int, alpha: float) -> TestConstants:
        return TestConstants(
            c3=self._interp("c3", n, alpha),
            c4=self._interp("c4", n, alpha),
            c6=self._interp("c6", n, alpha),
            cmax_adjust=self._interp("cmax_adjust", n, alpha),
            n=n,
            alpha=alpha,
            source=self.source,
        )


# --- combined test --------------------------------------------------------------

@dataclass
class TestReport:
    __test__ = False

    decisions: dict
    thresholds_used: dict
    alpha: float
    stats: StatisticSet
    selected: str
    mode: str

    def to_dict(self) -> dict:
        return {
            "decisions": dict(self.decisions),
            "thresholds_used": dict(self.thresholds_used),
            "alpha": self.alpha,
            "selected": self.selected,
            "mode": self.mode,
            "stats": self.stats.to_dict(),
        }


def select_moment_test(moments: MomentTable, sigma_sq: float, n: int, delta: float,
                       C3: float = 1.0, C4: float = 1.0) -> str:
    """Return "phi3" or "phi4" by comparing the squared detection radii."""
    s2 = sigma_sq + moments.sigma2
    if moments.mu3 == 0:
        return "phi4"
    if moments.mu4 == 0:
        return "phi3"
    r3 = (C3 / abs(moments.mu3) * math.sqrt(delta * s2**3) / math.sqrt(n)) ** 2
    r4 = (C4 / moments.mu4 * delta * s2**2 / math.sqrt(n)) ** 2
    return "phi3" if r3 <= r4 else "phi4"


def _decide(b: dict, n: int, k: TestConstants, alpha: float, selected: str | None):
    """Decisions for batched statistics; returns dict of boolean arrays."""
    s = b["s_n"]
    d = {
        "phi_max": _reject(b["z_max"], k.cmax_adjust * math.log(n) ** 1.5 * s),
        "phi6": _reject(b["ybar6"], k.c6 * s**6),
    }
    a34 = alpha if selected else alpha / 2.0
    d["phi3"] = _reject(np.abs(b["t3"]), k.c3 / math.sqrt(a34) * np.sqrt(s**6 / n))
    d["phi4"] = _reject(np.abs(b["t4"]), k.c4 / math.sqrt(a34) * s**4 / math.sqrt(n))
    if selected:
        mid = d[selected]
    else:
        mid = d["phi3"] | d["phi4"]
    d["combined"] = d["phi_max"] | mid | d["phi6"]
    return d


def _resolve_constants(constants, n, alpha) -> TestConstants:
    if constants is None:
        return ConstantTable.load().lookup(n, alpha)
    if isinstance(constants, TestConstants):
        return constants
    if isinstance(constants, ConstantTable):
        return constants.lookup(n, alpha)
    if isinstance(constants, dict):
        return TestConstants(**{k: constants[k] for k in ("c3", "c4", "c6")},
                             cmax_adjust=constants.get("cmax_adjust", 1.0))
    raise DomainError("unrecognised constants argument")


def combined_test(stats: StatisticSet, constants=None, alpha: float = 0.1,
                  moments_hint: MomentTable | None = None, sigma_sq_hint: float = 0.0) -> TestReport:
    """Run the battery and the combined decision.

    With ``moments_hint`` one of the third/fourth moment tests is chosen in
    advance (planning mode); without it both run at ``alpha / 2``.
    """
    if not (0 < alpha < 1):
        raise DomainError("alpha must lie in (0, 1)")
    n = stats.n
    k = _resolve_constants(constants, n, alpha)
    selected = None
    if moments_hint is not None:
        selected = select_moment_test(moments_hint, sigma_sq_hint, n, stats.delta)
    b = {name: np.asarray([getattr(stats, name)]) for name in
         ("s_n", "z_max", "ybar6", "t3", "t4")}
    d = _decide(b, n, k, alpha, selected)
    return TestReport(
        decisions={key: bool(v[0]) for key, v in d.items()},
        thresholds_used=k.to_dict(),
        alpha=alpha,
        stats=stats,
        selected=selected or "phi3+phi4",
        mode="planning" if selected else "data_only",
    )


def run_test(increments, delta: float = 1.0, alpha: float = 0.1, constants=None,
                    moments_hint=None) -> TestReport:
    """Convenience wrapper: statistics plus :func:`combined_test`."""
    return combined_test(compute_statistics(increments, delta), constants, alpha, moments_hint)


# --- Monte Carlo harness -----------------------------------------------------------

@dataclass
class MCResult:
    rejection_rate: float
    wilson_ci: tuple
    rejections: int
    replications: int
    per_test: dict
    alpha: float
    n: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["wilson_ci"] = list(self.wilson_ci)
        return d


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple:
    ci = sps.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def mc_level_power(triplet: LevyTriplet | None, epsilon: float, eta: float, n: int, delta: float,
                   replications: int, alpha: float = 0.1, seed: int = 0, constants=None,
                   planning: bool = False, gaussian_refinement: bool = False,
                   workers: int = 1, chunk: int = 200, mask=SMALL_SCALE_MASK) -> MCResult:
    """Rejection frequency of the combined test on simulated data.

    The simulated process is ``X(eps)``, i.e. jumps above ``eps`` are left out
    unless ``mask`` includes "big_jumps".  ``triplet=None`` means the
    Gaussian null with unit variance.  Replicate
    ``i`` uses substream ``i`` of ``seed`` so results do not depend on
    ``workers``.
    """
    if triplet is None:
        triplet = LevyTriplet(0.0, 1.0, AtomMeasure.zero())
    k = _resolve_constants(constants, n, alpha)
    selected = None
    if planning:
        mt = moment_table(triplet, 0.0, epsilon)
        selected = select_moment_test(mt, triplet.sigma_sq, n, delta)
    counts = {name: 0 for name in TEST_NAMES + ("combined",)}
    for start in range(0, replications, chunk):
        idx = range(start, min(replications, start + chunk))

        def one(i):
            return sampler.sample_process_increments(
                triplet, epsilon, eta, delta, n, seed, mask, replicate=i,
                gaussian_refinement=gaussian_refinement).values

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                rows = list(ex.map(one, idx))
        else:
            rows = [one(i) for i in idx]
        d = _decide(batch_statistics(np.vstack(rows)), n, k, alpha, selected)
        for name in counts:
            counts[name] += int(d[name].sum())
    rej = counts["combined"]
    return MCResult(
        rejection_rate=rej / replications,
        wilson_ci=wilson_interval(rej, replications),
        rejections=rej,
        replications=replications,
        per_test={name: counts[name] / replications for name in TEST_NAMES},
        alpha=alpha,
        n=n,
    )
