"""Levy triplets, jump measures and the epsilon-truncation quantities.

A Levy measure is represented by one of three frozen dataclasses:

* :class:`StableMeasure` -- density ``c+ / x^(1+beta)`` on the positive side
  and ``c- / |x|^(1+beta)`` on the negative side, restricted to a band
  ``lower < |x| <= upper``; every moment is available in closed form.
* :class:`DensityMeasure` -- an arbitrary user-supplied density, integrated
  numerically.
* :class:`AtomMeasure` -- finitely many weighted atoms (finite activity).

All measures count jumps with ``lo < |x| <= hi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate

from . import _stable_integrals
from .errors import DomainError, InfeasibleError, IntegrabilityError, NumericError

_QUAD_RTOL = 1e-10
_MOMENT_ORDERS = (3, 4, 5, 6, 7, 8)


def log_n(n: float) -> float:
    """``log(e v n)``, i.e. ``max(1, ln n)``."""
    return max(1.0, math.log(n)) if n > 0 else 1.0


@dataclass(frozen=True)
class Band:
    """Support band ``lower < |x| <= upper`` of a jump measure."""

    lower: float = 0.0
    upper: float = math.inf

    def __post_init__(self):
        if not (self.lower >= 0.0) or not (self.upper > self.lower):
            raise DomainError(f"invalid band ({self.lower}, {self.upper}]")

    def clip(self, lo: float, hi: float) -> tuple[float, float]:
        return max(lo, self.lower), min(hi, self.upper)

    def to_config(self) -> list:
        return [self.lower, None if math.isinf(self.upper) else self.upper]

    @classmethod
    def from_config(cls, value) -> "Band":
        if value is None:
            return cls()
        lo, hi = value
        return cls(float(lo), math.inf if hi is None else float(hi))


class _Measure:
    """Shared interface.  Subclasses implement ``_side`` style primitives."""

    band: Band

    # --- public API -----------------------------------------------------
    def mass(self, lo: float = 0.0, hi: float = math.inf) -> float:
        """nu{lo < |x| <= hi}; ``inf`` for infinite activity near zero."""
        return self.moment(0, lo, hi)

    def moment(self, k: int, lo: float = 0.0, hi: float = math.inf) -> float:
        """int_{lo < |x| <= hi} x^k nu(dx)."""
        a, b = self.band.clip(lo, hi)
        if b <= a:
            return 0.0
        return self._moment(k, a, b)

    def abs_moment(self, k: float, lo: float = 0.0, hi: float = math.inf) -> float:
        """int_{lo < |x| <= hi} |x|^k nu(dx)."""
        a, b = self.band.clip(lo, hi)
        if b <= a:
            return 0.0
        return self._abs_moment(k, a, b)

    def levy_exponent(self, t, lo: float = 0.0, hi: float = math.inf):
        """int_{lo<|x|<=hi} (e^{itx} - 1 - itx) nu(dx), vectorised in ``t``."""
        t = np.asarray(t, dtype=float)
        a, b = self.band.clip(lo, hi)
        if b <= a:
            return np.zeros(t.shape, dtype=complex)
        return self._levy_exponent(t, a, b)

    @property
    def is_zero(self) -> bool:
        return False

    def check_integrable(self) -> None:
        """Raise :class:`IntegrabilityError` unless int (x^2 ^ 1) nu < inf."""
        inner = self.moment(2, 0.0, 1.0)
        outer = self.mass(1.0, math.inf)
        if not (math.isfinite(inner) and math.isfinite(outer)):
            raise IntegrabilityError(
                f"int min(x^2, 1) nu(dx) is not finite (inner={inner}, outer={outer})"
            )

    # --- to be provided --------------------------------------------------
    def _moment(self, k, a, b):  # pragma: no cover - abstract
        raise NotImplementedError

    def _abs_moment(self, k, a, b):  # pragma: no cover - abstract
        raise NotImplementedError

    def _levy_exponent(self, t, a, b):  # pragma: no cover - abstract
        raise NotImplementedError


def _power_integral(a: float, b: float, p: float) -> float:
    """int_a^b x^p dx for 0 <= a < b <= inf, possibly infinite."""
    if p == -1.0:
        if a == 0.0 or math.isinf(b):
            return math.inf
        return math.log(b / a)
    q = p + 1.0
    if q > 0:
        if math.isinf(b):
            return math.inf
        return (b**q - a**q) / q
    # q < 0: diverges at zero
    if a == 0.0:
        return math.inf
    upper = 0.0 if math.isinf(b) else b**q
    return (upper - a**q) / q


@dataclass(frozen=True)
class StableMeasure(_Measure):
    """Stable-type measure ``c+/x^(1+beta)`` (x>0), ``c-/|x|^(1+beta)`` (x<0).

    Parameters
    ----------
    beta : float
        Blumenthal-Getoor index, ``0 < beta < 2``.
    c_plus, c_minus : float
        Non-negative side weights.
    band : Band
        Support restriction; the default is the full real line.
    """

    beta: float
    c_plus: float = 1.0
    c_minus: float = 1.0
    band: Band = field(default_factory=Band)

    def __post_init__(self):
        if not (0.0 < self.beta < 2.0):
            raise DomainError(f"beta must lie in (0, 2), got {self.beta}")
        if self.c_plus < 0 or self.c_minus < 0:
            raise DomainError("side weights must be non-negative")

    @property
    def is_zero(self) -> bool:
        return self.c_plus == 0 and self.c_minus == 0

    @property
    def symmetric(self) -> bool:
        return self.c_plus == self.c_minus

    @property
    def finite_activity(self) -> bool:
        return self.is_zero or self.band.lower > 0

    def density(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        inside = (ax > self.band.lower) & (ax <= self.band.upper)
        c = np.where(x > 0, self.c_plus, self.c_minus)
        with np.errstate(divide="ignore"):
            return np.where(inside, c * ax ** (-1.0 - self.beta), 0.0)

    def _weights(self, k):
        sign = -1.0 if k % 2 else 1.0
        return self.c_plus, sign * self.c_minus

    def _moment(self, k, a, b):
        cp, cm = self._weights(k)
        w = cp + cm
        if w == 0.0:
            return 0.0
        return w * _power_integral(a, b, k - 1.0 - self.beta)

    def _abs_moment(self, k, a, b):
        w = self.c_plus + self.c_minus
        if w == 0.0:
            return 0.0
        return w * _power_integral(a, b, k - 1.0 - self.beta)

    def _levy_exponent(self, t, a, b):
        if math.isinf(b) and self.beta <= 1.0:
            # the compensator -itx is not integrable at infinity
            raise IntegrabilityError("compensated exponent needs beta > 1 or a bounded band")
        c, s = _stable_integrals.stable_side_exponent(t, a, b, self.beta)
        return (self.c_plus + self.c_minus) * c + 1j * (self.c_plus - self.c_minus) * s

    def inverse_cdf(self, v, lo: float, hi: float):
        """Map ``v`` in [0, 1) to |jump| sizes with law proportional to the
        one-sided density on ``(lo, hi]`` (requires ``lo > 0``)."""
        v = np.asarray(v, dtype=float)
        nb = -self.beta
        alo = lo**nb
        ahi = 0.0 if math.isinf(hi) else hi**nb
        return (alo - v * (alo - ahi)) ** (1.0 / nb)

    def to_config(self) -> dict:
        return {
            "kind": "stable",
            "beta": self.beta,
            "c_plus": self.c_plus,
            "c_minus": self.c_minus,
            "band": self.band.to_config(),
        }


@dataclass(frozen=True)
class AtomMeasure(_Measure):
    """Finite collection of atoms ``sum_j m_j delta_{x_j}``.

    An empty collection is the zero measure.
    """

    locations: tuple = ()
    masses: tuple = ()
    band: Band = field(default_factory=Band)

    def __post_init__(self):
        locs = tuple(float(x) for x in self.locations)
        ms = tuple(float(m) for m in self.masses)
        if len(locs) != len(ms):
            raise DomainError("locations and masses differ in length")
        if any(m < 0 or not math.isfinite(m) for m in ms):
            raise DomainError("atom masses must be finite and non-negative")
        if any(x == 0.0 or not math.isfinite(x) for x in locs):
            raise DomainError("atoms must sit at finite non-zero locations")
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "masses", ms)

    @classmethod
    def zero(cls) -> "AtomMeasure":
        return cls()

    @property
    def is_zero(self) -> bool:
        return not any(m > 0 for m in self.masses)

    @property
    def symmetric(self) -> bool:
        pos = sorted((x, m) for x, m in zip(self.locations, self.masses) if x > 0 and m > 0)
        neg = sorted((-x, m) for x, m in zip(self.locations, self.masses) if x < 0 and m > 0)
        return pos == neg

    @property
    def finite_activity(self) -> bool:
        return True

    def _select(self, a, b):
        x = np.asarray(self.locations, dtype=float)
        m = np.asarray(self.masses, dtype=float)
        ax = np.abs(x)
        keep = (ax > a) & (ax <= b)
        return x[keep], m[keep]

    def _moment(self, k, a, b):
        x, m = self._select(a, b)
        return float(np.sum(m * x**k))

    def _abs_moment(self, k, a, b):
        x, m = self._select(a, b)
        return float(np.sum(m * np.abs(x) ** k))

    def _levy_exponent(self, t, a, b):
        x, m = self._select(a, b)
        if x.size == 0:
            return np.zeros(t.shape, dtype=complex)
        tx = t[..., None] * x
        re = -2.0 * np.sin(0.5 * tx) ** 2
        im = np.sin(tx) - tx
        return (re + 1j * im) @ m

    def to_config(self) -> dict:
        return {
            "kind": "atoms",
            "locations": list(self.locations),
            "masses": list(self.masses),
            "band": self.band.to_config(),
        }


@dataclass(frozen=True)
class DensityMeasure(_Measure):
    """Measure with a user-supplied density ``f`` (vectorised callable).

    Parameters
    ----------
    density : callable
        ``f(x)`` for real ``x``; values outside ``band`` are ignored.
    band : Band
    power_law_index : float, optional
        ``gamma`` such that ``f(x) ~ |x|^(-gamma)`` near zero.  When given it
        is used to remove the endpoint singularity before quadrature.
    symmetric : bool
        Declared symmetry; it is not checked numerically.
    """

    density: Callable = None
    band: Band = field(default_factory=Band)
    power_law_index: float | None = None
    symmetric: bool = False

    def __post_init__(self):
        if not callable(self.density):
            raise DomainError("density must be callable")

    @property
    def finite_activity(self) -> bool:
        if self.band.lower > 0:
            return True
        if self.power_law_index is not None:
            return self.power_law_index < 1.0
        return math.isfinite(self.mass(0.0, min(1.0, self.band.upper)))

    def _f(self, x):
        return np.asarray(self.density(x), dtype=float)

    def _side(self, g, a, b, sign, order):
        """int_a^b g(x) f(sign*x) dx on one side, with ``g ~ x^order``."""

        def integrand(x):
            return float(g(x) * self._f(sign * x))

        total, err = 0.0, 0.0
        upper = b
        if math.isinf(b):
            r, e = integrate.quad(integrand, max(a, 1.0), math.inf, epsrel=_QUAD_RTOL, limit=200)
            total += r
            err += e
            upper = max(a, 1.0)
            if upper <= a:
                return total, err
        gamma = self.power_law_index
        if a == 0.0 and gamma is not None:
            p = order + 1.0 - gamma
            if p <= 0:
                return math.inf, 0.0
            q = 1.0 / p

            def mapped(s):
                x = upper * s**q
                return float(g(x) * self._f(sign * x)) * q * upper * s ** (q - 1.0)

            r, e = integrate.quad(mapped, 0.0, 1.0, epsrel=_QUAD_RTOL, limit=200)
        elif a == 0.0:
            # geometric splitting towards the possible singularity at zero
            edges = upper * np.geomspace(1e-12, 1.0, 13)
            r, e = integrate.quad(integrand, 0.0, edges[0], epsrel=_QUAD_RTOL, limit=200)
            for lo_, hi_ in zip(edges[:-1], edges[1:]):
                ri, ei = integrate.quad(integrand, lo_, hi_, epsrel=_QUAD_RTOL, limit=200)
                r += ri
                e += ei
        else:
            r, e = integrate.quad(integrand, a, upper, epsrel=_QUAD_RTOL, limit=200)
        return total + r, err + e

    def _integrate(self, g_pos, g_neg, a, b, order):
        rp, ep = self._side(g_pos, a, b, 1.0, order)
        rn, en = self._side(g_neg, a, b, -1.0, order)
        val = rp + rn
        err = ep + en
        if math.isfinite(val) and err > max(1e-8 * (abs(rp) + abs(rn)), 1e-14):
            raise NumericError(
                f"quadrature did not converge (error {err:.3g} for value {val:.6g})",
                achieved_tolerance=err,
            )
        return val

    def _moment(self, k, a, b):
        sign = -1.0 if k % 2 else 1.0
        return self._integrate(lambda x: x**k, lambda x: sign * x**k, a, b, k)

    def _abs_moment(self, k, a, b):
        return self._integrate(lambda x: x**k, lambda x: x**k, a, b, k)

    def _levy_exponent(self, t, a, b):
        if math.isinf(b) or a == 0.0:
            raise IntegrabilityError("numeric exponent needs a band bounded away from 0 and inf")
        # composite Gauss-Legendre on geometric panels per side
        nodes, weights = np.polynomial.legendre.leggauss(64)
        edges = np.geomspace(a, b, 33)
        lo, hi = edges[:-1, None], edges[1:, None]
        x = (0.5 * (hi - lo) * (nodes + 1.0) + lo).ravel()
        w = (0.5 * (hi - lo) * weights).ravel()
        # refine over oscillation: enough nodes per period at the largest |t|
        wf = w * self._f(x)
        wb = w * self._f(-x)
        out = np.zeros(t.shape, dtype=complex)
        flat_t = t.ravel()
        for i in range(0, flat_t.size, 256):
            tt = flat_t[i:i + 256, None] * x
            cm1 = -2.0 * np.sin(0.5 * tt) ** 2
            sm = np.sin(tt) - tt
            out.ravel()[i:i + 256] = cm1 @ (wf + wb) + 1j * (sm @ (wf - wb))
        return out

    def to_config(self) -> dict:
        raise DomainError("density measures are not serialisable to configuration")


Measure = StableMeasure | AtomMeasure | DensityMeasure


def measure_from_config(cfg: Mapping) -> _Measure:
    kind = cfg.get("kind")
    band = Band.from_config(cfg.get("band"))
    if kind == "stable":
        return StableMeasure(
            beta=float(cfg["beta"]),
            c_plus=float(cfg.get("c_plus", 1.0)),
            c_minus=float(cfg.get("c_minus", 1.0)),
            band=band,
        )
    if kind == "atoms":
        return AtomMeasure(tuple(cfg.get("locations", ())), tuple(cfg.get("masses", ())), band)
    if kind == "zero":
        return AtomMeasure.zero()
    raise DomainError(f"unknown measure kind {kind!r}")


@dataclass(frozen=True)
class LevyTriplet:
    """Levy triplet ``(b, Sigma^2, nu)`` with truncation at ``|x| <= 1``."""

    b: float
    sigma_sq: float
    measure: _Measure = field(default_factory=AtomMeasure.zero)

    def __post_init__(self):
        if not (self.sigma_sq >= 0.0) or not math.isfinite(self.sigma_sq):
            raise DomainError(f"Sigma^2 must be finite and >= 0, got {self.sigma_sq}")
        if not math.isfinite(self.b):
            raise DomainError("drift must be finite")
        self.measure.check_integrable()

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma_sq)

    def to_config(self) -> dict:
        return {"b": self.b, "sigma_sq": self.sigma_sq, "measure": self.measure.to_config()}

    @classmethod
    def from_config(cls, cfg: Mapping) -> "LevyTriplet":
        return cls(
            b=float(cfg.get("b", 0.0)),
            sigma_sq=float(cfg.get("sigma_sq", 0.0)),
            measure=measure_from_config(cfg.get("measure", {"kind": "zero"})),
        )


def _check_eps(epsilon):
    if not (epsilon > 0) or not math.isfinite(epsilon):
        raise DomainError(f"epsilon must be positive and finite, got {epsilon}")


def drift_beps(triplet: LevyTriplet, epsilon: float) -> float:
    """Drift ``b(eps)`` after moving all jumps above ``eps`` into the CPP."""
    _check_eps(epsilon)
    nu = triplet.measure
    if epsilon <= 1.0:
        return triplet.b - nu.moment(1, epsilon, 1.0)
    return triplet.b + nu.moment(1, 1.0, epsilon)


def intensity(measure: _Measure, eta: float, epsilon: float) -> float:
    """``nu{eta < |x| <= eps}``; ``inf`` when infinite activity reaches zero."""
    _check_eps(epsilon)
    if eta < 0 or eta >= epsilon:
        raise DomainError(f"need 0 <= eta < epsilon, got eta={eta}, epsilon={epsilon}")
    return measure.mass(eta, epsilon)


@dataclass(frozen=True)
class MomentTable:
    """Truncation summary for the band ``eta < |x| <= epsilon``."""

    epsilon: float
    eta: float
    drift_beps: float
    intensity: float
    finite_activity: bool
    sigma2: float
    mu: dict

    @property
    def mu3(self) -> float:
        return self.mu[3]

    @property
    def mu4(self) -> float:
        return self.mu[4]

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "eta": self.eta,
            "drift_beps": self.drift_beps,
            "intensity": None if math.isinf(self.intensity) else self.intensity,
            "finite_activity": self.finite_activity,
            "sigma2": self.sigma2,
            "mu": {str(k): v for k, v in self.mu.items()},
        }


def moment_table(triplet: LevyTriplet, eta: float, epsilon: float,
                 orders: Sequence[int] = _MOMENT_ORDERS) -> MomentTable:
    """Compute ``b(eps)``, ``lambda_{eta,eps}`` and the moments of ``nu``
    restricted to ``eta < |x| <= eps`` (``eta = 0`` gives ``sigma^2(eps)``,
    ``mu_k(eps)``)."""
    _check_eps(epsilon)
    nu = triplet.measure
    lam = intensity(nu, eta, epsilon)
    return MomentTable(
        epsilon=epsilon,
        eta=eta,
        drift_beps=drift_beps(triplet, epsilon),
        intensity=lam,
        finite_activity=math.isfinite(lam),
        sigma2=nu.moment(2, eta, epsilon),
        mu={k: nu.moment(k, eta, epsilon) for k in orders},
    )


@dataclass(frozen=True)
class ThresholdSet:
    """Data-free thresholds ``u+ <= u~* , u*  <= eps``."""

    epsilon: float
    u_plus: float
    u_tilde_star: float
    u_star: float
    lam_plus: float
    lam_tilde_star: float
    lam_star: float
    c_tilde: float = 1.0
    n: int = 1
    delta: float = 1.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _bisect(pred, lo, hi, rtol=1e-10, maxit=200):
    """Largest u in [lo, hi] with pred(u) true, pred(lo) assumed true and
    pred(hi) false.  Returns the feasible end."""
    for _ in range(maxit):
        if hi - lo <= rtol * max(hi, 1e-300):
            break
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _largest_feasible(pred, lo, hi, npts=1024):
    if pred(hi):
        return hi
    grid = np.geomspace(lo, hi, npts) if lo > 0 else np.linspace(lo, hi, npts)
    ok = np.array([pred(float(u)) for u in grid])
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return lo
    i = idx[-1]
    if i == npts - 1:
        return hi
    return _bisect(pred, float(grid[i]), float(grid[i + 1]))


def thresholds(triplet: LevyTriplet, epsilon: float, n: int, delta: float,
               c_tilde: float = 1.0) -> ThresholdSet:
    """Compute ``u+``, ``u~*`` and ``u*`` for a sample of ``n`` increments.

    Raises
    ------
    InfeasibleError
        If ``lambda_{0,eps} n Delta < log(e v n)`` so that ``u+`` does not exist.
    """
    _check_eps(epsilon)
    if n < 1 or not (delta > 0):
        raise DomainError("need n >= 1 and delta > 0")
    if not (0.0 < c_tilde <= 1.0):
        raise DomainError("c_tilde must lie in (0, 1]")
    nu = triplet.measure
    L = log_n(n)
    s2 = triplet.sigma_sq

    def lam(u):
        return nu.mass(u, epsilon)

    lam0 = lam(0.0)
    if not (lam0 * n * delta >= L):
        raise InfeasibleError(
            f"lambda_(0,eps) n Delta = {lam0 * n * delta:.6g} < log(e v n) = {L:.6g}",
            inequality="lambda_(0,eps) * n * Delta >= log(e v n)",
        )

    def plus_ok(u):
        return lam(u) * n * delta >= L

    if plus_ok(epsilon):
        u_plus = epsilon
    else:
        # lam(u) is finite for u > 0 with lam(0+) = lam0 >= L/(n Delta)
        lo = 0.0
        hi = epsilon
        # shrink a positive lower end first so that quadrature stays finite
        probe = epsilon
        for _ in range(2000):
            probe *= 0.5
            if probe <= 0 or plus_ok(probe):
                break
        lo = probe if probe > 0 and plus_ok(probe) else 0.0
        hi = min(epsilon, 2 * probe) if lo > 0 else epsilon
        u_plus = _bisect(plus_ok, lo, hi)

    def sig2(u):
        return nu.moment(2, 0.0, u)

    def tilde_ok(u):
        return u <= c_tilde * math.sqrt((sig2(u) + s2) * delta) / math.sqrt(L)

    def star_ok(u):
        return u <= math.sqrt(delta * (s2 + sig2(u))) * L**2

    u_t = max(_largest_feasible(tilde_ok, u_plus, epsilon), u_plus) if u_plus < epsilon else epsilon
    u_s = max(_largest_feasible(star_ok, u_plus, epsilon), u_plus) if u_plus < epsilon else epsilon
    return ThresholdSet(
        epsilon=epsilon,
        u_plus=u_plus,
        u_tilde_star=u_t,
        u_star=u_s,
        lam_plus=lam(u_plus),
        lam_tilde_star=lam(u_t),
        lam_star=lam(u_s),
        c_tilde=c_tilde,
        n=n,
        delta=delta,
    )
