"""Explicit upper and lower bounds on total variation distances.

All universal constants are unknown, so every bound takes a constant ``C``
(default 1, reported as ``unit_constant``).  Reports keep the unclipped value
and the additive pieces so the rate can be studied independently of any
particular constant.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import DegenerateError, DomainError
from .levy_model import (
    AtomMeasure,
    LevyTriplet,
    MomentTable,
    StableMeasure,
    drift_beps,
    log_n,
    moment_table,
    thresholds,
)


@dataclass
class BoundReport:
    """Result of one bound evaluation.

    ``combination`` says how ``terms`` rebuild ``raw_value`` ("sum" or "max").
    ``kind`` is "upper" (value clipped at 1) or "lower" (clipped at 0).
    """

    value: float
    raw_value: float
    terms: dict
    constant_mode: dict
    feasible: bool
    precondition_log: list = field(default_factory=list)
    kind: str = "upper"
    combination: str = "sum"
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["precondition_log"] = [list(p) for p in self.precondition_log]
        return _json_safe(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return _json_safe(obj.item())
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _constant_mode(C: float) -> dict:
    if C == 1.0:
        return {"mode": "unit_constant", "value": 1.0}
    if not (C > 0):
        raise DomainError("the constant must be positive")
    return {"mode": "user_constant", "value": float(C)}


def _upper(terms, C, log, comb="sum", flags=None) -> BoundReport:
    raw = sum(terms.values()) if comb == "sum" else max(terms.values())
    return BoundReport(
        value=float(min(raw, 1.0)),
        raw_value=float(raw),
        terms={k: float(v) for k, v in terms.items()},
        constant_mode=_constant_mode(C),
        feasible=all(ok for _, ok, _ in log),
        precondition_log=log,
        kind="upper",
        combination=comb,
        flags=flags or {},
    )


def _lower(terms, C, log, comb="sum", flags=None) -> BoundReport:
    raw = sum(terms.values()) if comb == "sum" else max(terms.values())
    return BoundReport(
        value=float(max(raw, 0.0)),
        raw_value=float(raw),
        terms={k: float(v) for k, v in terms.items()},
        constant_mode=_constant_mode(C),
        feasible=all(ok for _, ok, _ in log),
        precondition_log=log,
        kind="lower",
        combination=comb,
        flags=flags or {},
    )


def _pre(name, lhs, rhs):
    """Precondition ``lhs >= rhs`` as (name, satisfied, margin)."""
    margin = lhs - rhs
    return (name, bool(margin >= 0), float(margin))


def _rate_sq(mt: MomentTable, sigma_sq, n, delta):
    s2 = sigma_sq + mt.sigma2
    if s2 <= 0:
        raise DegenerateError("Sigma^2 + sigma^2(eps) = 0")
    return n * mt.mu4**2 / (delta**2 * s2**4) + n * mt.mu3**2 / (delta * s2**3)


# --- Gaussian approximation upper bounds -----------------------------------

def ub_thm2(moments: MomentTable, sigma_sq: float, n: int, delta: float,
            mode: str = "n_sample", kappa: float | None = None, C: float = 1.0,
            c_tilde: float = 1.0) -> BoundReport:
    """Upper bound on ``|| X_Delta(eps)^n - N(b(eps)Delta, Delta s^2)^n ||_TV``.

    Parameters
    ----------
    moments : MomentTable
        Truncation at ``eps`` (``eta = 0``).
    mode : {"n_sample", "marginal"}
        ``marginal`` requires ``kappa`` and bounds the ``n = 1`` distance.

    Preconditions on the small-jump intensity and on ``eps`` are logged only.
    """
    s2 = sigma_sq + moments.sigma2
    if s2 <= 0:
        raise DegenerateError("Sigma^2 + sigma^2(eps) = 0")
    L = log_n(n)
    log = [
        _pre("lambda_(0,eps) >= 24 log(e v n) / Delta", moments.intensity, 24 * L / delta),
        _pre("eps <= c_tilde sqrt(s^2 Delta / log(e v n))",
             c_tilde * math.sqrt(s2 * delta / L), moments.epsilon),
    ]
    if mode == "n_sample":
        terms = {"rate": C * math.sqrt(_rate_sq(moments, sigma_sq, n, delta)), "remainder": C / n}
    elif mode == "marginal":
        if kappa is None or not (kappa > 0):
            raise DomainError("marginal mode needs kappa > 0")
        base = moments.mu4 / (delta * s2**2) + abs(moments.mu3) / (math.sqrt(delta) * s2**1.5)
        expo = 1.0 - 1.0 / (2.0 * kappa) if math.isfinite(kappa) else 1.0
        terms = {"rate": C * base**expo}
    else:
        raise DomainError(f"unknown mode {mode!r}")
    return _upper(terms, C, log)


def ub_cor1(moments: MomentTable, n: int, delta: float, symmetric: bool,
            C: float = 1.0) -> BoundReport:
    """Moment-free upper bound for ``Sigma = 0`` using ``mu_4 <= eps^2 sigma^2``."""
    s2 = moments.sigma2
    if s2 <= 0:
        raise DegenerateError("sigma^2(eps) = 0")
    eps = moments.epsilon
    if symmetric:
        rate = math.sqrt(n * eps**4 / (delta**2 * s2**2))
    else:
        rate = math.sqrt(n * eps**2 / (delta * s2))
    log = [_pre("measure is symmetric", 1.0 if symmetric else 0.0, 0.0)]
    return _upper({"rate": C * rate, "remainder": C / n}, C, log)


def ub_thm3(triplet: LevyTriplet, epsilon: float, n: int, delta: float,
            c_tilde: float = 1.0, C: float = 1.0) -> BoundReport:
    """Upper bound evaluated at the data-free threshold ``u~*``.

    Terms are ``escape_mass``, ``rate`` and ``remainder``.

    Raises
    ------
    InfeasibleError
        If ``u+`` does not exist for this ``(n, Delta)``.
    """
    th = thresholds(triplet, epsilon, n, delta, c_tilde)
    u = th.u_tilde_star
    mt = moment_table(triplet, 0.0, u)
    lam = th.lam_tilde_star
    L = log_n(n)
    lam0 = triplet.measure.mass(0.0, epsilon)
    log = [_pre("lambda_(0,eps) >= 25 log(e v n) / Delta", lam0, 25 * L / delta)]
    decay = math.exp(-lam * delta * n)
    terms = {
        "escape_mass": -math.expm1(-lam * delta * n),
        "rate": C * decay * math.sqrt(_rate_sq(mt, triplet.sigma_sq, n, delta)),
        "remainder": C / n,
    }
    rep = _upper(terms, C, log)
    rep.flags["thresholds"] = th.to_dict()
    return rep


# --- lower bounds -----------------------------------------------------------

def _moment_lower(mt: MomentTable, sigma_sq, n, delta, C, alpha_n):
    s2 = sigma_sq + mt.sigma2
    if s2 <= 0:
        raise DegenerateError("Sigma^2 + sigma^2(eps) = 0")
    q3 = delta * s2**3 / (n * mt.mu3**2) if mt.mu3 != 0 else math.inf
    q4 = delta**2 * s2**4 / (n * mt.mu4**2) if mt.mu4 != 0 else math.inf
    return 1.0 - C * min(q3, q4) - alpha_n, min(q3, q4)


def lb_thm4_5(triplet: LevyTriplet, epsilon: float, n: int, delta: float,
              mode: str = "thm4", C: float = 1.0, alpha_n: float = 0.0) -> BoundReport:
    """Lower bound on the ``n``-sample TV to the closest Gaussian.

    ``thm4`` evaluates the moment expression at ``eps``; ``thm5`` evaluates it
    at ``u*`` and takes the maximum with the escape bound
    ``1 - exp(-lambda_{u*,eps} n Delta) - alpha_n``.
    """
    if alpha_n < 0:
        raise DomainError("alpha_n must be non-negative")
    L = log_n(n)
    if mode == "thm4":
        mt = moment_table(triplet, 0.0, epsilon)
        s2 = triplet.sigma_sq + mt.sigma2
        lam0 = triplet.measure.mass(0.0, epsilon)
        log = [
            _pre("lambda_(0,eps) >= max(1/Delta, log(e v n)/(n Delta))", lam0,
                 max(1.0 / delta, L / (n * delta))),
            _pre("eps <= sqrt(s^2 Delta) log(e v n)^2", math.sqrt(s2 * delta) * L**2, epsilon),
        ]
        if mt.mu3 == 0 and mt.mu4 == 0:
            return _lower({"one": 0.0}, C, log, flags={"vacuous": True})
        raw, q = _moment_lower(mt, triplet.sigma_sq, n, delta, C, alpha_n)
        terms = {"one": 1.0, "rate": -C * q, "alpha_n": -alpha_n}
        return _lower(terms, C, log)
    if mode == "thm5":
        th = thresholds(triplet, epsilon, n, delta)
        mt = moment_table(triplet, 0.0, th.u_star)
        escape = -math.expm1(-th.lam_star * n * delta) - alpha_n
        log = [_pre("u+ exists", 1.0, 0.0)]
        flags = {"thresholds": th.to_dict()}
        if mt.mu3 == 0 and mt.mu4 == 0:
            moment_branch = -math.inf
            flags["vacuous_moment_branch"] = True
        else:
            moment_branch, _ = _moment_lower(mt, triplet.sigma_sq, n, delta, C, alpha_n)
        terms = {"moment_branch": moment_branch, "escape_branch": escape}
        rep = _lower(terms, C, log, comb="max", flags=flags)
        rep.terms["alpha_n"] = float(alpha_n)
        return rep
    raise DomainError(f"unknown mode {mode!r}")


# --- generic inequalities -----------------------------------------------------------

def tv_gaussians_bound(mu1: float, sigma1: float, mu2: float, sigma2: float, n: int) -> float:
    """Upper bound on ``|| N(mu1, s1^2)^n - N(mu2, s2^2)^n ||_TV``."""
    sigma1, sigma2 = abs(sigma1), abs(sigma2)
    if sigma1 > sigma2:
        mu1, sigma1, mu2, sigma2 = mu2, sigma2, mu1, sigma1
    if sigma2 == 0:
        return 0.0 if mu1 == mu2 else 1.0
    val = 1.0 - (sigma1 / sigma2) ** n + math.sqrt(n) * abs(mu1 - mu2) / math.sqrt(2 * math.pi * sigma2**2)
    return float(min(1.0, val))


def tv_cpp_bound(lambda1: float, lambda2: float, tv_jump_laws: float, n: int, t: float) -> float:
    """Upper bound on the ``n``-sample TV of two compound Poisson increments
    over a time step ``t``."""
    if lambda1 < 0 or lambda2 < 0 or not (0 <= tv_jump_laws <= 1) or t <= 0 or n < 1:
        raise DomainError("invalid compound Poisson bound inputs")
    val = n * t * min(lambda1, lambda2) * tv_jump_laws - math.expm1(-n * t * abs(lambda1 - lambda2))
    return float(min(1.0, val))


def tv_product_bound(tv_marginal: float, n: int) -> float:
    """``min(1, sqrt(2 n tv))`` bound for ``n``-fold products."""
    if not (0 <= tv_marginal <= 1) or n < 1:
        raise DomainError("tv_marginal must lie in [0, 1] and n >= 1")
    return float(min(1.0, math.sqrt(2 * n * tv_marginal)))


def tv_certificate_from_test(level_hat: float, power_hat: float, ci_half_widths=0.0) -> float:
    """Conservative lower bound on the ``n``-sample TV from a test's
    estimated level and power (``ci_half_widths``: scalar or (level, power))."""
    if np.ndim(ci_half_widths) == 0:
        ci_l = ci_p = float(ci_half_widths)
    else:
        ci_l, ci_p = (float(c) for c in ci_half_widths)
    for v in (level_hat, power_hat):
        if not (0 <= v <= 1):
            raise DomainError("level and power must lie in [0, 1]")
    return float(max(0.0, 1.0 - (level_hat + ci_l) - ((1.0 - power_hat) + ci_p)))


# --- two Levy processes ------------------------------------------------------

def _tail_density(measure, x, epsilon):
    ax = np.abs(x)
    if isinstance(measure, StableMeasure):
        f = measure.density(x)
    else:
        f = np.asarray(measure.density(x), dtype=float)
        f = np.where((ax > measure.band.lower) & (ax <= measure.band.upper), f, 0.0)
    return np.where(ax > epsilon, f, 0.0)


def jump_law_tv(nu1, nu2, epsilon: float) -> float:
    """TV between the normalised laws of the jumps with ``|x| > eps``."""
    l1 = nu1.mass(epsilon, math.inf)
    l2 = nu2.mass(epsilon, math.inf)
    if l1 == 0 and l2 == 0:
        return 0.0
    if l1 == 0 or l2 == 0:
        return 1.0
    a1, a2 = isinstance(nu1, AtomMeasure), isinstance(nu2, AtomMeasure)
    if a1 and a2:
        x1, m1 = nu1._select(epsilon, math.inf)
        x2, m2 = nu2._select(epsilon, math.inf)
        p = dict(zip(x1.tolist(), (m1 / l1).tolist()))
        q = dict(zip(x2.tolist(), (m2 / l2).tolist()))
        keys = set(p) | set(q)
        return float(0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys))
    if a1 or a2:
        # atoms against a density are mutually singular
        return 1.0
    breaks = sorted({b for nu in (nu1, nu2) for b in (nu.band.lower, nu.band.upper)
                     if math.isfinite(b) and b > epsilon})
    edges = [epsilon] + breaks
    total = 0.0
    for sign in (1.0, -1.0):
        def g(x):
            return abs(float(_tail_density(nu1, sign * x, epsilon)) / l1
                       - float(_tail_density(nu2, sign * x, epsilon)) / l2)
        for lo, hi in zip(edges[:-1], edges[1:]):
            total += integrate.quad(g, lo, hi, limit=200)[0]
        total += integrate.quad(g, edges[-1], math.inf, limit=200)[0]
    return float(min(1.0, 0.5 * total))


def tv_two_levy_thm7(triplet1: LevyTriplet, triplet2: LevyTriplet, epsilon: float, n: int,
                     delta: float, C: float = 1.0, jump_tv: float | None = None) -> BoundReport:
    """Upper bound on the ``n``-sample TV between two Levy processes observed
    at step ``Delta``, itemised by drift, scale, Gaussian approximation and
    compound Poisson contributions."""
    mt1 = moment_table(triplet1, 0.0, epsilon)
    mt2 = moment_table(triplet2, 0.0, epsilon)
    s1 = math.sqrt(triplet1.sigma_sq + mt1.sigma2)
    s2 = math.sqrt(triplet2.sigma_sq + mt2.sigma2)
    smax, smin = max(s1, s2), min(s1, s2)
    if smax == 0:
        raise DegenerateError("both processes have no Gaussian or small-jump variance")
    b1 = drift_beps(triplet1, epsilon)
    b2 = drift_beps(triplet2, epsilon)
    r1 = ub_thm2(mt1, triplet1.sigma_sq, n, delta, C=C) if s1 > 0 else None
    r2 = ub_thm2(mt2, triplet2.sigma_sq, n, delta, C=C) if s2 > 0 else None
    lam1 = triplet1.measure.mass(epsilon, math.inf)
    lam2 = triplet2.measure.mass(epsilon, math.inf)
    if jump_tv is None:
        jump_tv = jump_law_tv(triplet1.measure, triplet2.measure, epsilon)
    terms = {
        "drift": math.sqrt(n * delta) * abs(b1 - b2) / (math.sqrt(2 * math.pi) * smax),
        "scale": 1.0 - (smin / smax) ** n,
        "rate_1": r1.terms["rate"] if r1 else 1.0,
        "rate_2": r2.terms["rate"] if r2 else 1.0,
        "remainder": 2.0 * C / n,
        "compound_poisson": tv_cpp_bound(lam1, lam2, jump_tv, n, delta),
    }
    log = (r1.precondition_log if r1 else []) + (r2.precondition_log if r2 else [])
    rep = _upper(terms, C, log)
    rep.flags["jump_law_tv"] = float(jump_tv)
    return rep


# --- Liese-type bound ----------------------------------------------------------

def tilde_drift(triplet: LevyTriplet) -> float:
    """``b - int_{-1}^{1} x nu(dx)``, the drift without jump compensation."""
    return triplet.b - triplet.measure.moment(1, 0.0, 1.0)


def gaussian_hellinger_sq(m1: float, v1: float, m2: float, v2: float) -> float:
    """``int (sqrt p - sqrt q)^2`` for ``N(m1, v1)`` and ``N(m2, v2)``."""
    if v1 == 0 and v2 == 0:
        return 0.0 if m1 == m2 else 2.0
    if v1 == 0 or v2 == 0:
        return 2.0
    s1, s2 = math.sqrt(v1), math.sqrt(v2)
    aff = math.sqrt(2 * s1 * s2 / (v1 + v2)) * math.exp(-((m1 - m2) ** 2) / (4 * (v1 + v2)))
    return 2.0 * (1.0 - aff)


def liese_bound(b1: float, S1_sq: float, b2: float, S2_sq: float, hellinger_sq_nu: float,
                t: float) -> float:
    """Hellinger-type bound on ``|| L_1(X_t) - L_2(X_t) ||_TV`` from the
    uncompensated drifts, Gaussian variances and ``H^2(nu_1, nu_2)``."""
    if hellinger_sq_nu < 0 or t <= 0 or S1_sq < 0 or S2_sq < 0:
        raise DomainError("invalid inputs for the Hellinger bound")
    h2g = gaussian_hellinger_sq(t * b1, t * S1_sq, t * b2, t * S2_sq)
    inner = 1.0 - (1.0 - 0.5 * h2g) ** 2 * math.exp(-t * hellinger_sq_nu)
    val = 2.0 * math.sqrt(max(0.0, inner))
    return float(min(1.0, max(0.0, val)))


# --- epsilon* table ----------------------------------------------------------------

def epsilon_star(n: int, delta: float, sigma_sq: float, beta: float, symmetric: bool,
                 boundary: str = "table") -> tuple[float, str]:
    """Order-of-magnitude optimal truncation level for a stable-type measure.

    ``boundary="table"`` compares ``Sigma^2`` with the regime boundary as
    tabulated, ``(Delta/n)^((2-beta)/beta)`` for symmetric measures and
    ``(Delta/sqrt n)^((2-beta)/beta)`` otherwise.  ``boundary="matched"``
    uses instead the value of ``Sigma^2`` at which the two cell formulas
    coincide.
    """
    if not (0 < beta < 2) or n < 1 or delta <= 0 or sigma_sq < 0:
        raise DomainError("invalid epsilon_star inputs")
    p = (2.0 - beta) / beta
    rn = math.sqrt(n)
    if boundary == "table":
        cut = (delta / n) ** p if symmetric else (delta / rn) ** p
    elif boundary == "matched":
        cut = (delta / rn) ** p if symmetric else (delta / n) ** p
    else:
        raise DomainError(f"unknown boundary {boundary!r}")
    large = sigma_sq >= cut and sigma_sq > 0
    if symmetric:
        if large:
            return (delta * sigma_sq**2 / rn) ** (1.0 / (4.0 - beta)), "Sigma large"
        return (delta / rn) ** (1.0 / beta), "Sigma small"
    if large:
        return (math.sqrt(delta) * sigma_sq**1.5 / rn) ** (1.0 / (3.0 - beta)), "Sigma large"
    return (delta / n) ** (1.0 / beta), "Sigma small"


def sweep_to_csv(rows: Sequence[dict], path) -> None:
    """Write one row per parameter tuple; columns are the union of keys."""
    cols: list = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in cols})
