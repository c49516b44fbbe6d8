"""Command-line front end: config-driven, reproducible experiment runs.

Every artifact ``out.csv`` (or ``out.json``) is accompanied by
``out.csv.meta.json`` holding the resolved configuration and the tool
version.  No timestamps are written, so identical configs give identical
bytes.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, bounds, jumptest, sampler, spectral
from .errors import InfeasibleError, LevyTVError
from .levy_model import LevyTriplet, StableMeasure, moment_table

log = logging.getLogger("levytv")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2
DEFAULT_SEED = 0

SUBCOMMAND_KIND = {
    "moments": "moments",
    "simulate": "simulate",
    "tv-oracle": "tv-oracle",
    "rate-study": "rate-study",
    "bounds": "bounds-sweep",
    "test": "test",
    "level-power": "level-power",
    "eps-star": "epsilon-star-table",
    "calibrate": "calibrate",
}

DEFAULTS = {
    "eta": 0.0,
    "delta": 1.0,
    "alpha": 0.1,
    "replications": 1000,
    "c_tilde": 1.0,
    "constant": 1.0,
    "alpha_n": 0.0,
    "gaussian_refinement": False,
    "planning": False,
    "format": "csv",
    "grid_size": spectral.DEFAULT_GRID,
    "half_width_sds": spectral.DEFAULT_HALF_WIDTH,
}


# --- config handling ---------------------------------------------------------

def load_schema() -> dict:
    text = resources.files("levytv").joinpath("data/config_schema.json").read_text("utf-8")
    return json.loads(text)


def _path(err) -> str:
    parts = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
    return "$" + parts


def validate_config(cfg: dict) -> tuple[list, list]:
    """Return ``(errors, warnings)``; errors are ``"path: message"`` strings."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    errs = [f"{_path(e)}: {e.message}" for e in errors]
    warns = []
    if isinstance(cfg, dict) and "seed" not in cfg:
        warns.append(f"seed not given; defaulting to {DEFAULT_SEED}")
    return errs, warns


def resolve_config(cfg: dict) -> dict:
    out = copy.deepcopy(cfg)
    out.setdefault("seed", DEFAULT_SEED)
    for k, v in DEFAULTS.items():
        out.setdefault(k, v)
    return out


def _listify(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _scalar(cfg, key):
    v = cfg[key]
    if isinstance(v, list):
        if len(v) != 1:
            raise LevyTVError(f"'{key}' must be a single value for kind {cfg['kind']}")
        return v[0]
    return v


def _triplet(cfg) -> LevyTriplet:
    return LevyTriplet.from_config(cfg.get("triplet", {}))


def _require(cfg, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise LevyTVError(f"kind {cfg['kind']} needs {', '.join(missing)}")


# --- output helpers ------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if v is None:
        return ""
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    cols: list = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def _json_dump(obj) -> str:
    return json.dumps(bounds._json_safe(obj), indent=2, sort_keys=True) + "\n"


class Output:
    """Writes the main artifact plus its ``.meta.json`` provenance record."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.path = cfg.get("output")
        self.written: list = []

    def _meta(self, summary):
        return {"tool": "levytv", "version": __version__, "config": self.cfg, "summary": summary}

    def text(self, text: str, summary=None):
        if self.path is None:
            sys.stdout.write(text)
            return
        Path(self.path).write_text(text, encoding="utf-8")
        Path(self.path + ".meta.json").write_text(_json_dump(self._meta(summary)), encoding="utf-8")
        self.written.append(self.path)

    def batch(self, batch: sampler.IncrementBatch, fmt: str, summary=None):
        if self.path is None:
            if fmt != "csv":
                raise LevyTVError("binary output needs an output path")
            sys.stdout.write("value\n" + "".join(f"{v:.17g}\n" for v in batch.values))
            return
        if fmt == "csv":
            batch.to_csv(self.path)
        else:
            batch.to_binary(self.path)
        Path(self.path + ".meta.json").write_text(_json_dump(self._meta(summary)), encoding="utf-8")
        self.written.append(self.path)


def _pmap(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# --- kinds ------------------------------------------------------------------------

def _do_moments(cfg, out, threads):
    tr = _triplet(cfg)
    rows = []
    for eps in _listify(cfg.get("epsilon", 1.0)):
        mt = moment_table(tr, cfg["eta"], eps)
        row = {"epsilon": eps, "eta": mt.eta, "drift_beps": mt.drift_beps,
               "intensity": mt.intensity, "finite_activity": mt.finite_activity,
               "sigma2": mt.sigma2}
        row.update({f"mu{k}": v for k, v in mt.mu.items()})
        rows.append(row)
    out.text(rows_to_csv(rows))
    return EXIT_OK


def _do_simulate(cfg, out, threads):
    _require(cfg, "triplet", "epsilon", "n")
    tr = _triplet(cfg)
    b = sampler.sample_process_increments(
        tr, _scalar(cfg, "epsilon"), cfg["eta"], _scalar(cfg, "delta"), _scalar(cfg, "n"),
        cfg["seed"], cfg.get("mask"), gaussian_refinement=cfg["gaussian_refinement"],
        workers=threads)
    out.batch(b, cfg["format"], {"n": len(b), "neglected_variance": b.neglected_variance})
    return EXIT_OK


def _slope(x, y):
    x, y = np.log(np.asarray(x)), np.log(np.asarray(y))
    return float(np.polyfit(x, y, 1)[0])


def rate_study_rows(triplets: dict, eps_grid, delta, grid_size, half_width, threads=1):
    """(label, eps, numeric TV, marginal rate) rows and per-label slopes."""
    jobs = [(label, tr, eps) for label, tr in triplets.items() for eps in eps_grid]

    def one(job):
        label, tr, eps = job
        tv = spectral.numeric_tv_to_gaussian(tr, eps, delta, grid_size, half_width)
        mt = moment_table(tr, 0.0, eps)
        rate = bounds.ub_thm2(mt, tr.sigma_sq, 1, delta, mode="marginal", kappa=math.inf).raw_value
        return {"label": label, "epsilon": eps, "delta": delta, "numeric_tv": tv, "thm2_rate": rate}

    rows = _pmap(one, jobs, threads)
    slopes = {}
    for label in triplets:
        sub = [r for r in rows if r["label"] == label]
        if len(sub) >= 2:
            slopes[label] = {
                "numeric_tv_slope": _slope([r["epsilon"] for r in sub], [r["numeric_tv"] for r in sub]),
                "thm2_rate_slope": _slope([r["epsilon"] for r in sub], [r["thm2_rate"] for r in sub]),
            }
    return rows, slopes


def _do_tv_oracle(cfg, out, threads):
    _require(cfg, "epsilon")
    delta = _scalar(cfg, "delta")
    if "beta" in cfg:
        s2 = _scalar(cfg, "sigma_sq") if "sigma_sq" in cfg else 0.0
        trs = {f"beta={b:g}": LevyTriplet(0.0, s2, StableMeasure(b)) for b in _listify(cfg["beta"])}
    else:
        _require(cfg, "triplet")
        trs = {"triplet": _triplet(cfg)}
    rows, slopes = rate_study_rows(trs, _listify(cfg["epsilon"]), delta, cfg["grid_size"],
                                   cfg["half_width_sds"], threads)
    out.text(rows_to_csv(rows), {"slopes": slopes})
    if out.path is None:
        sys.stderr.write(_json_dump({"slopes": slopes}))
    return EXIT_OK


def _do_bounds(cfg, out, threads):
    _require(cfg, "triplet", "epsilon", "n")
    tr = _triplet(cfg)
    C, ct, an = cfg["constant"], cfg["c_tilde"], cfg["alpha_n"]
    sym = bool(getattr(tr.measure, "symmetric", False))
    grid = list(itertools.product(_listify(cfg["epsilon"]), _listify(cfg["n"]), _listify(cfg["delta"])))

    def one(point):
        eps, n, delta = point
        row = {"epsilon": eps, "n": n, "delta": delta}
        mt = moment_table(tr, 0.0, eps)
        r2 = bounds.ub_thm2(mt, tr.sigma_sq, n, delta, C=C, c_tilde=ct)
        row.update(ub_thm2=r2.value, ub_thm2_raw=r2.raw_value, ub_thm2_feasible=r2.feasible)
        if tr.sigma_sq == 0 and mt.sigma2 > 0:
            r = bounds.ub_cor1(mt, n, delta, sym, C=C)
            row.update(ub_cor1=r.value, ub_cor1_raw=r.raw_value)
        try:
            r3 = bounds.ub_thm3(tr, eps, n, delta, ct, C)
            row.update(ub_thm3=r3.value, ub_thm3_raw=r3.raw_value, ub_thm3_feasible=r3.feasible,
                       u_tilde_star=r3.flags["thresholds"]["u_tilde_star"])
        except InfeasibleError as exc:
            row.update(ub_thm3_feasible=False, ub_thm3_note=exc.inequality)
        r4 = bounds.lb_thm4_5(tr, eps, n, delta, "thm4", C, an)
        row.update(lb_thm4=r4.value, lb_thm4_raw=r4.raw_value, lb_thm4_feasible=r4.feasible)
        try:
            r5 = bounds.lb_thm4_5(tr, eps, n, delta, "thm5", C, an)
            row.update(lb_thm5=r5.value, lb_thm5_raw=r5.raw_value,
                       u_star=r5.flags["thresholds"]["u_star"])
        except InfeasibleError as exc:
            row.update(lb_thm5_feasible=False, lb_thm5_note=exc.inequality)
        return row

    rows = _pmap(one, grid, threads)
    flagged = sum(1 for r in rows if "ub_thm3_note" in r or "lb_thm5_note" in r)
    out.text(rows_to_csv(rows), {"rows": len(rows), "infeasible_rows": flagged})
    if flagged:
        # the sweep is complete; the exit code only reports the flagged rows
        log.warning("%d of %d grid points have no u+ threshold", flagged, len(rows))
        return EXIT_INFEASIBLE
    return EXIT_OK


def _read_increments(path) -> np.ndarray:
    p = str(path)
    if p.endswith((".bin", ".f8")):
        return sampler.IncrementBatch.read_binary(p)
    return sampler.IncrementBatch.read_csv(p)


def _constants(cfg):
    path = cfg.get("constants_file")
    return jumptest.ConstantTable.load(path) if path else jumptest.ConstantTable.load()


def _do_test(cfg, out, threads):
    _require(cfg, "data")
    x = _read_increments(cfg["data"])
    rep = jumptest.run_test(x, _scalar(cfg, "delta"), _scalar(cfg, "alpha"), _constants(cfg))
    out.text(_json_dump(rep.to_dict()))
    return EXIT_OK


def _do_level_power(cfg, out, threads):
    _require(cfg, "n")
    scen = cfg.get("scenarios")
    if not scen:
        scen = [{"name": "default", "triplet": cfg.get("triplet", {"sigma_sq": 1.0}),
                 "epsilon": _scalar(cfg, "epsilon") if "epsilon" in cfg else 1.0,
                 "eta": cfg["eta"]}]
    table = _constants(cfg)
    rows = []
    for s in scen:
        tr = LevyTriplet.from_config(s.get("triplet", {"sigma_sq": 1.0}))
        for n, delta, alpha in itertools.product(_listify(cfg["n"]), _listify(cfg["delta"]),
                                                 _listify(cfg["alpha"])):
            r = jumptest.mc_level_power(
                tr, s.get("epsilon", 1.0), s.get("eta", 0.0), n, delta, cfg["replications"],
                alpha, cfg["seed"], table, cfg["planning"], cfg["gaussian_refinement"], threads)
            row = {"scenario": s["name"], "n": n, "delta": delta, "alpha": alpha,
                   "replications": r.replications, "rejection_rate": r.rejection_rate,
                   "ci_lo": r.wilson_ci[0], "ci_hi": r.wilson_ci[1]}
            row.update({f"rate_{k}": v for k, v in r.per_test.items()})
            rows.append(row)
    out.text(rows_to_csv(rows))
    return EXIT_OK


def _do_eps_star(cfg, out, threads):
    _require(cfg, "n", "beta")
    rows = []
    sym_grid = _listify(cfg.get("symmetric", [True, False]))
    s2_grid = _listify(cfg.get("sigma_sq", 0.0))
    for n, delta, s2, beta, sym in itertools.product(
            _listify(cfg["n"]), _listify(cfg["delta"]), s2_grid, _listify(cfg["beta"]), sym_grid):
        e, regime = bounds.epsilon_star(n, delta, s2, beta, sym)
        rows.append({"n": n, "delta": delta, "sigma_sq": s2, "beta": beta, "symmetric": sym,
                     "epsilon_star": e, "regime": regime})
    out.text(rows_to_csv(rows))
    return EXIT_OK


def _do_calibrate(cfg, out, threads):
    n_grid = _listify(cfg.get("n", [20, 50, 100, 200, 400, 1000, 2000, 5000]))
    a_grid = _listify(cfg.get("alpha", [0.01, 0.05, 0.1, 0.2]))
    reps = cfg["replications"]
    table = jumptest.build_constant_table(n_grid, a_grid, reps, cfg["seed"])
    out.text(json.dumps(table, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


HANDLERS = {
    "moments": _do_moments,
    "simulate": _do_simulate,
    "tv-oracle": _do_tv_oracle,
    "rate-study": _do_tv_oracle,
    "bounds-sweep": _do_bounds,
    "test": _do_test,
    "level-power": _do_level_power,
    "epsilon-star-table": _do_eps_star,
    "calibrate": _do_calibrate,
}


def run_experiment(cfg: dict, threads: int = 1) -> int:
    """Validate, resolve and dispatch one configuration; returns an exit code."""
    errs, warns = validate_config(cfg)
    for w in warns:
        log.warning(w)
    if errs:
        for e in errs:
            log.error(e)
        return EXIT_ERROR
    cfg = resolve_config(cfg)
    out = Output(cfg)
    try:
        return HANDLERS[cfg["kind"]](cfg, out, threads)
    except InfeasibleError as exc:
        log.error("infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except (LevyTVError, ValueError, ArithmeticError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR


# --- argparse -----------------------------------------------------------------------

def _threads(arg) -> int:
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get("LEVYTV_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer LEVYTV_THREADS=%r", env)
    return 1


def _common(p):
    p.add_argument("--config", help="JSON experiment configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.add_argument("--threads", type=int, help="worker threads (default: $LEVYTV_THREADS or 1)")
    p.add_argument("--constants", "--constants-file", dest="constants",
                   help="calibration table for the jump tests")
    p.add_argument("--delta", type=float)
    p.add_argument("--alpha", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="levytv", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"levytv {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMAND_KIND:
        p = sub.add_parser(name, help=f"run a {SUBCOMMAND_KIND[name]} experiment")
        _common(p)
        if name == "test":
            p.add_argument("data", nargs="?", help="increments file (CSV with header 'value' or .bin)")
    p = sub.add_parser("run", help="run the kind named inside --config")
    _common(p)
    p = sub.add_parser("validate", help="check a configuration against the schema")
    p.add_argument("path")
    return ap


def _load_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="levytv: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "validate":
            cfg = _load_json(args.path)
            errs, warns = validate_config(cfg)
            for w in warns:
                print(f"warning: {w}", file=sys.stderr)
            for e in errs:
                print(f"error: {e}", file=sys.stderr)
            if not errs:
                print("ok")
            return EXIT_ERROR if errs else EXIT_OK
        cfg = _load_json(args.config) if args.config else {}
    except (OSError, json.JSONDecodeError) as exc:
        log.error("cannot read configuration: %s", exc)
        return EXIT_ERROR
    if args.command != "run":
        cfg["kind"] = SUBCOMMAND_KIND[args.command]
    elif "kind" not in cfg:
        log.error("'run' needs a config with a 'kind'")
        return EXIT_ERROR
    for flag, key in (("seed", "seed"), ("out", "output"), ("constants", "constants_file"),
                      ("delta", "delta"), ("alpha", "alpha")):
        v = getattr(args, flag, None)
        if v is not None:
            cfg[key] = v
    if getattr(args, "data", None):
        cfg["data"] = args.data
    return run_experiment(cfg, _threads(args.threads))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
