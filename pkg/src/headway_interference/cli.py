"""Command-line front end: parameter grids in, CSV/JSON out, with a replayable manifest."""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import integrate

from . import __version__
from .closedform import (
    cov_approx,
    validity_flags,
    var_closed,
    var_exponential,
    var_order2,
    var_order2_m3,
)
from .lattice import LatticeParams, lattice_mean, lattice_variance, lattice_variance_approx
from .moments import MomentError, mean_interference, moment_set, ppp_cumulants
from .pcf import pcf
from .scenario import ParameterError, make_scenario
from .simulate import (
    SimConfig,
    SimModel,
    estimate_moments,
    lane_superposition_cdf,
    pcf_histogram,
)
from .specfun import QuadratureError, QuadratureSpec

EXIT_OK, EXIT_FAIL, EXIT_PARTIAL = 0, 1, 2

GRID_KEYS = ("eta", "r0", "c", "lam", "mu")
SIM_KEYS = ("runs", "seed", "half_length", "burn_in", "model", "chunk_size", "workers")
OPTION_KEYS = ("m", "third", "variant", "quadrature", "references", "quantity", "lanes",
               "bin_width", "d_max", "x_max", "d_over_c_max", "points")
COMMANDS = ("moments", "closedform", "lattice", "simulate", "pcf")
VARIANTS = ("closed", "order2", "order2_m3", "exponential", "cov")

DEFAULT_OPTIONS = {
    "moments": {"m": 2, "third": False},
    "closedform": {"variant": list(VARIANTS), "quadrature": [], "references": False},
    "lattice": {},
    "simulate": {"quantity": "moments", "lanes": [1, 2, 4, 8], "bin_width": 0.5,
                 "d_max": None, "x_max": None},
    "pcf": {"d_over_c_max": 6.0, "points": 601},
}
DEFAULT_SIM = {"runs": 10000, "seed": 1, "half_length": 20000.0, "burn_in": None,
               "model": "hardcore", "chunk_size": 250, "workers": 1}

ROW_ERRORS = (ParameterError, MomentError, QuadratureError, ArithmeticError, ValueError)


class CliError(Exception):
    """Hard failure: bad arguments, unreadable config, unknown recipe."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FAIL, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# value parsing and grid expansion
# ---------------------------------------------------------------------------

def _arange_inclusive(start: float, stop: float, step: float) -> list[float]:
    if not step > 0:
        raise CliError(f"range step must be > 0 (got {step})")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [float(start + i * step) for i in range(max(n, 0))]


def parse_values(text: str) -> list[float]:
    """``"1,2,3"`` or ``"start:stop:step"`` (inclusive) into a list of floats."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ":" in part:
                bits = [float(b) for b in part.split(":")]
                if len(bits) != 3:
                    raise CliError(f"range must be start:stop:step (got {part!r})")
                out.extend(_arange_inclusive(*bits))
            else:
                out.append(float(part))
        except ValueError as exc:
            raise CliError(f"not a number: {part!r}") from exc
    if not out:
        raise CliError(f"empty value list: {text!r}")
    return out


def expand_axis(v) -> list[float]:
    if isinstance(v, dict):
        return _arange_inclusive(float(v["start"]), float(v["stop"]), float(v["step"]))
    if isinstance(v, str):
        return parse_values(v)
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    return [float(v)]


def expand_series(series: list[dict]) -> list[dict]:
    points = []
    for s in series:
        keys = [k for k in GRID_KEYS if k in s]
        for combo in itertools.product(*(s[k] for k in keys)):
            points.append(dict(zip(keys, combo)))
    return points


# ---------------------------------------------------------------------------
# settings resolution: defaults < recipe < config file < flags
# ---------------------------------------------------------------------------

def load_presets() -> dict:
    text = resources.files(__package__).joinpath("presets.json").read_text(encoding="utf-8")
    return json.loads(text)


def _apply_overrides(settings: dict, over: dict) -> None:
    grid = {k: expand_axis(over[k]) for k in GRID_KEYS if k in over}
    if grid:
        if not settings["series"]:
            settings["series"] = [{}]
        for s in settings["series"]:
            for k, v in grid.items():
                s[k] = v
                if k == "lam":
                    s.pop("mu", None)
                elif k == "mu":
                    s.pop("lam", None)
    for k in SIM_KEYS:
        if k in over:
            settings["sim"][k] = over[k]
    for k in OPTION_KEYS:
        if k in over:
            settings["options"][k] = over[k]
    for k in ("quad_rel_tol", "format"):
        if k in over:
            settings[k] = over[k]


def resolve_settings(command: str, recipe: str | None, config: dict, flags: dict) -> dict:
    presets_version = None
    if recipe is not None:
        presets = load_presets()
        presets_version = presets["version"]
        if recipe not in presets["recipes"]:
            raise CliError(f"unknown figure recipe {recipe!r}; "
                           f"available: {', '.join(sorted(presets['recipes']))}")
        r = presets["recipes"][recipe]
        command = r["command"]
        series = [{k: expand_axis(v) for k, v in s.items()} for s in r["series"]]
        options = {**DEFAULT_OPTIONS[command], **r.get("options", {})}
        sim = {**DEFAULT_SIM, **r.get("sim", {})}
    else:
        series, options, sim = [], dict(DEFAULT_OPTIONS[command]), dict(DEFAULT_SIM)
    settings = {"command": command, "recipe": recipe, "presets_version": presets_version,
                "series": series, "options": options, "sim": sim,
                "quad_rel_tol": QuadratureSpec().rel_tol, "format": "csv"}
    _apply_overrides(settings, config)
    _apply_overrides(settings, flags)
    _normalize(settings)
    return settings


def _normalize(settings: dict) -> None:
    opts = settings["options"]
    if isinstance(opts.get("variant"), str):
        opts["variant"] = [v.strip() for v in opts["variant"].split(",") if v.strip()]
    for v in opts.get("variant", []):
        if v not in VARIANTS:
            raise CliError(f"unknown variant {v!r}; choose from {', '.join(VARIANTS)}")
    for key in ("quadrature", "lanes"):
        if isinstance(opts.get(key), str):
            opts[key] = [int(x) for x in parse_values(opts[key])]
        if key in opts:
            opts[key] = [int(x) for x in opts[key]]
    sim = settings["sim"]
    sim["runs"] = int(sim["runs"])
    sim["seed"] = int(sim["seed"])
    sim["chunk_size"] = int(sim["chunk_size"])
    sim["workers"] = int(sim["workers"])
    sim["half_length"] = float(sim["half_length"])
    if sim["burn_in"] is not None:
        sim["burn_in"] = float(sim["burn_in"])
    if sim["model"] not in {m.value for m in SimModel}:
        raise CliError(f"unknown model {sim['model']!r}")
    if settings["format"] not in ("csv", "json"):
        raise CliError(f"unknown format {settings['format']!r}")
    if not settings["series"]:
        raise CliError("no parameter grid given (use --lam/--mu, --c, --r0, --eta or --config)")
    needed = ("c", "r0", "eta")
    lattice_like = settings["command"] == "lattice" or (
        settings["command"] == "simulate" and sim["model"] == "lattice")
    for s in settings["series"]:
        missing = [k for k in needed if k not in s]
        if not lattice_like and not ("lam" in s or "mu" in s):
            missing.append("lam or mu")
        if missing:
            raise CliError(f"grid is missing {', '.join(missing)}")


# ---------------------------------------------------------------------------
# per-point evaluation
# ---------------------------------------------------------------------------

def _scenario(point: dict):
    rate = {"lam": point["lam"]} if "lam" in point else {"mu": point["mu"]}
    return make_scenario(**rate, c=point["c"], r0=point["r0"], eta=point["eta"])


def _inputs(p) -> dict:
    return {"lam": p.lam, "mu": p.mu, "c": p.c, "r0": p.r0, "eta": p.eta}


def _rows_moments(point, opts, q, sim) -> list[dict]:
    p = _scenario(point)
    ms = moment_set(p, m=int(opts["m"]), with_third=bool(opts["third"]), q=q)
    return [{**_inputs(p), "m": int(opts["m"]), "mean": ms.mean, "variance": ms.variance,
             "std": ms.std_dev, "cov": ms.coeff_variation, "skewness": ms.skewness,
             "method": ms.method, "flags": ms.flags}]


def _rows_closedform(point, opts, q, sim) -> list[dict]:
    p = _scenario(point)
    fns = {"closed": var_closed, "order2": var_order2, "order2_m3": var_order2_m3,
           "exponential": var_exponential}
    row = {**_inputs(p), "kappa2": ppp_cumulants(p, 2)}
    for v in opts["variant"]:
        row["cov_approx" if v == "cov" else f"var_{v}"] = (
            cov_approx(p) if v == "cov" else fns[v](p))
    for m in opts.get("quadrature", []):
        row[f"var_quad_m{m}"] = moment_set(p, m=m, q=q).variance
    if opts.get("references"):
        row["var_ppp"] = ppp_cumulants(p, 2)
        row["var_lattice"] = lattice_variance(LatticeParams(1.0 / p.lam, p.r0, p.eta), q)
    row["method"] = "ClosedForm"
    row["flags"] = validity_flags(p)
    return [row]


def _rows_lattice(point, opts, q, sim) -> list[dict]:
    lp = LatticeParams(point["c"], point["r0"], point["eta"])
    v = lattice_variance(lp, q)
    v0 = lattice_variance(lp, q, epsilon=0.0)
    va = lattice_variance_approx(lp)
    vh = 2.0 * lp.lam * lp.r0 ** (1.0 - 2.0 * lp.eta) / (2.0 * lp.eta - 1.0)
    return [{"c": lp.c, "r0": lp.r0, "eta": lp.eta, "q": lp.q, "epsilon": lp.epsilon,
             "mean": lattice_mean(lp), "var_integration": v, "var_eps0": v0,
             "var_approx": va, "var_ppp_half": vh,
             "std_integration": math.sqrt(max(v, 0.0)), "std_eps0": math.sqrt(max(v0, 0.0)),
             "std_approx": math.sqrt(va), "std_ppp_half": math.sqrt(vh),
             "method": "Quadrature"}]


def _rows_pcf(point, opts, q, sim) -> list[dict]:
    p = _scenario(point)
    if not p.c > 0:
        raise ParameterError("pcf table needs c > 0")
    rows = []
    for t in np.linspace(0.0, float(opts["d_over_c_max"]), int(opts["points"])):
        d = float(t) * p.c
        v = pcf(d, p)
        rows.append({**_inputs(p), "d": d, "d_over_c": float(t), "branch": v.branch_index,
                     "rho2": v.value, "rho2_over_lam_mu": v.value / (p.lam * p.mu),
                     "method": "Analytic"})
    return rows


def _sim_config(sim: dict, model: str) -> SimConfig:
    return SimConfig(runs=sim["runs"], seed=sim["seed"], half_length=sim["half_length"],
                     burn_in=sim["burn_in"], model=SimModel(model),
                     chunk_size=sim["chunk_size"], workers=sim["workers"])


def _rows_simulate(point, opts, q, sim) -> list[dict]:
    quantity = opts["quantity"]
    if sim["model"] == "lattice":
        if quantity != "moments":
            raise ParameterError("lattice model supports quantity=moments only")
        lp = LatticeParams(point["c"], point["r0"], point["eta"])
        est = estimate_moments(lp, _sim_config(sim, "lattice"))
        inputs = {"lam": lp.lam, "mu": math.inf, "c": lp.c, "r0": lp.r0, "eta": lp.eta}
        analytic = lattice_mean(lp)
    else:
        p = _scenario(point)
        inputs = _inputs(p)
        analytic = mean_interference(p)
    cfg = _sim_config(sim, sim["model"])
    if quantity == "moments":
        if sim["model"] != "lattice":
            est = estimate_moments(p, cfg)
        return [{"model": sim["model"], **inputs, "runs": cfg.runs, "seed": cfg.seed,
                 "mean": est.mean.value, "mean_se": est.mean.std_error,
                 "variance": est.variance.value, "variance_se": est.variance.std_error,
                 "std": est.std_dev.value, "std_se": est.std_dev.std_error,
                 "skewness": est.skewness.value, "skewness_se": est.skewness.std_error,
                 "cov": est.coeff_variation, "analytic_mean": analytic, "method": est.method}]
    if quantity == "lanes":
        rows = []
        for n in opts["lanes"]:
            x_max = opts.get("x_max") or 4.0 / p.lam
            res = lane_superposition_cdf(p, n, cfg, np.linspace(0.0, float(x_max), 201))
            for x, e, r in zip(res.x, res.empirical, res.reference):
                rows.append({**inputs, "n_lanes": n, "x": float(x), "cdf_empirical": float(e),
                             "cdf_reference": float(r), "sup_norm": res.sup_norm,
                             "deficit_at_c": res.deficit_at_c, "n_gaps": res.n_gaps,
                             "runs": cfg.runs, "seed": cfg.seed, "method": "MonteCarlo"})
        return rows
    if quantity == "pcf":
        h = pcf_histogram(p, cfg, float(opts["bin_width"]), opts.get("d_max"))
        rows = []
        for lo, hi, dens, se in zip(h.edges[:-1], h.edges[1:], h.density, h.std_error):
            exact = integrate.quad(lambda d: pcf(d, p).value, lo, hi, limit=200)[0] / (hi - lo)
            rows.append({**inputs, "d_lo": float(lo), "d_hi": float(hi), "density": float(dens),
                         "std_error": float(se), "analytic": exact, "runs": cfg.runs,
                         "seed": cfg.seed, "method": "MonteCarlo"})
        return rows
    raise ParameterError(f"unknown quantity {quantity!r}")


EVALUATORS = {"moments": _rows_moments, "closedform": _rows_closedform,
              "lattice": _rows_lattice, "pcf": _rows_pcf, "simulate": _rows_simulate}


def _evaluate(args):
    command, point, opts, rel_tol, sim = args
    q = QuadratureSpec(rel_tol=rel_tol)
    try:
        return EVALUATORS[command](point, opts, q, sim), None
    except ROW_ERRORS as exc:
        return [], f"{point}: {type(exc).__name__}: {exc}"


def execute(settings: dict) -> tuple[list[dict], list[str]]:
    """Evaluate every grid point in order; failing points are skipped and reported."""
    command = settings["command"]
    points = expand_series(settings["series"])
    tasks = [(command, pt, settings["options"], settings["quad_rel_tol"], settings["sim"])
             for pt in points]
    workers = settings["sim"]["workers"]
    if command == "simulate" or workers == 1 or len(tasks) == 1:
        results = [_evaluate(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_evaluate, tasks))
    rows, errors = [], []
    for r, err in results:
        rows.extend(r)
        if err:
            errors.append(err)
    return rows, errors


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (tuple, list)):
        return ";".join(str(x) for x in v)
    return str(v)


def _jsonable(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, tuple):
        return list(v)
    return v


def render(rows: list[dict], fmt: str, command: str) -> str:
    if fmt == "json":
        body = {"command": command, "rows": [{k: _jsonable(v) for k, v in r.items()} for r in rows]}
        return json.dumps(body, indent=2) + "\n"
    buf = io.StringIO()
    if rows:
        header = list(rows[0])
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r.get(k)) for k in header])
    return buf.getvalue()


def write_outputs(settings: dict, rows: list[dict], errors: list[str], out: str | None,
                  argv: list[str]) -> None:
    text = render(rows, settings["format"], settings["command"])
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")
    manifest = {
        "tool": "headway-interference",
        "version": __version__,
        "argv": argv,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "seed": settings["sim"]["seed"],
        "output": str(path),
        "settings": settings,
        "methods": [r.get("method") for r in rows],
        "skipped": errors,
    }
    Path(str(path) + ".manifest.json").write_text(json.dumps(manifest, indent=2) + "\n",
                                                  encoding="utf-8")


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, help="64-bit RNG seed (default 1)")
    g.add_argument("--runs", type=int, help="Monte Carlo runs per grid point")
    g.add_argument("--out", help="output file; a .manifest.json is written next to it")
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--config", help="JSON file with grid, simulation and option fields")
    g.add_argument("--quad-rel-tol", dest="quad_rel_tol", type=float,
                   help="relative tolerance of the outer quadrature (default 1e-9)")
    g.add_argument("--workers", type=int, help="worker processes (default 1)")
    return p


def _grid_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = p.add_argument_group("grid (comma lists or start:stop:step)")
    g.add_argument("--lam")
    g.add_argument("--mu")
    g.add_argument("--c")
    g.add_argument("--r0")
    g.add_argument("--eta")
    return p


def _option_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = p.add_argument_group("command options")
    g.add_argument("--m", type=int, help="pair-correlation truncation order (moments)")
    g.add_argument("--third", action="store_true", help="also compute the third moment")
    g.add_argument("--variant", help=f"closed-form variants, comma list of {','.join(VARIANTS)}")
    g.add_argument("--quadrature", help="add quadrature variance columns for these m")
    g.add_argument("--references", action="store_true", help="add PPP and lattice reference columns")
    g.add_argument("--model", choices=[m.value for m in SimModel])
    g.add_argument("--quantity", choices=("moments", "lanes", "pcf"))
    g.add_argument("--lanes", help="lane counts for quantity=lanes")
    g.add_argument("--bin-width", dest="bin_width", type=float)
    g.add_argument("--d-max", dest="d_max", type=float)
    g.add_argument("--x-max", dest="x_max", type=float)
    g.add_argument("--half-length", dest="half_length", type=float)
    g.add_argument("--burn-in", dest="burn_in", type=float)
    g.add_argument("--chunk-size", dest="chunk_size", type=int)
    g.add_argument("--d-over-c-max", dest="d_over_c_max", type=float)
    g.add_argument("--points", type=int)
    return p


def build_parser() -> argparse.ArgumentParser:
    common, grid, opts = _common_parser(), _grid_parser(), _option_parser()
    parser = _Parser(prog="headway-interference", parents=[common],
                     description="Interference moments of 1D hardcore vehicular deployments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("moments", parents=[common, grid, opts], help="quadrature moments")
    sub.add_parser("closedform", parents=[common, grid, opts], help="closed-form variance models")
    sub.add_parser("lattice", parents=[common, grid, opts], help="lattice variance")
    sub.add_parser("simulate", parents=[common, grid, opts], help="Monte Carlo estimates")
    sub.add_parser("pcf", parents=[common, grid, opts], help="analytic pair correlation table")
    fig = sub.add_parser("figure", parents=[common, grid, opts], help="run a named figure recipe")
    fig.add_argument("name")
    rep = sub.add_parser("replay", parents=[common], help="re-run a manifest")
    rep.add_argument("manifest")
    return parser


def _read_config(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise CliError(f"config {path} must hold a JSON object")
    return data


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    out = ns.pop("out", None)
    try:
        if command == "replay":
            manifest = json.loads(Path(ns["manifest"]).read_text(encoding="utf-8"))
            settings = manifest["settings"]
            out = out or manifest["output"]
            argv = manifest["argv"]
        else:
            config = _read_config(ns.pop("config")) if "config" in ns else {}
            recipe = ns.pop("name", None) if command == "figure" else None
            settings = resolve_settings(command if recipe is None else "moments",
                                        recipe, config, ns)
        rows, errors = execute(settings)
        write_outputs(settings, rows, errors, out, argv)
    except (CliError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ROW_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for e in errors:
        print(f"skipped {e}", file=sys.stderr)
    return EXIT_PARTIAL if errors else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
