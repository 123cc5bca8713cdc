"""Command-line front end: ``lobq shape|validate|bp-compare|simulate``.

Experiments are described by JSON files carrying ``schema_version``; bundled
recipes are addressed as ``recipe:NAME``. Exit codes:

====  ===============================================
0     success (``validate``: every check passed)
1     ``validate`` ran but at least one check failed
2     configuration error
3     numerical error
4     calibration error (``bp-compare``)
====  ===============================================

Data goes to ``--out`` or stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import bulk_book, continuous_book, discrete_book
from .bp_reference import BPParams, bp_curve, calibrate_scale, find_peak, proxy_D
from .bulk_book import BulkParams, SizeDistribution
from .continuous_book import ContinuousParams, IntensityProfile
from .discrete_book import DiscreteParams
from .errors import CalibrationError, LobqError
from .mc_simulator import SimConfig, horizon_for_events, replicate, simulate
from .oracles import queue_oracle

SCHEMA_VERSION = 1
MODELS = ("discrete", "continuous", "bulk_geometric", "bulk_table")
OUTPUTS = ("shape", "cum_shape", "cancel_prob", "price_dist", "bp_compare")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CALIBRATION = 0, 1, 2, 3, 4
DETERMINISTIC_TOL = 1e-8
MC_Z = 3.0
ORACLE_MAX_STATES = 3000


class ConfigError(Exception):
    pass


def fmt(x) -> str:
    return format(float(x), ".12g")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def load_config(spec: str) -> dict:
    try:
        if spec.startswith("recipe:"):
            name = spec[len("recipe:"):]
            text = (resources.files("lobq") / "recipes" / f"{name}.json").read_text()
        else:
            text = Path(spec).read_text()
        cfg = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {spec!r}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    if cfg.get("model") not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}")
    bad = set(cfg.get("outputs", [])) - set(OUTPUTS)
    if bad:
        raise ConfigError(f"unknown outputs {sorted(bad)}")
    return cfg


def list_recipes() -> list[str]:
    folder = resources.files("lobq") / "recipes"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def _set_path(d: dict, dotted: str, value):
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
    d[keys[-1]] = value


def expand_sweep(cfg: dict) -> list[tuple[str, dict]]:
    """``[(label, resolved config)]``; one entry without a ``sweep`` block."""
    sweep = cfg.get("sweep")
    if not sweep:
        return [("", cfg)]
    try:
        param, values = sweep["param"], list(sweep["values"])
    except (KeyError, TypeError) as exc:
        raise ConfigError("sweep needs 'param' and 'values'") from exc
    if not values:
        raise ConfigError("sweep has no values")
    out = []
    for v in values:
        c = copy.deepcopy(cfg)
        del c["sweep"]
        _set_path(c["params"], param, v)
        out.append((f"{param.split('.')[-1]}={v}", c))
    return out


def _profile(block: dict, scale: float = 1.0) -> IntensityProfile:
    kw = {k: block[k] for k in ("beta", "gamma", "support_cap") if k in block}
    return IntensityProfile(block["kind"], alpha=float(block["alpha"]) * scale, **kw)


def _size(block) -> SizeDistribution:
    if isinstance(block, list):
        return SizeDistribution.table(block)
    kind = block["kind"]
    if kind == "geometric":
        return SizeDistribution.geometric(float(block["q"]))
    if kind == "table":
        return SizeDistribution.table(block["probs"])
    return SizeDistribution.unit()


@dataclass
class Model:
    kind: str
    discrete: DiscreteParams | None = None
    bulk: BulkParams | None = None
    continuous: ContinuousParams | None = None
    q: float = 1.0


def build_model(cfg: dict) -> Model:
    p = cfg.get("params")
    if not isinstance(p, dict):
        raise ConfigError("missing 'params' block")
    kind = cfg["model"]
    try:
        if kind in ("discrete", "bulk_table"):
            dp = DiscreteParams(tuple(float(x) for x in p["lam"]), float(p["mu"]), float(p["theta"]),
                                float(p.get("tick_size", 1.0)))
            if kind == "discrete":
                return Model(kind, discrete=dp, bulk=BulkParams(dp, SizeDistribution.unit()))
            sizes = p["sizes"]
            if isinstance(sizes, list) and sizes and isinstance(sizes[0], (list, dict)):
                law = tuple(_size(s) for s in sizes)
            else:
                law = _size(sizes)
            return Model(kind, discrete=dp, bulk=BulkParams(dp, law))
        q = float(p.get("q", 1.0)) if kind == "bulk_geometric" else 1.0
        if kind == "bulk_geometric" and not 0 < q <= 1:
            raise ConfigError("q must lie in (0, 1]")
        scale = 1.0 / q if p.get("hold_volume_fixed", False) else 1.0
        cp = ContinuousParams(_profile(p["profile"], scale), float(p["mu"]), float(p["theta"]))
        return Model(kind, continuous=cp, q=q)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad params block: missing or malformed {exc}") from exc
    except ValueError as exc:  # includes DomainError
        raise ConfigError(f"invalid parameters: {exc}") from exc


def price_grid(cfg: dict) -> np.ndarray:
    g = cfg.get("grid")
    if not isinstance(g, dict):
        raise ConfigError("missing 'grid' block")
    try:
        n = int(g["n_points"])
        lo, hi = float(g["p_min"]), float(g["p_max"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("grid needs p_min, p_max, n_points") from exc
    if n < 1 or not hi > lo or lo < 0:
        raise ConfigError("grid must be non-empty with 0 <= p_min < p_max")
    return np.linspace(lo, hi, n)


def tick_range(cfg: dict, K: int) -> range:
    g = cfg.get("grid") or {}
    try:
        lo, hi = int(g.get("k_min", 1)), int(g.get("k_max", K))
    except (TypeError, ValueError) as exc:
        raise ConfigError("tick grid needs integer k_min, k_max") from exc
    if not 1 <= lo <= hi <= K:
        raise ConfigError(f"tick range must satisfy 1 <= k_min <= k_max <= {K}")
    return range(lo, hi + 1)


def sim_params(cfg: dict, model: Model) -> BulkParams:
    """Tick-grid model that the simulator runs (continuous models are discretized)."""
    if model.bulk is not None:
        return model.bulk
    sim = cfg.get("sim") or {}
    try:
        tick, K = float(sim["tick"]), int(sim["K"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("continuous models need sim.tick and sim.K to be simulated") from exc
    try:
        dp = continuous_book.discretize(model.continuous, tick, K)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return BulkParams(dp, SizeDistribution.geometric(model.q) if model.q < 1 else SizeDistribution.unit())


def sim_config(cfg: dict, bp: BulkParams, seed: int | None) -> tuple[SimConfig, int]:
    sim = cfg.get("sim")
    if not isinstance(sim, dict):
        raise ConfigError("missing 'sim' block")
    try:
        if "horizon" in sim:
            horizon = float(sim["horizon"])
        else:
            horizon = horizon_for_events(bp, float(sim["n_events"]))
        sc = SimConfig(
            bp, horizon,
            None if sim.get("burn_in") is None else float(sim["burn_in"]),
            int(sim.get("seed", 0) if seed is None else seed),
            int(sim.get("n_batches", 20)),
        )
        return sc, int(sim.get("n_reps", 1))
    except KeyError as exc:
        raise ConfigError("sim needs 'horizon' or 'n_events'") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid sim block: {exc}") from exc


# ---------------------------------------------------------------------------
# computations
# ---------------------------------------------------------------------------


def shape_table(cfg: dict, model: Model) -> tuple[list[str], list[list[float]]]:
    if model.continuous is None:
        bp = model.bulk
        ks = tick_range(cfg, bp.base.K)
        B = [0.0] + [bulk_book.cum_shape(bp, k) for k in range(1, ks[-1] + 1)]
        rows = []
        for k in ks:
            lam = bp.base.lam[k - 1]
            s = B[k] - B[k - 1]
            c = bp.base.theta * s / (lam * bp.size_at(k).mean) if lam > 0 else math.nan
            if model.kind == "discrete":
                s = discrete_book.shape(model.discrete, k)
                c = discrete_book.cancel_fraction(model.discrete, k) if lam > 0 else math.nan
            rows.append([k, lam, s, B[k], c])
        return ["k", "lambda", "shape", "cum_shape", "cancel_fraction"], rows
    cp, q = model.continuous, model.q
    grid = price_grid(cfg)
    if q < 1:
        h = np.atleast_1d(continuous_book.normalized_intensity(cp, grid))
        b = np.array([bulk_book.shape_continuous_geometric(cp, q, float(p)) for p in grid])
        B = np.array([bulk_book.cum_shape_continuous_geometric(cp, q, float(p)) for p in grid])
        # share-level cancellation probability: shares arrive at rate h / q
        with np.errstate(invalid="ignore", divide="ignore"):
            C = np.where(h > 0, q * b / h, np.nan)
    else:
        curve = continuous_book.shape_curve(cp, grid)
        h, b, B, C = curve.h, curve.b, curve.B, curve.C
    return ["p", "h", "b", "B", "C"], [list(r) for r in zip(grid, h, b, B, C)]


def price_dist_table(model: Model) -> tuple[list[str], list[list[float]]]:
    if model.discrete is None:
        raise ConfigError("price_dist output needs a tick-grid model")
    bp = model.bulk
    empty = [1.0] + [bulk_book.empty_prob(bp, k) if model.kind != "discrete"
                     else discrete_book.empty_prob(model.discrete, k) for k in range(1, bp.base.K + 1)]
    rows = [[k, empty[k - 1] - empty[k]] for k in range(1, bp.base.K + 1)]
    rows.append([0, empty[-1]])
    return ["k", "prob"], rows


def bp_table(cfg: dict, model: Model) -> tuple[list[str], list[list[float]], dict]:
    if model.kind != "continuous":
        raise ConfigError("bp-compare needs a continuous model")
    cp = model.continuous
    grid = price_grid(cfg)
    opts = cfg.get("bp") or {}
    if "D" in opts:
        D = float(opts["D"])
    else:
        D = proxy_D(cp, float(opts.get("tick", 1e-2)), opts.get("K"), opts.get("proxy", "std"))
    try:
        unit = BPParams(cp.profile, D, cp.theta, sigma_form=opts.get("sigma_form", "stated"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    target = continuous_book.shape_curve(cp, grid)
    scale = calibrate_scale(unit, target, lambda p: continuous_book.shape_b(cp, p))
    bpp = BPParams(cp.profile, D, cp.theta, scale, unit.sigma_form)
    ref = bp_curve(bpp, grid)
    pm, _ = find_peak(grid, target.b, lambda p: continuous_book.shape_b(cp, p))
    pb, _ = find_peak(grid, ref)
    meta = {"D": D, "sigma": bpp.sigma, "scale": scale, "peak_model": pm, "peak_bp": pb}
    return ["p", "b_model", "b_bp"], [list(r) for r in zip(grid, target.b, ref)], meta


def sim_table(stats) -> tuple[list[str], list[list[float]]]:
    fc = stats.flow_counts
    rows = []
    ph, phse = stats.price_hist, stats.price_hist_se
    for i in range(stats.K):
        rows.append([
            i + 1, stats.avg_depth[i], stats.avg_depth_se[i], stats.avg_cum_depth[i],
            stats.avg_cum_depth_se[i], ph[i], phse[i],
            fc["submitted"][i], fc["cancelled"][i], fc["executed"][i], stats.standing_end[i],
        ])
    rows.append([0, 0, 0, 0, 0, ph[-1], phse[-1], 0, 0, 0, 0])
    header = ["k", "avg_depth", "avg_depth_se", "avg_cum_depth", "avg_cum_depth_se",
              "price_prob", "price_prob_se", "submitted", "cancelled", "executed", "standing"]
    return header, rows


def run_sim(cfg: dict, model: Model, seed: int | None):
    bp = sim_params(cfg, model)
    sc, n_reps = sim_config(cfg, bp, seed)
    return bp, (replicate(sc, n_reps) if n_reps > 1 else simulate(sc))


def validation_rows(cfg: dict, model: Model, seed: int | None) -> list[list]:
    """Rows ``[check, statistic, analytic, reference, metric, threshold, result]``."""
    bp = sim_params(cfg, model)
    base = bp.base
    theta, mu = base.theta, base.mu
    rows = []

    def add(check, stat, analytic, ref, metric, thr):
        rows.append([check, stat, analytic, ref, metric, thr, "pass" if metric <= thr else "fail"])

    def rel(a, b):
        return abs(a - b) / max(1.0, abs(b))

    cum = [0.0]
    empty = [1.0]
    for k in range(1, base.K + 1):
        if base.lam[k - 1] == 0 and cum[-1] == 0:
            cum.append(0.0)
            empty.append(1.0)
            continue
        cum.append(bulk_book.cum_shape(bp, k))
        empty.append(bulk_book.empty_prob(bp, k))
        arr = math.fsum(base.lam[:k]) * bp.mean_size(k)
        served = theta * cum[k] + mu * (1.0 - empty[k])
        add("conservation", f"k={k}", arr, served, abs(arr - served) / max(1.0, arr), DETERMINISTIC_TOL)
        lam_k = math.fsum(base.lam[:k])
        pmf = None
        if not bp.size_at(k).is_unit or not isinstance(bp.sizes, SizeDistribution):
            mix = bp._mixture(k)
            width = max(len(s.pmf(1e-15)) for _, s in mix)
            pmf = np.zeros(width)
            for w, s in mix:
                sp = s.pmf(1e-15)
                pmf[: len(sp)] += w * sp
        est = 4 * lam_k * bp.mean_size(k) / theta + 40
        if est > ORACLE_MAX_STATES:
            rows.append(["oracle", f"k={k}", cum[k], math.nan, math.nan, DETERMINISTIC_TOL, "skip"])
            continue
        pi = queue_oracle(lam_k, mu, theta, pmf)
        add("oracle_cum_shape", f"k={k}", cum[k], float(np.arange(len(pi)) @ pi),
            rel(cum[k], float(np.arange(len(pi)) @ pi)), DETERMINISTIC_TOL)
        add("oracle_empty_prob", f"k={k}", empty[k], float(pi[0]), abs(empty[k] - pi[0]), DETERMINISTIC_TOL)

    if cfg.get("sim"):
        _, stats = run_sim(cfg, model, seed)
        for k in range(1, base.K + 1):
            se = stats.avg_cum_depth_se[k - 1]
            z = abs(stats.avg_cum_depth[k - 1] - cum[k]) / se if se > 0 else math.inf
            add("mc_cum_depth", f"k={k}", cum[k], stats.avg_cum_depth[k - 1], z, MC_Z)
            prob = empty[k - 1] - empty[k]
            se = stats.price_hist_se[k - 1]
            if se > 0:
                add("mc_price_prob", f"k={k}", prob, stats.price_hist[k - 1],
                    abs(stats.price_hist[k - 1] - prob) / se, MC_Z)
            if base.lam[k - 1] > 0:
                c_an = theta * (cum[k] - cum[k - 1]) / (base.lam[k - 1] * bp.size_at(k).mean)
                c_mc, c_se = stats.cancel_ratio(k)
                if c_se > 0:
                    add("mc_cancel_ratio", f"k={k}", c_an, c_mc, abs(c_mc - c_an) / c_se, MC_Z)
        se = stats.price_hist_se[-1]
        add("mc_empty_fraction", "book", empty[-1], stats.empty_fraction,
            abs(stats.empty_fraction - empty[-1]) / se if se > 0 else math.inf, MC_Z)
        ft = stats.flow_totals
        gap = int(np.abs(ft[:, 0] - ft[:, 1] - ft[:, 2] - stats.standing_end).max())
        add("mc_share_accounting", "all ticks", 0, gap, gap, 0)
    return rows


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _cell(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return fmt(x)


def render(header, rows, fmt_kind: str, meta: dict) -> str:
    if fmt_kind == "json":
        data = [dict(zip(header, (v if isinstance(v, str) else
                                  (int(v) if isinstance(v, (int, np.integer)) else float(fmt(v)))
                                  for v in r))) for r in rows]
        return json.dumps({"meta": meta, "columns": header, "rows": data}, indent=2,
                          allow_nan=True) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Parse a numeric CSV emitted by this tool."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader])
    return header, data


class Emitter:
    def __init__(self, args):
        self.out = args.out
        self.format = args.format
        self.quiet = args.quiet

    def note(self, msg: str):
        if not self.quiet:
            print(msg, file=sys.stderr)

    def path_for(self, label: str, suffix: str = "") -> Path | None:
        if self.out is None:
            return None
        p = Path(self.out)
        stem = p.stem + (f"_{label}" if label else "") + suffix
        return p.with_name(stem + p.suffix)

    def emit(self, header, rows, meta, label: str = "", suffix: str = ""):
        text = render(header, rows, self.format, meta)
        path = self.path_for(label, suffix)
        if path is None:
            sys.stdout.write(text)
            if self.format == "csv":
                self.note(json.dumps(meta, sort_keys=True, default=str))
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        if self.format == "csv":
            path.with_name(path.name + ".meta.json").write_text(
                json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
        self.note(f"wrote {path}")


def _meta(cfg: dict, command: str, **extra) -> dict:
    return {"command": command, "version": __version__, "config": cfg, **extra}


def cmd_shape(args, cfg, em: Emitter) -> int:
    for label, c in expand_sweep(cfg):
        model = build_model(c)
        header, rows = shape_table(c, model)
        em.emit(header, rows, _meta(c, "shape"), label)
        if "price_dist" in c.get("outputs", []):
            h2, r2 = price_dist_table(model)
            em.emit(h2, r2, _meta(c, "shape", table="price_dist"), label, "_price_dist")
    return EXIT_OK


def cmd_bp(args, cfg, em: Emitter) -> int:
    for label, c in expand_sweep(cfg):
        header, rows, extra = bp_table(c, build_model(c))
        em.emit(header, rows, _meta(c, "bp-compare", **extra), label)
        em.note(f"D={extra['D']:.6g} sigma={extra['sigma']:.6g} peaks model={extra['peak_model']:.6g} "
                f"bp={extra['peak_bp']:.6g}")
    return EXIT_OK


def cmd_simulate(args, cfg, em: Emitter) -> int:
    for label, c in expand_sweep(cfg):
        _, stats = run_sim(c, build_model(c), args.seed)
        header, rows = sim_table(stats)
        meta = _meta(c, "simulate", n_events=stats.n_events, n_reps=stats.n_reps,
                     empty_fraction=stats.empty_fraction, se_mode=stats.se_mode)
        em.emit(header, rows, meta, label)
    return EXIT_OK


def cmd_validate(args, cfg, em: Emitter) -> int:
    status = EXIT_OK
    header = ["check", "statistic", "analytic", "reference", "metric", "threshold", "result"]
    for label, c in expand_sweep(cfg):
        rows = validation_rows(c, build_model(c), args.seed)
        n_fail = sum(r[-1] == "fail" for r in rows)
        em.emit(header, rows, _meta(c, "validate", failures=n_fail), label)
        em.note(f"{label or 'validate'}: {len(rows)} checks, {n_fail} failed")
        if n_fail:
            status = EXIT_FAIL
    return status


COMMANDS = {"shape": cmd_shape, "validate": cmd_validate, "bp-compare": cmd_bp, "simulate": cmd_simulate}


_HELP = {
    "shape": "emit analytic shape curves",
    "validate": "compare analytic values with the linear-solve oracle and a simulation",
    "bp-compare": "overlay the model shape with the diffusive reference",
    "simulate": "run the event simulator and emit per-tick statistics",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lobq", description="Queueing model of the limit order book.")
    ap.add_argument("--version", action="version", version=f"lobq {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=_HELP[name])
        sp.add_argument("--config", required=True, help="JSON file or recipe:NAME")
        sp.add_argument("--out", help="output path (sweeps append _param=value)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--seed", type=int, help="override sim.seed")
        sp.add_argument("--quiet", action="store_true", help="suppress diagnostics on stderr")
    sub.add_parser("recipes", help="list bundled recipes")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "recipes":
        print("\n".join(list_recipes()))
        return EXIT_OK
    em = Emitter(args)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = load_config(args.config)
        if args.out is None and cfg.get("sweep"):
            em.note("note: sweep output goes to stdout one table after another")
        return COMMANDS[args.command](args, cfg, em)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationError as exc:
        print(f"calibration error: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (LobqError, ArithmeticError, RuntimeError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
