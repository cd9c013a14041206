"""Command-line scenario runner.

``lfslab run`` executes one experiment on one model and writes
``report.txt``, ``report.json`` and CSV data into the output directory.
Configuration comes from a flat ``key = value`` file with dotted keys, then
from flags (``--model``, ``--N`` ...), then from ``--set key=value`` and
bare ``--dotted.key value`` overrides, later sources winning.

Exit status: 0 when every check passes, 1 on a failed check or failed
precondition, 2 on a configuration error, 3 on a numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigurationError, DomainError, LfslabError, ModelValidityError, NumericalError
from .report import ScenarioReport

EXPERIMENTS = ("audit", "berwald", "raychaudhuri", "laplacian-comparison", "busemann", "splitting", "legendre-roundtrip")

DEFAULTS = {
    "model.name": "minkowski",
    "model.dim": 3,
    "weight.name": None,
    "experiment": "audit",
    "N": math.inf,
    "eps": 0.0,
    "seed": 0,
    "out": "lfslab-out",
    "samples": None,
    "tol.ode": 1e-11,
    "tol.check": None,
    "grid.t_min": 0.1,
    "grid.t_max": 5.0,
    "grid.count": 50,
    "busemann.t_grid": "100,200,400,800",
    "busemann.support_points": 100,
    "busemann.support_t": 1.0,
    "comparison.equality": False,
    "split.samples": 3,
}
_OPEN_PREFIXES = ("model.", "weight.")


# -- configuration -------------------------------------------------------

def parse_value(text):
    """Booleans, ints, floats (including inf), else the stripped string."""
    s = str(text).strip()
    low = s.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", ""):
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_config(path):
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    cfg = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            cfg[key.strip()] = parse_value(value)
    return cfg


def validate(cfg):
    for key in cfg:
        if key not in DEFAULTS and not key.startswith(_OPEN_PREFIXES):
            raise ConfigurationError(f"unknown configuration key {key!r}")
    if cfg["experiment"] not in EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment {cfg['experiment']!r}; known: {', '.join(EXPERIMENTS)}")
    for key, value in cfg.items():
        if key.startswith("tol.") and value is not None and not (isinstance(value, (int, float)) and value > 0):
            raise ConfigurationError(f"tolerance {key} must be positive, got {value!r}")
    return cfg


def build_config(args, extra):
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(read_config(args.config))
    flags = {"model.name": args.model, "model.dim": args.dim, "experiment": args.experiment, "N": args.N,
             "eps": args.eps, "seed": args.seed, "out": args.out}
    cfg.update({k: parse_value(v) for k, v in flags.items() if v is not None})
    for item in args.set or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        cfg[key.strip()] = parse_value(value)
    it = iter(extra)
    for token in it:
        if not token.startswith("--"):
            raise ConfigurationError(f"unexpected argument {token!r}")
        key = token[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            value = next(it, None)
            if value is None:
                raise ConfigurationError(f"flag {token} needs a value")
        cfg[key] = parse_value(value)
    return validate(cfg)


def make_scenario_model(cfg):
    from .structure import apply_weight, make_model

    params = {k[len("model."):]: v for k, v in cfg.items() if k.startswith("model.") and k not in ("model.name", "model.dim")}
    m = make_model(str(cfg["model.name"]), dim=int(cfg["model.dim"]), **params)
    if cfg.get("weight.name"):
        wparams = {k[len("weight."):]: v for k, v in cfg.items() if k.startswith("weight.") and k != "weight.name"}
        m = apply_weight(m, str(cfg["weight.name"]), **wparams)
    return m


# -- output --------------------------------------------------------------

def atomic_write(path, text):
    """Write text to path through a temporary file and a rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def worker_count():
    try:
        return max(1, int(os.environ.get("LFSLAB_THREADS", "1")))
    except ValueError:
        raise ConfigurationError("LFSLAB_THREADS must be an integer") from None


def fan_out(fn, items):
    """Map fn over items, preserving order, with up to LFSLAB_THREADS workers."""
    items = list(items)
    workers = worker_count()
    if workers == 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _grid(cfg):
    return np.linspace(float(cfg["grid.t_min"]), float(cfg["grid.t_max"]), int(cfg["grid.count"]))


def _t_list(value):
    if isinstance(value, (int, float)):
        return [float(value)]
    return [float(s) for s in str(value).split(",") if s.strip()]


# -- experiments ---------------------------------------------------------

def exp_audit(m, cfg):
    from .structure import audit_model

    budget = int(cfg["samples"] or 10000)
    return audit_model(m, sample_budget=budget, seed=int(cfg["seed"])), {}


def exp_berwald(m, cfg):
    from .connection import berwald_audit

    return berwald_audit(m, seed=int(cfg["seed"])), {}


def exp_raychaudhuri(m, cfg):
    from .congruence import evolve_lagrange, raychaudhuri_residual, unit_timelike
    from .curvature import epsilon_admissible

    N, eps = float(cfg["N"]), float(cfg["eps"])
    epsilon_admissible(N, eps, m.n).require()
    x = np.zeros(m.dim)
    v = unit_timelike(m, x, m.X(x))
    t = _grid(cfg)
    state = evolve_lagrange(m, x, v, (0.0, 1.04 * t.max()), tol=float(cfg["tol.ode"]))
    res = raychaudhuri_residual(m, state, N, eps, t)
    tol = float(cfg["tol.check"] or 1e-6)
    rep = ScenarioReport(name=f"raychaudhuri:{m.name}", config={"model": m.name, "N": N, "epsilon": eps, "tol.ode": cfg["tol.ode"]})
    if res.skipped:
        rep.add("raychaudhuri_limit", res.max_residual, tol, note=res.note)
    else:
        rep.add("raychaudhuri", res.max_residual, tol, note="max over the grid of |sum of terms| / largest term")
    rep.add("frame_defect", state.frame_defect(t), 1e-9, kind="measurement")
    return rep.finish(), {"raychaudhuri.csv": (["t", "theta_eps", "trace_sigma2", "residual"], res.csv_rows())}


def exp_laplacian(m, cfg):
    from .busemann import verify_laplacian_comparison

    N, eps = float(cfg["N"]), float(cfg["eps"])
    t = _grid(cfg)
    z = np.zeros(m.dim)
    v = m.X(z)
    equality = bool(cfg["comparison.equality"])
    rep = ScenarioReport(name=f"laplacian-comparison:{m.name}", config={"model": m.name, "N": N, "epsilon": eps})
    parts = [(name, verify_laplacian_comparison(m, z, v, N, eps, t, reverse=rev, expect_equality=equality))
             for name, rev in (("forward", False), ("reverse", True))]
    csvs = {}
    for name, part in parts:
        for c in part.checks:
            rep.add(f"{name}.{c.name}", c.residual, c.tolerance, note=c.note, kind=c.kind, comparison=c.comparison)
        rep.notes.extend(f"{name}: {n}" for n in part.notes)
        rep.gated = rep.gated or part.gated
        if "rows" in part.data:
            csvs[f"comparison_{name}.csv"] = (["t", "lhs", "rhs", "margin"], part.data["rows"])
    return rep.finish(), csvs


def exp_busemann(m, cfg):
    from .busemann import (
        BusemannEvaluation, asymptote, busemann_truncated, make_line, reverse_busemann,
        reverse_triangle_margin, support_function, verify_support,
    )

    rng = np.random.default_rng(int(cfg["seed"]))
    grid = _t_list(cfg["busemann.t_grid"])
    count = int(cfg["samples"] or 8)
    origin = np.zeros(m.dim)
    line = make_line(m, origin, m.X(origin), 2.0 * max(grid))
    pts = np.column_stack([rng.uniform(-0.3, 0.3, count), rng.uniform(-0.2, 0.2, (count, m.dim - 1))])
    fwd = fan_out(lambda x: busemann_truncated(m, line, x, grid), pts)
    bwd = fan_out(lambda x: reverse_busemann(m, line, x, grid), pts)
    rep = ScenarioReport(name=f"busemann:{m.name}", config={"model": m.name, "t_grid": grid, "samples": count, "seed": cfg["seed"]})
    rep.add("line_straightness", line.certificate, 1e-7, kind="precondition")
    mono = max(ev.monotonicity_violation for ev in fwd + bwd)
    rep.add("monotonicity", mono, 1e-9 * max(grid), note="largest increase of b_t in t")
    sums = np.array([a.limit + b.limit for a, b in zip(fwd, bwd)])
    rep.add("b_plus_bbar_lower", float(np.min(sums)), -2e-3, comparison=">=")
    if m.affine_geodesics:
        rep.add("b_plus_bbar_equality", float(np.max(np.abs(sums))), 2e-3)
        rep.add("closed_form", max(abs(ev.limit - x[0]) for ev, x in zip(fwd, pts)), 2e-3, note="b = x^0 on the axis line")
    rep.add("extrapolation_uncertainty", max(ev.uncertainty for ev in fwd), 2e-3, kind="measurement")
    z = pts[0]
    zeta = asymptote(m, line, z, t_max=2.0)
    t_sup = float(cfg["busemann.support_t"])
    rho = support_function(m, line, zeta, t_sup, fwd[0].limit)
    nbhd = z + rng.uniform(-0.2, 0.2, (int(cfg["busemann.support_points"]), m.dim)) * np.array([0.5] + [1.0] * (m.dim - 1))
    sup = verify_support(m, rho, line, nbhd, grid)
    for c in sup.checks:
        rep.add(c.name, c.residual, c.tolerance, note=c.note, kind=c.kind, comparison=c.comparison)
    pairs = [(x, x + 0.3 * np.concatenate([[1.0], 0.3 * rng.uniform(-1, 1, m.dim - 1)])) for x in pts[:3]]
    margins = fan_out(lambda p: reverse_triangle_margin(m, line, p[0], p[1], grid), pairs)
    rep.add("reverse_triangle", float(min(margins)), -1e-6, comparison=">=", note="b(y) - b(x) - d(x, y) for x <= y")
    header = BusemannEvaluation.csv_header(m.dim) + ["reverse"]
    rows = [row + [float(ev.reverse)] for ev in fwd + bwd for row in ev.csv_rows()]
    return rep.finish(), {"busemann.csv": (header, rows)}


def exp_splitting(m, cfg):
    from .splitting import axis_bbar, splitting_certificate

    rep = splitting_certificate(
        m, N=float(cfg["N"]), seed=int(cfg["seed"]), sample_count=int(cfg["split.samples"]),
        exact_bbar=axis_bbar if m.affine_geodesics else None,
    )
    rows = np.column_stack([rep.data["samples"], rep.data["gradients"]])
    header = [f"x{a}" for a in range(m.dim)] + [f"V{a}" for a in range(m.dim)]
    return rep, {"splitting.csv": (header, rows)}


def exp_legendre(m, cfg):
    from .legendre import legendre_transform
    from .structure import fundamental_tensor, sample_points, sample_timelike

    rng = np.random.default_rng(int(cfg["seed"]))
    count = int(cfg["samples"] or 200)
    xs = sample_points(m, rng, count, radius=0.5 * m.convexity_radius)
    vs = sample_timelike(m, rng, xs)
    rep = ScenarioReport(name=f"legendre-roundtrip:{m.name}", config={"model": m.name, "samples": count, "seed": cfg["seed"]})
    rows = []
    worst_v = worst_w = 0.0
    for x, v in zip(xs, vs):
        omega = fundamental_tensor(m, x, v) @ v
        back = legendre_transform(m, x, omega)
        dv = float(np.max(np.abs(back - v)) / np.max(np.abs(v)))
        dw = float(np.max(np.abs(fundamental_tensor(m, x, back) @ back - omega)) / np.max(np.abs(omega)))
        worst_v, worst_w = max(worst_v, dv), max(worst_w, dw)
        rows.append(list(x) + list(v) + list(back) + [dw])
    tol = float(cfg["tol.check"] or 1e-9)
    rep.add("covector_roundtrip", worst_w, tol, note="max |g_v(v, .) - omega| / |omega| at v = transform(omega)")
    rep.add("vector_roundtrip", worst_v, tol)
    d = m.dim
    header = [f"x{a}" for a in range(d)] + [f"v{a}" for a in range(d)] + [f"w{a}" for a in range(d)] + ["residual"]
    return rep.finish(), {"legendre.csv": (header, rows)}


RUNNERS = {
    "audit": exp_audit,
    "berwald": exp_berwald,
    "raychaudhuri": exp_raychaudhuri,
    "laplacian-comparison": exp_laplacian,
    "busemann": exp_busemann,
    "splitting": exp_splitting,
    "legendre-roundtrip": exp_legendre,
}


def run_scenario(cfg):
    """Run the configured experiment and write its outputs; returns the report."""
    from .geodesic import write_csv

    m = make_scenario_model(cfg)
    rep, csvs = RUNNERS[cfg["experiment"]](m, cfg)
    rep.config.update({"experiment": cfg["experiment"], "model.dim": m.dim, "weight": m.weight_text})
    out = str(cfg["out"])
    os.makedirs(out, exist_ok=True)
    for name, (header, rows) in sorted(csvs.items()):
        write_csv(os.path.join(out, name), header, rows)
    atomic_write(os.path.join(out, "report.txt"), rep.to_text())
    atomic_write(os.path.join(out, "report.json"), rep.to_json() + "\n")
    return rep


# -- entry point ---------------------------------------------------------

def _parser():
    p = argparse.ArgumentParser(prog="lfslab", description="Verification scenarios on Lorentz-Finsler spacetimes.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("--config", help="key = value configuration file")
    r.add_argument("--model")
    r.add_argument("--dim")
    r.add_argument("--experiment")
    r.add_argument("--N")
    r.add_argument("--eps")
    r.add_argument("--seed")
    r.add_argument("--out")
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted configuration override")
    sub.add_parser("list", help="list built-in models")
    d = sub.add_parser("describe", help="describe a model")
    d.add_argument("model")
    d.add_argument("--dim", type=int, default=3)
    return p


def main(argv=None):
    from .structure import list_models, make_model

    args, extra = _parser().parse_known_args(argv)
    try:
        if args.command == "list":
            if extra:
                raise ConfigurationError(f"unexpected arguments {extra}")
            print("\n".join(list_models()))
            return 0
        if args.command == "describe":
            if extra:
                raise ConfigurationError(f"unexpected arguments {extra}")
            print(make_model(args.model, dim=args.dim).describe())
            return 0
        cfg = build_config(args, extra)
        rep = run_scenario(cfg)
    except (ConfigurationError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ModelValidityError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except LfslabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    sys.stdout.write(rep.to_text())
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
