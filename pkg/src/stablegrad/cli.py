"""Configuration-driven experiment runner emitting CSV artifacts.

Every subcommand reads a flat key=value config (see config.py), runs one
experiment and writes one CSV artifact whose numeric content is fully
determined by (config, seed). Each artifact starts with a comment line
recording version, seed and config hash, and a timestamp comment; only
the timestamp differs between identical runs.

Exit codes: 0 success, 2 unknown subcommand or invalid config (the
diagnostic names the field), 3 numeric divergence, 1 failed comparison.
"""

from __future__ import annotations

import argparse
import datetime
import os
import sys

import numpy as np

from . import __version__, models
from .bel import (
    EstimatorConfig,
    estimate_gradient_bel,
    estimate_gradient_bismut,
    estimate_gradient_brownian,
    fd_oracle,
    tail_exponent_check,
    weight_moment_scaling,
)
from .config import ConfigError, RunConfig
from .sde import (
    DiffusionMatrix,
    DivergenceError,
    solve_sde_euler,
    solve_variational,
)
from .spde import (
    convolution_moment_check,
    galerkin_convergence_check,
    make_heat_model,
    nl_arctan,
    nl_const,
    nl_zero,
    render_on_interval,
    solve_mild_galerkin,
    strong_feller_gap,
)
from .stable import (
    StableParams,
    empirical_laplace_check,
    sample_brownian_at_subordinated_times,
    sample_subordinator_path,
)
from .streams import RandomStream, sample_stream
from .timechange import CadlagIncreasingPath, invert, smooth

SUBCOMMANDS = (
    "sample-subordinator",
    "laplace-check",
    "simulate-sde",
    "estimate-gradient",
    "fd-oracle",
    "gradient-scaling",
    "tail-check",
    "spde-convolution",
    "spde-solve",
    "spde-gap",
    "galerkin-cauchy",
    "timechange-demo",
)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _write_csv(path, header, rows, seed, digest):
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# stablegrad={__version__} seed={seed} config={digest}\n")
        fh.write(f"# generated={stamp}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _read_csv(path):
    header = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
            else:
                rows.append(line.split(","))
    if header is None:
        raise ValueError(f"{path}: no header row")
    return header, rows


def _build_params(cfg: RunConfig) -> StableParams:
    alpha = cfg.get_float("alpha")
    if not 0.0 < alpha < 2.0:
        raise ConfigError("alpha", f"must be in (0, 2), got {alpha}")
    return StableParams(alpha)


def _build_drift(cfg: RunConfig, d: int):
    name = cfg.get_str("drift.name", "zero")
    if name == "zero":
        return models.drift_zero(d)
    if name == "ou":
        return models.drift_ou(cfg.get_float("drift.kappa"), d)
    if name == "linear":
        A = cfg.get_vector("drift.matrix")
        if A.size != d * d:
            raise ConfigError("drift.matrix", f"needs {d * d} entries, got {A.size}")
        return models.drift_linear(A.reshape(d, d))
    if name == "rotating":
        if d != 2:
            raise ConfigError("drift.name", "rotating drift requires dimension 2")
        return models.drift_rotating()
    if name == "arctan":
        return models.drift_arctan(cfg.get_float("drift.scale"), d)
    raise ConfigError("drift.name", f"unknown drift {name!r}")


def _build_sigma(cfg: RunConfig, d: int) -> DiffusionMatrix:
    kind = cfg.get_str("sigma.kind", "identity")
    if kind == "identity":
        return DiffusionMatrix.identity(d)
    if kind == "diag":
        diag = cfg.get_vector("sigma.diag")
        if diag.size != d:
            raise ConfigError("sigma.diag", f"needs {d} entries, got {diag.size}")
        return DiffusionMatrix.from_matrix(np.diag(diag))
    if kind == "full":
        vals = cfg.get_vector("sigma.values")
        if vals.size != d * d:
            raise ConfigError("sigma.values", f"needs {d * d} entries, got {vals.size}")
        return DiffusionMatrix.from_matrix(vals.reshape(d, d))
    raise ConfigError("sigma.kind", f"unknown sigma kind {kind!r}")


def _build_f(cfg: RunConfig, d: int):
    name = cfg.get_str("f.name", "linear")
    if name == "constant":
        return models.f_constant(cfg.get_float("f.c"))
    if name == "linear":
        a = cfg.get_vector("f.a")
        if a.size != d:
            raise ConfigError("f.a", f"needs {d} entries, got {a.size}")
        return models.f_linear(a)
    if name == "arctan":
        a = cfg.get_vector("f.a")
        if a.size != d:
            raise ConfigError("f.a", f"needs {d} entries, got {a.size}")
        return models.f_arctan(a)
    if name == "gaussian-bump":
        c = cfg.get_vector("f.center")
        if c.size != d:
            raise ConfigError("f.center", f"needs {d} entries, got {c.size}")
        return models.f_gaussian_bump(c, cfg.get_float("f.width"))
    if name == "step":
        a = cfg.get_vector("f.a")
        return models.f_step(a, cfg.get_float("f.threshold"))
    raise ConfigError("f.name", f"unknown test function {name!r}")


def _build_nonlinearity(cfg: RunConfig):
    name = cfg.get_str("spde.f", "zero")
    if name == "zero":
        return nl_zero()
    if name == "arctan":
        return nl_arctan(cfg.get_float("spde.f_scale"))
    if name == "const":
        return nl_const(cfg.get_vector("spde.f_const"))
    raise ConfigError("spde.f", f"unknown nonlinearity {name!r}")


def _vector(cfg: RunConfig, key: str, d: int) -> np.ndarray:
    v = cfg.get_vector(key)
    if v.size == 1:
        return np.full(d, v[0])
    if v.size != d:
        raise ConfigError(key, f"needs {d} entries, got {v.size}")
    return v


def _estimator_config(cfg: RunConfig, seed: int, driver: str) -> EstimatorConfig:
    d = cfg.get_int("dimension")
    params = _build_params(cfg) if driver == "stable" else None
    return EstimatorConfig(
        drift=_build_drift(cfg, d),
        diff=_build_sigma(cfg, d),
        x0=_vector(cfg, "x0", d),
        h=_vector(cfg, "h", d),
        t=cfg.get_float("t"),
        params=params,
        grid_size=cfg.get_int("grid_size", 2048),
        n_paths=cfg.get_int("n_paths"),
        seed=seed,
        driver=driver,
    )


def _run_sample_subordinator(cfg, seed, workers, out):
    params = _build_params(cfg)
    t = cfg.get_float("t", 1.0)
    m = cfg.get_int("grid_size", 256)
    n_paths = cfg.get_int("n_paths", 1)
    if n_paths < 1:
        raise ConfigError("n_paths", "must be at least 1")
    grid = np.linspace(0.0, t, m + 1)
    rows = []
    for p in range(n_paths):
        path = sample_subordinator_path(params, grid, RandomStream(seed, p))
        rows.extend((p, float(tt), float(v))
                    for tt, v in zip(path.grid, path.values))
    _write_csv(out, ["path", "time", "value"], rows, seed, cfg.digest())


def _run_laplace_check(cfg, seed, workers, out):
    params = _build_params(cfg)
    lambdas = cfg.get_vector("lambdas", np.array([0.25, 1.0, 4.0]))
    n = cfg.get_int("n_paths", 10 ** 6)
    rows = empirical_laplace_check(params, lambdas, n, RandomStream(seed, 0))
    out_rows = [(params.alpha, lam, emp, exact, z, n)
                for lam, emp, exact, z in rows]
    _write_csv(out, ["alpha", "lambda", "empirical", "exact", "z", "n"],
               out_rows, seed, cfg.digest())


def _run_simulate_sde(cfg, seed, workers, out):
    d = cfg.get_int("dimension")
    params = _build_params(cfg)
    drift = _build_drift(cfg, d)
    diff = _build_sigma(cfg, d)
    x0 = _vector(cfg, "x0", d)
    h = _vector(cfg, "h", d)
    t = cfg.get_float("t")
    m = cfg.get_int("grid_size", 2048)
    grid = np.linspace(0.0, t, m + 1)
    spath = sample_subordinator_path(params, grid, RandomStream(seed, 0))
    w = sample_brownian_at_subordinated_times(spath, d, RandomStream(seed, 1))
    flow = solve_sde_euler(drift, diff, x0, grid, w)
    flow = solve_variational(drift, flow, h, grid)
    rows = []
    for i, tt in enumerate(grid):
        rows.append((float(tt), *flow.X[i], *flow.DX[i]))
    header = ["t"] + [f"X_{k + 1}" for k in range(d)] + \
        [f"DX_{k + 1}" for k in range(d)]
    _write_csv(out, header, rows, seed, cfg.digest())


_ESTIMATORS = {
    "bel": ("stable", estimate_gradient_bel),
    "brownian": ("brownian", estimate_gradient_brownian),
    "bismut": ("brownian", estimate_gradient_bismut),
}


def _gradient_rows(cfg, est, seed):
    alpha = cfg.get_float("alpha", 2.0)
    return [(est.estimator_tag, 0, est.value, est.std_err, est.n,
             cfg.get_float("t"), alpha, seed)]


_GRADIENT_HEADER = ["estimator", "direction", "value", "std_err", "n", "t",
                    "alpha", "seed"]


def _run_estimate_gradient(cfg, seed, workers, out):
    name = cfg.get_str("estimator", "bel")
    if name not in _ESTIMATORS:
        raise ConfigError("estimator", f"unknown estimator {name!r}")
    driver, fn = _ESTIMATORS[name]
    ecfg = _estimator_config(cfg, seed, driver)
    f = _build_f(cfg, ecfg.dim)
    est = fn(ecfg, f, workers=workers)
    _write_csv(out, _GRADIENT_HEADER, _gradient_rows(cfg, est, seed), seed,
               cfg.digest())


def _run_fd_oracle(cfg, seed, workers, out):
    driver = cfg.get_str("driver", "stable")
    if driver not in ("stable", "brownian"):
        raise ConfigError("driver", f"unknown driver {driver!r}")
    ecfg = _estimator_config(cfg, seed, driver)
    f = _build_f(cfg, ecfg.dim)
    est = fd_oracle(ecfg, f, fd_step=cfg.get_float("fd.step", 1e-3),
                    workers=workers)
    _write_csv(out, _GRADIENT_HEADER, _gradient_rows(cfg, est, seed), seed,
               cfg.digest())


def _run_gradient_scaling(cfg, seed, workers, out):
    ecfg = _estimator_config(cfg, seed, "stable")
    q = cfg.get_float("q", 2.0)
    t_grid = cfg.get_vector("t_grid")
    res = weight_moment_scaling(ecfg, q, t_grid, workers=workers)
    alpha = cfg.get_float("alpha")
    rows = [("moment", alpha, q, t, mq, se) for t, mq, se in res["rows"]]
    rows.append(("slope", alpha, q, float("nan"), res["slope"], res["slope_se"]))
    _write_csv(out, ["kind", "alpha", "q", "t", "value", "std_err"], rows,
               seed, cfg.digest())


def _run_tail_check(cfg, seed, workers, out):
    ecfg = _estimator_config(cfg, seed, "stable")
    res = tail_exponent_check(
        ecfg,
        n_lambda=cfg.get_int("tail.n_lambda", 20),
        q_lo=cfg.get_float("tail.q_lo", 0.90),
        q_hi=cfg.get_float("tail.q_hi", 0.999),
        workers=workers)
    alpha = cfg.get_float("alpha")
    n = res["n"]
    rows = [("survival", alpha, float(lam), float(sv),
             float(np.sqrt(max(sv * (1 - sv), 0.0) / n)))
            for lam, sv in zip(res["lambdas"], res["survival"])]
    rows.append(("exponent", alpha, float("nan"), res["exponent"], 0.0))
    _write_csv(out, ["kind", "alpha", "lambda", "value", "std_err"], rows,
               seed, cfg.digest())


def _spde_model(cfg, seed):
    params = _build_params(cfg)
    n = cfg.get_int("spde.n", 50)
    beta = cfg.get_float("spde.beta", 1.0)
    return make_heat_model(n, params, beta=beta)


def _run_spde_convolution(cfg, seed, workers, out):
    model = _spde_model(cfg, seed)
    p = cfg.get_float("p", 1.0)
    t_grid = cfg.get_vector("t_grid")
    res = convolution_moment_check(
        model, p, t_grid, cfg.get_int("n_paths", 10 ** 4), seed,
        grid_size=cfg.get_int("grid_size", 256),
        slack=cfg.get_float("slack", 1.5), workers=workers)
    rows = []
    for row in res["rows"]:
        rows.append((row["t"], model.n, "moment", row["estimate"], row["std_err"]))
        rows.append((row["t"], model.n, "bound", row["bound"], 0.0))
    rows.append((float("nan"), model.n, "fitted_C", res["C"], 0.0))
    rows.append((float("nan"), model.n, "slope", res["slope"], 0.0))
    _write_csv(out, ["t", "n", "quantity", "value", "std_err"], rows, seed,
               cfg.digest())


def _run_spde_solve(cfg, seed, workers, out):
    model = _spde_model(cfg, seed)
    F = _build_nonlinearity(cfg)
    t = cfg.get_float("t")
    m = cfg.get_int("grid_size", 256)
    grid = np.linspace(0.0, t, m + 1)
    x = _vector(cfg, "x0", model.n) if cfg.has("x0") else np.zeros(model.n)
    spath = sample_subordinator_path(model.params, grid, sample_stream(seed, 0, 0))
    streams = [sample_stream(seed, 0, k + 1) for k in range(model.n)]
    state = solve_mild_galerkin(model, F, x, grid, (spath, streams))
    header = ["t"] + [f"coef_{k + 1}" for k in range(model.n)]
    rows = [(float(tt), *state.coeffs[i]) for i, tt in enumerate(grid)]
    _write_csv(out, header, rows, seed, cfg.digest())
    if cfg.has("render.points"):
        zeta = np.linspace(0.0, 1.0, cfg.get_int("render.points"))
        u = render_on_interval(state.coeffs[-1], zeta)
        render_out = os.path.splitext(out)[0] + "-render.csv"
        _write_csv(render_out, ["zeta", "u"], list(zip(zeta, u)), seed,
                   cfg.digest())


def _run_spde_gap(cfg, seed, workers, out):
    model = _spde_model(cfg, seed)
    F = _build_nonlinearity(cfg)
    fname = cfg.get_str("f.name", "arctan-first")
    if fname == "arctan-first":
        a = np.zeros(model.n)
        a[0] = 1.0
        f = models.f_arctan(a)
    elif fname == "constant":
        f = models.f_constant(cfg.get_float("f.c"))
    elif fname == "step":
        a = np.zeros(model.n)
        a[0] = 1.0
        f = models.f_step(a, cfg.get_float("f.threshold", 0.0))
    else:
        raise ConfigError("f.name", f"unknown gap observable {fname!r}")
    x = _vector(cfg, "x0", model.n) if cfg.has("x0") else np.zeros(model.n)
    dists = cfg.get_vector("gap.dists", np.array([1e-1, 1e-2, 1e-3]))
    t_grid = cfg.get_vector("t_grid")
    n_samples = cfg.get_int("n_paths", 10 ** 4)
    m = cfg.get_int("grid_size", 256)
    rows = []
    for t in t_grid:
        for dist in dists:
            y = x.copy()
            y[0] += dist
            res = strong_feller_gap(model, F, f, x, y, float(t), n_samples,
                                    seed, grid_size=m, workers=workers)
            rows.append((float(t), model.n, f"gap@{dist:g}", res["gap"],
                         res["std_err"]))
            rows.append((float(t), model.n, f"eff_const@{dist:g}",
                         res["eff_const"], 0.0))
    _write_csv(out, ["t", "n", "quantity", "value", "std_err"], rows, seed,
               cfg.digest())


def _run_galerkin_cauchy(cfg, seed, workers, out):
    levels = [int(v) for v in cfg.get_vector("spde.levels")]
    params = _build_params(cfg)
    model = make_heat_model(max(levels), params,
                            beta=cfg.get_float("spde.beta", 1.0))
    F = _build_nonlinearity(cfg)
    t = cfg.get_float("t")
    x = _vector(cfg, "x0", model.n) if cfg.has("x0") else np.zeros(model.n)
    res = galerkin_convergence_check(
        model, levels, F, x, t, cfg.get_int("n_paths", 256), seed,
        grid_size=cfg.get_int("grid_size", 256), workers=workers)
    rows = [(t, levels[j + 1], "median_dev", res["medians"][j], 0.0)
            for j in range(len(levels) - 1)]
    _write_csv(out, ["t", "n", "quantity", "value", "std_err"], rows, seed,
               cfg.digest())


def _run_timechange_demo(cfg, seed, workers, out):
    knots_t = cfg.get_vector("timechange.knots_t", np.array([0.0, 0.5, 1.0]))
    knots_v = cfg.get_vector("timechange.knots_v", np.array([0.0, 1.0, 1.5]))
    rule = cfg.get_str("timechange.rule", "step")
    eps = cfg.get_float("timechange.epsilon", 0.1)
    path = CadlagIncreasingPath(knots_t, knots_v, rule=rule)
    sm = smooth(path, eps)
    gamma = invert(sm)
    ts = np.linspace(0.0, path.horizon, cfg.get_int("grid_size", 64) + 1)
    rows = []
    for t in ts:
        ev = sm.value(t)
        back = gamma.value(ev)
        rows.append((float(t), float(path.value(t)), float(ev),
                     abs(back - t)))
    _write_csv(out, ["t", "ell", "ell_eps", "inv_roundtrip_err"], rows, seed,
               cfg.digest())


_RUNNERS = {
    "sample-subordinator": _run_sample_subordinator,
    "laplace-check": _run_laplace_check,
    "simulate-sde": _run_simulate_sde,
    "estimate-gradient": _run_estimate_gradient,
    "fd-oracle": _run_fd_oracle,
    "gradient-scaling": _run_gradient_scaling,
    "tail-check": _run_tail_check,
    "spde-convolution": _run_spde_convolution,
    "spde-solve": _run_spde_solve,
    "spde-gap": _run_spde_gap,
    "galerkin-cauchy": _run_galerkin_cauchy,
    "timechange-demo": _run_timechange_demo,
}


def compare_artifacts(path_a, path_b, threshold: float):
    """Per-row z-scores between two artifacts sharing a schema."""
    header_a, rows_a = _read_csv(path_a)
    header_b, rows_b = _read_csv(path_b)
    if header_a != header_b:
        raise ValueError("schema mismatch between artifacts")
    if len(rows_a) != len(rows_b):
        raise ValueError("artifacts have different row counts")
    try:
        iv = header_a.index("value")
        ise = header_a.index("std_err")
    except ValueError as exc:
        raise ValueError("artifacts lack value/std_err columns") from exc
    report = []
    for i, (ra, rb) in enumerate(zip(rows_a, rows_b)):
        va, sa = float(ra[iv]), float(ra[ise])
        vb, sb = float(rb[iv]), float(rb[ise])
        se = np.hypot(sa, sb)
        if se == 0.0:
            z = 0.0 if va == vb else float("inf")
        else:
            z = (va - vb) / se
        report.append({"row": i, "a": va, "b": vb, "z": z,
                       "ok": abs(z) <= threshold})
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stablegrad",
        description="Monte Carlo experiments for gradient estimation under "
                    "subordinated noise")
    sub = parser.add_subparsers(dest="subcommand")
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", default=".")
    cp = sub.add_parser("compare")
    cp.add_argument("artifact_a")
    cp.add_argument("artifact_b")
    cp.add_argument("--threshold", type=float, default=3.0)

    args = parser.parse_args(argv)
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return 2

    if args.subcommand == "compare":
        try:
            report = compare_artifacts(args.artifact_a, args.artifact_b,
                                       args.threshold)
        except (ValueError, OSError) as exc:
            print(f"compare error: {exc}", file=sys.stderr)
            return 2
        bad = [r for r in report if not r["ok"]]
        for r in report:
            status = "ok" if r["ok"] else "FAIL"
            print(f"row {r['row']}: a={r['a']:.6g} b={r['b']:.6g} "
                  f"z={r['z']:+.3f} {status}")
        print(f"{len(report) - len(bad)}/{len(report)} rows within "
              f"|z| <= {args.threshold}")
        return 1 if bad else 0

    try:
        cfg = RunConfig.from_file(args.config)
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        seed = args.seed if args.seed is not None else cfg.get_int("seed", 0)
        os.makedirs(args.out, exist_ok=True)
        out_path = os.path.join(args.out, f"{args.subcommand}.csv")
        _RUNNERS[args.subcommand](cfg, seed, args.workers, out_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return 3
    print(out_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
