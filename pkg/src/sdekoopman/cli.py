"""Command-line front end.

Subcommands::

    solve            assemble + solve one configuration; writes solution.json,
                     report.csv and eigenfunction_curve.csv
    fk               Monte Carlo estimates at query points (CSV in/out);
                     --fit adds a kernel-ridge fit as fitted_solution.json
    reproduce        rerun the benchmark experiments with pinned seeds and
                     check their pass bands; writes summary.csv
    semigroup-curve  E[phi(X_t)] vs e^{lambda t} phi(x0) over a time grid
    sweep            quadratic-model conditioning sweep over noise levels

Exit codes: 0 ok, 1 benchmark band failed (reproduce), 2 config/input error,
3 numerical failure.  Identical invocations (same seed) produce byte-identical
output files; ``--threads`` never changes results (BLAS pools are pinned for
bitwise stability).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

# Heavy imports happen inside main() after the thread pools are pinned, so
# the determinism guarantee holds no matter how BLAS was built.
_THREAD_ENV = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
               "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS")

EXIT_OK = 0
EXIT_BAND_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _schema_epilog():
    from .config import CONFIG_SCHEMA
    lines = ["config file keys:"]
    for key, desc in CONFIG_SCHEMA.items():
        lines.append(f"  {key:<20} {desc}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdekoopman",
        description="Koopman eigenfunctions of Ito SDEs by kernel collocation "
                    "and Feynman-Kac Monte Carlo.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="path to a JSON run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed; overrides the config (default 0)")
        p.add_argument("--out", default=None,
                       help="output directory (default: config output_dir or '.')")
        p.add_argument("--threads", type=int, default=1,
                       help="worker hint; must not and does not change results")

    p = sub.add_parser("solve", epilog=_schema_epilog(),
                       formatter_class=argparse.RawDescriptionHelpFormatter,
                       help="solve the collocation system and report metrics")
    common(p)

    p = sub.add_parser("fk", epilog=_schema_epilog(),
                       formatter_class=argparse.RawDescriptionHelpFormatter,
                       help="Monte Carlo estimates at query points")
    common(p)
    p.add_argument("--queries", required=True,
                   help="CSV of query points, one point per row")
    p.add_argument("--fit", action="store_true",
                   help="kernel-ridge fit of the estimates (fitted_solution.json)")
    p.add_argument("--eta", type=float, default=1e-4,
                   help="ridge parameter for --fit (default 1e-4)")

    p = sub.add_parser("reproduce", help="rerun the benchmark experiments")
    p.add_argument("which", choices=["all", "test1", "test2", "test3"])
    common(p, config_required=False)

    p = sub.add_parser("semigroup-curve", epilog=_schema_epilog(),
                       formatter_class=argparse.RawDescriptionHelpFormatter,
                       help="semigroup verification over a time grid")
    common(p)
    p.add_argument("--t-list", required=True,
                   help="comma-separated horizons, e.g. '0.1,0.2,0.5'")

    p = sub.add_parser("sweep", epilog=_schema_epilog(),
                       formatter_class=argparse.RawDescriptionHelpFormatter,
                       help="conditioning sweep of the quadratic model")
    common(p, config_required=False)
    p.add_argument("--sigmas", required=True,
                   help="comma-separated noise levels, e.g. '0,0.3,0.5'")

    return parser


def _outdir(args, cfg=None):
    out = args.out or (cfg.output_dir if cfg is not None and cfg.output_dir else ".")
    os.makedirs(out, exist_ok=True)
    return out


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    print(f"wrote {path}")


def _setup_from_config(cfg, seed):
    from .collocation import GridSpec
    from .errors import ConfigError
    from .registry import get_model

    try:
        setup = get_model(cfg.model_name, **cfg.model_params)
    except (KeyError, TypeError) as exc:
        raise ConfigError(str(exc))
    grid_spec = None
    if cfg.grid_spec is not None:
        try:
            grid_spec = GridSpec(kind=cfg.grid_spec["kind"], n=cfg.grid_spec["n"])
        except ValueError as exc:
            raise ConfigError(str(exc))
    try:
        setup = setup.with_overrides(lengthscale=cfg.kernel_lengthscale,
                                     grid_spec=grid_spec, gamma=cfg.gamma,
                                     lambda_select=cfg.lambda_select)
    except ValueError as exc:
        raise ConfigError(str(exc))
    return setup


def _fk_config(cfg, seed):
    from .errors import ConfigError
    from .feynman_kac import FkConfig

    fields = dict(cfg.fk)
    fields["seed"] = seed
    try:
        return FkConfig(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid fk settings: {exc}")


def _eigenfunction_curve_csv(sol, domain):
    import numpy as np
    if domain.dim == 1:
        xs = np.linspace(domain.lower[0], domain.upper[0], 200)[:, None]
        lines = ["x,phi,h"]
        phi = sol.eval_phi(xs)
        h = sol.eval_h(xs)
        for x, p, hh in zip(xs[:, 0], phi, h):
            lines.append(f"{float(x)!r},{float(p)!r},{float(hh)!r}")
    else:
        g1 = np.linspace(domain.lower[0], domain.upper[0], 20)
        g2 = np.linspace(domain.lower[1], domain.upper[1], 20)
        pts = np.array([[a, b] for a in g1 for b in g2])
        phi = sol.eval_phi(pts)
        lines = ["x1,x2,phi"]
        for (a, b), p in zip(pts, phi):
            lines.append(f"{float(a)!r},{float(b)!r},{float(p)!r}")
    return "\n".join(lines) + "\n"


def cmd_solve(args) -> int:
    from .collocation import solution_to_json_dict
    from .config import load_config
    from .validation import reports_to_csv, solve_and_report

    cfg = load_config(args.config)
    seed = cfg.effective_seed(args.seed)
    setup = _setup_from_config(cfg, seed)
    fk = _fk_config(cfg, seed)
    sol, asys, report = solve_and_report(setup, seed, fk=fk,
                                         metrics=cfg.wanted_metrics())
    out = _outdir(args, cfg)
    _write(os.path.join(out, "solution.json"),
           json.dumps(solution_to_json_dict(sol, asys)) + "\n")
    _write(os.path.join(out, "report.csv"), reports_to_csv([report]))
    _write(os.path.join(out, "eigenfunction_curve.csv"),
           _eigenfunction_curve_csv(sol, setup.domain))
    return EXIT_OK


def _read_queries(path, dim):
    import numpy as np
    from .errors import QueryFileError

    rows = []
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except FileNotFoundError:
        raise QueryFileError(f"query file not found: {path}", 0)
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if lineno == 1 and any(c.isalpha() for c in stripped):
            continue  # optional header row
        parts = stripped.split(",")
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise QueryFileError(f"could not parse '{stripped}'", lineno)
        if len(vals) != dim:
            raise QueryFileError(f"expected {dim} coordinates, got {len(vals)}", lineno)
        rows.append(vals)
    if not rows:
        raise QueryFileError("query file contains no points", 0)
    return np.asarray(rows, dtype=float)


def cmd_fk(args) -> int:
    from .collocation import CollocationGrid, solution_to_json_dict
    from .config import load_config
    from .errors import SdeKoopmanError
    from .feynman_kac import estimates_to_csv, fk_batch, krr_fit
    from .kernels import GaussianKernel

    cfg = load_config(args.config)
    seed = cfg.effective_seed(args.seed)
    setup = _setup_from_config(cfg, seed)
    fk = _fk_config(cfg, seed)
    queries = _read_queries(args.queries, setup.system.dim_state)

    estimates = fk_batch(setup.system, setup.decomp, setup.eigenpair,
                         setup.domain, queries, fk)
    out = _outdir(args, cfg)
    _write(os.path.join(out, "fk_estimates.csv"),
           estimates_to_csv(estimates, queries))

    if args.fit:
        failed = [i for i, e in enumerate(estimates) if e.failure is not None]
        if failed:
            raise SdeKoopmanError(
                f"cannot fit: estimates failed at query indices {failed}")
        if args.eta <= 0:
            from .errors import ConfigError
            raise ConfigError("eta must be positive")
        kern = GaussianKernel(setup.lengthscale)
        values = [e.value for e in estimates]
        fitted = krr_fit(kern, CollocationGrid(points=queries), values, args.eta,
                         eigenpair=setup.eigenpair,
                         equilibrium=setup.decomp.equilibrium)
        _write(os.path.join(out, "fitted_solution.json"),
               json.dumps(solution_to_json_dict(fitted)) + "\n")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    from .validation import check_acceptance, format_table, reports_to_csv, run_experiment

    names = {"all": ["test1_ou", "test2_quadratic", "test3_linear2d"],
             "test1": ["test1_ou"], "test2": ["test2_quadratic"],
             "test3": ["test3_linear2d"]}[args.which]
    reports, all_checks = [], []
    for name in names:
        result = run_experiment(name, seed=args.seed)
        rows = result if isinstance(result, list) else [result]
        reports.extend(rows)
        all_checks.extend((name, *c) for c in check_acceptance(name, result))

    out = _outdir(args)
    _write(os.path.join(out, "summary.csv"), reports_to_csv(reports))
    print(format_table(reports))
    failed = 0
    for name, label, ok, detail in all_checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {label} ({detail})")
        failed += not ok
    if failed:
        print(f"{failed} benchmark band(s) failed")
        return EXIT_BAND_FAILURE
    print("all benchmark bands passed")
    return EXIT_OK


def cmd_semigroup_curve(args) -> int:
    from .config import load_config
    from .errors import ConfigError
    from .validation import semigroup_curve, solve_and_report

    cfg = load_config(args.config)
    seed = cfg.effective_seed(args.seed)
    setup = _setup_from_config(cfg, seed)
    fk = _fk_config(cfg, seed)
    try:
        t_list = [float(t) for t in args.t_list.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"could not parse --t-list '{args.t_list}'")
    if not t_list:
        raise ConfigError("--t-list must contain at least one horizon")
    if any(t <= 0 for t in t_list) or any(b <= a for a, b in zip(t_list, t_list[1:])):
        raise ConfigError("--t-list must be positive and strictly increasing")

    sol, _, _ = solve_and_report(setup, seed, fk=fk, metrics=())
    rows = semigroup_curve(setup.system, sol.eval_phi, setup.eigenpair.eigenvalue,
                           setup.semigroup_x0, t_list, fk)
    lines = ["t,mc_mean,prediction,rel_error"]
    for r in rows:
        lines.append(f"{r['t']!r},{r['mc_mean']!r},{r['prediction']!r},{r['rel_error']!r}")
    out = _outdir(args, cfg)
    _write(os.path.join(out, "semigroup_curve.csv"), "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .config import load_config
    from .errors import ConfigError
    from .validation import conditioning_sweep, format_table, reports_to_csv

    fk = None
    seed = args.seed
    if args.config:
        cfg = load_config(args.config)
        if cfg.model_name != "quadratic":
            raise ConfigError("sweep runs the quadratic model; set model accordingly")
        seed = cfg.effective_seed(args.seed)
        fk = _fk_config(cfg, seed)
    try:
        sigmas = [float(s) for s in args.sigmas.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"could not parse --sigmas '{args.sigmas}'")
    if not sigmas:
        raise ConfigError("--sigmas must contain at least one value")
    if any(s < 0 for s in sigmas):
        raise ConfigError("sigma values must be nonnegative")

    rows = conditioning_sweep(sigmas, fk=fk, seed=seed)
    out = _outdir(args)
    _write(os.path.join(out, "sweep.csv"), reports_to_csv(rows))
    print(format_table(rows))
    return EXIT_OK


def main(argv=None) -> int:
    for var in _THREAD_ENV:
        os.environ[var] = "1"
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be a 64-bit unsigned integer", file=sys.stderr)
        return EXIT_CONFIG

    from . import errors
    import numpy as np

    handlers = {"solve": cmd_solve, "fk": cmd_fk, "reproduce": cmd_reproduce,
                "semigroup-curve": cmd_semigroup_curve, "sweep": cmd_sweep}
    try:
        return handlers[args.command](args)
    except errors.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (errors.SdeKoopmanError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
