"""Command-line front door: solve / manufacture / verify runs from a config file.

The config is a single TOML file; a run is fully described by it plus the
seed it contains, so outputs are reproducible artifacts.  Exit codes:

    0   success, all hard checks passed
    1   solver failure (diagnostic dump written)
    2   at least one hard check failed
    64  malformed config

Reductions inside the library are fixed-order (numpy pairwise summation over
C-ordered arrays), so results do not depend on the worker thread count;
``--threads`` merely caps the BLAS/OpenMP pools and must be processed before
numpy is first imported, which is why the compute modules are imported
lazily inside :func:`run`.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time


class ConfigError(ValueError):
    pass


def _load_toml(path):
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from None


def _field(table, key, kind, default=None, required=False, where=""):
    loc = f"{where}.{key}" if where else key
    if key not in table:
        if required:
            raise ConfigError(f"{loc}: required field missing")
        return default
    val = table[key]
    if kind is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, kind):
        raise ConfigError(f"{loc}: expected {kind.__name__}, got {type(val).__name__}")
    return val


def _parse_matrix(np, table, n, where):
    re = _field(table, "re", list, required=True, where=where)
    im = _field(table, "im", list, default=[[0.0] * n for _ in range(n)], where=where)
    try:
        m = np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: re/im must be numeric {n}x{n} lists") from None
    if m.shape != (n, n):
        raise ConfigError(f"{where}: matrix shape {m.shape} != ({n}, {n})")
    return m


def _parse_modes(raw, n, where):
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{where}: expected a non-empty list of mode tables")
    modes = []
    for i, entry in enumerate(raw):
        loc = f"{where}[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{loc}: expected a mode table")
        k = _field(entry, "k", list, required=True, where=loc)
        if len(k) != 2 * n or not all(isinstance(x, int) for x in k):
            raise ConfigError(f"{loc}.k: expected {2 * n} integers")
        amp = _field(entry, "amplitude", float, required=True, where=loc)
        phase = _field(entry, "phase", float, default=0.0, where=loc)
        modes.append({"k": k, "amplitude": amp, "phase": phase})
    return modes


def _build_problem(cfg):
    import numpy as np

    from . import fields, forms

    n = _field(cfg, "n", int, required=True)
    N = _field(cfg, "N", int, required=True)
    axes = _field(cfg, "axes", list, default=None)
    try:
        grid = fields.TorusGrid(n=n, N=N, axes=tuple(axes) if axes is not None else None)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None

    if "metric" in cfg:
        g = forms.hermitize(_parse_matrix(np, cfg["metric"], n, "metric"))
    else:
        g = np.eye(n, dtype=complex)
    try:
        forms.check_metric(g)
    except ValueError:
        raise ConfigError("metric: g must be Hermitian positive definite") from None

    htab = cfg.get("hermitian", {"kind": "constant"})
    kind = _field(htab, "kind", str, default="constant", where="hermitian")
    if kind == "constant":
        hmat = forms.hermitize(_parse_matrix(np, htab, n, "hermitian")) if "re" in htab else g
        h = fields.constant_matrix_field(grid, hmat)
    elif kind == "conformal":
        amp = _field(htab, "amplitude", float, required=True, where="hermitian")
        k = _field(htab, "mode", list, required=True, where="hermitian")
        try:
            factor = fields.cosine_field(grid, [{"k": k, "amplitude": amp}]).values + 1.0
        except ValueError as exc:
            raise ConfigError(f"hermitian.mode: {exc}") from None
        if factor.min() <= 0.0:
            raise ConfigError("hermitian: conformal factor must stay positive")
        h = fields.MatrixField(grid, factor[..., None, None] * g)
    elif kind == "file":
        path = _field(htab, "path", str, required=True, where="hermitian")
        fld = fields.read_field(path)
        if not isinstance(fld, fields.MatrixField) or fld.grid != grid:
            raise ConfigError("hermitian.path: file is not a matrix field on this grid")
        h = fld
    else:
        raise ConfigError(f"hermitian.kind: unknown kind {kind!r}")

    ftab = cfg.get("data", {"kind": "zero"})
    fkind = _field(ftab, "kind", str, default="zero", where="data")
    if fkind == "zero":
        F = fields.ScalarField(grid, np.zeros(grid.shape))
    elif fkind == "modes":
        modes = _parse_modes(ftab.get("modes"), n, "data.modes")
        try:
            F = fields.cosine_field(grid, modes)
        except ValueError as exc:
            raise ConfigError(f"data.modes: {exc}") from None
    elif fkind == "file":
        path = _field(ftab, "path", str, required=True, where="data")
        fld = fields.read_field(path)
        if not isinstance(fld, fields.ScalarField) or fld.grid != grid:
            raise ConfigError("data.path: file is not a scalar field on this grid")
        F = fld
    else:
        raise ConfigError(f"data.kind: unknown kind {fkind!r}")

    return grid, g, h, F


def _solver_options(cfg):
    tab = cfg.get("solve", {})
    opts = {
        "tol": _field(tab, "tol", float, default=1e-10, where="solve"),
        "inner_tol": _field(tab, "inner_tol", float, default=1e-3, where="solve"),
        "cone_floor": _field(tab, "cone_floor", float, default=1e-8, where="solve"),
    }
    schedule = _field(tab, "schedule", list, default=None, where="solve")
    if schedule is None:
        steps = _field(tab, "steps", int, default=8, where="solve")
        if steps < 1:
            raise ConfigError("solve.steps: must be >= 1")
        schedule = [(k + 1) / steps for k in range(steps)]
    return schedule, opts, bool(tab.get("strict_bandlimit", False))


def _emit(quiet, *args):
    if not quiet:
        print(*args)


def _write_solution(outdir, spec, state, records, extra=None):
    from . import fields, solver

    fields.write_field(os.path.join(outdir, "u_mean_zero.field"), state.u)
    fields.write_field(os.path.join(outdir, "u_sup_zero.field"), solver.sup_gauge(state.u))
    solver.write_diagnostics_csv(records, os.path.join(outdir, "diagnostics.csv"))
    lo, hi = solver.estimate_b_bounds(spec)
    result = {
        "b": state.b,
        "t": state.t,
        "residual_inf": state.residual_inf,
        "cone_margin_min": state.cone_margin_min,
        "newton_iters": state.newton_iters,
        "b_bounds": [lo, hi],
    }
    if extra:
        result.update(extra)
    with open(os.path.join(outdir, "result.json"), "w") as fh:
        json.dump(result, fh, sort_keys=True, indent=2)
    return result


def _run_solution_pipeline(cfg, outdir, quiet, spec, seed, extra=None):
    from . import solver, verify

    schedule, opts, strict = _solver_options(cfg)
    warnings = spec.bandlimit_warnings()
    for w in warnings:
        if strict:
            raise ConfigError(f"data: {w}")
        _emit(quiet, f"warning: {w}")
    t0 = time.time()
    try:
        state, records = solver.continuity_solve(spec, schedule=schedule, **opts)
    except (solver.ConeViolation, solver.ContinuationError, solver.LinearSolveError) as exc:
        dump = {"error": str(exc), "schedule": schedule, "options": opts}
        with open(os.path.join(outdir, "failure.json"), "w") as fh:
            json.dump(dump, fh, sort_keys=True, indent=2)
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1, None
    elapsed = time.time() - t0
    result = _write_solution(outdir, spec, state, records, extra={"runtime_s": elapsed, **(extra or {})})
    reports = verify.run_solution_checks(state, spec, seed=seed)
    verify.write_jsonl(reports, os.path.join(outdir, "checks.jsonl"))
    _emit(quiet, verify.summary_table(reports))
    _emit(quiet, f"b = {state.b:.12e}   residual_inf = {state.residual_inf:.3e}   "
                 f"margin = {state.cone_margin_min:.3e}   [{elapsed:.2f}s]")
    if extra and "recovery_error_inf" in (extra or {}):
        _emit(quiet, f"recovered-u error = {extra['recovery_error_inf']:.3e}")
    if not all(r.passed for r in reports):
        return 2, result
    return 0, result


def run(config_path, threads=None, quiet=False):
    if threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(threads))
    cfg = _load_toml(config_path)
    command = _field(cfg, "command", str, required=True)
    outdir = _field(cfg, "output_dir", str, default=os.environ.get("OUTPUT_DIR", "."))
    seed = _field(cfg, "seed", int, default=0)
    os.makedirs(outdir, exist_ok=True)

    if command == "verify":
        from . import verify

        tab = cfg.get("verify", {})
        dims = _field(tab, "dims", list, default=[2, 3, 4], where="verify")
        trials = _field(tab, "trials", int, default=1000, where="verify")
        reports = verify.run_identity_suite(dims=tuple(dims), trials=trials, seed=seed)
        verify.write_jsonl(reports, os.path.join(outdir, "checks.jsonl"))
        _emit(quiet, verify.summary_table(reports))
        return 0 if all(r.passed for r in reports) else 2

    if command == "solve":
        from . import solver

        grid, g, h, F = _build_problem(cfg)
        spec = solver.ProblemSpec(grid, g, h, F)
        code, _ = _run_solution_pipeline(cfg, outdir, quiet, spec, seed)
        return code

    if command == "manufacture":
        import numpy as np

        from . import fields, solver

        grid, g, h, _ = _build_problem(cfg)
        tab = cfg.get("manufacture", {})
        modes = _parse_modes(tab.get("modes"), grid.n, "manufacture.modes")
        margin_min = _field(tab, "margin_min", float, default=0.1, where="manufacture")
        try:
            u_star = fields.cosine_field(grid, modes)
        except ValueError as exc:
            raise ConfigError(f"manufacture.modes: {exc}") from None
        try:
            F, _b = solver.manufacture(grid, g, h, u_star, margin_min=margin_min)
        except ValueError as exc:
            print(f"solver failure: {exc}", file=sys.stderr)
            return 1
        fields.write_field(os.path.join(outdir, "u_star.field"), u_star)
        fields.write_field(os.path.join(outdir, "F.field"), F)
        spec = solver.ProblemSpec(grid, g, h, F)
        target = u_star.values - np.sum(u_star.values) / u_star.values.size

        code, result = _run_solution_pipeline(cfg, outdir, quiet, spec, seed)
        if result is not None:
            state_u = fields.read_field(os.path.join(outdir, "u_mean_zero.field"))
            err = float(np.max(np.abs(state_u.values - target)))
            result["recovery_error_inf"] = err
            result["b_expected"] = 0.0
            with open(os.path.join(outdir, "result.json"), "w") as fh:
                json.dump(result, fh, sort_keys=True, indent=2)
            _emit(quiet, f"recovered-u error = {err:.3e}")
        return code

    raise ConfigError(f"command: unknown command {command!r}")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="torusma",
        description="Solve and certify torus Monge-Ampere problems from a TOML config.",
    )
    parser.add_argument("--config", required=True, help="path to the run config (TOML)")
    parser.add_argument("--threads", type=int, default=None, help="cap BLAS/OpenMP thread pools")
    parser.add_argument("--quiet", action="store_true", help="suppress informational output")
    args = parser.parse_args(argv)
    try:
        return run(args.config, threads=args.threads, quiet=args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 64


if __name__ == "__main__":
    sys.exit(main())
