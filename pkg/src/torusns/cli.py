"""Command line front end.

``torusns run <config.json>``, ``torusns verify <suite>``,
``torusns compare <config.json>`` and ``torusns classify <field.json>``.

Exit codes: 0 success/convergence, 1 error (including invalid config),
2 detected divergence or a run that did not converge, 3 failed
verification.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

EXIT_OK, EXIT_ERROR, EXIT_DIVERGED, EXIT_VERIFY = 0, 1, 2, 3

TOP_KEYS = {"scheme", "preset", "adaptive", "picard", "dilatation", "compare", "output"}
OUTPUT_DEFAULTS = {
    "snapshots": "snapshots.json",
    "diagnostics": "diagnostics.csv",
    "summary": "summary.json",
    "timing": "timing.json",
    "comparison": "comparison.csv",
}


class CliConfigError(ValueError):
    pass


def _set_threads(k: int | None) -> None:
    if k is None:
        return
    if k < 1:
        raise CliConfigError("--threads must be >= 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(k)


def _only(section: dict, allowed: set, where: str) -> None:
    if not isinstance(section, dict):
        raise CliConfigError(f"{where}: expected an object")
    extra = set(section) - allowed
    if extra:
        raise CliConfigError(f"{where}: unknown keys {sorted(extra)}")


def load_config(path, seed: int | None = None) -> dict:
    """Parse and validate a run configuration; raises :class:`CliConfigError`."""
    from .config import ConfigError, SchemeConfig

    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliConfigError(f"cannot read config: {exc}") from exc
    _only(raw, TOP_KEYS, "config")
    if "scheme" not in raw or "preset" not in raw:
        raise CliConfigError("config: 'scheme' and 'preset' are required")
    try:
        cfg = SchemeConfig.from_dict(raw["scheme"])
    except ConfigError as exc:
        raise CliConfigError(f"scheme: {exc}") from exc
    out = {"cfg": cfg, "raw": raw}
    out["h"] = build_preset(raw["preset"], cfg, seed)
    if "adaptive" in raw:
        _only(raw["adaptive"], {"target_err", "N_max"}, "adaptive")
        ad = raw["adaptive"]
        if float(ad.get("target_err", 1e-4)) <= 0:
            raise CliConfigError("adaptive.target_err: must be > 0")
    if "picard" in raw:
        _only(raw["picard"], {"max_iter", "tol", "C_weight", "s"}, "picard")
    if "dilatation" in raw:
        _only(raw["dilatation"], {"t0", "a", "lam", "mu", "kind"}, "dilatation")
    if "compare" in raw:
        _only(raw["compare"], {"N_min", "N_max", "s", "reference_extra"}, "compare")
    if "output" in raw:
        _only(raw["output"], set(OUTPUT_DEFAULTS), "output")
    return out


def build_preset(desc: dict, cfg, seed: int | None):
    from . import presets
    from .spectral import load_field

    _only(desc, {"name", "params", "path"}, "preset")
    name = desc.get("name")
    if name == "file":
        if "path" not in desc:
            raise CliConfigError("preset: 'file' needs a 'path'")
        h = load_field(desc["path"])
        if (h.n, h.lattice.L) != (cfg.n, cfg.L):
            raise CliConfigError("preset: field lattice does not match scheme n, L")
        return h
    if name not in presets.PRESETS:
        raise CliConfigError(f"preset.name: unknown preset {name!r}")
    params = dict(desc.get("params", {}))
    clash = {"L", "n", "l"} & set(params)
    if clash:
        raise CliConfigError(f"preset.params: {sorted(clash)} come from 'scheme'")
    if name == "taylor_green_2d":
        if cfg.n != 2:
            raise CliConfigError("preset: taylor_green_2d needs n = 2")
        kwargs = {"L": cfg.L, "l": cfg.l}
    elif name == "random_decay":
        kwargs = {"L": cfg.L, "n": cfg.n, "l": cfg.l}
        if seed is not None:
            params["seed"] = seed
        params.setdefault("seed", 0)
    else:
        kwargs = {"L": cfg.L, "n": cfg.n, "l": cfg.l}
    try:
        return presets.PRESETS[name](**kwargs, **params)
    except (TypeError, ValueError) as exc:
        raise CliConfigError(f"preset.params: {exc}") from exc


def analytic_reference(desc: dict, h, cfg, t: float):
    """Closed-form solution at time ``t`` for presets that have one."""
    from . import presets

    name = desc.get("name")
    if name == "taylor_green_2d":
        return h * presets.taylor_green_decay(t, cfg.nu, cfg.l, cfg.viscous_factor)
    if name == "single_shear":
        return h * presets.shear_decay(t, cfg.nu, cfg.l, cfg.viscous_factor)
    return None


def _outputs(raw: dict, out_dir: Path) -> dict:
    names = dict(OUTPUT_DEFAULTS)
    names.update(raw.get("output", {}))
    return {k: out_dir / v for k, v in names.items()}


def _write_snapshots(traj, path: Path) -> None:
    from .serial import dumps
    from .spectral import field_to_json

    doc = {
        "times": list(traj.times),
        "steps": list(traj.steps),
        "snapshots": [field_to_json(f) for f in traj.snapshots],
    }
    path.write_text(dumps(doc) + "\n")


def _final_norms(field, cfg) -> dict:
    from .spectral import sobolev_norm

    orders = sorted(set(cfg.norm_orders) | {cfg.blowup_order, cfg.error_order})
    if not field.is_finite():
        return {f"hs_norm[{s:g}]": float("inf") for s in orders}
    return {f"hs_norm[{s:g}]": sobolev_norm(field, s) for s in orders}


def cmd_run(args) -> int:
    from .picard import NoContraction, WeightedNormSpec, default_norm_spec, picard_iterate
    from .serial import dumps
    from .spectral import sobolev_norm
    from .stepper import run_adaptive, run_stage, write_diagnostics_csv

    conf = load_config(args.config, args.seed)
    cfg, h, raw = conf["cfg"], conf["h"], conf["raw"]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = _outputs(raw, out_dir)
    start = time.perf_counter()
    summary: dict = {"mode": cfg.mode.value, "control": cfg.control.value}
    evidence: dict = {}

    if "picard" in raw:
        p = raw["picard"]
        spec = default_norm_spec(h, cfg, p.get("s"))
        if "C_weight" in p:
            spec = WeightedNormSpec(spec.s, float(p["C_weight"]), cfg.T)
        try:
            res = picard_iterate(h, cfg, spec, int(p.get("max_iter", 20)), float(p.get("tol", 1e-10)))
        except NoContraction as exc:
            summary.update(verdict="diverged", N_used=cfg.N, reason=str(exc),
                           picard_distances=exc.distances)
            (paths["summary"]).write_text(dumps(summary) + "\n")
            return EXIT_DIVERGED
        traj, verdict, N_used = res.trajectory, ("converged" if res.converged else "inconclusive"), cfg.N
        summary.update(picard_distances=res.distances, picard_ratios=res.ratios,
                       picard_iterations=res.iterations, C_weight=spec.C_weight)
    elif "dilatation" in raw:
        from .dilatation import DilatationParams, from_comparison, run_comparison

        params = DilatationParams(**raw["dilatation"])
        u = run_comparison(h, params, cfg)
        traj = from_comparison(u, params)
        traj.diagnostics = u.diagnostics
        traj.diverged = u.diverged
        verdict = "diverged" if u.diverged else "completed"
        N_used = cfg.N
    elif "adaptive" in raw:
        ad = raw["adaptive"]
        res = run_adaptive(h, cfg, float(ad.get("target_err", 1e-4)), int(ad.get("N_max", cfg.N + 6)))
        traj, verdict, N_used = res.trajectory, res.verdict, res.N_used
        summary["stage_errors"] = {str(k): v for k, v in sorted(res.errors.items())}
        summary["stage_orders"] = {str(k): v for k, v in sorted(res.orders.items())}
    else:
        traj = run_stage(h, cfg)
        verdict = "diverged" if traj.diverged else "completed"
        N_used = cfg.N

    if traj.diverged:
        verdict = "diverged"
        evidence = {"diverged_step": traj.diverged_step,
                    "norm_history": [row[f"hs_norm[{cfg.blowup_order:g}]"]
                                     for row in traj.diagnostics]}
    final = traj.snapshots[-1]
    summary.update(verdict=verdict, N_used=N_used, final_time=traj.times[-1],
                   final_norms=_final_norms(final, cfg))
    summary.update(evidence)
    ref = analytic_reference(raw["preset"], h, cfg, traj.times[-1])
    if ref is not None and final.is_finite():
        den = sobolev_norm(ref, 2.0)
        summary["analytic_h2_error"] = sobolev_norm(final - ref, 2.0)
        summary["analytic_h2_rel_error"] = summary["analytic_h2_error"] / den if den > 0 else 0.0

    _write_snapshots(traj, paths["snapshots"])
    if traj.diagnostics:
        write_diagnostics_csv(traj, paths["diagnostics"])
    paths["summary"].write_text(dumps(summary) + "\n")
    paths["timing"].write_text(dumps({"wall_time_s": time.perf_counter() - start}) + "\n")
    print(f"{verdict} N_used={N_used}")
    return EXIT_OK if verdict in ("converged", "completed") else EXIT_DIVERGED


def cmd_verify(args) -> int:
    from .verify import SUITES

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rep = SUITES[args.suite](seed=args.seed or 0)
    path = out_dir / f"verify_{args.suite}.csv"
    rep.write_csv(path)
    if rep.passed:
        print(f"{args.suite}: pass ({len(rep.rows)} rows) -> {path}")
        return EXIT_OK
    print(f"{args.suite}: FAIL", file=sys.stderr)
    for row in rep.failures:
        print("  " + " ".join(str(x) for x in row), file=sys.stderr)
    return EXIT_VERIFY


def cmd_compare(args) -> int:
    from .config import StepKind
    from .serial import fmt_float
    from .spectral import sobolev_norm
    from .stepper import rk4_final, run_stage

    conf = load_config(args.config, args.seed)
    cfg, h, raw = conf["cfg"], conf["h"], conf["raw"]
    cmp_ = raw.get("compare", {})
    N_min = int(cmp_.get("N_min", max(cfg.N - 2, 0)))
    N_max = int(cmp_.get("N_max", cfg.N + 2))
    if N_max < N_min:
        raise CliConfigError("compare: N_max < N_min")
    s = float(cmp_.get("s", cfg.error_order))
    ref = rk4_final(h, cfg.replace(N=N_max + int(cmp_.get("reference_extra", 2))))
    if not ref.is_finite():
        print("reference run diverged", file=sys.stderr)
        return EXIT_DIVERGED
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = _outputs(raw, out_dir)["comparison"]
    lines = ["N,dt,dist_trotter,dist_euler,dist_rk4"]
    status = EXIT_OK
    for N in range(N_min, N_max + 1):
        c = cfg.replace(N=N)
        d = []
        for mode in (StepKind.TROTTER, StepKind.FORWARD_EULER):
            tr = run_stage(h, c.replace(mode=mode))
            d.append(sobolev_norm(tr.final - ref, s) if tr.final.is_finite() else float("inf"))
            if tr.diverged and mode is StepKind.TROTTER:
                status = EXIT_DIVERGED
        rk = rk4_final(h, c)
        d.append(sobolev_norm(rk - ref, s) if rk.is_finite() else float("inf"))
        lines.append(",".join([str(N), fmt_float(c.dt)] + [fmt_float(x) for x in d]))
    path.write_text("\n".join(lines) + "\n")
    print(f"comparison -> {path}")
    return status


def cmd_classify(args) -> int:
    from .analysis import classify_data
    from .serial import dumps
    from .spectral import load_field

    try:
        h = load_field(args.field)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CliConfigError(f"cannot read field: {exc}") from exc
    verdict, prof = classify_data(h)
    doc = {"verdict": verdict.value, "s_estimate": prof.s_estimate, "C": prof.constant,
           "exponent": prof.exponent, "residual": prof.residual, "model": prof.model}
    text = dumps(doc) + "\n"
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "classify.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=".", help="directory for artifacts")
    common.add_argument("--seed", type=int, default=None, help="seed for random presets")
    common.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP threads")
    p = argparse.ArgumentParser(prog="torusns", description="Spectral Navier-Stokes laboratory")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run a configured scheme")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("verify", parents=[common], help="run a property bench")
    v.add_argument("suite", choices=["bounds", "bch", "trotter", "basis"])
    v.set_defaults(func=cmd_verify)
    c = sub.add_parser("compare", parents=[common], help="Trotter vs Euler vs RK4")
    c.add_argument("config")
    c.set_defaults(func=cmd_compare)
    k = sub.add_parser("classify", parents=[common], help="classify field data")
    k.add_argument("field")
    k.set_defaults(func=cmd_classify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors, which is reserved for divergence here
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    try:
        _set_threads(args.threads)
        return args.func(args)
    except CliConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # any other failure is an error exit, never a pass
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
