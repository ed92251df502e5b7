"""Command-line driver: ``crimefront <experiment> --config <path> [--out <dir>]``.

Configuration is flat ``key=value`` text.  ``#`` starts a comment, blank lines
are ignored and a later assignment of a key overrides an earlier one.
"""

import argparse
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import steady_state, wave_analysis
from .kinetics import KineticsParams, classify, normalize_alpha
from .pde_solver import GapLayout, NumericalFailure, SolverConfig

log = logging.getLogger("crimefront")

EXPERIMENTS = (
    "classify", "wave-speed", "critical-length", "simulate",
    "bisect-gap", "split-gap", "decay-rates", "steady-profile",
)

# key -> (type, default, help)
KEYS = {
    "beta": (float, 3.0, "sigmoid steepness"),
    "s_b": (float, 0.2, "activation threshold of g"),
    "alpha": (float, None, "payoff; normalized so that f(1) = 0 when omitted"),
    "gap.kind": (str, "none", "none | single | double"),
    "gap.L": (float, None, "single gap length"),
    "gap.L1": (float, None, "first gap length"),
    "gap.L2": (float, None, "second gap length"),
    "gap.d": (float, None, "separation of the two gaps"),
    "gap.units": (str, "absolute", "absolute | lstar (lengths in units of the analytic L*)"),
    "dx": (float, 0.01, "grid spacing"),
    "dt": (float, None, "time step; defaults to dx"),
    "x_min": (float, None, "left end; sized from the experiment when omitted"),
    "x_max": (float, None, "right end; sized from the experiment when omitted"),
    "t_end": (float, 100.0, "initial horizon; gap runs extend it up to t_cap when undecided"),
    "t_cap": (float, 3200.0, "longest horizon for a gap verdict"),
    "mode": (str, "system", "system | scalar"),
    "boundary": (str, "neumann", "neumann | dirichlet"),
    "front_x": (float, -12.0, "initial level crossing of the front"),
    "experiment": (str, "classify", " | ".join(EXPERIMENTS)),
    "out": (str, "out", "output directory"),
    "seed": (int, 0, "seed for randomized fixtures"),
    "sweep.d_max": (float, 5.0, "split-gap: largest separation"),
    "sweep.d_step": (float, 0.1, "split-gap: separation step"),
    "bisect.lo": (float, 0.25, "bisect-gap: lower bracket in units of L*"),
    "bisect.hi": (float, 1.5, "bisect-gap: upper bracket in units of L*"),
    "steady.kind": (str, "blocking", "steady-profile: blocking | symmetric"),
    "steady.branch": (str, "lower", "steady-profile: lower | upper blocking state"),
    "c": (float, None, "decay-rates: wave speed; measured from the PDE when omitted"),
}

CHOICES = {
    "gap.kind": ("none", "single", "double"),
    "gap.units": ("absolute", "lstar"),
    "mode": ("system", "scalar"),
    "boundary": ("neumann", "dirichlet"),
    "experiment": EXPERIMENTS,
    "steady.kind": ("blocking", "symmetric"),
    "steady.branch": ("lower", "upper"),
}

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class Scenario:
    params: KineticsParams
    layout: GapLayout
    solver: SolverConfig
    experiment: str
    output_dir: Path
    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)

    def get(self, key):
        return self.values[key]


def parse_key_values(text):
    """``{key: (raw_value, line_number)}`` from flat ``key=value`` text."""
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {n}: empty key")
        out[key] = (value, n)
    return out


def _loc(n):
    return f"line {n}" if isinstance(n, int) else n


def _convert(key, raw, n):
    kind = KEYS[key][0]
    try:
        value = kind(raw)
    except ValueError:
        raise ConfigError(f"{_loc(n)}: cannot parse {key}={raw!r} as {kind.__name__}") from None
    if kind is float and not np.isfinite(value):
        raise ConfigError(f"{_loc(n)}: {key} must be finite")
    if key in CHOICES and value not in CHOICES[key]:
        raise ConfigError(f"{_loc(n)}: {key} must be one of {', '.join(CHOICES[key])}, got {raw!r}")
    return value


def parse_config(text, overrides=None):
    """Build a ``Scenario`` from config text; ``overrides`` are applied last."""
    entries = parse_key_values(text)
    for key, value in (overrides or {}).items():
        entries[key] = (str(value), "command line")
    values = {key: spec[1] for key, spec in KEYS.items()}
    lines = {}
    for key, (raw, n) in entries.items():
        if key not in KEYS:
            raise ConfigError(f"{_loc(n)}: unknown key {key!r}")
        values[key] = _convert(key, raw, n)
        lines[key] = n

    def where(key):
        return _loc(lines[key]) if key in lines else "defaults"

    try:
        if values["alpha"] is None:
            alpha = normalize_alpha(values["beta"], values["s_b"])
        else:
            alpha = values["alpha"]
        params = KineticsParams(alpha, values["beta"], values["s_b"])
    except ValueError as exc:
        key = "alpha" if "alpha" in lines else "beta" if "beta" in lines else "s_b"
        raise ConfigError(f"{where(key)}: {exc}") from None

    kind = values["gap.kind"]
    required = {"single": ("gap.L",), "double": ("gap.L1", "gap.L2", "gap.d")}.get(kind, ())
    for key in required:
        if values[key] is None:
            raise ConfigError(f"{where('gap.kind')}: gap.kind={kind} requires {key}")
    scale = 1.0
    if values["gap.units"] == "lstar" and kind != "none":
        try:
            scale = steady_state.critical_length(params)
        except ValueError as exc:
            raise ConfigError(f"{where('gap.units')}: gap.units=lstar needs a critical length ({exc})") from None
    try:
        if kind == "single":
            layout = GapLayout.single(values["gap.L"] * scale)
        elif kind == "double":
            layout = GapLayout.double(values["gap.L1"] * scale, values["gap.L2"] * scale, values["gap.d"] * scale)
        else:
            layout = GapLayout.none()
    except ValueError as exc:
        raise ConfigError(f"{where('gap.kind')}: {exc}") from None

    x_min = values["x_min"] if values["x_min"] is not None else values["front_x"] - 20.0
    x_max = values["x_max"] if values["x_max"] is not None else max(layout.right_edge + 30.0, 30.0)
    try:
        solver = SolverConfig(
            dx=values["dx"], dt=values["dt"], x_min=x_min, x_max=x_max, t_end=values["t_end"],
            boundary=values["boundary"], mode=values["mode"],
        )
        solver.check_layout(layout)
    except ValueError as exc:
        culprit = next((k for k in ("dx", "dt", "x_min", "x_max", "t_end") if k in str(exc) and k in lines), "dx")
        raise ConfigError(f"{where(culprit)}: {exc}") from None
    for key in ("t_cap", "sweep.d_max", "sweep.d_step"):
        if not values[key] > 0:
            raise ConfigError(f"{where(key)}: {key} must be positive")
    if not 0 < values["bisect.lo"] < values["bisect.hi"]:
        raise ConfigError(f"{where('bisect.hi')}: need 0 < bisect.lo < bisect.hi")
    if values["front_x"] > -10.0 and kind != "none":
        raise ConfigError(f"{where('front_x')}: front_x must be at least 10 units left of the gap")

    return Scenario(
        params=params, layout=layout, solver=solver, experiment=values["experiment"],
        output_dir=Path(values["out"]), values=values, lines=lines,
    )


# --------------------------------------------------------------------------
# experiments


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def write_summary(path, record):
    with open(path, "w") as fh:
        for key, value in record.items():
            fh.write(f"{key}={_fmt(value)}\n")


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _base_record(sc):
    p = sc.params
    return {"experiment": sc.experiment, "alpha": p.alpha, "beta": p.beta, "s_b": p.s_b}


def _exp_classify(sc, out):
    cls = classify(sc.params)
    rec = _base_record(sc)
    rec.update(kind=cls.kind, F1=cls.F1)
    if cls.a is not None:
        rec["a"] = cls.a
    if cls.b is not None:
        rec["b"] = cls.b
    if cls.reason:
        rec["reason"] = cls.reason.replace("=", ":")
    return rec


def _exp_critical_length(sc, out):
    geo = steady_state.gap_geometry(sc.params)
    rec = _base_record(sc)
    rec.update(b=geo.b, F1=geo.F1, L0=geo.L0, L_star=geo.Lstar, L_fold=geo.L_fold, L_lin=geo.L_lin)
    return rec


def _gapless(sc):
    v = sc.values
    length = max(sc.solver.x_max - sc.solver.x_min, 120.0) if v["x_min"] is not None else 120.0
    return wave_analysis.measure_gapless_speed(
        sc.params, dx=sc.solver.dx, dt=sc.solver.dt, mode=sc.solver.mode, length=length, t_end=sc.solver.t_end,
    )


def _exp_wave_speed(sc, out):
    rec = _base_record(sc)
    cls = classify(sc.params)
    if cls.is_bistable:
        rec["c_scalar"] = wave_analysis.scalar_wave_speed(sc.params)
    diag, traj = _gapless(sc)
    rec.update(mode=sc.solver.mode, c=diag.speed, residual=diag.residual, lambda_fit=diag.lambda_fit, mu_fit=diag.mu_fit)
    diag.write_csv(out / "front_positions.csv")
    z, s, u = wave_analysis.wave_profile(traj.final, sc.params)
    write_csv(out / "wave_profile.csv", ("x", "s", "u"), zip(z, s, u))
    return rec


def _exp_decay_rates(sc, out):
    rec = _base_record(sc)
    c = sc.values["c"]
    if c is None:
        diag, _ = _gapless(sc)
        c = diag.speed
        rec.update(lambda_fit=diag.lambda_fit, mu_fit=diag.mu_fit)
    rates = wave_analysis.decay_rates(c, sc.params)
    rec.update(c=rates.c, k=rates.k, **{"lambda": rates.lam, "mu": rates.mu})
    rows = [("zero", r.real, r.imag) for r in rates.roots_zero] + [("one", r.real, r.imag) for r in rates.roots_one]
    write_csv(out / "roots.csv", ("equilibrium", "re", "im"), rows)
    return rec


def _trial(sc, layout, solver=None):
    solver = solver or sc.solver
    return wave_analysis.run_gap_trial(sc.params, layout, solver, front_x=sc.values["front_x"], t_cap=sc.values["t_cap"])


def _exp_simulate(sc, out):
    trial = _trial(sc, sc.layout)
    rec = _base_record(sc)
    rec.update(gap_kind=sc.layout.kind, gap_total=sc.layout.total_length, mode=sc.solver.mode,
               verdict=trial.verdict, t_final=trial.t_final)
    trial.trajectory.write_probes_csv(out / "probes.csv")
    trial.trajectory.final.write_csv(out / "final.csv")
    if trial.trajectory.warnings:
        rec["boundary_warning"] = "true"
    return rec


def _exp_bisect_gap(sc, out):
    geo = steady_state.gap_geometry(sc.params)
    lo, hi = sc.values["bisect.lo"] * geo.Lstar, sc.values["bisect.hi"] * geo.Lstar
    res = wave_analysis.bisect_numerical_lstar(
        sc.params, (lo, hi), dx=sc.solver.dx, dt=sc.solver.dt, mode=sc.solver.mode,
        t_end=sc.solver.t_end, t_cap=sc.values["t_cap"],
    )
    rec = _base_record(sc)
    rec.update(mode=sc.solver.mode, dx=sc.solver.dx, L_num=res.L_num, L_lo=res.lo, L_hi=res.hi,
               L_star=geo.Lstar, L_fold=geo.L_fold, diff_star=abs(res.L_num - geo.Lstar),
               diff_fold=abs(res.L_num - geo.L_fold))
    write_csv(out / "bisection.csv", ("L", "verdict", "t_final"), res.probes)
    return rec


def _exp_split_gap(sc, out):
    if sc.layout.kind != "double":
        raise ConfigError("split-gap needs gap.kind=double (gap.d is the first separation)")
    L1, L2 = sc.layout.L1, sc.layout.L2
    step, d_max = sc.values["sweep.d_step"], sc.values["sweep.d_max"]
    n = int(np.floor(d_max / step + 1e-9))
    ds = [round(i * step, 12) for i in range(n + 1)]
    geo = steady_state.gap_geometry(sc.params)
    rows = []
    for d in ds:
        layout = GapLayout.double(L1, L2, d)
        solver = replace(sc.solver, x_max=max(sc.solver.x_max, layout.right_edge + 30.0))
        trial = _trial(sc, layout, solver)
        analytic = "n/a"
        if L1 + L2 < geo.Lstar:
            analytic = steady_state.double_gap_subsolution_check(L1, L2, d, sc.params).kind
        rows.append((d, trial.verdict, analytic, trial.t_final))
        log.info("split-gap d=%g verdict=%s", d, trial.verdict)
    write_csv(out / "split_gap.csv", ("d", "verdict", "analytic", "t_final"), rows)
    verdicts = [r[1] for r in rows]
    rec = _base_record(sc)
    rec.update(L1=L1, L2=L2, L_star=geo.Lstar, L_fold=geo.L_fold, n_points=len(rows),
               n_propagated=verdicts.count(wave_analysis.PROPAGATED),
               n_blocked=verdicts.count(wave_analysis.BLOCKED),
               n_undecided=verdicts.count(wave_analysis.UNDECIDED),
               all_propagated=all(v == wave_analysis.PROPAGATED for v in verdicts))
    return rec


def _exp_steady_profile(sc, out):
    if sc.layout.kind != "single":
        raise ConfigError("steady-profile needs gap.kind=single")
    L = sc.layout.L
    rec = _base_record(sc)
    if sc.values["steady.kind"] == "symmetric":
        prof = steady_state.symmetric_profile(L, sc.params)
        rec.update(z=prof.meta["z"])
    else:
        prof = steady_state.build_blocking_profile(L, sc.params, branch=sc.values["steady.branch"])
        m = prof.match
        rec.update(branch=m.branch, A=m.A, B=m.B, entry=m.entry, exit=m.exit, exit_slope=m.exit_slope)
    rec.update(L=L, kind=sc.values["steady.kind"], residual=prof.max_residual(), junction_mismatch=prof.junction_mismatch())
    x = sc.solver.grid()
    write_csv(out / "profile.csv", ("x", "s"), zip(x, prof(x)))
    return rec


RUNNERS = {
    "classify": _exp_classify,
    "wave-speed": _exp_wave_speed,
    "critical-length": _exp_critical_length,
    "simulate": _exp_simulate,
    "bisect-gap": _exp_bisect_gap,
    "split-gap": _exp_split_gap,
    "decay-rates": _exp_decay_rates,
    "steady-profile": _exp_steady_profile,
}


def run_experiment(scenario):
    """Run the scenario's experiment, write ``summary.txt`` and its CSVs; returns the summary record."""
    out = scenario.output_dir
    out.mkdir(parents=True, exist_ok=True)
    record = RUNNERS[scenario.experiment](scenario, out)
    write_summary(out / "summary.txt", record)
    return record


def main(argv=None):
    parser = argparse.ArgumentParser(prog="crimefront", description=__doc__.splitlines()[0])
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, help="flat key=value file")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    overrides = {"experiment": args.experiment}
    if args.out:
        overrides["out"] = args.out
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        scenario = parse_config(text, overrides)
    except (OSError, UnicodeDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        record = run_experiment(scenario)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for key, value in record.items():
        print(f"{key}={_fmt(value)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
