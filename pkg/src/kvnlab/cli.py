"""
Command line entry point.

    kvnlab run <experiment> [--config FILE] [--out DIR] [key=value | --key value ...]
    kvnlab verify <report_dir> --golden FILE
    kvnlab golden <report_dir> --out FILE [--rel-tol R] [--abs-tol A]

Exit codes: 0 success, 2 invalid input or data, 3 a numerical check failed.
"""
from __future__ import annotations

import argparse
import math
import sys
import warnings
from dataclasses import dataclass, fields, asdict
from pathlib import Path

import numpy as np

from .errors import KvnlabError, ParameterError
from .experiments import (CommutatorWarning, PhaseDressing, TwoSlitConfig, commutator_residuals,
                          commutator_test_family, gaussian_free_experiment, pure_vs_mixed_equivalence,
                          superselection_phase_invariance, two_slit_grid, two_slit_kvn,
                          two_slit_kvn_grid, two_slit_qm)
from .kvn import HamiltonianSpec, gaussian_phase_space, free_gaussian_moments as kvn_free_moments
from .measurement import nsm_phi_kvn, nsm_x_qm, two_level_closed_form, two_level_experiment
from .numerics import Grid1D, Grid2D, RealField1D
from .quantum import free_gaussian_moments as qm_free_moments, gaussian_packet
from .report import (EXIT_INVALID, EXIT_OK, EXIT_TOLERANCE, ExperimentReport, GoldenReport, make_golden,
                     verify_report)

EXPERIMENTS = ("twolevel", "nsm-qm", "nsm-kvn", "twoslit", "superselection", "gaussian-free", "commutator")


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(" ", "").split(",") if v]


def _ints(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


@dataclass
class RunConfig:
    """Flat run configuration; ``None`` means "use the experiment default"."""

    experiment: str | None = None
    out: str | None = None
    n: int | None = None
    box: float | None = None
    n_p: int | None = None
    p_box: float | None = None
    a: float | None = None
    b: float | None = None
    p_i: float | None = None
    tau: float | None = None
    omega_tau: list | None = None
    hbar: float | None = None
    mass: float | None = None
    seed: int | None = None
    steps: int | None = None
    hamiltonian: str | None = None
    omega: float | None = None
    kvn_b: float | None = None
    min_qm_minima: int | None = None
    dressings: int | None = None
    n_sweep: list | None = None

    def resolved(self) -> "RunConfig":
        if self.experiment not in EXPERIMENTS:
            raise ParameterError(f"experiment: unknown value {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        values = dict(COMMON_DEFAULTS)
        values.update(DEFAULTS[self.experiment])
        values.update({k: v for k, v in asdict(self).items() if v is not None})
        if values.get("out") is None:
            values["out"] = str(Path("kvnlab-out") / self.experiment)
        cfg = RunConfig(**values)
        cfg.validate()
        return cfg

    def validate(self):
        for name in ("box", "p_box", "a", "b", "hbar", "mass", "kvn_b", "omega"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise ParameterError(f"{name}: must be finite and > 0, got {v}")
        for name in ("n", "n_p"):
            v = getattr(self, name)
            if v is not None and (v < 8 or v & (v - 1)):
                raise ParameterError(f"{name}: must be a power of two >= 8, got {v}")
        for name in ("p_i", "tau"):
            v = getattr(self, name)
            if v is not None and not math.isfinite(v):
                raise ParameterError(f"{name}: must be finite, got {v}")
        if self.tau is not None and self.tau < 0:
            raise ParameterError(f"tau: must be >= 0, got {self.tau}")
        if self.omega_tau is not None and (not self.omega_tau or not all(map(math.isfinite, self.omega_tau))):
            raise ParameterError("omega_tau: needs at least one finite value")
        if self.seed is not None and self.seed < 0:
            raise ParameterError(f"seed: must be >= 0, got {self.seed}")
        if self.steps is not None and self.steps < 1:
            raise ParameterError(f"steps: must be >= 1, got {self.steps}")
        if self.dressings is not None and self.dressings < 1:
            raise ParameterError(f"dressings: must be >= 1, got {self.dressings}")
        if self.min_qm_minima is not None and self.min_qm_minima < 0:
            raise ParameterError(f"min_qm_minima: must be >= 0, got {self.min_qm_minima}")
        if self.hamiltonian is not None and self.hamiltonian not in ("free", "harmonic"):
            raise ParameterError(f"hamiltonian: must be 'free' or 'harmonic', got {self.hamiltonian!r}")
        if self.n_sweep is not None:
            if len(self.n_sweep) < 2:
                raise ParameterError("n_sweep: needs at least two sizes")
            for v in self.n_sweep:
                if v < 8 or v & (v - 1):
                    raise ParameterError(f"n_sweep: {v} is not a power of two >= 8")


FIELD_TYPES = {
    "experiment": str, "out": str, "n": int, "box": float, "n_p": int, "p_box": float,
    "a": float, "b": float, "p_i": float, "tau": float, "omega_tau": _floats, "hbar": float,
    "mass": float, "seed": int, "steps": int, "hamiltonian": str, "omega": float,
    "kvn_b": float, "min_qm_minima": int, "dressings": int, "n_sweep": _ints,
}
assert set(FIELD_TYPES) == {f.name for f in fields(RunConfig)}

COMMON_DEFAULTS = {"hbar": 1.0, "mass": 1.0, "seed": 0}

DEFAULTS = {
    "twolevel": {"omega_tau": [k * np.pi / 64 for k in range(129)]},
    "nsm-qm": {"n": 4096, "box": 40.0, "a": 1.0, "p_i": 1.0, "tau": 1.0},
    "nsm-kvn": {"n": 256, "box": 12.0, "n_p": 256, "p_box": 8.0, "a": 1.0, "b": 1.0, "p_i": 1.0,
                "tau": 2.0, "hamiltonian": "free", "omega": 1.0},
    "twoslit": {"n": 65536, "box": 504.0, "n_p": 64, "kvn_b": 0.05, "tau": 1.0, "min_qm_minima": 6},
    "superselection": {"n": 128, "box": 10.0, "n_p": 128, "p_box": 10.0, "a": 1.0, "b": 1.0,
                       "p_i": 1.0, "dressings": 20},
    "gaussian-free": {"n": 4096, "box": 40.0, "n_p": 1024, "p_box": 16.0, "a": 1.0, "b": 1.0,
                      "p_i": 1.0, "tau": 1.0},
    "commutator": {"n": 512, "box": 10.0, "n_sweep": [256, 512, 1024]},
}


def _convert(key, raw):
    name = key.strip().replace("-", "_")
    if name not in FIELD_TYPES:
        raise ParameterError(f"{name}: unknown configuration key")
    try:
        return name, FIELD_TYPES[name](raw.strip() if isinstance(raw, str) else raw)
    except ValueError as exc:
        raise ParameterError(f"{name}: cannot parse {raw!r} ({exc})") from None


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; lists are comma separated."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        name, val = _convert(key, value)
        out[name] = val
    return out


def parse_overrides(tokens) -> dict:
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.startswith("--"):
            body = tok[2:]
            if "=" in body:
                key, value = body.split("=", 1)
            else:
                if i + 1 >= len(tokens):
                    raise ParameterError(f"{body.replace('-', '_')}: missing value")
                key, value = body, tokens[i + 1]
                i += 1
        elif "=" in tok:
            key, value = tok.split("=", 1)
        else:
            raise ParameterError(f"unexpected argument {tok!r}")
        name, val = _convert(key, value)
        out[name] = val
        i += 1
    return out


def build_config(experiment, config_file=None, out=None, overrides=()) -> RunConfig:
    values = {}
    if config_file is not None:
        try:
            text = Path(config_file).read_text()
        except OSError as exc:
            raise ParameterError(f"config: cannot read {config_file} ({exc.strerror})") from None
        values.update(parse_config_text(text))
    values.update(parse_overrides(list(overrides)))
    if experiment is not None:
        if values.get("experiment", experiment) != experiment:
            raise ParameterError(f"experiment: config says {values['experiment']!r}, command line says {experiment!r}")
        values["experiment"] = experiment
    if out is not None:
        values["out"] = out
    return RunConfig(**values).resolved()


# -- runners -----------------------------------------------------------------

def _grid(cfg):
    return Grid1D(cfg.n, -cfg.box, cfg.box)


def _grid2(cfg):
    return Grid2D(Grid1D(cfg.n, -cfg.box, cfg.box), Grid1D(cfg.n_p, -cfg.p_box, cfg.p_box))


def run_twolevel(cfg):
    report = ExperimentReport("twolevel")
    rows = []
    worst = 0.0
    for wt in cfg.omega_tau:
        p_pure, p_mixed = two_level_experiment(wt)
        c_pure, c_mixed = two_level_closed_form(wt)
        worst = max(worst, abs(p_pure - c_pure), abs(p_mixed - c_mixed))
        rows.append((wt, p_pure, p_mixed, c_pure, c_mixed))
    report.tables["two_level"] = (("omega_tau", "p_pure", "p_mixed", "p_pure_closed", "p_mixed_closed"), rows)
    p_pure, p_mixed = two_level_experiment(np.pi / 4)
    c_pure, c_mixed = two_level_closed_form(np.pi / 4)
    report.moments["omega_tau_pi_4"] = {"p_pure": p_pure, "p_mixed": p_mixed, "gap": p_mixed - p_pure}
    report.closed_form["omega_tau_pi_4"] = {"p_pure": c_pure, "p_mixed": c_mixed, "gap": c_mixed - c_pure}
    if len(cfg.omega_tau) == 1:
        report.moments["p_pure"], report.moments["p_mixed"] = rows[0][1], rows[0][2]
        report.closed_form["p_pure"], report.closed_form["p_mixed"] = rows[0][3], rows[0][4]
    gap_err = abs((p_mixed - p_pure) - (c_mixed - c_pure))
    report.record_error(worst)
    report.record_error(gap_err)
    report.diagnostics["sweep_max_abs_error"] = worst
    report.check("sweep_matches_closed_form", worst < 1e-12)
    report.check("gap_at_pi_4", gap_err < 1e-10)
    return report


def run_nsm_qm(cfg):
    state = gaussian_packet(_grid(cfg), cfg.a, cfg.p_i, cfg.hbar, cfg.mass)
    report = nsm_x_qm(state, cfg.tau)
    mean, var = qm_free_moments(cfg.a, cfg.p_i, cfg.tau, cfg.hbar, cfg.mass)
    report.closed_form["x_tau_pure"] = {"mean": mean, "var": var}
    sim = report.moments["x_tau_pure"]
    report.diagnostics["x_tau_pure_moment_abs_error"] = max(abs(sim["mean"] - mean), abs(sim["var"] - var))
    return report


def run_nsm_kvn(cfg):
    state = gaussian_phase_space(_grid2(cfg), cfg.a, cfg.b, cfg.p_i, cfg.mass)
    h = HamiltonianSpec.free(cfg.mass) if cfg.hamiltonian == "free" else HamiltonianSpec.harmonic(cfg.mass, cfg.omega)
    report = nsm_phi_kvn(state, cfg.tau, h, cfg.steps)
    if cfg.hamiltonian == "free":
        closed = kvn_free_moments(cfg.a, cfg.b, cfg.p_i, cfg.tau, cfg.mass)
        report.closed_form["phi_tau"] = closed
        errs = [abs(report.moments[f"phi_tau_{br}"][k] - v) for br in ("pure", "mixed") for k, v in closed.items()]
        report.diagnostics["phi_tau_moment_abs_error"] = max(errs)
    return report


def run_twoslit(cfg):
    slits = TwoSlitConfig(hbar=cfg.hbar, mass=cfg.mass, t_final=cfg.tau, kvn_b=cfg.kvn_b,
                          min_qm_minima=cfg.min_qm_minima)
    qm = two_slit_qm(slits, two_slit_grid(slits, cfg.n, cfg.box))
    kvn = two_slit_kvn(slits, two_slit_kvn_grid(slits, n_p=cfg.n_p))
    report = ExperimentReport("twoslit")
    for prefix, sub in (("qm", qm), ("kvn", kvn)):
        report.params[prefix] = sub.params
        for attr in ("densities", "moments", "closed_form", "diagnostics", "checks"):
            getattr(report, attr).update({f"{prefix}_{k}": v for k, v in getattr(sub, attr).items()})
        report.record_error(sub.max_abs_error)
    return report


def _superselection_observables():
    return [
        lambda q, p: q, lambda q, p: p, lambda q, p: q * q, lambda q, p: p * p,
        lambda q, p: q * p, lambda q, p: q * q * p * p, lambda q, p: np.cos(q),
        lambda q, p: np.sin(q * p), lambda q, p: np.exp(-q * q), lambda q, p: 0.5 * p * p + 0.5 * q * q,
    ]


def run_superselection(cfg):
    grid = _grid2(cfg)
    state = gaussian_phase_space(grid, cfg.a, cfg.b, cfg.p_i, cfg.mass)
    obs = _superselection_observables()
    dressings = [PhaseDressing("linear", {"kq": 3.0, "kp": -2.0}),
                 PhaseDressing("quadratic", {"cqq": 1.5, "cqp": -0.7, "cpp": 2.0})]
    dressings += [PhaseDressing("random-smooth", {}, cfg.seed + k) for k in range(max(0, cfg.dressings - 2))]
    rows = []
    for k, d in enumerate(dressings):
        rows.append((k, superselection_phase_invariance(state, d, obs)))
    phase_dev = max(r[1] for r in rows)
    marginal = RealField1D(grid.q_axis, np.sqrt(np.abs(state.values) ** 2 @ np.full(grid.p_axis.n, grid.p_axis.spacing)))
    rng = np.random.default_rng(cfg.seed)
    diag = rng.standard_normal(64)
    weights = rng.random(64)
    mix_dev = max(pure_vs_mixed_equivalence(marginal, [lambda x: x, lambda x: x * x, np.cos]),
                  pure_vs_mixed_equivalence(np.sqrt(weights), [diag, np.ones(64)]))
    report = ExperimentReport("superselection", params={"a": cfg.a, "b": cfg.b, "p_i": cfg.p_i,
                                                        "seed": cfg.seed, "dressings": len(dressings),
                                                        "observables": len(obs)})
    report.tables["phase_invariance"] = (("dressing", "max_rel_deviation"), rows)
    report.diagnostics.update({"phase_invariance_max_deviation": phase_dev, "pure_vs_mixed_max_deviation": mix_dev})
    report.closed_form["deviation"] = 0.0
    report.record_error(phase_dev)
    report.record_error(mix_dev)
    report.check("phase_invariance", phase_dev < 1e-12)
    report.check("pure_vs_mixed", mix_dev < 1e-12)
    return report


def run_gaussian_free(cfg):
    return gaussian_free_experiment(cfg.a, cfg.b, cfg.p_i, cfg.tau, cfg.hbar, cfg.mass,
                                    qm_grid=_grid(cfg), kvn_grid=_grid2(cfg))


def run_commutator(cfg):
    report = ExperimentReport("commutator", params={"n": cfg.n, "box": cfg.box, "n_sweep": cfg.n_sweep})
    rows = []
    for n in sorted(set(cfg.n_sweep) | {cfg.n}):
        g = Grid1D(n, -cfg.box, cfg.box)
        with warnings.catch_warnings():
            # skipped states show up as a lower states_used count
            warnings.simplefilter("ignore", CommutatorWarning)
            res = commutator_residuals(g, commutator_test_family(g))
        kept = [r for r in res if r is not None]
        rows.append((n, max(kept) if kept else math.nan, len(kept)))
    by_n = {r[0]: r[1] for r in rows}
    report.tables["residuals"] = (("n", "max_residual", "states_used"), rows)
    report.diagnostics["residual"] = by_n[cfg.n]
    report.closed_form["residual"] = 0.0
    report.record_error(by_n[cfg.n])
    sweep = [by_n[n] for n in sorted(cfg.n_sweep)]
    report.check("residual_below_1e-8", by_n[cfg.n] < 1e-8)
    report.check("residual_decreases_with_n", all(a > b for a, b in zip(sweep, sweep[1:])))
    return report


RUNNERS = {
    "twolevel": run_twolevel, "nsm-qm": run_nsm_qm, "nsm-kvn": run_nsm_kvn, "twoslit": run_twoslit,
    "superselection": run_superselection, "gaussian-free": run_gaussian_free, "commutator": run_commutator,
}


def run(cfg: RunConfig):
    """Run one resolved configuration; returns ``(exit_code, report, out_dir)``."""
    report = RUNNERS[cfg.experiment](cfg)
    report.params["config"] = {k: v for k, v in asdict(cfg).items() if v is not None}
    out = report.write(cfg.out)
    return (EXIT_OK if report.passed else EXIT_TOLERANCE), report, out


# -- entry point -------------------------------------------------------------

def _parser():
    parser = argparse.ArgumentParser(prog="kvnlab", description="Quantum and KvN measurement experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment and write a report directory")
    p_run.add_argument("experiment", choices=EXPERIMENTS)
    p_run.add_argument("--config", help="key = value configuration file")
    p_run.add_argument("--out", help="report directory")
    p_ver = sub.add_parser("verify", help="compare a report directory with a golden file")
    p_ver.add_argument("report_dir")
    p_ver.add_argument("--golden", required=True)
    p_gold = sub.add_parser("golden", help="freeze a report directory into a golden file")
    p_gold.add_argument("report_dir")
    p_gold.add_argument("--out", required=True)
    p_gold.add_argument("--rel-tol", type=float, default=1e-9)
    p_gold.add_argument("--abs-tol", type=float, default=1e-12)
    return parser


def _err(msg):
    print(f"kvnlab: {msg}", file=sys.stderr)


def main(argv=None) -> int:
    parser = _parser()
    args, extra = parser.parse_known_args(argv)
    if args.command != "run" and extra:
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    try:
        if args.command == "run":
            cfg = build_config(args.experiment, args.config, args.out, extra)
            code, report, out = run(cfg)
            for name in report.failed_checks():
                _err(f"check failed: {name}")
            print(out)
            return code
        if args.command == "golden":
            if not (Path(args.report_dir) / "report.json").exists():
                _err(f"missing {Path(args.report_dir) / 'report.json'}")
                return EXIT_INVALID
            make_golden(args.report_dir, args.rel_tol, args.abs_tol).save(args.out)
            return EXIT_OK
        try:
            golden = GoldenReport.load(args.golden)
        except (OSError, ValueError, KeyError) as exc:
            _err(f"cannot read golden file {args.golden}: {exc}")
            return EXIT_INVALID
        code, messages = verify_report(args.report_dir, golden)
        for m in messages:
            _err(m)
        return code
    except KvnlabError as exc:
        _err(str(exc))
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
