"""
Experiment reports and golden-file regression.

A report directory holds ``report.json`` plus one CSV per density
(``rho_<var>_t<t>.csv``) and per table. A golden file pins scalar values with
explicit per-scalar tolerances and the SHA-256 of every CSV.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import write_density_csv

__all__ = ["ExperimentReport", "GoldenReport", "make_golden", "verify_report",
           "EXIT_OK", "EXIT_INVALID", "EXIT_TOLERANCE"]

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_TOLERANCE = 3


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, (bool, np.bool_)):
        return
    elif isinstance(obj, (int, float, np.integer, np.floating)):
        out[prefix] = float(obj)


@dataclass
class ExperimentReport:
    """Densities, moments, closed-form references and pass/fail checks of one run."""

    experiment: str
    params: dict = field(default_factory=dict)
    densities: dict = field(default_factory=dict)
    moments: dict = field(default_factory=dict)
    closed_form: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    max_abs_error: float = 0.0

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.checks.values())

    def failed_checks(self):
        return [k for k, v in self.checks.items() if not v]

    def check(self, name, ok):
        self.checks[name] = bool(ok)
        return bool(ok)

    def record_error(self, err):
        self.max_abs_error = max(self.max_abs_error, float(err))

    def scalars(self) -> dict:
        out = {}
        _flatten("moments", self.moments, out)
        _flatten("closed_form", self.closed_form, out)
        _flatten("diagnostics", self.diagnostics, out)
        out["max_abs_error"] = float(self.max_abs_error)
        return out

    def to_dict(self, density_paths=None, table_paths=None):
        return _jsonable({
            "experiment": self.experiment,
            "params": self.params,
            "densities": density_paths or {},
            "tables": table_paths or {},
            "moments": self.moments,
            "closed_form": self.closed_form,
            "checks": self.checks,
            "diagnostics": self.diagnostics,
            "max_abs_error": self.max_abs_error,
            "passed": self.passed,
        })

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        dpaths = {}
        for name, dens in sorted(self.densities.items()):
            fname = f"rho_{name}.csv"
            write_density_csv(out / fname, dens)
            dpaths[name] = fname
        tpaths = {}
        for name, (columns, rows) in sorted(self.tables.items()):
            fname = f"{name}.csv"
            data = np.asarray(rows, dtype=float)
            np.savetxt(out / fname, data, fmt="%.17g", delimiter=",",
                       header=",".join(columns), comments="# columns: ")
            tpaths[name] = fname
        text = json.dumps(self.to_dict(dpaths, tpaths), indent=2, sort_keys=True)
        (out / "report.json").write_text(text + "\n")
        return out


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class GoldenReport:
    experiment: str
    scalars: dict  # name -> {"value": float, "tol": float}
    checksums: dict  # csv file name -> sha256

    @classmethod
    def load(cls, path):
        data = json.loads(Path(path).read_text())
        return cls(data["experiment"], data["scalars"], data.get("checksums", {}))

    def save(self, path):
        payload = {"experiment": self.experiment, "scalars": self.scalars,
                   "checksums": self.checksums}
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _report_scalars(report_json):
    out = {}
    for key in ("moments", "closed_form", "diagnostics"):
        _flatten(key, report_json.get(key, {}), out)
    out["max_abs_error"] = float(report_json.get("max_abs_error", 0.0))
    return out


def make_golden(report_dir, rel_tol: float = 1e-9, abs_tol: float = 1e-12) -> GoldenReport:
    """Freeze a report directory: every scalar gets ``tol = abs_tol + rel_tol * |value|``."""
    report_dir = Path(report_dir)
    data = json.loads((report_dir / "report.json").read_text())
    scalars = {k: {"value": v, "tol": abs_tol + rel_tol * abs(v)}
               for k, v in sorted(_report_scalars(data).items())}
    files = sorted(list(data.get("densities", {}).values()) + list(data.get("tables", {}).values()))
    checksums = {f: _sha256(report_dir / f) for f in files}
    return GoldenReport(data["experiment"], scalars, checksums)


def verify_report(report_dir, golden: GoldenReport):
    """Compare a report directory against a golden file.

    Returns ``(exit_code, messages)``: 0 on match, 2 when files are missing,
    3 when a scalar or checksum disagrees.
    """
    report_dir = Path(report_dir)
    messages = []
    report_path = report_dir / "report.json"
    if not report_path.exists():
        return EXIT_INVALID, [f"missing {report_path}"]
    missing = [f for f in golden.checksums if not (report_dir / f).exists()]
    if missing:
        return EXIT_INVALID, [f"missing density file {f}" for f in missing]
    data = json.loads(report_path.read_text())
    if data.get("experiment") != golden.experiment:
        messages.append(f"experiment {data.get('experiment')!r} != golden {golden.experiment!r}")
    scalars = _report_scalars(data)
    for name, spec in golden.scalars.items():
        if name not in scalars:
            messages.append(f"scalar {name} missing from report")
            continue
        diff = abs(scalars[name] - spec["value"])
        if not diff <= spec["tol"]:
            messages.append(f"scalar {name}: {scalars[name]!r} vs golden {spec['value']!r} "
                            f"(|diff| {diff:.3g} > tol {spec['tol']:.3g})")
    for fname, digest in golden.checksums.items():
        if _sha256(report_dir / fname) != digest:
            messages.append(f"checksum mismatch for {fname}")
    return (EXIT_TOLERANCE if messages else EXIT_OK), messages
