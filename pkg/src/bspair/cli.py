"""Command-line driver: JSON configs in, JSON reports and CSV tables out.

    bspair classify|split|witness|theorem9 --config cfg.json --out dir [--refine N] [--seed S]

Exit codes: classify returns 0/1/2 for BS/NOT_BS/INDETERMINATE; the other
commands return 0 when every certificate passes and 1 otherwise.  Invalid
configs exit with 3.  BSPAIR_WORKERS sets the worker count for the parallel
parts (circle integrals of the disc-chain split).
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dbar import CutDensity, dbar_residual, polar_grid, write_field_csv
from .errors import BsPairError, ConfigError
from .scenarios import (
    SCENARIOS,
    chain_bound_certificates,
    circle_bound_check,
    f1_growth,
    graph_from_spec,
    pole_catalog_function,
    right_half_probe,
    scenario,
    scenario_test_function,
    split_report,
    theorem9_split,
)
from .splitter import SOLVERS, export_split, split, verify_split
from .witness import blowup_slope, witness_family, write_family_csv

COMMANDS = ("classify", "split", "witness", "theorem9")
EXIT_CONFIG = 3

DEFAULT_GRID = {
    "levels": 3,
    "factor": 256.0,
    "r_max": None,
    "h_fd": 1e-3,
    "probe_n": 8,
    "n_r": 16,
    "n_theta": 12,
    "dump_n": 24,
}
DEFAULT_TOL = {
    "identity": 1e-10,
    "cr": 1e-4,
    "plateau_growth": 0.10,
    "dbar": 0.05,
    "theorem9": 1e-3,
    "slope_rel": 0.2,
    "sum_ratio": 4.0,
    "rotundity_var": 0.01,
    "growth_ratio": 1.2,
}
DEFAULT_WITNESS = {
    "schedule": "ANGLE",
    "phi1": {"kind": "power", "c": 1.0, "p": 2.0},
    "phi2": {"kind": "power", "c": 2.0, "p": 2.0},
    "b": 0.125,
    "n_min": 3,
    "n_max": 13,
    "k": 3.0,
}
DEFAULT_THEOREM9 = {"N": None, "Y": 1e4, "smooth": 1.0, "weights": None, "k": 10.0, "n_random": 50}


def _merge(defaults: dict, given: dict | None, section: str) -> dict:
    given = dict(given or {})
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")
    out = copy.deepcopy(defaults)
    out.update(given)
    return out


@dataclass
class ScenarioConfig:
    """A runnable configuration: scenario, solver, grids, tolerances, outputs."""

    scenario: str
    params: dict = field(default_factory=dict)
    solver: str | None = None
    solver_options: dict = field(default_factory=dict)
    test_function: dict | None = None
    grid: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_GRID))
    tolerances: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_TOL))
    witness: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_WITNESS))
    theorem9: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_THEOREM9))
    classify: dict = field(default_factory=dict)
    output: dict = field(default_factory=lambda: {"prefix": "run"})
    seed: int | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "scenario" not in data:
            raise ConfigError("config needs a 'scenario' name")
        cfg = cls(
            scenario=str(data["scenario"]).upper(),
            params=dict(data.get("params") or {}),
            solver=data.get("solver"),
            solver_options=dict(data.get("solver_options") or {}),
            test_function=data.get("test_function"),
            grid=_merge(DEFAULT_GRID, data.get("grid"), "grid"),
            tolerances=_merge(DEFAULT_TOL, data.get("tolerances"), "tolerances"),
            witness=_merge(DEFAULT_WITNESS, data.get("witness"), "witness"),
            theorem9=_merge(DEFAULT_THEOREM9, data.get("theorem9"), "theorem9"),
            classify=dict(data.get("classify") or {}),
            output=dict(data.get("output") or {"prefix": "run"}),
            seed=data.get("seed"),
        )
        cfg.check_schema()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}") from None

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def check_schema(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if self.solver is not None and self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}; choose from {SOLVERS}")
        for key, val in self.tolerances.items():
            if not (isinstance(val, (int, float)) and val > 0):
                raise ConfigError(f"tolerance {key} must be positive")
        if int(self.grid["levels"]) < 2:
            raise ConfigError("grid.levels must be at least 2")
        for key in ("factor", "h_fd"):
            if not self.grid[key] > 0:
                raise ConfigError(f"grid.{key} must be positive")
        if self.seed is not None and not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")

    def build(self):
        """Resolve the scenario bundle (validates graphs and parameters)."""
        return scenario(self.scenario, self.params)


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from None
    return ScenarioConfig.from_json(text)


def worker_count() -> int:
    raw = os.environ.get("BSPAIR_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"BSPAIR_WORKERS must be an integer, got {raw!r}") from None
    return max(1, n)


def _provenance(cfg: ScenarioConfig, command: str) -> dict:
    return {"command": command, "config_hash": cfg.config_hash(), "version": __version__, "seed": cfg.seed, "workers": worker_count()}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if hasattr(obj, "value") and hasattr(obj, "name"):  # enums
        return obj.value
    return obj


# --------------------------------------------------------------------------
# commands


def cmd_classify(cfg: ScenarioConfig) -> tuple[dict, int]:
    sc = cfg.build()
    dec = sc.classify(**cfg.classify)
    report = {
        "verdict": dec.verdict.value,
        "expected": sc.expected.value if sc.expected else None,
        "evidence": dec.evidence,
        "meta": {"classify_options": cfg.classify},
    }
    return report, dec.exit_code


def cmd_split(cfg: ScenarioConfig, out: Path) -> tuple[dict, int]:
    sc = cfg.build()
    if sc.cf is None:
        raise ConfigError(f"scenario {sc.name} has no cutting function: no bounded split is constructed")
    solver = cfg.solver or sc.solver
    options = {**sc.solver_options, **cfg.solver_options}
    g, tol = cfg.grid, cfg.tolerances
    f = scenario_test_function(sc, cfg.test_function)
    R = sc.cf.R
    sr = split(f, sc.cf, solver, s1=sc.s1, s2=sc.s2, **options)
    n = int(g["probe_n"])
    x, y = np.meshgrid(np.linspace(-R, R, n), np.linspace(R / (4 * n), R, n))
    probe = (x + 1j * y).ravel()
    diag = verify_split(sr, probe, h=g["h_fd"], r_max=g["r_max"], levels=int(g["levels"]), factor=g["factor"])
    rho = CutDensity(f, sc.cf)
    corridor = polar_grid(R / 64, R, int(g["n_r"]), int(g["n_theta"]))
    res = dbar_residual(sr.u, rho, corridor, g["h_fd"], avoid=np.concatenate([sc.s1, sc.s2]))
    checks = {
        "identity": diag["identity_residual"] <= tol["identity"],
        "analytic_f1": diag["cr_residual_f1_off_S1"] <= tol["cr"],
        "analytic_f2": diag["cr_residual_f2_off_S2"] <= tol["cr"],
        "bounded_f1": diag["plateau"]["f1"]["max_growth"] < tol["plateau_growth"],
        "bounded_f2": diag["plateau"]["f2"]["max_growth"] < tol["plateau_growth"],
        "dbar_residual": res.relative <= tol["dbar"],
    }
    status = "PASS" if all(checks.values()) else "FAIL"
    prefix = out / cfg.output.get("prefix", "run")
    m = int(g["dump_n"])
    dump = polar_grid(R / 256, R, m, m).ravel()
    sr.diagnostics = diag
    export_split(sr, dump, str(prefix))
    report = {
        "status": status,
        "checks": {k: ("PASS" if v else "FAIL") for k, v in checks.items()},
        "solver": solver,
        "solver_options": options,
        "diagnostics": diag,
        "dbar": {**res.to_dict(), "grid": {"kind": "polar", "r": [R / 64, R], "n_r": g["n_r"], "n_theta": g["n_theta"]}},
        "meta": {"grid": g, "tolerances": tol, "probe": {"kind": "rect", "n": n}, "dumps": [f"{prefix.name}_{k}.csv" for k in ("f1", "f2", "u")]},
    }
    return report, 0 if status == "PASS" else 1


def cmd_witness(cfg: ScenarioConfig, out: Path) -> tuple[dict, int]:
    w, tol = cfg.witness, cfg.tolerances
    b = float(w["b"])
    phi1, phi2 = graph_from_spec(w["phi1"], b=b), graph_from_spec(w["phi2"], b=b)
    ns = np.arange(int(w["n_min"]), int(w["n_max"]) + 1)
    xs = b * 2.0 ** -ns.astype(float)
    rows = witness_family(w["schedule"], phi1, phi2, xs, k=float(w["k"]))
    slope = blowup_slope(rows)
    target = 1 / (2 * np.pi)
    sums = np.array([r["sum_scan"] for r in rows])
    rots = np.array([r["rotundity"] for r in rows])
    checks = {
        "blowup_lower_bound": all(r["phi1_at_A"] >= r["lower_bound"] for r in rows),
        "blowup_slope": abs(slope - target) <= tol["slope_rel"] * target,
        "bounded_sum": float(sums.max() / sums.min()) <= tol["sum_ratio"],
        "rotundity": float((rots.max() - rots.min()) / rots.min()) < tol["rotundity_var"],
    }
    path = out / f"{cfg.output.get('prefix', 'run')}_family.csv"
    write_family_csv(path, rows)
    report = {
        "status": "PASS" if all(checks.values()) else "FAIL",
        "checks": {k: ("PASS" if v else "FAIL") for k, v in checks.items()},
        "slope": slope,
        "slope_target": target,
        "sum_ratio": float(sums.max() / sums.min()),
        "rotundity_min": float(rots.min()),
        "rotundity_variation": float((rots.max() - rots.min()) / rots.min()),
        "family": rows,
        "meta": {"witness": w, "tolerances": tol, "family_csv": path.name},
    }
    return report, 0 if report["status"] == "PASS" else 1


def cmd_theorem9(cfg: ScenarioConfig, out: Path, refine: int = 3) -> tuple[dict, int]:
    sc = cfg.build()
    if sc.chain is None:
        raise ConfigError("theorem9 needs the DISC_CHAIN scenario")
    t9, g, tol = cfg.theorem9, cfg.grid, cfg.tolerances
    chain = sc.chain
    f = pole_catalog_function(chain, weights=t9["weights"], smooth=t9["smooth"])
    cs = theorem9_split(f, chain, N=t9["N"], Y=float(t9["Y"]), workers=worker_count())
    probe = right_half_probe(chain, int(g["n_r"]), int(g["n_theta"]))
    rep = split_report(cs, probe, tol["theorem9"])
    # Cauchy-sequence check: residual shrinks as N and Y grow together
    levels = []
    for lev in range(refine):
        N = max(1, cs.N >> (refine - 1 - lev))
        Y = float(t9["Y"]) / 10.0 ** (refine - 1 - lev)
        levels.append({"N": N, "Y": Y, "identity_residual": split_report(theorem9_split(f, chain, N=N, Y=Y), probe, tol["theorem9"])["identity_residual"]})
    res = [lv["identity_residual"] for lv in levels]
    rng = np.random.default_rng(cfg.seed)
    z = rng.uniform(-1, 1, 8 * int(t9["n_random"])) + 1j * rng.uniform(-1, 1, 8 * int(t9["n_random"]))
    z = z[~chain.contains(z)][: int(t9["n_random"])]
    bound = circle_bound_check(f, chain, z)
    growth = f1_growth(cs)
    x, y = np.meshgrid(np.linspace(-1, 1, 41), np.linspace(-1, 1, 41))
    cert = chain_bound_certificates(chain, x + 1j * y, k=float(t9["k"]))
    checks = {
        "identity": rep["status"] == "PASS",
        "cauchy_sequence": bool(np.all(np.diff(res) < 0)),
        "circle_bound": bound["holds"],
        "f1_log_growth": growth["ratio"] <= tol["growth_ratio"],
        "distance_bound": cert["distance_bound_holds"] and cert["left_bound_holds"],
        "tail_summable": True,
    }
    prefix = out / cfg.output.get("prefix", "run")
    vals = cs.evaluate(probe)
    for key in ("f1", "f_plus", "f_minus"):
        write_field_csv(f"{prefix}_{key}.csv", probe, vals[key])
    report = {
        "status": "PASS" if all(checks.values()) else "FAIL",
        "checks": {k: ("PASS" if v else "FAIL") for k, v in checks.items()},
        "split": rep,
        "refinement": levels,
        "circle_bound": {**bound, "points": int(z.size)},
        "f1_growth": growth,
        "certificates": cert,
        "meta": {"theorem9": t9, "grid": g, "tolerances": tol, "probe": {"kind": "polar right half-plane", "n": int(probe.size)}},
    }
    return report, 0 if report["status"] == "PASS" else 1


def run(command: str, cfg: ScenarioConfig, out, refine: int | None = None) -> tuple[dict, int]:
    """Run one command, write ``<prefix>_<command>.json`` into ``out`` and return (report, exit code)."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if refine is not None:
        if refine < 2:
            raise ConfigError("--refine needs at least 2 levels")
        cfg = dataclasses.replace(cfg, grid={**cfg.grid, "levels": int(refine)})
    t0 = time.perf_counter()
    if command == "classify":
        report, code = cmd_classify(cfg)
    elif command == "split":
        report, code = cmd_split(cfg, out)
    elif command == "witness":
        report, code = cmd_witness(cfg, out)
    elif command == "theorem9":
        report, code = cmd_theorem9(cfg, out, int(cfg.grid["levels"]))
    else:
        raise ConfigError(f"unknown command {command!r}")
    report["provenance"] = _provenance(cfg, command)
    report["config"] = cfg.to_dict()
    report["runtime_s"] = time.perf_counter() - t0
    report["exit_code"] = code
    path = out / f"{cfg.output.get('prefix', 'run')}_{command}.json"
    path.write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True))
    return report, code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bspair", description="Bounded separation of singularities.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON scenario config")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--refine", type=int, default=None, help="number of refinement levels (overrides grid.levels)")
    parser.add_argument("--seed", type=int, default=None, help="seed for randomised probes (recorded in the report)")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        report, code = run(args.command, cfg, args.out, args.refine)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except BsPairError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    summary = report.get("verdict") or report.get("status")
    print(f"{args.command}: {summary} (exit {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
