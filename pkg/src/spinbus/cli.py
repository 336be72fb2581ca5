"""``spinbus`` command line: batch experiments with CSV/JSON output.

    spinbus <experiment> [--config FILE] [overrides...]

Experiments: gap, jeff, fidelity-table, scaling, transfer, validate.
Exit codes: 0 success, 1 usage/config error, 2 solver failure, 3 validation failure.
"""
import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from .basis import sector_dim, sector_of_total_sz
from .dynamics import NoTransferChannelError, PropagationError, effective_transfer, transfer_experiment
from .effective import (
    DeflationError,
    SolverStagnationError,
    jeff_gap_splitting,
    jeff_resolvent,
    jeff_sum_over_states,
)
from .eigensolve import (
    AmbiguousMultipletError,
    ConvergenceError,
    dense_spectrum,
    ground_multiplet,
    lanczos_lowest,
)
from .hamiltonian import DENSE_LIMIT, HamiltonianOperator
from .model import Connection, LadderSpec, attach_qubits, build_ladder, predicted_ground_spin
from .observables import bell_weights_formula, bell_weights_projector, fidelity_report, reduce_to_qubits

log = logging.getLogger("spinbus")

EXPERIMENTS = ("gap", "jeff", "fidelity-table", "scaling", "transfer", "validate")
EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VALIDATION = 0, 1, 2, 3
SOLVER_ERRORS = (
    ConvergenceError,
    SolverStagnationError,
    DeflationError,
    AmbiguousMultipletError,
    PropagationError,
    NoTransferChannelError,
    LookupError,
)

TABLE_DISTANCES = (4, 5, 6, 7, 8, 10)
TABLE_J = (10.0, 20.0, 40.0)
DEFAULTS = {
    "gap": {"n_rungs": [2, 4, 6, 8], "j_medium": [1.0]},
    "jeff": {"n_rungs": [2, 3], "j_medium": [10.0]},
    "fidelity-table": {"n_rungs": [d - 1 for d in TABLE_DISTANCES], "j_medium": list(TABLE_J)},
    "scaling": {"n_rungs": [d - 1 for d in TABLE_DISTANCES], "j_medium": list(TABLE_J)},
    "transfer": {"n_rungs": [2], "j_medium": [40.0]},
    "validate": {"n_rungs": [1, 2, 3, 4], "j_medium": [10.0]},
}

COMMON = ["experiment", "n_rungs", "distance", "j_medium", "j_probe", "connection", "tol", "seed", "version"]
COLUMNS = {
    "gap": COMMON + ["ground_energy", "ground_spin", "first_excited_spin", "gap", "gap_over_j", "n_matvec", "error"],
    "jeff": COMMON + ["j_eff_sum_over_states", "j_eff_resolvent", "j_eff_gap_splitting", "epsilon_resolvent",
                      "t_ll", "t_rr", "t_lr", "solver_iterations", "n_matvec", "error"],
    "fidelity-table": COMMON + ["state", "j", "m", "energy", "c11_sq", "c10_sq", "c1m1_sq", "c00_sq",
                                "proj_c11_sq", "proj_c10_sq", "proj_c1m1_sq", "proj_c00_sq", "s2",
                                "residual", "n_matvec", "error"],
    "scaling": COMMON + ["j_eff_gap_splitting", "j_eff_resolvent", "jeff_L_J", "ground_spin", "n_matvec", "error"],
    "transfer": COMMON + ["time", "fidelity_b", "effective_fidelity", "j_eff_used", "t_star", "peak_fidelity",
                          "norm_drift", "energy_drift", "n_matvec", "error"],
    "validate": ["check", "measured", "tolerance", "passed", "detail", "version"],
}


class ConfigError(ValueError):
    pass


def _as_list(value, cast):
    if isinstance(value, (list, tuple)):
        items = [cast(v) for v in value]
    else:
        items = [cast(value)]
    if not items:
        raise ConfigError("parameter lists must be non-empty")
    return items


@dataclass
class ExperimentConfig:
    experiment: str
    n_rungs: list = None
    j_medium: list = None
    j_probe: float = 1.0
    connection: str = "auto-triplet"
    tol: float = 1e-10
    max_iter: int = 5000
    seed: int = 0
    out: str = None
    format: str = "json"
    t_max: float = None
    n_samples: int = 200
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        defaults = DEFAULTS[self.experiment]
        try:
            self.n_rungs = _as_list(self.n_rungs if self.n_rungs is not None else defaults["n_rungs"], int)
            self.j_medium = _as_list(self.j_medium if self.j_medium is not None else defaults["j_medium"], float)
            self.j_probe = float(self.j_probe)
            self.tol = float(self.tol)
            self.max_iter = int(self.max_iter)
            self.seed = int(self.seed)
            self.n_samples = int(self.n_samples)
            self.workers = int(self.workers)
            self.t_max = None if self.t_max is None else float(self.t_max)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if self.connection != "auto-triplet":
            try:
                self.connection = Connection.parse(self.connection).value
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if not self.tol > 0:
            raise ConfigError("tol must be > 0")
        if self.max_iter < 1 or self.n_samples < 2 or self.workers < 1:
            raise ConfigError("max_iter, workers must be >= 1 and n_samples >= 2")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if any(n < 1 for n in self.n_rungs) or any(not j > 0 for j in self.j_medium) or self.j_probe < 0:
            raise ConfigError("n_rungs >= 1, j_medium > 0 and j_probe >= 0 are required")

    @classmethod
    def from_mapping(cls, data):
        data = dict(data)
        if "distance" in data:
            data["n_rungs"] = [int(d) - 1 for d in _as_list(data.pop("distance"), int)]
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def specs(self):
        """Grid points in (n_rungs, j_medium) order."""
        out = []
        for n in self.n_rungs:
            conn = Connection.auto_triplet(n) if self.connection == "auto-triplet" else self.connection
            for j in self.j_medium:
                out.append(LadderSpec(n, j, self.j_probe, conn))
        return out


def _echo(cfg, spec):
    rec = {"experiment": cfg.experiment}
    rec.update(spec.as_dict())
    rec.update({"tol": cfg.tol, "seed": cfg.seed, "version": __version__})
    return rec


# --------------------------------------------------------------------------
# per-point workers (module level so they pickle)
# --------------------------------------------------------------------------

def _point_gap(cfg, spec):
    rep = ground_multiplet(build_ladder(spec.n_rungs, spec.j_medium), tol=cfg.tol, seed=cfg.seed,
                           max_matvec=cfg.max_iter)
    return [{
        "ground_energy": rep.ground_energy,
        "ground_spin": rep.ground_spin,
        "first_excited_spin": rep.first_excited_spin,
        "gap": rep.gap,
        "gap_over_j": rep.gap / spec.j_medium,
        "n_matvec": sum(r.n_matvec for r in rep.sectors.values()),
    }]


def _sos_feasible(spec):
    return sector_dim(2 * spec.n_rungs, 0) <= DENSE_LIMIT


def _point_jeff(cfg, spec):
    res = jeff_resolvent(spec, solver_tol=cfg.tol, seed=cfg.seed, max_iter=cfg.max_iter)
    gap = jeff_gap_splitting(spec, tol=cfg.tol, seed=cfg.seed, max_matvec=cfg.max_iter)
    rec = {
        "j_eff_sum_over_states": jeff_sum_over_states(spec).j_eff if _sos_feasible(spec) else None,
        "j_eff_resolvent": res.j_eff,
        "j_eff_gap_splitting": gap.j_eff,
        "epsilon_resolvent": res.epsilon,
        "t_ll": res.t_ll,
        "t_rr": res.t_rr,
        "t_lr": res.t_lr,
        "solver_iterations": sum(res.diagnostics["solver_iterations"]),
        "n_matvec": gap.diagnostics["n_matvec"],
    }
    return [rec]


def _point_fidelity(cfg, spec):
    rows = fidelity_report(spec, tol=cfg.tol, seed=cfg.seed, max_matvec=cfg.max_iter)
    out = []
    for row in rows:
        rec = row.as_record()
        for key in list(spec.as_dict()):
            rec.pop(key, None)
        rec.pop("seed", None)
        out.append(rec)
    return out


def _point_scaling(cfg, spec):
    gap = jeff_gap_splitting(spec, tol=cfg.tol, seed=cfg.seed, max_matvec=cfg.max_iter)
    try:
        resolvent = jeff_resolvent(spec, solver_tol=cfg.tol, seed=cfg.seed, max_iter=cfg.max_iter).j_eff
    except SOLVER_ERRORS as exc:
        log.warning("resolvent route failed at %s: %s", spec, exc)
        resolvent = None
    return [{
        "j_eff_gap_splitting": gap.j_eff,
        "j_eff_resolvent": resolvent,
        "jeff_L_J": gap.j_eff * spec.distance * spec.j_medium,
        "ground_spin": gap.diagnostics["ground_spin"],
        "n_matvec": gap.diagnostics["n_matvec"],
    }]


def _point_transfer(cfg, spec):
    curve = transfer_experiment(spec, t_max=cfg.t_max, n_samples=cfg.n_samples, tol=cfg.tol, seed=cfg.seed)
    eff = effective_transfer(curve.j_eff_used, curve.times)
    summary = {
        "j_eff_used": curve.j_eff_used,
        "t_star": curve.t_star,
        "peak_fidelity": curve.peak_fidelity,
        "norm_drift": curve.norm_drift,
        "energy_drift": curve.energy_drift,
        "n_matvec": curve.diagnostics["n_matvec"],
    }
    return [dict({"time": float(t), "fidelity_b": float(f), "effective_fidelity": float(e)}, **summary)
            for t, f, e in zip(curve.times, curve.fidelity_b, eff)]


POINT_RUNNERS = {
    "gap": _point_gap,
    "jeff": _point_jeff,
    "fidelity-table": _point_fidelity,
    "scaling": _point_scaling,
    "transfer": _point_transfer,
}


def _run_point(args):
    cfg, spec = args
    head = _echo(cfg, spec)
    try:
        rows = POINT_RUNNERS[cfg.experiment](cfg, spec)
    except SOLVER_ERRORS as exc:
        return [dict(head, error=f"{type(exc).__name__}: {exc}")]
    return [dict(head, **row) for row in rows]


def run_grid(cfg):
    """Records for every grid point, ordered by grid index whatever the worker count."""
    jobs = [(cfg, spec) for spec in cfg.specs()]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_run_point, jobs))
    else:
        chunks = [_run_point(job) for job in jobs]
    return [rec for chunk in chunks for rec in chunk]


def run_scaling(cfg):
    return run_grid(cfg)


def run_fidelity_table(cfg):
    return run_grid(cfg)


# --------------------------------------------------------------------------
# validation battery
# --------------------------------------------------------------------------

def _check(name, measured, tolerance, detail="", compare=None):
    passed = bool(compare(measured, tolerance)) if compare else bool(measured <= tolerance)
    return {"check": name, "measured": float(measured), "tolerance": float(tolerance), "passed": passed,
            "detail": detail, "version": __version__}


def run_validate(cfg):
    """Small-system invariant battery; returns one record per check."""
    checks = []
    systems = [
        ("full N=2 TypeA", attach_qubits(LadderSpec(2, 10.0, 1.0, "TypeA"))),
        ("full N=2 TypeB", attach_qubits(LadderSpec(2, 10.0, 1.0, "TypeB"))),
        ("full N=3 TypeA", attach_qubits(LadderSpec(3, 10.0, 1.0, "TypeA"))),
        ("ladder 2x5", build_ladder(5, 1.0)),
    ]

    worst_eig, worst_res, worst_sym = 0.0, 0.0, 0.0
    rng = np.random.default_rng(cfg.seed)
    for _, graph in systems:
        op = HamiltonianOperator(graph, sector_of_total_sz(graph.n_sites, 0))
        dense = dense_spectrum(op, 4)
        try:
            lz = lanczos_lowest(op, 4, tol=cfg.tol, seed=cfg.seed, max_matvec=cfg.max_iter)
        except ConvergenceError:
            worst_eig = worst_res = math.inf
            continue
        worst_eig = max(worst_eig, float(np.max(np.abs(lz.eigenvalues - dense.eigenvalues))))
        for lam, vec in zip(lz.eigenvalues, lz.eigenvectors.T):
            r = np.linalg.norm(op.apply(vec) - lam * vec) / max(1.0, abs(lam))
            worst_res = max(worst_res, float(r))
        for _ in range(10):
            u, v = rng.standard_normal(op.dim), rng.standard_normal(op.dim)
            asym = abs(u @ op.apply(v) - op.apply(u) @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
            worst_sym = max(worst_sym, float(asym))
    checks.append(_check("lanczos_vs_dense", worst_eig, 1e-10, "max |lambda_lanczos - lambda_dense|"))
    checks.append(_check("residual_contract", worst_res, 1e-10, "max |Hv - lv| / max(1,|l|)"))
    checks.append(_check("operator_symmetry", worst_sym, 1e-12, "|<u|Hv> - <Hu|v>| / |u||v|"))

    worst_route = 0.0
    for n in (1, 2, 3):
        for conn in Connection:
            spec = LadderSpec(n, 10.0, 1.0, conn)
            a = jeff_sum_over_states(spec).j_eff
            b = jeff_resolvent(spec, solver_tol=min(cfg.tol, 1e-10), seed=cfg.seed).j_eff
            worst_route = max(worst_route, abs(a - b) / abs(a))
    checks.append(_check("route_concordance", worst_route, 1e-8, "|SOS - resolvent| / |j_eff|"))

    plaq = max(
        abs(jeff_sum_over_states(LadderSpec(2, 10.0, 1.0, "TypeB")).j_eff + 0.025) / 0.025,
        abs(jeff_sum_over_states(LadderSpec(2, 10.0, 1.0, "TypeA")).j_eff - 1 / 30) / (1 / 30),
    )
    checks.append(_check("plaquette_analytics", plaq, 1e-8, "-J0^2/4J diagonal, +J0^2/3J adjacent"))

    mismatches = 0
    for n in (1, 2, 3, 4):
        for conn in Connection:
            spec = LadderSpec(n, 10.0, 1.0, conn)
            if ground_multiplet(spec, seed=cfg.seed).ground_spin != predicted_ground_spin(spec):
                mismatches += 1
    checks.append(_check("lieb_parity", mismatches, 0, "ground spin vs sublattice imbalance, N=1..4 x types"))

    worst_bell = 0.0
    for n, conn in ((2, "TypeB"), (3, "TypeA"), (3, "TypeB")):
        spec = LadderSpec(n, 10.0, 1.0, conn)
        graph = attach_qubits(spec)
        basis = sector_of_total_sz(graph.n_sites, 0)
        spectrum = dense_spectrum(HamiltonianOperator(graph, basis), 4)
        a, b = spec.qubit_sites
        for vec in spectrum.eigenvectors.T:
            f = np.array(bell_weights_formula(vec, basis, a, b).as_tuple())
            p = np.array(bell_weights_projector(reduce_to_qubits(vec, basis, a, b)).as_tuple())
            worst_bell = max(worst_bell, float(np.max(np.abs(f - p))))
    checks.append(_check("projector_vs_formula", worst_bell, 1e-10, "Bell weights, two routes"))
    return checks


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _clean(value):
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def format_records(records, columns, fmt):
    rows = [{c: _clean(rec.get(c)) for c in columns} for rec in records]
    if fmt == "json":
        return json.dumps(rows, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="spinbus", description="Two qubits coupled through a Heisenberg spin ladder.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="flat JSON config file")
    p.add_argument("--n-rungs", type=int, nargs="+", dest="n_rungs")
    p.add_argument("--distance", type=int, nargs="+", help="qubit distance L = n_rungs + 1")
    p.add_argument("--j", type=float, nargs="+", dest="j_medium")
    p.add_argument("--j0", type=float, dest="j_probe")
    p.add_argument("--connection", help="TypeA, TypeB or auto-triplet")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--seed", type=int)
    p.add_argument("--t-max", type=float, dest="t_max")
    p.add_argument("--n-samples", type=int, dest="n_samples")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args):
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a flat JSON object")
    data["experiment"] = args.experiment
    for key in ("n_rungs", "distance", "j_medium", "j_probe", "connection", "tol", "max_iter", "seed",
                "t_max", "n_samples", "workers", "out", "format"):
        value = getattr(args, key)
        if value is not None:
            if key == "distance":
                data.pop("n_rungs", None)
            elif key == "n_rungs":
                data.pop("distance", None)
            data[key] = value
    return ExperimentConfig.from_mapping(data)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"spinbus: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if cfg.experiment == "validate":
        records = run_validate(cfg)
        for rec in records:
            status = "PASS" if rec["passed"] else "FAIL"
            print(f"{status} {rec['check']}: measured {rec['measured']:.3e} (tolerance {rec['tolerance']:.1e})",
                  file=sys.stderr)
        code = EXIT_OK if all(r["passed"] for r in records) else EXIT_VALIDATION
    else:
        records = run_grid(cfg)
        code = EXIT_SOLVER if any(r.get("error") for r in records) else EXIT_OK

    text = format_records(records, COLUMNS[cfg.experiment], cfg.format)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
