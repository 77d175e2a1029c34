"""Run specifications, price files and deterministic result tables."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import exact, perturbation, semiclassical
from .errors import ParseError, PerturbationError, StateNotInSector, ValidationError
from .market import (
    BasisState,
    MarketConfig,
    PriceTrajectory,
    SectorKey,
    StateVector,
    enumerate_sector,
    free_energy,
    portfolio_value,
    validate_config,
)
from .operators import build_H

COMMANDS = ("basis", "evolve", "transition", "portfolio", "semiclassical", "compare")


@dataclass(frozen=True, eq=False)
class RunSpec:
    config: MarketConfig
    sector: SectorKey
    initial: BasisState
    trajectory: PriceTrajectory
    command: str
    params: dict = field(default_factory=dict)

    def to_dict(self):
        """Canonical JSON-ready form; loading it back gives an identical document."""
        cfg = self.config
        return {
            "traders": cfg.n_traders,
            "share_types": cfg.n_share_types,
            "lambda": cfg.lam,
            "omega_share": cfg.omega_share.tolist(),
            "omega_cash": cfg.omega_cash.tolist(),
            "coupling": cfg.coupling.tolist(),
            "sector": {"shares": list(self.sector.total_shares), "cash": self.sector.total_cash},
            "initial": _state_dict(self.initial),
            "trajectory": {"h": self.trajectory.step, "prices": self.trajectory.prices.tolist()},
            "command": {"name": self.command, **self.params},
        }

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _state_dict(s):
    return {"shares": [list(r) for r in s.shares], "cash": list(s.cash)}


def _get(doc, key, where=None):
    try:
        return doc[key]
    except (KeyError, TypeError):
        raise ParseError("missing field", where or key) from None


def _state(doc, where):
    if not isinstance(doc, dict):
        raise ParseError("expected an object with 'shares' and 'cash'", where)
    return BasisState(_get(doc, "shares", f"{where}.shares"), _get(doc, "cash", f"{where}.cash"))


def _time_grid(params, horizon):
    if "t" in params:
        ts = [float(params["t"])]
    elif "time_grid" in params:
        grid = params["time_grid"]
        if not isinstance(grid, list) or len(grid) != 3:
            raise ParseError("time_grid must be [t_start, t_end, n_points]", "command.time_grid")
        t0, t1, n = float(grid[0]), float(grid[1]), int(grid[2])
        if n < 1:
            raise ValidationError("time_grid needs at least one point")
        ts = np.linspace(t0, t1, n).tolist()
    else:
        ts = [horizon]
    return [min(max(t, 0.0), horizon) for t in ts]


_REQUIRED = {
    "basis": (),
    "evolve": (),
    "transition": ("final",),
    "portfolio": ("trader",),
    "semiclassical": ("trader",),
    "compare": ("final",),
}


def parse_run_spec(doc) -> RunSpec:
    """Validate an already-decoded JSON document."""
    if not isinstance(doc, dict):
        raise ParseError("top level must be a JSON object")
    n = _get(doc, "traders")
    l = _get(doc, "share_types")
    try:
        cfg = MarketConfig(_get(doc, "omega_share"), _get(doc, "omega_cash"),
                           _get(doc, "coupling"), _get(doc, "lambda"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ParseError(str(exc), "config") from None
    if (cfg.n_traders, cfg.n_share_types) != (n, l):
        raise ValidationError(f"declared {n} traders x {l} share types, arrays give "
                              f"{cfg.n_traders} x {cfg.n_share_types}")
    validate_config(cfg)
    sec = _get(doc, "sector")
    sector = SectorKey(tuple(_get(sec, "shares", "sector.shares")), _get(sec, "cash", "sector.cash"))
    if len(sector.total_shares) != l:
        raise ValidationError("sector.shares needs one total per share type")
    initial = _state(_get(doc, "initial"), "initial")
    if initial.n_traders != n or initial.n_share_types != l:
        raise ValidationError("initial state has the wrong shape")
    if initial.key() != sector:
        raise ValidationError(f"initial state {initial} lies outside sector {sector}")
    traj = _get(doc, "trajectory")
    trajectory = PriceTrajectory(_get(traj, "h", "trajectory.h"), _get(traj, "prices", "trajectory.prices"))
    if trajectory.n_share_types != l:
        raise ValidationError(f"price table must have {l} columns")
    command = dict(_get(doc, "command"))
    name = command.pop("name", None)
    if name not in COMMANDS:
        raise ParseError(f"unknown command {name!r}; expected one of {', '.join(COMMANDS)}", "command.name")
    for key in _REQUIRED[name]:
        if key not in command:
            raise ValidationError(f"command '{name}' needs parameter '{key}'")
    if "final" in command:
        final = _state(command["final"], "command.final")
        if final.key() != sector:
            raise ValidationError(f"final state {final} lies outside sector {sector}")
    if "trader" in command and not 0 <= int(command["trader"]) < n:
        raise ValidationError(f"trader {command['trader']} out of range")
    return RunSpec(cfg, sector, initial, trajectory, name, command)


def load_run_spec(source) -> RunSpec:
    """Load a RunSpec from a path or from JSON text."""
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        text = Path(source).read_text()
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    return parse_run_spec(doc)


def load_price_csv(path, step) -> PriceTrajectory:
    """Read ``k,P_1,...,P_L`` rows into a trajectory with time of transaction ``step``."""
    text = Path(path).read_text()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError("empty price file", str(path))
    header = [c.strip() for c in rows[0]]
    if header[0] != "k" or len(header) < 2 or header[1:] != [f"P_{a}" for a in range(1, len(header))]:
        raise ParseError("header must read k,P_1,...,P_L", f"{path}:1")
    width = len(header)
    table = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise ParseError(f"expected {width} cells, got {len(row)}", f"{path}:{lineno}")
        cells = []
        for cell in row[1:]:
            try:
                cells.append(int(cell.strip()))
            except ValueError:
                raise ParseError(f"price {cell.strip()!r} is not an integer", f"{path}:{lineno}") from None
        table.append(cells)
    if not table:
        raise ParseError("no price rows", str(path))
    return PriceTrajectory(step, table)


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


@dataclass
class ResultRecord:
    command: str
    inputs_digest: str
    tables: dict
    diagnostics: dict = field(default_factory=dict)

    def manifest(self):
        return {
            "command": self.command,
            "inputs_digest": self.inputs_digest,
            "tables": {name: f"{name}.csv" for name in self.tables},
            "diagnostics": self.diagnostics,
        }


def _cplx(z):
    return [float(np.real(z)), float(np.imag(z))]


def _state_cols(prefix, n, l):
    return ([f"{prefix}n_{j}_{a}" for j in range(n) for a in range(l)]
            + [f"{prefix}k_{j}" for j in range(n)])


def _cmd_basis(spec, basis):
    cfg, traj = spec.config, spec.trajectory
    n, l = cfg.n_traders, cfg.n_share_types
    p0 = traj.prices_at(0.0)
    t = Table(["index"] + _state_cols("", n, l) + ["energy"] + [f"portfolio_{j}" for j in range(n)])
    for i, s in enumerate(basis.states):
        t.rows.append([i, *s.flat, free_energy(cfg, s), *(portfolio_value(s, p0, j) for j in range(n))])
    tables = {"basis": t}
    if spec.params.get("dump_matrices"):
        for k in range(traj.n_intervals):
            h = build_H(cfg, basis, traj, k)
            m = Table(["row", "col", "re", "im"], [[r, c, v.real, v.imag] for r, c, v in h.items()])
            tables[f"hamiltonian_{k}"] = m
    return tables, {"dimension": basis.dim}


def _cmd_evolve(spec, basis):
    cfg, traj = spec.config, spec.trajectory
    prop = exact.Propagator(cfg, basis, traj, StateVector.basis_vector(basis, spec.initial))
    amps = Table(["t", "index", "re", "im", "probability"])
    occ = Table(["t", "trader"] + [f"shares_{a}" for a in range(cfg.n_share_types)] + ["cash"])
    max_norm_err = 0.0
    for t in _time_grid(spec.params, traj.horizon):
        res = prop.propagate(t)
        a = res.psi_t.amplitudes
        max_norm_err = max(max_norm_err, abs(res.psi_t.norm() - 1))
        for i, z in enumerate(a):
            amps.rows.append([t, i, *_cplx(z), float(abs(z) ** 2)])
        for j in range(cfg.n_traders):
            shares, cash = exact.expectation_occupations(res, j)
            occ.rows.append([t, j, *shares.tolist(), cash])
    return {"amplitudes": amps, "occupations": occ}, {"dimension": basis.dim, "max_norm_error": max_norm_err}


def _orders(params):
    orders = params.get("orders", [1, 2])
    orders = [orders] if isinstance(orders, int) else list(orders)
    if any(int(o) < 1 for o in orders):
        raise ValidationError("orders must be positive integers")
    return sorted({int(o) for o in orders})


def _perturbative(spec, basis, final, t, order):
    """Transition probability at one perturbative order (truncated amplitude)."""
    cfg, traj = spec.config, spec.trajectory
    if order == 1:
        return perturbation.p1_transition(cfg, basis, traj, spec.initial, final, t)
    d = perturbation.dyson_coefficients(cfg, basis, traj, spec.initial, order, t)
    return float(d.probabilities()[basis.index_of(final)])


def _second_order_check(spec, basis, final, t):
    """Closed-form second-order coefficient next to the generic-order one, when one applies."""
    cfg, traj = spec.config, spec.trajectory
    closed = None
    if traj.is_constant():
        closed = perturbation.c2_constant(cfg, basis, spec.initial, final, traj.prices[0], t)
    elif traj.n_intervals == 3 and math.isclose(t, traj.horizon):
        closed = perturbation.c2_piecewise_M3(cfg, basis, traj, spec.initial, final, t)
    if closed is None:
        return {}
    dyson = perturbation.dyson_coefficients(cfg, basis, traj, spec.initial, 2, t).coeffs[2][basis.index_of(final)]
    return {"c2_closed_form": _cplx(closed), "c2_dyson": _cplx(dyson)}


def _cmd_transition(spec, basis, compare=False):
    cfg, traj = spec.config, spec.trajectory
    final = _state(spec.params["final"], "command.final")
    orders = _orders(spec.params)
    if final == spec.initial and 1 in orders:
        raise PerturbationError("first order is undefined for final == initial; request orders >= 2")
    ts = _time_grid(spec.params, traj.horizon)
    prop = exact.Propagator(cfg, basis, traj, StateVector.basis_vector(basis, spec.initial))
    j = basis.index_of(final)
    cols = ["t", "exact"]
    for o in orders:
        cols += [f"order_{o}"] + ([f"rel_err_{o}"] if compare else [])
    if compare:
        cols.append("validity")
    table = Table(cols)
    for t in ts:
        ex = float(abs(prop.amplitudes(t)[j]) ** 2)
        row = [t, ex]
        for o in orders:
            p = _perturbative(spec, basis, final, t, o)
            row.append(p)
            if compare:
                row.append(abs(p - ex) / ex if ex > 0 else (0.0 if p == 0 else math.inf))
        if compare:
            row.append(perturbation.validity_indicator(cfg, basis, traj, t))
        table.rows.append(row)
    if final != spec.initial:
        table.columns.append("c1_re")
        table.columns.append("c1_im")
        for row, t in zip(table.rows, ts):
            row += _cplx(perturbation.c1_coefficient(cfg, basis, traj, spec.initial, final, t))
    diag = {"dimension": basis.dim, "validity": perturbation.validity_indicator(cfg, basis, traj, max(ts))}
    diag.update(_second_order_check(spec, basis, final, max(ts)))
    if traj.is_constant() and final != spec.initial:
        g = perturbation.golden_rule_rate(cfg, basis, spec.initial, final, traj.prices[0])
        diag["golden_rule"] = {"rate": g.rate, "resonant": g.resonant, "delta_e": g.delta_e,
                               "h": g.h, "bound": None if math.isinf(g.bound) else g.bound}
    return {"compare" if compare else "transition": table}, diag


def _cmd_portfolio(spec, basis):
    cfg, traj = spec.config, spec.trajectory
    trader = int(spec.params["trader"])
    order = spec.params.get("order", "exact")
    table = Table(["t", "target", "probability"])
    for t in _time_grid(spec.params, traj.horizon):
        dist = perturbation.portfolio_distribution(cfg, basis, traj, spec.initial, trader, t, order)
        if "target" in spec.params:
            target = int(spec.params["target"])
            table.rows.append([t, target, perturbation.portfolio_transition_probability(
                cfg, basis, traj, spec.initial, trader, target, t, order)])
        else:
            table.rows.extend([t, v, p] for v, p in dist.items())
    pi0 = portfolio_value(spec.initial, traj.prices_at(0.0), trader)
    return {"portfolio": table}, {"dimension": basis.dim, "order": order, "initial_portfolio": pi0}


def _cmd_semiclassical(spec, basis):
    cfg, traj = spec.config, spec.trajectory
    trader = int(spec.params["trader"])
    l = cfg.n_share_types
    series = Table(["t"] + [f"delta_n_{a}" for a in range(l)] + ["delta_k", "portfolio", "sum_rule_residual"])
    for t in _time_grid(spec.params, traj.horizon):
        dn, dk = semiclassical.delta_occupations(cfg, spec.initial, traj, trader, t)
        pi = semiclassical.portfolio_evolution(cfg, spec.initial, traj, trader, t)
        res = semiclassical.sum_rule_residual(cfg, spec.initial, traj, trader, t)
        series.rows.append([t, *dn.tolist(), dk, pi, res])
    thetas = Table(["t", "j", "share", "theta0", "theta1_re", "theta1_im", "theta2_re", "theta2_im",
                    "theta3_re", "theta3_im", "M", "Mtilde"])
    p0 = traj.prices[0]
    for j in range(cfg.n_traders):
        for a in range(l):
            if j == trader or cfg.coupling[trader, j, a] == 0:
                continue
            w = semiclassical.pair_weight(spec.initial, p0[a], j, trader, a)
            ts = semiclassical.ThetaSet(cfg, traj, j, trader, a)
            for t in _time_grid(spec.params, traj.horizon):
                th = ts(t)
                thetas.rows.append([t, j, a, th.theta0, *_cplx(th.theta1), *_cplx(th.theta2),
                                    *_cplx(th.theta3), w.M, w.Mtilde])
    return {"semiclassical": series, "theta": thetas}, {"trader": trader}


def run(spec: RunSpec) -> ResultRecord:
    """Execute the command of ``spec``."""
    basis = enumerate_sector(spec.config, spec.sector)
    if spec.initial not in basis:
        raise StateNotInSector(f"initial state {spec.initial} not in sector")
    handlers = {
        "basis": _cmd_basis,
        "evolve": _cmd_evolve,
        "transition": _cmd_transition,
        "portfolio": _cmd_portfolio,
        "semiclassical": _cmd_semiclassical,
        "compare": lambda s, b: _cmd_transition(s, b, compare=True),
    }
    tables, diag = handlers[spec.command](spec, basis)
    return ResultRecord(spec.command, spec.digest(), tables, diag)


def write_result(record: ResultRecord, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, table in record.tables.items():
        (out / f"{name}.csv").write_text(table.to_csv())
    path = out / "manifest.json"
    path.write_text(json.dumps(record.manifest(), sort_keys=True, indent=2) + "\n")
    return path
