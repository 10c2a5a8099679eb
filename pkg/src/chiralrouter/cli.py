"""Scenario runner: TOML config in, CSV tables and a JSON manifest out.

    chiralrouter run scenarios/fig1_triangle.toml --output-dir out
    chiralrouter list [kind]
    chiralrouter validate scenarios/fig4_router.toml
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .atomic import router_transitions
from .fullmodel import (DecayModel, compensated, full_model_chirality, gamma_total,
                        optimize_geometry, router_model, run_router)
from .network import (CHAIN_MODELS, PulseProfile, chain_spectrum, chain_hamiltonian, propagate,
                      router_ends, router_network, scan_protocol, scan_router_protocol, transfer_result,
                      with_transfer_boundaries)
from .protocols import (BranchAmplitudes, ControlQubit, blockade_gate, blockade_leakage_bound,
                        enlarged_routing_map, full_routing_map, sender_receiver_pulses,
                        transfer_qubit)
from .triangle import (FluxTriangle, circulation_metric,
                       solve_flux_conditions, triangle_dynamics)
from .units import TWO_PI, mhz

EXIT_SCHEMA = 2
EXIT_PHYSICS = 3

REQUIRED = object()


class ConfigError(ValueError):
    """Schema violation; ``key`` names the offending dotted key."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class Key:
    name: str
    kind: str
    default: object
    doc: str
    choices: tuple = ()


def _k(name, kind, default, doc, choices=()):
    return Key(name, kind, default, doc, tuple(choices))


COMMON = (
    _k("kind", "str", REQUIRED, "scenario kind"),
    _k("title", "str", "", "free-text label copied to the manifest"),
    _k("output.csv_path", "str", None, "CSV path relative to --output-dir (default: <config stem>.csv)"),
)

_J = _k("coupling.J_2piMHz", "float", None,
        "chain coupling J; omitted means J = 1 rad/us, so times are in units of 1/J")
_PULSES = (
    _k("pulses.t_m_us", "float", None, "ramp duration t_m; omitted with T_us triggers a protocol scan"),
    _k("pulses.T_us", "float", None, "transfer time T"),
    _k("pulses.peak_2piMHz", "float", None, "peak boundary coupling (default: J)"),
)
_ATOMS = (
    _k("atoms.main.species", "str", "Rb", "species of atoms 1-3"),
    _k("atoms.main.n", "int", 70, "principal quantum number of the main atoms"),
    _k("atoms.aux.species", "str", "Cs", "species of atoms 4, 5"),
    _k("atoms.aux.n", "int", 71, "principal quantum number of the auxiliary atoms"),
)
_GEOMETRY = (
    _k("geometry.a_um", "float", 17.0, "distance between atoms 2 and 3"),
    _k("geometry.b_um", "float", REQUIRED, "distance from atoms 2, 3 to the auxiliary atom"),
    _k("geometry.c_um", "float", REQUIRED, "distance from atoms 2, 3 to atom 1"),
    _k("field.B_gauss", "float", REQUIRED, "magnetic field along z"),
)

SCHEMA = {
    "triangle": (
        _J,
        _k("triangle.gamma_tot_pi", "float", -0.5, "total flux phase in units of pi"),
        _k("triangle.mu_2piMHz", "list[float]", [0.0, 0.0, 0.0], "on-site shifts of sites 1-3"),
        _k("triangle.initial_site", "int", 1, "initially excited site", (1, 2, 3)),
        _k("time.periods", "float", 1.5, "window length in circulation periods"),
        _k("time.samples", "int", 301, "output time samples"),
    ),
    "chain_transfer": (
        _k("chain.N", "int", REQUIRED, "number of chain spins"),
        _k("chain.model", "str", "nearest_neighbor", "exchange range",
           CHAIN_MODELS),
        _J, *_PULSES,
        _k("sender.qubit", "list[complex]", [0.0, 1.0], "sender qubit (c0, c1); c1 enters the network"),
        _k("time.samples", "int", 201, "output time samples"),
    ),
    "router_abstract": (
        _k("router.arm_lengths", "list[int]", [1, 3, 5], "odd chain length on each side of the triangle"),
        _k("triangle.source", "str", "effective", "uniform triangle or the solved Rydberg triangle "
           "rescaled to |J| = J", ("uniform", "effective")),
        _k("triangle.gamma_tot_pi", "float", -0.5, "flux of the uniform triangle in units of pi"),
        _k("triangle.mu_over_J", "list[float]", [0.0, 0.0, 0.0], "on-site shifts of the uniform triangle"),
        _k("compensation.modes", "list[str]", ["off", "on"], "level-shift compensation runs",
           ("on", "off")),
        _J, *_PULSES,
        _k("time.samples", "int", 201, "samples of the per-run trajectories"),
        _k("output.trajectories", "bool", False, "also write one trajectory CSV per run"),
    ),
    "effective_solve": (
        _k("geometry.a_um", "float", 17.0, "distance between atoms 2 and 3"),
        *_ATOMS,
        _k("solver.aux_sign", "float", None, "side of atom 4 (+1 or -1); omitted tries both"),
        _k("solver.initial_b_um", "float", 9.4, "initial guess for b"),
        _k("solver.initial_c_um", "float", 10.0, "initial guess for c"),
        _k("solver.initial_detuning_2piMHz", "float", -100.0, "initial guess for Delta"),
        _k("solver.tol", "float", 1e-9, "residual tolerance"),
        _k("time.periods", "float", 1.5, "window of the effective dynamics in periods"),
        _k("time.samples", "int", 301, "output time samples"),
    ),
    "full_model": (
        *_GEOMETRY, *_ATOMS,
        _k("aux.active", "int", 4, "auxiliary atom present", (4, 5)),
        _k("time.periods", "float", 1.5, "window in effective circulation periods"),
        _k("time.samples", "int", 400, "output time samples"),
    ),
    "full_router": (
        *_GEOMETRY, *_ATOMS,
        _k("aux.active", "str", "4", "auxiliary atom in |->", ("4", "5", "superposition")),
        _k("control.alpha", "complex", 0.7071067811865476, "amplitude of |g>_4 (superposition only)"),
        _k("control.beta", "complex", 0.7071067811865476, "amplitude of |e>_4 (superposition only)"),
        _k("decay.temperature_K", "float", None, "use the default total rate at 0, 77 or 300 K"),
        _k("decay.gamma_tot_per_us", "float", None, "explicit total decay rate"),
        _k("compensation.enabled", "bool", True, "remove the dressed level shifts of atoms 1-3"),
        _k("pulses.t_m_us", "float", REQUIRED, "ramp duration t_m"),
        _k("pulses.T_us", "float", REQUIRED, "transfer time T"),
        _k("pulses.peak_2piMHz", "float", REQUIRED, "peak boundary coupling"),
        _k("time.samples", "int", 201, "output time samples"),
    ),
    "blockade": (
        _k("control.alpha", "complex", 1.0, "amplitude of |g>_4"),
        _k("control.beta", "complex", 0.0, "amplitude of |e>_4"),
        _k("blockade.mode", "str", "ideal", "perfect or finite blockade", ("ideal", "finite_blockade")),
        _k("blockade.V_2piMHz", "float", None, "interaction on |->_4|->_5 (finite mode)"),
        _k("blockade.omega_over_V", "list[float]", [0.2, 0.1, 0.05],
           "Rabi frequencies scanned (finite mode)"),
        _k("blockade.samples", "int", 2000, "time samples per pulse (finite mode)"),
    ),
    "spectrum": (
        _k("chain.N", "int", REQUIRED, "number of chain spins"),
        _k("chain.models", "list[str]", list(CHAIN_MODELS), "exchange ranges",
           CHAIN_MODELS),
        _k("chain.method", "str", "formula", "closed form or diagonalization",
           ("formula", "diagonalize")),
    ),
    "optimize": (
        _k("geometry.a_um", "float", 17.0, "distance between atoms 2 and 3"),
        _k("geometry.b_um", "float", None, "initial b (default: flux-condition solution)"),
        _k("geometry.c_um", "float", None, "initial c (default: flux-condition solution)"),
        _k("field.B_gauss", "float", None, "initial B (default: flux-condition solution)"),
        *_ATOMS,
        _k("optimize.objective", "str", "circulation_metric", "score maximized",
           ("circulation_metric", "dressed_flux")),
        _k("optimize.max_evaluations", "int", 500, "Nelder-Mead evaluation budget per start"),
        _k("optimize.restarts", "int", 0, "extra starts perturbed by +-5% with --seed"),
    ),
}

KINDS = tuple(SCHEMA)


def _flatten(table, prefix=""):
    out = {}
    for k, v in table.items():
        name = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, name + "."))
        else:
            out[name] = v
    return out


def _coerce(key, value):
    kind = key.kind
    name = key.name

    def num(x, what):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ConfigError(name, f"expected {what}, got {x!r}")
        return x

    def cplx(x):
        if isinstance(x, list):
            if len(x) != 2:
                raise ConfigError(name, f"complex values are [re, im], got {x!r}")
            return complex(num(x[0], "a number"), num(x[1], "a number"))
        return complex(num(x, "a number or [re, im]"))

    if kind == "str":
        if isinstance(value, (int, float)) and not isinstance(value, bool) and key.choices:
            value = str(value)
        if not isinstance(value, str):
            raise ConfigError(name, f"expected a string, got {value!r}")
        out = value
    elif kind == "int":
        if isinstance(num(value, "an integer"), float):
            raise ConfigError(name, f"expected an integer, got {value!r}")
        out = int(value)
    elif kind == "float":
        out = float(num(value, "a number"))
    elif kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(name, f"expected true or false, got {value!r}")
        out = value
    elif kind == "complex":
        out = cplx(value)
    elif kind.startswith("list["):
        if not isinstance(value, list):
            raise ConfigError(name, f"expected a list, got {value!r}")
        inner = Key(name, kind[5:-1], None, "", key.choices)
        return [_coerce(inner, v) for v in value]
    else:
        raise AssertionError(kind)
    if key.choices and out not in key.choices:
        raise ConfigError(name, f"{out!r} is not one of {list(key.choices)}")
    return out


def resolve(raw):
    """Validate a parsed TOML table; returns {dotted key: value} with defaults filled."""
    flat = _flatten(raw)
    kind = flat.get("kind")
    if kind is None:
        raise ConfigError("kind", f"missing; valid kinds: {', '.join(KINDS)}")
    if kind not in SCHEMA:
        raise ConfigError("kind", f"unknown kind {kind!r}; valid kinds: {', '.join(KINDS)}")
    keys = {k.name: k for k in COMMON + SCHEMA[kind]}
    for name in flat:
        if name not in keys:
            raise ConfigError(name, f"unknown key for kind {kind!r}")
    out = {}
    for name, key in keys.items():
        if name in flat:
            out[name] = _coerce(key, flat[name])
        elif key.default is REQUIRED:
            raise ConfigError(name, f"required for kind {kind!r}")
        else:
            out[name] = key.default
    if out.get("decay.temperature_K") is not None and out.get("decay.gamma_tot_per_us") is not None:
        raise ConfigError("decay.gamma_tot_per_us", "give either decay.temperature_K or "
                          "decay.gamma_tot_per_us, not both")
    return out


def load_config(path):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"{path}: {exc}") from None
    return resolve(raw)


def schema_markdown():
    """Schema reference, one table per kind (the content of docs/schema.md)."""
    lines = ["# Scenario schema", "",
             "Configs are TOML. Dotted names map to tables (`geometry.a_um` is `a_um` under",
             "`[geometry]`). Unknown keys are rejected. Physical units are part of each key:",
             "`_um` micrometres, `_gauss` Gauss, `_us` microseconds, `_2piMHz` angular",
             "frequency in units of 2pi x MHz, `_per_us` rates in 1/us. Complex values are",
             "numbers or `[re, im]` pairs.", "",
             "Keys shared by all kinds:", ""]
    lines += _key_table(COMMON)
    for kind in KINDS:
        lines += ["", f"## {kind}", ""] + _key_table(SCHEMA[kind])
    return "\n".join(lines) + "\n"


def _fmt_default(key):
    if key.default is REQUIRED:
        return "required"
    if key.default is None:
        return "-"
    return f"`{json.dumps(key.default) if not isinstance(key.default, complex) else key.default}`"


def _key_table(keys):
    rows = ["| key | type | default | description |", "|---|---|---|---|"]
    for k in keys:
        doc = k.doc + (f" (one of {', '.join(map(str, k.choices))})" if k.choices else "")
        rows.append(f"| `{k.name}` | {k.kind} | {_fmt_default(k)} | {doc} |")
    return rows


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.12g" % float(x)
    return str(x)


def write_table(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, complex):
        return [round(x.real, 12), round(x.imag, 12)]
    if isinstance(x, (np.floating, float)):
        return float("%.12g" % float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


@dataclass
class RunContext:
    config: dict
    csv_path: Path
    seed: int
    quiet: bool
    outputs: list

    def sibling(self, suffix):
        return self.csv_path.with_name(f"{self.csv_path.stem}_{suffix}.csv")

    def write(self, path, header, rows):
        self.outputs.append(str(write_table(path, header, rows)))

    def write_trajectory(self, path, traj):
        path.parent.mkdir(parents=True, exist_ok=True)
        traj.to_csv(path)
        self.outputs.append(str(path))

    def log(self, msg):
        if not self.quiet:
            print(msg)


def _J(cfg):
    v = cfg["coupling.J_2piMHz"]
    return 1.0 if v is None else mhz(v)


def _transitions(cfg):
    try:
        return router_transitions(cfg["atoms.main.species"], cfg["atoms.main.n"],
                                  cfg["atoms.aux.species"], cfg["atoms.aux.n"])
    except KeyError as exc:
        raise ConfigError("atoms", f"unknown species {exc}") from None


def _trajectory_rows(traj, labels):
    pops = np.column_stack([traj.population(l) for l in labels])
    return [[t, *p, n] for t, p, n in zip(traj.times, pops, traj.norms)]


# ---------------------------------------------------------------------------
# Scenario kinds
# ---------------------------------------------------------------------------

def run_triangle(ctx):
    cfg = ctx.config
    J = _J(cfg)
    mu = cfg["triangle.mu_2piMHz"]
    if len(mu) != 3:
        raise ConfigError("triangle.mu_2piMHz", "needs three entries")
    tri = FluxTriangle.uniform(J, math.pi * cfg["triangle.gamma_tot_pi"], tuple(mhz(m) for m in mu))
    t = np.linspace(0.0, cfg["time.periods"] * tri.period, cfg["time.samples"])
    traj = triangle_dynamics(tri, t, cfg["triangle.initial_site"])
    ctx.write_trajectory(ctx.csv_path, traj)
    results = {"period_us": tri.period, "gamma_tot": tri.gamma_tot, "t_step_us": tri.period / 3}
    if cfg["time.periods"] >= 1.0:
        results["circulation_metric"] = circulation_metric(traj, period=tri.period)
    return results


def _chain_protocol(cfg, N, J, model):
    peak = J if cfg["pulses.peak_2piMHz"] is None else mhz(cfg["pulses.peak_2piMHz"])
    t_m, T = cfg["pulses.t_m_us"], cfg["pulses.T_us"]
    if (t_m is None) != (T is None):
        raise ConfigError("pulses.T_us" if T is None else "pulses.t_m_us",
                          "give both t_m_us and T_us or neither")
    if t_m is None:
        scan = scan_protocol(N, J, model, peak=peak)
        return scan["t_m"], scan["T"], peak, True
    return t_m, T, peak, False


def run_chain_transfer(ctx):
    cfg = ctx.config
    N, model, J = cfg["chain.N"], cfg["chain.model"], _J(cfg)
    t_m, T, peak, scanned = _chain_protocol(cfg, N, J, model)
    qubit = cfg["sender.qubit"]
    if len(qubit) != 2:
        raise ConfigError("sender.qubit", "needs two amplitudes (c0, c1)")
    try:
        sched = sender_receiver_pulses(qubit, PulseProfile("ramp_on", t_m, T, 1.0),
                                       PulseProfile("ramp_off", t_m, T, 1.0), peak)
    except ValueError as exc:
        raise ConfigError("sender.qubit", str(exc)) from None
    net = with_transfer_boundaries(chain_hamiltonian(N, J, model=model), 1, {"r": N},
                                   t_m, T, peak)
    traj = propagate(net, "s", np.linspace(0.0, T, cfg["time.samples"]))
    res = transfer_result(traj, "s", "r")
    receiver, _ = transfer_qubit(sched, N, J, model)
    ctx.write_trajectory(ctx.csv_path, traj)
    expected = (-math.pi / 2 * (N + 1)) % (2 * math.pi)
    return {"t_m_us": t_m, "T_us": T, "peak_rad_per_us": peak, "scanned": scanned,
            "P_T": res.P_T, "zeta": res.zeta, "zeta_expected_mod_2pi": expected,
            "receiver_qubit": list(receiver)}


def _abstract_triangle(cfg):
    if cfg["triangle.source"] == "uniform":
        mu = cfg["triangle.mu_over_J"]
        if len(mu) != 3:
            raise ConfigError("triangle.mu_over_J", "needs three entries")
        return FluxTriangle.uniform(1.0, math.pi * cfg["triangle.gamma_tot_pi"], tuple(mu))
    tri = solve_flux_conditions().effective.to_flux_triangle()
    J0 = tri.mean_coupling
    return FluxTriangle(tuple(j / J0 for j in tri.j_abs), tri.gamma, tuple(m / J0 for m in tri.mu))


def run_router_abstract(ctx):
    cfg = ctx.config
    J = _J(cfg)
    unit = _abstract_triangle(cfg)
    tri = FluxTriangle(tuple(J * j for j in unit.j_abs), unit.gamma, tuple(J * m for m in unit.mu))
    target = "rL" if tri.gamma_tot < 0 else "rR"
    rows, runs = [], {}
    for n in cfg["router.arm_lengths"]:
        if n < 1 or n % 2 == 0:
            raise ConfigError("router.arm_lengths", f"arm length {n} must be odd and positive")
        L, R = router_ends(n, n)
        rec = {"rL": L, "rR": R}
        base = router_network(n, n, tri, J)
        comp = base.with_onsite({k + 1: -tri.mu[k] for k in range(3)})
        peak = J if cfg["pulses.peak_2piMHz"] is None else mhz(cfg["pulses.peak_2piMHz"])
        t_m, T = cfg["pulses.t_m_us"], cfg["pulses.T_us"]
        if t_m is None or T is None:
            scan = scan_router_protocol(comp, rec, target, n + 2, J, peak=peak)
            t_m, T = scan["t_m"], scan["T"]
        for mode in cfg["compensation.modes"]:
            net = with_transfer_boundaries(comp if mode == "on" else base, 1, rec, t_m, T, peak)
            traj = propagate(net, "s", np.linspace(0.0, T, cfg["time.samples"]))
            res = transfer_result(traj, "s", target)
            rows.append([n, mode, t_m, T, traj.population("rL")[-1], traj.population("rR")[-1],
                         "" if res.zeta is None else res.zeta])
            runs[f"{n}_{mode}"] = res.P_T
            if cfg["output.trajectories"]:
                ctx.write_trajectory(ctx.sibling(f"arm{n}_{mode}"), traj)
    ctx.write(ctx.csv_path, ["arm_length", "compensation", "t_m_us", "T_us", "P_rL", "P_rR", "zeta"], rows)
    return {"target": target, "P_T": runs, "triangle_mu_over_J": list(unit.mu),
            "triangle_gamma": list(unit.gamma)}


def run_effective_solve(ctx):
    cfg = ctx.config
    trans = _transitions(cfg)
    guess = {"b": cfg["solver.initial_b_um"], "c": cfg["solver.initial_c_um"],
             "delta": mhz(cfg["solver.initial_detuning_2piMHz"])}
    if guess["delta"] == 0:
        raise ConfigError("solver.initial_detuning_2piMHz", "must be nonzero")
    sol = solve_flux_conditions(cfg["geometry.a_um"], trans, guess, cfg["solver.aux_sign"],
                                tol=cfg["solver.tol"])
    if not sol.converged:
        raise RuntimeError(f"flux conditions not met: residual {sol.residual:.3g} after "
                           f"{sol.iterations} iterations")
    eff = sol.effective
    kHz = 1e3 / TWO_PI
    ctx.write(ctx.csv_path,
              ["a_um", "b_um", "c_um", "detuning_2piMHz", "B_gauss", "aux_sign",
               "J12_2pikHz", "J23_2pikHz", "J13_2pikHz", "gamma12_pi", "gamma23_pi", "gamma13_pi",
               "gamma_tot_pi", "mu1_2pikHz", "mu2_2pikHz", "mu3_2pikHz", "residual"],
              [[sol.a, sol.b, sol.c, sol.detuning / TWO_PI, sol.B, sol.aux_sign,
                *(eff.j_abs * kHz), *(eff.gamma / math.pi), eff.gamma_tot / math.pi,
                *(eff.mu * kHz), sol.residual]])
    tri = eff.to_flux_triangle()
    t = np.linspace(0.0, cfg["time.periods"] * tri.period, cfg["time.samples"])
    traj = triangle_dynamics(FluxTriangle(tri.j_abs, tri.gamma), t)
    ctx.write_trajectory(ctx.sibling("dynamics"), traj)
    return {"b_um": sol.b, "c_um": sol.c, "detuning_2piMHz": sol.detuning / TWO_PI,
            "B_gauss": sol.B, "field_reachable": sol.field_reachable, "aux_sign": sol.aux_sign,
            "residual": sol.residual, "J_abs_2pikHz": list(eff.j_abs * kHz),
            "gamma_pi": list(eff.gamma / math.pi), "gamma_tot_pi": eff.gamma_tot / math.pi,
            "mu_2pikHz": list(eff.mu * kHz)}


def run_full_model(ctx):
    cfg = ctx.config
    trans = _transitions(cfg)
    aux = cfg["aux.active"]
    score, traj, period = full_model_chirality(
        cfg["geometry.a_um"], cfg["geometry.b_um"], cfg["geometry.c_um"], cfg["field.B_gauss"],
        aux, trans, periods=cfg["time.periods"], samples=cfg["time.samples"])
    ctx.write(ctx.csv_path, ["t_us", "pop_1", "pop_2", "pop_3", f"pop_{aux}", "norm"],
              _trajectory_rows(traj, (1, 2, 3, aux)))
    return {"circulation_metric": score, "period_us": period}


def _decay(cfg):
    if cfg["decay.temperature_K"] is not None:
        try:
            return DecayModel.at_temperature(cfg["decay.temperature_K"])
        except ValueError as exc:
            raise ConfigError("decay.temperature_K", str(exc)) from None
    if cfg["decay.gamma_tot_per_us"] is not None:
        if cfg["decay.gamma_tot_per_us"] < 0:
            raise ConfigError("decay.gamma_tot_per_us", "must be non-negative")
        return DecayModel(total=cfg["decay.gamma_tot_per_us"])
    return DecayModel.none()


def run_full_router(ctx):
    cfg = ctx.config
    trans = _transitions(cfg)
    decay = _decay(cfg)
    t_m, T = cfg["pulses.t_m_us"], cfg["pulses.T_us"]
    peak = mhz(cfg["pulses.peak_2piMHz"])
    try:
        sender = PulseProfile("ramp_on", t_m, T, peak)
        receiver = PulseProfile("ramp_off", t_m, T, peak)
    except ValueError as exc:
        raise ConfigError("pulses.t_m_us", str(exc)) from None
    mode = cfg["aux.active"]
    auxes = (4, 5) if mode == "superposition" else (int(mode),)
    t = np.linspace(0.0, T, cfg["time.samples"])
    results, reports, models = {"gamma_tot_per_us": gamma_total(decay)}, {}, {}
    for aux in auxes:
        model = router_model(cfg["geometry.a_um"], cfg["geometry.b_um"], cfg["geometry.c_um"],
                             cfg["field.B_gauss"], aux, trans)
        if cfg["compensation.enabled"]:
            model = compensated(model)
        models[aux] = model
        rep = run_router(model, sender, receiver, t, decay)
        reports[aux] = rep
        path = ctx.csv_path if len(auxes) == 1 else ctx.sibling(f"aux{aux}")
        keys = ("s", 1, 2, 3, aux, "rL", "rR")
        ctx.write(path, ["t_us"] + [f"pop_{k}" for k in keys] + ["norm"],
                  _trajectory_rows(rep.trajectory, keys))
        results[f"aux{aux}"] = {"final": rep.final, "max": rep.max_population,
                                "norm_final": rep.norm_final,
                                "norm_expected": math.exp(-rep.gamma_tot * T)}
    if mode == "superposition":
        try:
            control = ControlQubit(cfg["control.alpha"], cfg["control.beta"])
        except ValueError as exc:
            raise ConfigError("control.alpha", str(exc)) from None
        rm, _ = enlarged_routing_map(control, models, sender, receiver, t, decay)
        # Cross-check: the same map recombined from the two single-branch runs.
        linear = full_routing_map(control, BranchAmplitudes.from_report(reports[4]),
                                  BranchAmplitudes.from_report(reports[5]))
        rows = [[c, x, rm.state[i, j].real, rm.state[i, j].imag,
                 rm.target[i, j].real, rm.target[i, j].imag]
                for i, c in enumerate(("g", "e")) for j, x in enumerate(("s", "rL", "rR"))]
        ctx.write(ctx.csv_path, ["control", "excitation", "re", "im", "target_re", "target_im"], rows)
        results["routing"] = {"fidelity": rm.fidelity, "phase_exact_fidelity": rm.phase_exact_fidelity,
                              "entanglement_entropy_bits": rm.entanglement_entropy,
                              "purity": rm.purity, "norm": rm.norm,
                              "linear_recombination_max_difference":
                                  float(np.abs(rm.state - linear.state).max())}
    return results


def run_blockade(ctx):
    cfg = ctx.config
    try:
        control = ControlQubit(cfg["control.alpha"], cfg["control.beta"])
    except ValueError as exc:
        raise ConfigError("control.alpha", str(exc)) from None
    ideal = blockade_gate(control)
    labels = [f"{a}{b}" for a in ("g", "e", "-") for b in ("g", "e", "-")]
    rows = [[l, s.real, s.imag, t.real, t.imag] for l, s, t in zip(labels, ideal.state, ideal.target)]
    results = {"ideal_fidelity": ideal.fidelity,
               "ideal_max_error": float(np.abs(ideal.state - ideal.target).max())}
    if cfg["blockade.mode"] == "ideal":
        ctx.write(ctx.csv_path, ["state_45", "re", "im", "target_re", "target_im"], rows)
        return results
    V = cfg["blockade.V_2piMHz"]
    if V is None or not V > 0:
        raise ConfigError("blockade.V_2piMHz", "finite_blockade mode requires V > 0")
    scan = []
    for ratio in cfg["blockade.omega_over_V"]:
        if not ratio > 0:
            raise ConfigError("blockade.omega_over_V", "ratios must be positive")
        r = blockade_gate(control, V, ratio * V, "finite_blockade", cfg["blockade.samples"])
        scan.append([ratio, r.leakage, blockade_leakage_bound(ratio, 1.0), r.fidelity])
    ctx.write(ctx.csv_path, ["omega_over_V", "leakage", "leakage_closed_form", "fidelity"], scan)
    ctx.write(ctx.sibling("ideal"), ["state_45", "re", "im", "target_re", "target_im"], rows)
    results["leakage"] = {str(s[0]): s[1] for s in scan}
    return results


def run_spectrum(ctx):
    cfg = ctx.config
    N = cfg["chain.N"]
    if N < 1:
        raise ConfigError("chain.N", "must be >= 1")
    cols = [chain_spectrum(N, 1.0, m, cfg["chain.method"]) for m in cfg["chain.models"]]
    rows = [[n + 1, *(c[n] for c in cols)] for n in range(N)]
    ctx.write(ctx.csv_path, ["n"] + [f"E_{m}_over_J" for m in cfg["chain.models"]], rows)
    return {m: {"max": float(c[0]), "min": float(c[-1])} for m, c in zip(cfg["chain.models"], cols)}


def run_optimize(ctx):
    cfg = ctx.config
    trans = _transitions(cfg)
    a = cfg["geometry.a_um"]
    init = {"b": cfg["geometry.b_um"], "c": cfg["geometry.c_um"], "B": cfg["field.B_gauss"]}
    if any(v is None for v in init.values()):
        sol = solve_flux_conditions(a, trans)
        start = {"b": sol.b, "c": sol.c, "B": sol.B}
        init = {k: start[k] if v is None else v for k, v in init.items()}
    rng = np.random.default_rng(ctx.seed)
    starts = [init] + [{k: v * (1 + 0.05 * rng.uniform(-1, 1)) for k, v in init.items()}
                       for _ in range(cfg["optimize.restarts"])]
    best, rows = None, []
    for i, s in enumerate(starts):
        res = optimize_geometry(s, a, cfg["optimize.objective"], transitions=trans,
                                max_evaluations=cfg["optimize.max_evaluations"])
        rows += [[i, k, e["b"], e["c"], e["B"], e["score"]] for k, e in enumerate(res.log)]
        if best is None or res.score > best.score:
            best = res
        ctx.log(f"start {i}: score {res.initial_score:.4f} -> {res.score:.4f}")
    ctx.write(ctx.csv_path, ["start", "evaluation", "b_um", "c_um", "B_gauss", "score"], rows)
    return {"objective": best.objective, "initial": init, "initial_score": best.initial_score,
            "best": best.params, "score": best.score, "evaluations": len(rows)}


RUNNERS = {
    "triangle": run_triangle,
    "chain_transfer": run_chain_transfer,
    "router_abstract": run_router_abstract,
    "effective_solve": run_effective_solve,
    "full_model": run_full_model,
    "full_router": run_full_router,
    "blockade": run_blockade,
    "spectrum": run_spectrum,
    "optimize": run_optimize,
}


def run(config_path, output_dir=".", seed=0, quiet=False):
    """Run one scenario; returns the manifest dict."""
    cfg = load_config(config_path)
    out = Path(output_dir)
    name = cfg["output.csv_path"] or f"{Path(config_path).stem}.csv"
    ctx = RunContext(cfg, out / name, seed, quiet, [])
    results = RUNNERS[cfg["kind"]](ctx)
    manifest = {
        "kind": cfg["kind"],
        "title": cfg["title"],
        "config": str(config_path),
        "parameters": cfg,
        "results": results,
        "outputs": ctx.outputs,
        "seed": seed,
        "versions": {"chiralrouter": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
    }
    mpath = ctx.csv_path.with_suffix(".manifest.json")
    mpath.parent.mkdir(parents=True, exist_ok=True)
    mpath.write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    ctx.log(f"wrote {', '.join(ctx.outputs)} and {mpath}")
    return manifest


def list_scenarios(kind=None, stream=None):
    stream = stream or sys.stdout
    if kind is not None and kind not in SCHEMA:
        raise ConfigError("kind", f"unknown kind {kind!r}; valid kinds: {', '.join(KINDS)}")
    for k in KINDS if kind is None else (kind,):
        req = [key.name for key in SCHEMA[k] if key.default is REQUIRED]
        print(f"{k:16s} required: {', '.join(req) if req else '(none)'}", file=stream)
        if kind is not None:
            for key in SCHEMA[k]:
                print(f"  {key.name:32s} {key.kind:12s} {key.doc}", file=stream)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="chiralrouter", description=__doc__.splitlines()[0])
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=".", help="directory for CSVs and the manifest")
    p_run.add_argument("--seed", type=int, default=0, help="seed for optimizer restarts")
    p_list = sub.add_parser("list", help="list scenario kinds and their keys")
    p_list.add_argument("kind", nargs="?")
    p_val = sub.add_parser("validate", help="check a config against the schema")
    p_val.add_argument("config")
    for p in (p_run, p_list, p_val):
        p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed", "must be an unsigned 64-bit integer")
            run(args.config, args.output_dir, args.seed, args.quiet)
        elif args.command == "list":
            list_scenarios(args.kind)
        else:
            cfg = load_config(args.config)
            if not args.quiet:
                print(f"{args.config}: valid {cfg['kind']} scenario")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"error: physics: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    return 0


if __name__ == "__main__":
    sys.exit(main())
