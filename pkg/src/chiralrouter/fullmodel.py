"""Full multilevel Rydberg router: six-level atoms, decay, geometry optimization."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

from .atomic import AtomLevel, level_energy, router_transitions
from .interaction import Geometry, pair_coupling_full, router_geometry
from .network import MatrixNetwork, Trajectory, propagate
from .triangle import FluxTriangle, circulation_metric, effective_triangle

UPPER_M = (-1.5, -0.5, 0.5, 1.5)
LOWER_M = (-0.5, 0.5)

# Router geometry (um, G) found by optimize_geometry(objective="dressed_flux")
# and the boundary pulses (us, rad/us) used with it, t_m = T.
ROUTER_POINT = {"a": 17.0, "b": 13.3443, "c": 9.9754, "B": 20.0051}
ROUTER_PULSE = {"t_m": 10.0, "T": 10.0, "peak": 1.47}


@dataclass(frozen=True)
class SixLevelAtom:
    """S_1/2 (m = -1/2, +1/2) and P_3/2 (m = -3/2 .. 3/2) of one Rydberg atom.

    ``rest`` is the lower sublevel the atom occupies when idle and
    ``active`` the upper sublevel of its designated transition (main atoms).
    """

    atom_id: int
    species: object
    n: int
    rest: float = -0.5
    active: float | None = None

    @property
    def levels(self):
        name = self.species.name
        low = [AtomLevel(name, self.n, 0, 0.5, m) for m in LOWER_M]
        up = [AtomLevel(name, self.n, 1, 1.5, m) for m in UPPER_M]
        return tuple(low + up)

    def lower_index(self, m):
        return LOWER_M.index(m)

    def upper_index(self, m):
        return 2 + UPPER_M.index(m)


@dataclass(frozen=True)
class MultilevelBasis:
    """Single-excitation states of six-level atoms plus restricted two-level atoms.

    Ordering: excited atom (in ``atoms`` order), then its upper sublevel
    (ascending m), then the lower sublevels of the other atoms
    lexicographically (m = -1/2 before +1/2); restricted states follow.
    """

    atoms: tuple
    restricted: tuple
    states: tuple
    labels: tuple

    @property
    def dim(self):
        return len(self.states)

    def index(self, label):
        return self.labels.index(label)

    def atom(self, atom_id):
        for a in self.atoms:
            if a.atom_id == atom_id:
                return a
        raise KeyError(f"no six-level atom {atom_id}")

    def excited_groups(self):
        """{atom id or restricted label: indices of states where it is excited}."""
        groups = {a.atom_id: [] for a in self.atoms}
        for k, st in enumerate(self.states):
            if st[0] == "six":
                groups[st[1]].append(k)
            else:
                groups[st[1]] = [k]
        return {g: np.array(v, dtype=int) for g, v in groups.items()}

    def rest_state(self, excited, m_upper=None):
        """Index of the state with ``excited`` raised and all others at rest."""
        if excited in self.restricted:
            return self.index(excited)
        atom = self.atom(excited)
        m = atom.active if m_upper is None else m_upper
        lows = tuple(a.rest for a in self.atoms if a.atom_id != excited)
        return self.states.index(("six", excited, m, lows))


def _label(atom_id, m, others, lows):
    def sgn(x):
        return "+" if x > 0 else "-"
    tail = "".join(f"{o}{sgn(l)}" for o, l in zip(others, lows))
    return f"e{atom_id}m{m:+g}|{tail}"


def build_basis(atoms, restricted=()):
    """Enumerate states with exactly one atom in its upper manifold."""
    atoms = tuple(atoms)
    if not atoms and not restricted:
        raise ValueError("at least one atom is required")
    states, labels = [], []
    for a in atoms:
        others = [o.atom_id for o in atoms if o.atom_id != a.atom_id]
        for m in UPPER_M:
            for lows in itertools.product(LOWER_M, repeat=len(others)):
                states.append(("six", a.atom_id, m, lows))
                labels.append(_label(a.atom_id, m, others, lows))
    for r in restricted:
        states.append(("two", r))
        labels.append(str(r))
    return MultilevelBasis(atoms, tuple(restricted), tuple(states), tuple(labels))


def router_atoms(transitions=None, aux=4):
    """Main atoms 1-3 and auxiliary ``aux`` on their designated sublevels."""
    main_t, aux_t = router_transitions() if transitions is None else transitions
    out = [SixLevelAtom(i, main_t.species, main_t.lower.n, main_t.lower.m, main_t.upper.m)
           for i in (1, 2, 3)]
    out.append(SixLevelAtom(aux, aux_t.species, aux_t.lower.n, aux_t.lower.m, aux_t.upper.m))
    return out


def _config_energy(basis, state, B):
    E = 0.0
    if state[0] == "two":
        return None
    _, exc, m_up, lows = state
    it = iter(lows)
    for a in basis.atoms:
        if a.atom_id == exc:
            lv = a.levels[a.upper_index(m_up)]
        else:
            lv = a.levels[a.lower_index(next(it))]
        E += level_energy(lv, a.species, B)
    return E


def build_full_hamiltonian(basis, geometry, B=0.0, reference=1, level_shifts=None):
    """Hermitian single-excitation Hamiltonian over ``basis`` (rad/us).

    Diagonal: summed level energies (quantum defects + Zeeman) minus the
    energy of ``reference`` raised on its designated sublevel with all other
    atoms at rest; restricted two-level states sit at that reference energy.
    Off-diagonal: every dipole-dipole element that lowers one atom and raises
    another. ``level_shifts`` {atom id: shift} adds to states where that
    atom is excited.
    """
    for a in basis.atoms:
        if a.atom_id not in geometry.positions:
            raise KeyError(f"geometry has no position for atom {a.atom_id}")
    n = basis.dim
    H = np.zeros((n, n), dtype=complex)
    E0 = _config_energy(basis, basis.states[basis.rest_state(reference)], B)
    index = {st: k for k, st in enumerate(basis.states)}
    for k, st in enumerate(basis.states):
        e = _config_energy(basis, st, B)
        H[k, k] = 0.0 if e is None else e - E0
    if level_shifts:
        groups = basis.excited_groups()
        for atom_id, shift in level_shifts.items():
            H[groups[atom_id], groups[atom_id]] += shift

    ids = [a.atom_id for a in basis.atoms]
    blocks = {}
    for p, q in itertools.permutations(range(len(ids)), 2):
        ap, aq = basis.atoms[p], basis.atoms[q]
        blocks[(p, q)] = pair_coupling_full(ap.levels, aq.levels, geometry, ap.atom_id, aq.atom_id,
                                            ap.species, aq.species)
    for k, st in enumerate(basis.states):
        if st[0] != "six":
            continue
        _, exc, m_up, lows = st
        p = ids.index(exc)
        others = [i for i in ids if i != exc]
        lowmap = dict(zip(others, lows))
        for q, qid in enumerate(ids):
            if q == p:
                continue
            pc = blocks[(p, q)]
            aq, ap = basis.atoms[q], basis.atoms[p]
            u_from = ap.upper_index(m_up)
            l_from = aq.lower_index(lowmap[qid])
            for m_low in LOWER_M:
                for m_new in UPPER_M:
                    amp = pc.element(ap.lower_index(m_low), aq.upper_index(m_new), u_from, l_from)
                    if amp == 0:
                        continue
                    new_lows = dict(lowmap)
                    del new_lows[qid]
                    new_lows[exc] = m_low
                    others_t = [i for i in ids if i != qid]
                    target = ("six", qid, m_new, tuple(new_lows[i] for i in others_t))
                    H[index[target], k] += amp
    return H


# ---------------------------------------------------------------------------
# Decay
# ---------------------------------------------------------------------------

# Aggregate rates (1/us) at 0, 77 and 300 K.
DEFAULT_GAMMA_TOT = {0.0: 1 / 62, 77.0: 1 / 45, 300.0: 1 / 24}


@dataclass(frozen=True)
class DecayModel:
    """Decay rates of the router atoms.

    ``rates`` maps (species, l) to a rate in 1/us; when it holds the Rb nP,
    Rb nS and Cs n'S entries, Gamma_tot = G_P(Rb) + 5 G_S(Rb) + G_S(Cs)
    (one excited Rb atom, five Rb atoms in nS, the Cs atom in n'S).
    Otherwise ``total`` is used directly.
    """

    rates: dict = field(default_factory=dict)
    total: float | None = None
    temperature: float | None = None

    def __post_init__(self):
        if any(v < 0 for v in self.rates.values()):
            raise ValueError("decay rates must be non-negative")
        if self.total is not None and self.total < 0:
            raise ValueError("gamma_tot must be non-negative")

    @classmethod
    def at_temperature(cls, T):
        key = float(T)
        if key not in DEFAULT_GAMMA_TOT:
            raise ValueError(f"no default decay rate for {T} K; known: {sorted(DEFAULT_GAMMA_TOT)}")
        return cls(total=DEFAULT_GAMMA_TOT[key], temperature=key)

    @classmethod
    def none(cls):
        return cls(total=0.0)


def gamma_total(decay):
    r = decay.rates
    needed = (("Rb", 1), ("Rb", 0), ("Cs", 0))
    if all(k in r for k in needed):
        return r[("Rb", 1)] + 5 * r[("Rb", 0)] + r[("Cs", 0)]
    if decay.total is not None:
        return float(decay.total)
    if not r:
        return 0.0
    raise ValueError(f"decay rates need entries {needed} or a total")


# ---------------------------------------------------------------------------
# Router model and dynamics
# ---------------------------------------------------------------------------

class FullTrajectory(Trajectory):
    """Trajectory whose ``population`` also accepts atom ids (summed over sublevels)."""

    def __init__(self, times, states, labels, groups):
        super().__init__(times, states, labels)
        self.groups = groups

    def population(self, label):
        if label in self.groups:
            return np.sum(np.abs(self.states[:, self.groups[label]]) ** 2, axis=1)
        return super().population(label)

    def site_populations(self, ids):
        return np.column_stack([self.population(i) for i in ids])


@dataclass
class RouterModel:
    """Assembled full router: basis, static Hamiltonian and field."""

    basis: MultilevelBasis
    hamiltonian: np.ndarray
    geometry: Geometry
    B: float
    aux: int
    transitions: tuple
    params: dict = field(default_factory=dict)


def router_model(a=17.0, b=None, c=None, B=None, aux=4, transitions=None, with_boundary=True,
                 aux_sign=-1.0, level_shifts=None, geometry=None):
    """Four six-level atoms (1, 2, 3, aux) and optionally s, rL, rR.

    Atom 4 sits on the ``aux_sign`` side of the 2-3 axis and atom 5 on the
    other; ``aux`` picks which one is present.
    """
    transitions = router_transitions() if transitions is None else transitions
    if geometry is None:
        geometry = router_geometry(a, b, c, aux_sign)
    atoms = router_atoms(transitions, aux)
    restricted = ("s", "rL", "rR") if with_boundary else ()
    basis = build_basis(atoms, restricted)
    H = build_full_hamiltonian(basis, geometry, B, level_shifts=level_shifts)
    return RouterModel(basis, H, geometry, B, aux, transitions,
                       {"a": a, "b": b, "c": c, "B": B, "aux": aux, "aux_sign": aux_sign})


def triangle_run(model, t_grid, decay=None):
    """Triangle dynamics from atom 1 raised on its designated sublevel."""
    net = MatrixNetwork(model.basis.labels, model.hamiltonian)
    init = model.basis.rest_state(1)
    traj = propagate(net, model.basis.labels[init], t_grid, decay=decay)
    return FullTrajectory(traj.times, traj.states, traj.labels, model.basis.excited_groups())


@dataclass
class RouterReport:
    trajectory: FullTrajectory
    final: dict
    max_population: dict
    norm_final: float
    gamma_tot: float


def run_router(model, sender, receiver, t_grid, decay=None, coupling=None):
    """Sender -> triangle -> receivers with time-dependent boundary couplings.

    ``sender`` and ``receiver`` are PulseProfiles for J_s(t) (s to atom 1) and
    J_r(t) (rL to atom 2, rR to atom 3). ``coupling`` optionally overrides the
    on-site matrix (e.g. with compensated level shifts).
    """
    basis = model.basis
    if "s" not in basis.restricted:
        raise ValueError("model was built without sender/receiver atoms")
    H = model.hamiltonian if coupling is None else coupling
    net = MatrixNetwork(basis.labels, H, _boundary_edges(basis, sender, receiver))
    G = 0.0 if decay is None else gamma_total(decay)
    traj = propagate(net, "s", t_grid, decay=G if G else None)
    ft = FullTrajectory(traj.times, traj.states, traj.labels, basis.excited_groups())
    keys = ("s", "rL", "rR", 1, 2, 3, model.aux)
    final = {k: float(ft.population(k)[-1]) for k in keys}
    peak = {k: float(ft.population(k).max()) for k in keys}
    return RouterReport(ft, final, peak, float(ft.norms[-1]), G)


def _boundary_edges(basis, sender, receiver, prefix=""):
    labels = basis.labels
    return (
        (sender, f"{prefix}s", prefix + labels[basis.rest_state(1)], 1.0),
        (receiver, prefix + labels[basis.rest_state(2)], f"{prefix}rL", 1.0),
        (receiver, prefix + labels[basis.rest_state(3)], f"{prefix}rR", 1.0),
    )


def superposition_router(models, amplitudes, sender, receiver, t_grid, decay=None):
    """One run over the joint basis of several auxiliary-atom branches.

    ``models`` maps a branch key (the auxiliary atom in |->) to its router
    model and ``amplitudes`` gives each branch's initial sender amplitude.
    The idle auxiliary atom sits in a ground sublevel with no dipole
    coupling, so the joint Hamiltonian is block diagonal. Labels read
    ``"<key>|<branch label>"``.
    """
    labels, blocks, driven = [], [], []
    for key, model in models.items():
        basis = model.basis
        if "s" not in basis.restricted:
            raise ValueError("models must include sender/receiver atoms")
        labels += [f"{key}|{l}" for l in basis.labels]
        blocks.append(model.hamiltonian)
        driven += _boundary_edges(basis, sender, receiver, f"{key}|")
    net = MatrixNetwork(tuple(labels), scipy.linalg.block_diag(*blocks), tuple(driven))
    psi0 = np.zeros(net.dim, dtype=complex)
    for key, amp in amplitudes.items():
        psi0[net.index(f"{key}|s")] = amp
    G = 0.0 if decay is None else gamma_total(decay)
    return propagate(net, psi0, t_grid, decay=G if G else None)


# ---------------------------------------------------------------------------
# Optimization
# ---------------------------------------------------------------------------

def full_model_chirality(a, b, c, B, aux=4, transitions=None, periods=1.5, samples=400,
                         aux_sign=-1.0):
    """Circulation metric of the four-atom full model at (b, c, B).

    The window is ``periods`` circulation periods of the effective triangle
    at the same parameters; order (1, 2, 3).
    """
    transitions = router_transitions() if transitions is None else transitions
    model = router_model(a, b, c, B, aux, transitions, with_boundary=False, aux_sign=aux_sign)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        eff = effective_triangle(model.geometry, transitions, B=B, aux=aux)
    mean_j = float(np.mean(eff.j_abs))
    period = 2 * math.pi / (math.sqrt(3) * mean_j)
    traj = triangle_run(model, np.linspace(0.0, periods * period, samples))
    return circulation_metric(traj, (1, 2, 3), period=period), traj, period


# Below every objective's range, so Nelder-Mead steps back inside the bounds.
OUT_OF_BOUNDS_SCORE = -1e6


@dataclass
class OptimizationResult:
    params: dict
    score: float
    initial_score: float
    log: list
    evaluations: int
    objective: str


def optimize_geometry(initial, a=17.0, objective="circulation_metric", bounds=None,
                      transitions=None, max_evaluations=500, xatol=1e-4, router_kwargs=None):
    """Nelder-Mead over (b, c, B) maximizing a full-model score.

    ``objective`` is ``"circulation_metric"`` (four-atom triangle dynamics),
    ``"dressed_flux"`` (:func:`dressed_flux_score`) or ``"transfer_fidelity"``
    (final correct-receiver population of :func:`run_router`, with
    ``router_kwargs`` giving sender, receiver and t_grid). Initial simplex:
    +-5% per coordinate. Points outside ``bounds`` score OUT_OF_BOUNDS_SCORE.
    """
    transitions = router_transitions() if transitions is None else transitions
    x0 = np.array([initial["b"], initial["c"], initial["B"]], dtype=float)
    if bounds is None:
        bounds = [(a / 2 * 1.01, 3 * a), (a / 2 * 1.01, 3 * a), (-200.0, 200.0)]
    log = []

    def score(x):
        b, c, B = (float(v) for v in x)
        if any(not lo <= v <= hi for v, (lo, hi) in zip((b, c, B), bounds)):
            val = OUT_OF_BOUNDS_SCORE
        elif objective == "circulation_metric":
            val = full_model_chirality(a, b, c, B, transitions=transitions)[0]
        elif objective == "dressed_flux":
            val = dressed_flux_score(router_model(a, b, c, B, 4, transitions, with_boundary=False))
        elif objective == "transfer_fidelity":
            kw = dict(router_kwargs or {})
            model = router_model(a, b, c, B, 4, transitions)
            rep = run_router(model, kw["sender"], kw["receiver"], kw["t_grid"])
            val = rep.final["rL"]
        else:
            raise ValueError(f"unknown objective {objective!r}")
        log.append({"b": b, "c": c, "B": B, "score": val})
        return val

    s0 = score(x0)
    simplex = [x0] + [x0 + np.eye(3)[k] * 0.05 * (abs(x0[k]) if x0[k] else 1.0) for k in range(3)]
    minimize(lambda x: -score(x), x0, method="Nelder-Mead",
             options={"initial_simplex": np.array(simplex), "maxfev": max_evaluations,
                      "xatol": xatol * float(np.max(np.abs(x0))), "fatol": 1e-6})
    best = max(log, key=lambda e: e["score"])
    return OptimizationResult({"b": best["b"], "c": best["c"], "B": best["B"]}, best["score"], s0,
                              log, len(log), objective)


def compensate_level_shifts(target, mu, enabled=True):
    """Cancel triangle level shifts mu_i (atom id -> shift).

    ``target`` is a :class:`~chiralrouter.network.SpinNetwork` (sites 1-3) or
    a :class:`RouterModel`; returns an adjusted copy. ``enabled=False``
    returns the target unchanged.
    """
    if not enabled or not any(mu.values()):
        return target
    if isinstance(target, RouterModel):
        groups = target.basis.excited_groups()
        H = target.hamiltonian.copy()
        for atom_id, shift in mu.items():
            H[groups[atom_id], groups[atom_id]] -= shift
        return RouterModel(target.basis, H, target.geometry, target.B, target.aux,
                           target.transitions, dict(target.params, compensated=dict(mu)))
    return target.with_onsite({k: -v for k, v in mu.items()})


def dressed_triangle(model, ids=(1, 2, 3)):
    """Effective triangle of the full model on its three most triangle-like eigenstates.

    The eigenvectors with the largest weight on the designated states
    |1_i> are projected onto them and orthonormalized (Loewdin), giving a
    3x3 Hamiltonian whose couplings include all multilevel dressing.
    Returns (FluxTriangle, weights).
    """
    basis = model.basis
    idx = [basis.rest_state(i) for i in ids]
    six = [k for k, st in enumerate(basis.states) if st[0] == "six"]
    H = model.hamiltonian[np.ix_(six, six)]
    pos = [six.index(k) for k in idx]
    E, U = np.linalg.eigh(H)
    w = np.sum(np.abs(U[pos, :]) ** 2, axis=0)
    keep = np.sort(np.argsort(w)[-3:])
    u, _, vh = np.linalg.svd(U[pos][:, keep])
    Q = u @ vh
    Heff = Q @ np.diag(E[keep]) @ Q.conj().T
    return FluxTriangle.from_matrix(Heff), w[keep]


def dressed_level_shifts(model, iterations=8, tol=1e-6):
    """Self-consistent shifts {atom: mu} that null the dressed triangle's on-site energies.

    Each pass subtracts the dressed mu_i from every state of atom i and
    re-diagonalizes, since the compensation itself re-dresses the triangle.
    """
    total = {1: 0.0, 2: 0.0, 3: 0.0}
    current = model
    for _ in range(iterations):
        tri, _ = dressed_triangle(current)
        for i in range(3):
            total[i + 1] += tri.mu[i]
        current = compensate_level_shifts(model, total)
        if max(abs(m) for m in tri.mu) < tol:
            break
    return total


def compensated(model):
    """``model`` with its self-consistent dressed level shifts removed."""
    return compensate_level_shifts(model, dressed_level_shifts(model))


def dressed_flux_score(model):
    """-(|gamma_tot + pi/2| + relative |J| spread) of the compensated dressed triangle."""
    comp = compensated(model)
    tri, _ = dressed_triangle(comp)
    J = np.asarray(tri.j_abs)
    return -(abs(tri.gamma_tot + math.pi / 2) + float(J.max() - J.min()) / float(J.mean()))
