"""Control-qubit preparation by Rydberg blockade and sender/receiver pulse mapping.

Auxiliary atoms 4 and 5 carry the levels ``g``, ``e`` (ground sublevels) and
``-`` (the Rydberg state that induces the flux). A resonant pi-pulse on
e <-> - is generated by H = -(Omega/2)(|e><-| + |-><e|), so that
|e> -> i|-> and |-> -> i|e>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .network import PulseProfile, TransferResult, run_transfer
from .units import mhz

AUX_LEVELS = ("g", "e", "-")
REGISTER = ("s", "rL", "rR")


@dataclass(frozen=True)
class ControlQubit:
    """alpha|g>_4 + beta|e>_4."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"control qubit is not normalized (|alpha|^2 + |beta|^2 = {norm:.15g})")


@dataclass(frozen=True)
class PulseOp:
    """Resonant pulse on one atom. ``rabi`` (2pi MHz) matters only under blockade."""

    target: object
    transition: tuple
    area: float = math.pi
    rabi: float | None = None

    def __post_init__(self):
        if not self.area > 0:
            raise ValueError("pulse area must be positive")
        if self.rabi is not None and not self.rabi > 0:
            raise ValueError("rabi frequency must be positive")

    def unitary(self, levels):
        """Instantaneous single-atom unitary on ``levels``."""
        a, b = (levels.index(s) for s in self.transition)
        U = np.eye(len(levels), dtype=complex)
        c, s = math.cos(self.area / 2), math.sin(self.area / 2)
        U[a, a] = U[b, b] = c
        U[a, b] = U[b, a] = 1j * s
        return U


def blockade_interaction(c_nu, r, nu=6):
    """V = C_nu / r^nu for nu in {3, 6}."""
    if nu not in (3, 6):
        raise ValueError(f"nu must be 3 or 6, got {nu}")
    if r <= 0:
        raise ValueError("r must be positive")
    return c_nu / r**nu


def _pair(i):
    return i // 3, i % 3


def _aux_index(l4, l5):
    return AUX_LEVELS.index(l4) * 3 + AUX_LEVELS.index(l5)


def aux_state(amplitudes):
    """Nine-component state of atoms (4, 5) from {(l4, l5): amplitude}."""
    psi = np.zeros(9, dtype=complex)
    for (l4, l5), a in amplitudes.items():
        psi[_aux_index(l4, l5)] = a
    return psi


def _on(U, atom):
    I3 = np.eye(3)
    return np.kron(U, I3) if atom == 4 else np.kron(I3, U)


def _blocked_pulse(op):
    """Pulse on one atom that acts only while the other atom is not in ``-``."""
    U = _on(op.unitary(AUX_LEVELS), op.target)
    other = 5 if op.target == 4 else 4
    P = np.zeros(9)
    for i in range(9):
        l4, l5 = _pair(i)
        P[i] = 1.0 if (l5 if other == 5 else l4) == 2 else 0.0
    P = np.diag(P)
    free = np.eye(9) - P
    return free @ U @ free + P


@dataclass(frozen=True)
class BlockadeResult:
    state: np.ndarray
    target: np.ndarray
    leakage: float
    times: np.ndarray | None = None
    double_population: np.ndarray | None = None

    @property
    def overlap(self):
        return complex(np.vdot(self.target, self.state))

    @property
    def fidelity(self):
        return abs(self.overlap) ** 2


def blockade_target(control):
    return aux_state({("g", "-"): 1j * control.alpha, ("-", "e"): 1j * control.beta})


def blockade_gate(control, V=None, omega=None, mode="ideal", samples=400):
    """Steps (i)-(ii): pi-pulse e -> - on atom 4, then on atom 5 under blockade.

    ``V`` and ``omega`` are in 2pi MHz. In ``finite_blockade`` mode the second
    pulse is integrated with the interaction V on |->_4|->_5; ``leakage`` is
    the peak double-Rydberg population during that pulse.
    """
    if not isinstance(control, ControlQubit):
        control = ControlQubit(*control)
    psi = aux_state({("g", "e"): control.alpha, ("e", "e"): control.beta})
    psi = _on(PulseOp(4, ("e", "-")).unitary(AUX_LEVELS), 4) @ psi
    target = blockade_target(control)
    if mode == "ideal":
        psi = _blocked_pulse(PulseOp(5, ("e", "-"))) @ psi
        return BlockadeResult(psi, target, 0.0)
    if mode != "finite_blockade":
        raise ValueError(f"unknown mode {mode!r}; expected 'ideal' or 'finite_blockade'")
    if V is None or not V > 0:
        raise ValueError("finite_blockade mode requires V > 0")
    if omega is None or not omega > 0:
        raise ValueError("finite_blockade mode requires omega > 0")
    Om, Vr = mhz(omega), mhz(V)
    drive = np.zeros((3, 3))
    drive[1, 2] = drive[2, 1] = -Om / 2
    H = _on(drive, 5).astype(complex)
    dd = _aux_index("-", "-")
    H[dd, dd] += Vr
    times = np.linspace(0.0, math.pi / Om, samples)
    w, U = np.linalg.eigh(H)
    c = U.conj().T @ psi
    states = (U @ (np.exp(-1j * np.outer(w, times)) * c[:, None])).T
    double = np.abs(states[:, dd]) ** 2
    return BlockadeResult(states[-1], target, float(double.max()), times, double)


def blockade_leakage_bound(omega, V):
    """Peak |->|-> population for a detuned two-level drive: Omega^2/(Omega^2 + V^2)."""
    return omega**2 / (omega**2 + V**2)


# ---------------------------------------------------------------------------
# Routing composition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BranchAmplitudes:
    """Final sender and receiver amplitudes of one routing run (sender starts excited)."""

    s: complex
    rL: complex
    rR: complex

    @classmethod
    def from_report(cls, report, sender="s", left="rL", right="rR"):
        traj = report.trajectory if hasattr(report, "trajectory") else report
        return cls(*(complex(traj.amplitude(k)) for k in (sender, left, right)))


@dataclass(frozen=True)
class RoutingMap:
    """Composed joint state of the control atom 4 and the receivers.

    ``state[c, x]`` is the amplitude of control level c in (g, e) with the
    excitation at x in (s, rL, rR); atom 5 is projected on |e>.
    """

    state: np.ndarray
    target: np.ndarray
    aux5_residual: float

    @property
    def norm(self):
        return float(np.sum(np.abs(self.state) ** 2))

    @property
    def overlap(self):
        return complex(np.vdot(self.target, self.state))

    @property
    def fidelity(self):
        """|<target|psi>|^2, blind to a global phase."""
        return abs(self.overlap) ** 2

    @property
    def phase_exact_fidelity(self):
        return max(self.overlap.real, 0.0) ** 2

    def control_density(self):
        psi = self.state / math.sqrt(self.norm)
        return psi @ psi.conj().T

    @property
    def purity(self):
        rho = self.control_density()
        return float(np.real(np.trace(rho @ rho)))

    @property
    def entanglement_entropy(self):
        """Von Neumann entropy (bits) of the control qubit."""
        p = np.linalg.eigvalsh(self.control_density())
        p = p[p > 1e-15]
        return float(-np.sum(p * np.log2(p)))


def routing_target(control):
    """-(alpha|g>|0_rL 1_rR> + beta|e>|1_rL 0_rR>) on the (control, register) grid."""
    t = np.zeros((2, 3), dtype=complex)
    t[0, 2] = -control.alpha
    t[1, 1] = -control.beta
    return t


def full_routing_map(control, aux4_run, aux5_run):
    """Blockade preparation, routing and the closing pulses (iii) and (iv).

    ``aux4_run``/``aux5_run`` are the routing outcomes with atom 4 or 5 in
    |->: BranchAmplitudes, or router reports/trajectories with s, rL, rR.
    The excitation moves only when exactly one auxiliary atom is in |->.
    """
    if aux4_run is None or aux5_run is None:
        raise ValueError("routing runs for both auxiliary atoms are required")
    if not isinstance(control, ControlQubit):
        control = ControlQubit(*control)
    runs = {}
    for key, run in ((4, aux4_run), (5, aux5_run)):
        runs[key] = run if isinstance(run, BranchAmplitudes) else BranchAmplitudes.from_report(run)
    aux = blockade_gate(control).state
    # Joint (atom 4, atom 5, register) amplitudes, excitation starts on s.
    psi = np.zeros((3, 3, 3), dtype=complex)
    psi[:, :, 0] = aux.reshape(3, 3)
    routed = np.zeros_like(psi)
    for l4 in range(3):
        for l5 in range(3):
            a = psi[l4, l5, 0]
            if a == 0:
                continue
            active = [k for k, l in ((4, l4), (5, l5)) if l == 2]
            if len(active) == 1:
                br = runs[active[0]]
                routed[l4, l5] += a * np.array([br.s, br.rL, br.rR])
            else:
                routed[l4, l5, 0] += a
    return _close_routing(control, routed)


def _close_routing(control, routed):
    """Pulses (iii) and (iv) on the routed (atom 4, atom 5, register) array, then project atom 5 on |e>."""
    step3 = _blocked_pulse(PulseOp(5, ("e", "-")))
    step4 = _blocked_pulse(PulseOp(4, ("e", "-")))
    flat = routed.reshape(9, 3)
    flat = step4 @ (step3 @ flat)
    final = flat.reshape(3, 3, 3)
    kept = final[:2, 1, :]
    residual = float(np.sum(np.abs(final) ** 2) - np.sum(np.abs(kept) ** 2))
    return RoutingMap(kept, routing_target(control), residual)


def enlarged_routing_map(control, models, sender, receiver, t_grid, decay=None):
    """The routing map from a single run over both auxiliary branches.

    ``models`` maps 4 and 5 to router models with that auxiliary atom. The
    blockade output seeds the joint basis of
    :func:`~chiralrouter.fullmodel.superposition_router`; its final register
    amplitudes go through pulses (iii) and (iv). Returns (RoutingMap, trajectory).
    """
    from .fullmodel import superposition_router

    if not isinstance(control, ControlQubit):
        control = ControlQubit(*control)
    if set(models) != {4, 5}:
        raise ValueError("models for auxiliary atoms 4 and 5 are required")
    aux = blockade_gate(control).state.reshape(3, 3)
    branch = {4: (2, 1), 5: (0, 2)}  # (l4, l5) with the given atom in |->
    amps = {k: aux[branch[k]] for k in (4, 5)}
    traj = superposition_router(models, amps, sender, receiver, t_grid, decay)
    routed = np.zeros((3, 3, 3), dtype=complex)
    for k, (l4, l5) in branch.items():
        routed[l4, l5] = [traj.amplitude(f"{k}|{x}") for x in REGISTER]
    return _close_routing(control, routed), traj


# ---------------------------------------------------------------------------
# Sender and receiver pulses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundarySchedule:
    """Pulse sequence mapped onto the network-layer boundary couplings."""

    qubit: tuple
    J_s: PulseProfile
    J_r: PulseProfile
    sequence: tuple

    @property
    def excitation_amplitude(self):
        return self.qubit[1]


def sender_receiver_pulses(qubit, omega_s, omega_r, peak):
    """Map the laser envelopes Omega_s(t), Omega_r(t) onto J_s(t), J_r(t).

    The couplings follow the envelopes, J(t)/peak = Omega(t)/max Omega; the
    ground-state preparation and closing pi-pulses are ideal unitaries that
    only appear in ``sequence``.
    """
    c0, c1 = (complex(x) for x in qubit)
    norm = abs(c0) ** 2 + abs(c1) ** 2
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"sender qubit is not normalized (norm {norm:.15g})")
    J_s = replace(omega_s, peak=peak)
    J_r = replace(omega_r, peak=peak)
    sequence = (
        PulseOp("all", ("g", "0")),
        PulseOp("s", ("e", "1"), rabi=omega_s.peak),
        PulseOp("r", ("1", "e"), rabi=omega_r.peak),
        PulseOp("all", ("0", "g")),
    )
    return BoundarySchedule((c0, c1), J_s, J_r, sequence)


def transfer_qubit(schedule, N, J, model="nearest_neighbor", **kw):
    """Receiver qubit (c0, c1 * a) after a chain transfer driven by ``schedule``.

    The |g> component never enters the network; the |e> component becomes the
    single excitation whose receiver amplitude a comes from the chain run.
    """
    c0, c1 = schedule.qubit
    if c1 == 0:
        return (c0, 0j), TransferResult(0.0, None, 0j)
    if schedule.J_s.T != schedule.J_r.T or schedule.J_s.t_m != schedule.J_r.t_m:
        raise ValueError("sender and receiver envelopes must share t_m and T")
    res, _ = run_transfer(N, J, schedule.J_s.t_m, schedule.J_s.T, model, schedule.J_s.peak, **kw)
    return (c0, c1 * res.amplitude), res
