"""Single-excitation spin networks: chains, routers, boundary pulses, propagation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

PROFILE_KINDS = ("ramp_on", "ramp_off", "constant", "zero")
CHAIN_MODELS = ("nearest_neighbor", "dipolar_r3")


@dataclass(frozen=True)
class PulseProfile:
    """Boundary-coupling envelope.

    ``ramp_on`` rises as peak*t/T until t_m and is then switched off;
    ``ramp_off`` is its time reverse, peak*(1 - t/T) on [T - t_m, T].
    """

    kind: str
    t_m: float = 0.0
    T: float = 1.0
    peak: float = 1.0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}; expected one of {PROFILE_KINDS}")
        if self.kind in ("ramp_on", "ramp_off"):
            if self.T <= 0:
                raise ValueError("T must be positive")
            if not 0 <= self.t_m <= self.T:
                raise ValueError(f"t_m={self.t_m} outside [0, T={self.T}]")

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(t)
        if self.kind == "constant":
            return np.full_like(t, self.peak)
        if self.kind == "ramp_on":
            return np.where(t <= self.t_m, self.peak * t / self.T, 0.0)
        return np.where(t >= self.T - self.t_m, self.peak * (1.0 - t / self.T), 0.0)

    def breakpoints(self):
        if self.kind == "ramp_on":
            return (self.t_m,)
        if self.kind == "ramp_off":
            return (self.T - self.t_m,)
        return ()

    def max_abs(self):
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return abs(self.peak)
        return abs(self.peak) * self.t_m / self.T

    @property
    def is_static(self):
        return self.kind in ("constant", "zero")


@dataclass(frozen=True)
class SpinNetwork:
    """Labeled sites with on-site energies and Hermitian edges.

    ``edges`` maps (i, j) to (amplitude, profile): the matrix element
    <j|H|i> is amplitude (static edge, profile ``None``) or
    amplitude * profile.value(t); <i|H|j> is its conjugate.
    """

    sites: tuple
    onsite: dict = field(default_factory=dict)
    edges: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.sites)) != len(self.sites):
            raise ValueError("duplicate site labels")
        known = set(self.sites)
        for key in self.onsite:
            if key not in known:
                raise ValueError(f"on-site energy for unknown site {key!r}")
        for i, j in self.edges:
            if i not in known or j not in known:
                raise ValueError(f"edge ({i!r}, {j!r}) references an unknown site")
            if i == j:
                raise ValueError("self-edges belong in onsite")
            if (j, i) in self.edges:
                raise ValueError(f"edge ({i!r}, {j!r}) stored in both directions")

    @property
    def dim(self):
        return len(self.sites)

    def index(self, label):
        try:
            return self.sites.index(label)
        except ValueError:
            raise KeyError(f"no site {label!r}") from None

    def basis_state(self, label):
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.index(label)] = 1.0
        return psi

    def static_hamiltonian(self):
        H = np.zeros((self.dim, self.dim), dtype=complex)
        for s, e in self.onsite.items():
            H[self.index(s), self.index(s)] = e
        for (i, j), (amp, prof) in self.edges.items():
            if prof is None or prof.is_static:
                val = amp if prof is None else amp * float(prof.value(0.0))
                a, b = self.index(i), self.index(j)
                H[b, a] += val
                H[a, b] += np.conj(val)
        return H

    def driven_terms(self):
        """[(profile, V)] with H(t) = static + sum profile.value(t) * V."""
        out = []
        for (i, j), (amp, prof) in self.edges.items():
            if prof is None or prof.is_static:
                continue
            V = np.zeros((self.dim, self.dim), dtype=complex)
            a, b = self.index(i), self.index(j)
            V[b, a] = amp
            V[a, b] = np.conj(amp)
            out.append((prof, V))
        return out

    def hamiltonian(self, t=0.0):
        H = self.static_hamiltonian()
        for prof, V in self.driven_terms():
            H = H + float(prof.value(t)) * V
        return H

    @property
    def is_static(self):
        return not self.driven_terms()

    def breakpoints(self):
        pts = set()
        for prof, _ in self.driven_terms():
            pts.update(prof.breakpoints())
        return sorted(pts)

    def with_onsite(self, updates):
        onsite = dict(self.onsite)
        for k, v in updates.items():
            onsite[k] = onsite.get(k, 0.0) + v
        return SpinNetwork(self.sites, onsite, dict(self.edges))


@dataclass(frozen=True)
class MatrixNetwork:
    """Network given directly as a static matrix plus driven edges.

    ``driven`` holds (profile, i, j, amplitude) entries adding
    amplitude * profile(t) to <j|H|i> and its conjugate to <i|H|j>.
    """

    sites: tuple
    matrix: np.ndarray
    driven: tuple = ()

    @property
    def dim(self):
        return len(self.sites)

    def index(self, label):
        try:
            return self.sites.index(label)
        except ValueError:
            raise KeyError(f"no site {label!r}") from None

    def basis_state(self, label):
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.index(label)] = 1.0
        return psi

    def static_hamiltonian(self):
        H = np.array(self.matrix, dtype=complex)
        for prof, i, j, amp in self.driven:
            if prof.is_static:
                a, b = self.index(i), self.index(j)
                H[b, a] += amp * float(prof.value(0.0))
                H[a, b] += np.conj(amp * float(prof.value(0.0)))
        return H

    def driven_terms(self):
        out = []
        for prof, i, j, amp in self.driven:
            if prof.is_static:
                continue
            V = np.zeros((self.dim, self.dim), dtype=complex)
            a, b = self.index(i), self.index(j)
            V[b, a] = amp
            V[a, b] = np.conj(amp)
            out.append((prof, V))
        return out

    def hamiltonian(self, t=0.0):
        H = self.static_hamiltonian()
        for prof, V in self.driven_terms():
            H = H + float(prof.value(t)) * V
        return H

    def breakpoints(self):
        pts = set()
        for prof, _ in self.driven_terms():
            pts.update(prof.breakpoints())
        return sorted(pts)


def chain_hamiltonian(N, J, B=0.0, model="nearest_neighbor"):
    """Uniform chain labeled 1..N with couplings J (nearest neighbour) or J/m^3."""
    if N < 1:
        raise ValueError("N must be >= 1")
    sites = tuple(range(1, N + 1))
    onsite = {s: B for s in sites} if B else {}
    edges = {}
    for i in range(1, N):
        if model == "nearest_neighbor":
            edges[(i, i + 1)] = (J, None)
        elif model == "dipolar_r3":
            for j in range(i + 1, N + 1):
                edges[(i, j)] = (J / (j - i) ** 3, None)
        else:
            raise ValueError(f"unknown chain model {model!r}")
    return SpinNetwork(sites, onsite, edges)


def chain_spectrum(N, J, model="nearest_neighbor", method="formula"):
    """Single-excitation energies, sorted descending.

    ``method="formula"`` evaluates the cosine law (nearest neighbour) or the
    finite cosine sum over r^-3 couplings; ``"diagonalize"`` diagonalizes the
    open chain. For r^-3 couplings the two differ: the cosine sum neglects
    the chain ends.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if method == "diagonalize":
        return np.sort(np.linalg.eigvalsh(chain_hamiltonian(N, J, model=model).static_hamiltonian()))[::-1]
    n = np.arange(1, N + 1)
    if model == "nearest_neighbor":
        E = 2 * J * np.cos(np.pi * n / (N + 1))
    elif model == "dipolar_r3":
        m = np.arange(1, N)[:, None]
        E = 2 * np.sum(J / m**3 * np.cos(np.pi * n[None, :] * m / (N + 1)), axis=0)
    else:
        raise ValueError(f"unknown chain model {model!r}")
    return np.sort(E)[::-1]


def attach_boundary(network, site, external, profile, B_ext=0.0, phase=1.0):
    """Add ``external`` coupled to ``site`` with amplitude phase * profile(t)."""
    if external in network.sites:
        raise ValueError(f"site {external!r} already exists")
    network.index(site)
    onsite = dict(network.onsite)
    if B_ext:
        onsite[external] = B_ext
    edges = dict(network.edges)
    edges[(external, site)] = (phase, profile)
    return SpinNetwork(network.sites + (external,), onsite, edges)


def router_network(N_left, N_right, triangle, J, allow_even=False):
    """Flux triangle whose sites 2 and 3 continue into uniform subchains.

    Site labels: triangle 1, 2, 3; left chain ``L1..`` hanging off site 2 and
    right chain ``R1..`` off site 3, each of ``N_left``/``N_right`` sites.
    The returned network exposes ``1`` for the sender and the chain ends
    (``ends``) for receivers.
    """
    for name, n in (("N_left", N_left), ("N_right", N_right)):
        if n < 0:
            raise ValueError(f"{name} must be >= 0")
        if n % 2 == 0 and not allow_even:
            raise ValueError(f"{name}={n} is even: the sender couples to no zero mode; "
                             "pass allow_even=True to override")
    from .triangle import build_h3

    H3 = build_h3(triangle)
    sites = [1, 2, 3]
    onsite = {k + 1: float(H3[k, k].real) for k in range(3) if H3[k, k] != 0}
    edges = {(1, 2): (H3[1, 0], None), (2, 3): (H3[2, 1], None), (3, 1): (H3[0, 2], None)}
    prev = 2
    for k in range(1, N_left + 1):
        sites.append(f"L{k}")
        edges[(prev, f"L{k}")] = (J, None)
        prev = f"L{k}"
    prev = 3
    for k in range(1, N_right + 1):
        sites.append(f"R{k}")
        edges[(prev, f"R{k}")] = (J, None)
        prev = f"R{k}"
    return SpinNetwork(tuple(sites), onsite, edges)


def router_ends(N_left, N_right):
    left = f"L{N_left}" if N_left else 2
    right = f"R{N_right}" if N_right else 3
    return left, right


# ---------------------------------------------------------------------------
# Propagation
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    labels: tuple

    @property
    def norms(self):
        """<psi|psi> per time (decays as e^{-Gamma t} under a uniform rate Gamma)."""
        return np.sum(np.abs(self.states) ** 2, axis=1)

    def populations(self):
        return np.abs(self.states) ** 2

    def population(self, label):
        return self.populations()[:, self.labels.index(label)]

    def amplitude(self, label, k=-1):
        return self.states[k, self.labels.index(label)]

    def to_csv(self, path):
        def fmt(x):
            return f"{x:.12g}"

        header = (["t_us"] + [f"site_{l}_pop" for l in self.labels] + ["norm"]
                  + [f"re_amp_{l}" for l in self.labels] + [f"im_amp_{l}" for l in self.labels])
        pops, norms = self.populations(), self.norms
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for k, t in enumerate(self.times):
                row = [fmt(t)] + [fmt(p) for p in pops[k]] + [fmt(norms[k])]
                row += [fmt(a.real) for a in self.states[k]] + [fmt(a.imag) for a in self.states[k]]
                w.writerow(row)


def _decay_vector(decay, network_or_dim, labels=None):
    if decay is None:
        return None
    if np.isscalar(decay):
        n = network_or_dim if isinstance(network_or_dim, int) else network_or_dim.dim
        return np.full(n, float(decay))
    if isinstance(decay, dict):
        g = np.zeros(len(labels))
        for k, v in decay.items():
            g[labels.index(k)] = v
        return g
    return np.asarray(decay, dtype=float)


def _static_evolution(H, psi0, times):
    if np.allclose(H, H.conj().T, atol=0, rtol=0):
        E, U = np.linalg.eigh(H)
        c = U.conj().T @ psi0
        return (U @ (np.exp(-1j * np.outer(E, times)) * c[:, None])).T
    E, U = np.linalg.eig(H)
    c = np.linalg.solve(U, psi0)
    return (U @ (np.exp(-1j * np.outer(E, times)) * c[:, None])).T


# Gauss-Legendre nodes and weights of the 4th-order commutator-free Magnus scheme.
_CF_C = (0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6)
_CF_A = (0.25 + math.sqrt(3) / 6, 0.25 - math.sqrt(3) / 6)


def _expm_herm(A, h):
    """exp(-i h A) for A = H - i G/2 with Hermitian H and real diagonal G."""
    G = -2 * np.diag(A).imag
    H = A + 0.5j * np.diag(G)
    if not np.any(G):
        E, U = np.linalg.eigh(H)
        return (U * np.exp(-1j * h * E)) @ U.conj().T
    if np.ptp(G) == 0:
        E, U = np.linalg.eigh(H)
        return (U * np.exp(-1j * h * E)) @ U.conj().T * math.exp(-0.5 * G[0] * h)
    return scipy.linalg.expm(-1j * h * A)


def _segments(t0, t1, breaks):
    pts = [t0] + [b for b in breaks if t0 < b < t1] + [t1]
    return list(zip(pts[:-1], pts[1:]))


def propagate(network, initial, t_grid, decay=None, method="magnus4", phase_step=None,
              max_step=None):
    """Solve i dpsi/dt = (H(t) - i Gamma/2) psi and sample on ``t_grid``.

    ``initial`` is a site label or a state vector. ``decay`` is a scalar rate
    applied to every site, a per-site array, or a {label: rate} dict.

    Static networks use an eigendecomposition. Driven networks are stepped
    with a 4th-order commutator-free Magnus scheme (unitary, so the norm is
    conserved to rounding) or classical RK4 (``method="rk4"``). RK4 steps
    satisfy h * max||H(t)|| <= phase_step (default 0.05). Magnus steps
    treat the static part exactly and are limited by the ramps:
    h * max(D, sqrt(||H0 - diag H0|| D)) <= phase_step (default 0.5), with D
    the largest norm of the driven part. No step straddles a breakpoint.
    """
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("t_grid must be a non-empty 1-d array")
    if np.any(np.diff(times) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    psi0 = network.basis_state(initial) if not isinstance(initial, np.ndarray) else initial.astype(complex)
    if psi0.shape != (network.dim,):
        raise ValueError("initial state has the wrong dimension")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-9:
        raise ValueError("initial state must be normalized")
    gamma = _decay_vector(decay, network, network.sites)
    if gamma is not None and np.any(gamma < 0):
        raise ValueError("decay rates must be non-negative")
    H0 = network.static_hamiltonian()
    if gamma is not None:
        H0 = H0 - 0.5j * np.diag(gamma)
    driven = network.driven_terms()
    labels = tuple(network.sites)
    if not driven:
        states = _static_evolution(H0, psi0, times - times[0])
        return Trajectory(times, states, labels)

    if phase_step is None:
        phase_step = 0.5 if method == "magnus4" else 0.05
    drive = sum(p.max_abs() * np.linalg.norm(V, 2) for p, V in driven)
    if method == "magnus4":
        # Constant parts are exponentiated exactly; the error comes from the
        # ramps through commutators with the static couplings.
        off = np.linalg.norm(H0 - np.diag(np.diag(H0)), 2)
        hnorm = max(drive, math.sqrt(off * drive))
    else:
        hnorm = np.linalg.norm(H0, 2) + drive
    h_target = phase_step / max(hnorm, 1e-300)
    if max_step is not None:
        h_target = min(h_target, max_step)

    def H_at(t):
        H = H0.copy()
        for prof, V in driven:
            H += float(prof.value(t)) * V
        return H

    breaks = network.breakpoints()
    states = np.empty((times.size, network.dim), dtype=complex)
    psi = psi0.copy()
    states[0] = psi
    for k in range(1, times.size):
        for a, b in _segments(times[k - 1], times[k], breaks):
            n = max(1, math.ceil((b - a) / h_target))
            h = (b - a) / n
            for s in range(n):
                t = a + s * h
                if method == "magnus4":
                    # Each stage samples inside the open step, away from the breakpoints.
                    H1, H2 = H_at(t + _CF_C[0] * h), H_at(t + _CF_C[1] * h)
                    psi = _expm_herm(_CF_A[0] * H1 + _CF_A[1] * H2, h) @ psi
                    psi = _expm_herm(_CF_A[1] * H1 + _CF_A[0] * H2, h) @ psi
                elif method == "rk4":
                    # Sample the ramps just inside the step so breakpoints stay on nodes.
                    eps = 1e-12 * h
                    Ha, Hm, Hb = H_at(t + eps), H_at(t + h / 2), H_at(t + h - eps)
                    k1 = -1j * (Ha @ psi)
                    k2 = -1j * (Hm @ (psi + 0.5 * h * k1))
                    k3 = -1j * (Hm @ (psi + 0.5 * h * k2))
                    k4 = -1j * (Hb @ (psi + h * k3))
                    psi = psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                else:
                    raise ValueError(f"unknown method {method!r}")
        if not np.all(np.isfinite(psi)):
            raise FloatingPointError(f"propagation diverged near t={times[k]} (step {h_target:g})")
        states[k] = psi
    return Trajectory(times, states, labels)


@dataclass(frozen=True)
class TransferResult:
    P_T: float
    zeta: float | None
    amplitude: complex


def transfer_result(trajectory, sender, receiver):
    """P_T = |<r|psi(T)>|^2 and zeta = arg <r|psi(T)> (only when P_T > 0.5)."""
    if abs(abs(trajectory.amplitude(sender, 0)) - 1.0) > 1e-9:
        raise ValueError("trajectory does not start in the sender state")
    amp = complex(trajectory.amplitude(receiver))
    P = abs(amp) ** 2
    zeta = float(np.angle(amp)) if P > 0.5 else None
    if zeta is not None and zeta <= -math.pi:
        zeta += 2 * math.pi
    return TransferResult(P, zeta, amp)


# ---------------------------------------------------------------------------
# Protocol search
# ---------------------------------------------------------------------------

def transfer_network(N, J, model, t_m, T, peak=None):
    """Chain 1..N with sender ``s`` on site 1 and receiver ``r`` on site N."""
    return with_transfer_boundaries(chain_hamiltonian(N, J, model=model), 1, {"r": N},
                                    t_m, T, J if peak is None else peak)


def with_transfer_boundaries(network, sender_site, receivers, t_m, T, peak):
    """Attach sender ``s`` (ramp_on) and receivers {label: site} (ramp_off)."""
    net = attach_boundary(network, sender_site, "s", PulseProfile("ramp_on", t_m, T, peak))
    for label, site in receivers.items():
        net = attach_boundary(net, site, label, PulseProfile("ramp_off", t_m, T, peak))
    return net


def run_transfer(N, J, t_m, T, model="nearest_neighbor", peak=None, samples=2, **kw):
    net = transfer_network(N, J, model, t_m, T, peak)
    traj = propagate(net, "s", np.linspace(0.0, T, samples), **kw)
    return transfer_result(traj, "s", "r"), traj


def _screen_tm(network, sender_site, receiver_sites, T, tm_fracs, peak, phase_step=0.2):
    """Batched RK4 screening of receiver populations over t_m at fixed T.

    Coarse scans only. The step grid is chosen so every t_m and T - t_m lands
    on a node. Returns (t_m values, populations[t_m, receiver]).
    """
    m = network.dim
    n = m + 1 + len(receiver_sites)
    H0 = np.zeros((n, n), dtype=complex)
    H0[1:m + 1, 1:m + 1] = network.static_hamiltonian()
    Vs = np.zeros((n, n))
    k = 1 + network.index(sender_site)
    Vs[0, k] = Vs[k, 0] = 1.0
    Vr = np.zeros((n, n))
    for q, site in enumerate(receiver_sites):
        k = 1 + network.index(site)
        Vr[m + 1 + q, k] = Vr[k, m + 1 + q] = 1.0
    hnorm = np.linalg.norm(H0, 2) + 2 * abs(peak)
    steps = max(20, math.ceil(T * hnorm / phase_step))
    h = T / steps
    km = np.clip(np.rint(np.asarray(tm_fracs) * steps).astype(int), 1, steps)
    tm = km * h
    psi = np.zeros((km.size, n), dtype=complex)
    psi[:, 0] = 1.0

    def coeffs(t, inside):
        # inside=+1 / -1 picks the one-sided limit at a node.
        s = np.where((t < tm) | ((t == tm) & (inside < 0)), peak * t / T, 0.0)
        r = np.where((t > T - tm) | ((t == T - tm) & (inside > 0)), peak * (1 - t / T), 0.0)
        return s[:, None], r[:, None]

    def f(t, y, side):
        s, r = coeffs(t, side)
        return -1j * (y @ H0.T + s * (y @ Vs.T) + r * (y @ Vr.T))

    for k in range(steps):
        t = k * h
        k1 = f(t, psi, +1)
        k2 = f(t + h / 2, psi + 0.5 * h * k1, 0)
        k3 = f(t + h / 2, psi + 0.5 * h * k2, 0)
        k4 = f(t + h, psi + h * k3, -1)
        psi = psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return tm, np.abs(psi[:, m + 1:]) ** 2


def _golden(f, lo, hi, x0, iters=25):
    """Golden-section maximization of f on [lo, hi]; returns (x, f(x))."""
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    best = max([(fc, c), (fd, d), (f(x0), x0)])
    return best[1], best[0]


def scan_protocol(N, J=1.0, model="nearest_neighbor", T_range=None, n_T=40, n_tm=40,
                  refine=True, peak=None):
    """Maximize P_T over (t_m, T) for ramp_on/ramp_off boundary couplings.

    Coarse n_T x n_tm grid with T in [0.8 N/(2J), 3 N/(2J) + 20/J] (default)
    and t_m in [0.1 T, T], then golden-section refinement along T and t_m.
    The additive 20/J keeps the slow adiabatic regime of short chains in range.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    best = _scan(chain_hamiltonian(N, J, model=model), 1, {"r": N}, "r", N, J, T_range,
                 n_T, n_tm, refine, J if peak is None else peak)
    return dict(best, N=N, J=J, model=model)


def scan_router_protocol(network, receivers, target, length, J=1.0, T_range=None, n_T=30,
                         n_tm=30, refine=True, peak=None):
    """The same (t_m, T) search for a router: sender on site 1, several receivers.

    ``receivers`` maps labels to sites; ``target`` names the receiver whose
    final population is maximized, ``length`` sets the default T window like N.
    """
    return _scan(network, 1, receivers, target, length, J, T_range, n_T, n_tm, refine,
                 J if peak is None else peak)


def _scan(network, sender_site, receivers, target, length, J, T_range, n_T, n_tm, refine, peak):
    base = length / (2 * abs(J))
    lo, hi = T_range if T_range is not None else (0.8 * base, 3.0 * base + 20.0 / abs(J))
    labels = list(receivers)
    q = labels.index(target)
    sites = [receivers[k] for k in labels]
    fracs = np.linspace(0.1, 1.0, n_tm)
    best = (-1.0, None, None)
    for T in np.linspace(lo, hi, n_T):
        tm, P = _screen_tm(network, sender_site, sites, T, fracs, peak)
        k = int(np.argmax(P[:, q]))
        if P[k, q] > best[0]:
            best = (float(P[k, q]), float(tm[k]), float(T))
    P_best, t_m, T = best

    def run(tm_, T_):
        net = with_transfer_boundaries(network, sender_site, receivers, tm_, T_, peak)
        return propagate(net, "s", np.array([0.0, T_]))

    def score(tm_, T_):
        if not 0 < tm_ <= T_:
            return -1.0
        return float(run(tm_, T_).population(target)[-1])

    if refine:
        dT = (hi - lo) / max(n_T - 1, 1)
        for _ in range(2):
            frac = t_m / T
            T, _ = _golden(lambda x: score(min(frac * x, x), x), max(1e-9, T - dT), T + dT, T)
            dtm = T * 0.9 / max(n_tm - 1, 1)
            t_m, _ = _golden(lambda x: score(x, T), max(1e-9, t_m - dtm), min(T, t_m + dtm), min(t_m, T))
    res = transfer_result(run(t_m, T), "s", target)
    return {"t_m": t_m, "T": T, "P_T": res.P_T, "zeta": res.zeta}
