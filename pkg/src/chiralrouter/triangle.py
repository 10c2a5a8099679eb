"""The flux triangle: abstract 3-site model, effective Rydberg triangle, flux solver."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .atomic import field_for_detuning, router_transitions, transition_detuning
from .interaction import (c_coefficients, pair_coupling_AA, pair_coupling_AB,
                          pair_coupling_full, router_geometry)
from .network import SpinNetwork, propagate


def wrap_phase(x):
    """Map an angle to (-pi, pi]."""
    y = math.remainder(float(x), 2 * math.pi)
    return math.pi if y == -math.pi else y


@dataclass(frozen=True)
class FluxTriangle:
    """H_12 = |J_1| e^{-i gamma_1}, H_23 = |J_2| e^{-i gamma_2}, H_31 = |J_3| e^{-i gamma_3}."""

    j_abs: tuple = (1.0, 1.0, 1.0)
    gamma: tuple = (0.0, 0.0, 0.0)
    mu: tuple = (0.0, 0.0, 0.0)

    @classmethod
    def uniform(cls, J, gamma_tot, mu=(0.0, 0.0, 0.0)):
        return cls((J, J, J), (gamma_tot / 3,) * 3, tuple(mu))

    @classmethod
    def from_matrix(cls, H):
        H = np.asarray(H)
        pairs = ((0, 1), (1, 2), (2, 0))
        return cls(tuple(float(abs(H[i, j])) for i, j in pairs),
                   tuple(float(-np.angle(H[i, j])) for i, j in pairs),
                   tuple(float(H[k, k].real) for k in range(3)))

    @property
    def couplings(self):
        return tuple(a * np.exp(-1j * g) for a, g in zip(self.j_abs, self.gamma))

    @property
    def gamma_tot(self):
        return wrap_phase(sum(self.gamma))

    @property
    def mean_coupling(self):
        return float(np.mean(self.j_abs))

    @property
    def period(self):
        """Circulation period 2 pi / (sqrt3 mean|J|)."""
        return 2 * math.pi / (math.sqrt(3) * self.mean_coupling)

    def conjugate(self):
        return FluxTriangle(self.j_abs, tuple(-g for g in self.gamma), self.mu)


def build_h3(triangle):
    J1, J2, J3 = triangle.couplings
    H = np.diag(np.asarray(triangle.mu, dtype=complex))
    H[0, 1], H[1, 2], H[2, 0] = J1, J2, J3
    H[1, 0], H[2, 1], H[0, 2] = np.conj(J1), np.conj(J2), np.conj(J3)
    return H


@dataclass(frozen=True)
class FluxDiagnostic:
    equal_magnitudes: bool
    chiral_phase: bool
    chirality: int
    gamma_tot: float
    magnitude_spread: float
    phase_error: float

    @property
    def satisfied(self):
        return self.equal_magnitudes and self.chiral_phase


def check_flux_conditions(triangle, tol=1e-6):
    """Equal |J_j| (relative spread <= tol) and gamma_tot = +-pi/2 within tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    mags = np.asarray(triangle.j_abs, dtype=float)
    scale = max(float(mags.max()), 1e-300)
    spread = float(mags.max() - mags.min()) / scale
    gt = triangle.gamma_tot
    err = abs(abs(gt) - math.pi / 2)
    chiral = err <= tol
    sign = (-1 if gt < 0 else 1) if chiral else 0
    return FluxDiagnostic(spread <= tol, chiral, sign, gt, spread, err)


def triangle_network(triangle, subtract_mean=True):
    """Three-site network labeled 1, 2, 3.

    Equal on-site shifts are a global offset; ``subtract_mean`` removes the mean.
    """
    H = build_h3(triangle)
    mu = np.real(np.diag(H))
    if subtract_mean:
        mu = mu - mu.mean()
    onsite = {k + 1: float(mu[k]) for k in range(3) if mu[k] != 0.0}
    edges = {(1, 2): (H[1, 0], None), (2, 3): (H[2, 1], None), (3, 1): (H[0, 2], None)}
    return SpinNetwork((1, 2, 3), onsite, edges)


def triangle_dynamics(triangle, t_grid, initial=1):
    return propagate(triangle_network(triangle), initial, t_grid)


def circulation_metric(trajectory, site_order=(1, 2, 3), period=None, mean_coupling=None):
    """Chirality score in [-1, 1] for an excitation starting on site_order[0].

    With d(t) = P_next(t) - P_reverse(t) over the first half period [0, P/2],
    the score is max d + min d: +1 when the next site in the claimed order
    fills while the reverse site stays empty, -1 for the opposite sense, 0 for
    a mirror-symmetric revival. P = 2 pi / (sqrt3 mean|J|) unless given.
    """
    if period is None:
        if mean_coupling is None:
            raise ValueError("pass period or mean_coupling")
        period = 2 * math.pi / (math.sqrt(3) * abs(mean_coupling))
    times = np.asarray(trajectory.times)
    if times[-1] - times[0] < period * (1 - 1e-9):
        raise ValueError(f"trajectory spans {times[-1] - times[0]:g} < one period {period:g}")
    _, nxt, rev = site_order
    window = times - times[0] <= 0.5 * period * (1 + 1e-12)
    d = np.asarray(trajectory.population(nxt))[window] - np.asarray(trajectory.population(rev))[window]
    return float(np.clip(d.max() + d.min(), -1.0, 1.0))


# ---------------------------------------------------------------------------
# Effective Rydberg triangle
# ---------------------------------------------------------------------------

MAIN_ATOMS = (1, 2, 3)
# (row, column) entries of H whose phases define gamma_12, gamma_23, gamma_13.
_PHASE_ENTRIES = ((0, 1), (1, 2), (2, 0))


@dataclass
class EffectiveTriangle:
    """Main-atom Hamiltonian after eliminating the auxiliary |+> level.

    ``hamiltonian[j, i]`` is the amplitude for i -> j. ``gamma`` holds
    (gamma_12, gamma_23, gamma_13) defined by H_12 = |J| e^{-i gamma_12},
    H_23 = |J| e^{-i gamma_23}, H_31 = |J| e^{-i gamma_13}.
    """

    hamiltonian: np.ndarray
    detuning: float
    aux: int
    provenance: dict = field(default_factory=dict)

    @property
    def mu(self):
        return np.real(np.diag(self.hamiltonian)).copy()

    @property
    def j_abs(self):
        return np.array([abs(self.hamiltonian[i, j]) for i, j in _PHASE_ENTRIES])

    @property
    def gamma(self):
        return np.array([-np.angle(self.hamiltonian[i, j]) for i, j in _PHASE_ENTRIES])

    @property
    def gamma_tot(self):
        H = self.hamiltonian
        return wrap_phase(-np.angle(H[0, 1] * H[1, 2] * H[2, 0]))

    def to_flux_triangle(self):
        return FluxTriangle.from_matrix(self.hamiltonian)


def _default_transitions(transitions):
    return router_transitions() if transitions is None else transitions


def effective_triangle(geometry, transitions=None, B=0.0, aux=4, detuning=None,
                       coefficients=None, adiabaticity=5.0):
    """Second-order effective Hamiltonian of main atoms 1-3 via auxiliary atom ``aux``.

    H_ii = -|A_ik|^2 / Delta and H_ji = T_ij - A_jk conj(A_ik) / Delta, with
    T_ij the direct flip-flop and A_ik = <1_i -_k|V|0_i +_k>. Delta is the
    auxiliary transition minus the main transition at field B (overridable).
    """
    main_t, aux_t = _default_transitions(transitions)
    delta = transition_detuning(main_t, aux_t, B) if detuning is None else float(detuning)
    if delta == 0.0:
        raise ValueError("detuning is zero: adiabatic elimination is undefined")
    C = coefficients or c_coefficients(main_t, aux_t)
    A = {}
    for i in MAIN_ATOMS:
        r, th, ph = geometry.angles(i, aux)
        A[i] = pair_coupling_AB(r, th, ph, C["C_AB"])
    vmax = max(abs(v) for v in A.values())
    if abs(delta) < adiabaticity * vmax:
        warnings.warn(f"|Delta|={abs(delta):.4g} is below {adiabaticity} x max|V_AB|={vmax:.4g}; "
                      "adiabatic elimination is unreliable", RuntimeWarning, stacklevel=2)
    H = np.zeros((3, 3), dtype=complex)
    T, S2, T2 = {}, {}, {}
    for i in MAIN_ATOMS:
        S2[i] = -abs(A[i]) ** 2 / delta
        H[i - 1, i - 1] = S2[i]
        for j in MAIN_ATOMS:
            if i == j:
                continue
            r, th, _ = geometry.angles(i, j)
            T[(i, j)] = pair_coupling_AA(r, th, C["C_AA"])
            T2[(i, j)] = -A[j] * np.conj(A[i]) / delta
            H[j - 1, i - 1] = T[(i, j)] + T2[(i, j)]
    prov = {"T": T, "S2": S2, "T2": T2, "V_AB": A, "coefficients": dict(C)}
    return EffectiveTriangle(H, delta, aux, prov)


def four_state_hamiltonian(geometry, transitions=None, B=0.0, aux=4, detuning=None):
    """Truncated model |1_1>, |1_2>, |1_3>, |+_aux> with the auxiliary level kept.

    Built from the full dipole-dipole blocks restricted to the designated
    levels (not from the truncated formulas), energies relative to the main
    transition.
    """
    main_t, aux_t = _default_transitions(transitions)
    delta = transition_detuning(main_t, aux_t, B) if detuning is None else float(detuning)
    lv_m = (main_t.lower, main_t.upper)
    lv_a = (aux_t.lower, aux_t.upper)
    H = np.zeros((4, 4), dtype=complex)
    H[3, 3] = delta
    for i in MAIN_ATOMS:
        for j in MAIN_ATOMS:
            if i < j:
                pc = pair_coupling_full(lv_m, lv_m, geometry, i, j, main_t.species, main_t.species)
                H[j - 1, i - 1] = pc.element(0, 1, 1, 0)
                H[i - 1, j - 1] = pc.element(1, 0, 0, 1)
        pc = pair_coupling_full(lv_m, lv_a, geometry, i, aux, main_t.species, aux_t.species)
        H[3, i - 1] = pc.element(0, 1, 1, 0)   # |1_i -_k> -> |0_i +_k>
        H[i - 1, 3] = pc.element(1, 0, 0, 1)
    return H


# ---------------------------------------------------------------------------
# Flux-condition solver
# ---------------------------------------------------------------------------

@dataclass
class FluxSolution:
    a: float
    b: float
    c: float
    detuning: float
    B: float
    aux_sign: float
    residual: float
    iterations: int
    converged: bool
    effective: EffectiveTriangle | None = None

    @property
    def field_reachable(self):
        """False when the affine Zeeman model needs a reversed field."""
        return self.B >= 0.0

    def geometry(self):
        return router_geometry(self.a, self.b, self.c, self.aux_sign)


def flux_residuals(a, b, c, detuning, transitions=None, aux_sign=1.0, coefficients=None,
                   target=-math.pi / 2):
    """(mu_1 - mu_2, |J_12| - |J_23|) / |J_23| and gamma_tot - target.

    mu_2 = mu_3, |J_12| = |J_13| and gamma_12 = gamma_13 hold by the mirror
    symmetry of the geometry.
    """
    g = router_geometry(a, b, c, aux_sign)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        eff = effective_triangle(g, transitions, detuning=detuning, coefficients=coefficients)
    H = eff.hamiltonian
    scale = abs(H[1, 2])
    r = np.array([(H[0, 0] - H[1, 1]).real / scale,
                  (abs(H[0, 1]) - abs(H[1, 2])) / scale,
                  wrap_phase(eff.gamma_tot - target)])
    return r, eff


def solve_flux_conditions(a=17.0, transitions=None, initial_guess=None, aux_sign=None,
                          max_iter=100, tol=1e-9, coefficients=None, target=-math.pi / 2):
    """Find (b, c, Delta) so that atom 4 yields an ideal flux triangle.

    Damped Newton on the three residuals of :func:`flux_residuals` in the
    variables (b, c, 1/Delta) with a central-difference Jacobian (relative
    step 1e-6). Both placements of atom 4 are tried unless ``aux_sign`` is
    given; the converged solution nearest the initial guess is returned.
    Also reports the field B realizing Delta under the affine Zeeman model.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    main_t, aux_t = _default_transitions(transitions)
    C = coefficients or c_coefficients(main_t, aux_t)
    guess = {"b": 9.4, "c": 10.0, "delta": -2 * math.pi * 100.0}
    guess.update(initial_guess or {})
    signs = (1.0, -1.0) if aux_sign is None else (float(aux_sign),)
    best = None
    for s in signs:
        for d0 in (guess["delta"], -guess["delta"]):
            sol = _newton(a, guess["b"], guess["c"], d0, (main_t, aux_t), s, C, max_iter, tol, target)
            dist = math.hypot(sol.b - guess["b"], sol.c - guess["c"])
            key = (not sol.converged, sol.residual if not sol.converged else dist)
            if best is None or key < best[0]:
                best = (key, sol)
    return best[1]


def _newton(a, b, c, delta, transitions, sign, C, max_iter, tol, target):
    x = np.array([b, c, 1.0 / delta])
    lo = a / 2 * (1 + 1e-6)

    def F(v):
        if v[0] <= lo or v[1] <= lo or v[2] == 0 or not np.all(np.isfinite(v)):
            return None, None
        return flux_residuals(a, v[0], v[1], 1.0 / v[2], transitions, sign, C, target)

    r, eff = F(x)
    if r is None:
        raise ValueError("initial guess violates b, c > a/2")
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(r)) < 1e-3 * tol:
            break
        Jm = np.empty((3, 3))
        for k in range(3):
            h = 1e-6 * max(abs(x[k]), 1e-12)
            xp, xm = x.copy(), x.copy()
            xp[k] += h
            xm[k] -= h
            rp, rm = F(xp)[0], F(xm)[0]
            if rp is None or rm is None:
                break
            Jm[:, k] = (rp - rm) / (2 * h)
        else:
            try:
                step = np.linalg.solve(Jm, -r)
            except np.linalg.LinAlgError:
                break
            lam = 1.0
            while lam > 1e-6:
                xn = x + lam * step
                rn, en = F(xn)
                if rn is not None and np.max(np.abs(rn)) < np.max(np.abs(r)):
                    x, r, eff = xn, rn, en
                    break
                lam *= 0.5
            else:
                break
            continue
        break
    res = float(np.max(np.abs(r)))
    delta = 1.0 / x[2]
    main_t, aux_t = transitions
    B = field_for_detuning(main_t, aux_t, delta)
    return FluxSolution(a, float(x[0]), float(x[1]), float(delta), float(B), sign, res, it,
                        res < tol, eff)
