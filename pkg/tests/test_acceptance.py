"""One test per acceptance criterion; each prints a PASS/FAIL line."""

import math
import time
import warnings
from contextlib import contextmanager

import numpy as np
import pytest

from chiralrouter.atomic import angular_dipole, AtomLevel, wigner3j
from chiralrouter.fullmodel import (ROUTER_POINT, ROUTER_PULSE, DecayModel, build_basis,
                                    build_full_hamiltonian, compensated, full_model_chirality,
                                    optimize_geometry, router_atoms, router_model, run_router)
from chiralrouter.interaction import (c_coefficients, pair_coupling_AA, pair_coupling_AB,
                                      pair_coupling_full, router_geometry, Geometry)
from chiralrouter.atomic import router_transitions
from chiralrouter.network import (PulseProfile, chain_hamiltonian, chain_spectrum, propagate,
                                  router_ends, router_network, scan_protocol, scan_router_protocol,
                                  transfer_result, with_transfer_boundaries)
from chiralrouter.protocols import ControlQubit, blockade_gate, blockade_target
from chiralrouter.triangle import (FluxTriangle, build_h3, effective_triangle, triangle_dynamics,
                                   wrap_phase)

from conftest import ACCEPTANCE_LINES

PI = math.pi


@contextmanager
def criterion(number, name):
    """Record PASS/FAIL for a criterion; failures still fail the test."""
    notes = []
    try:
        yield notes
    except BaseException:
        line = f"FAIL  {number:>2}. {name}" + (f"  [{'; '.join(notes)}]" if notes else "")
        print(line)
        ACCEPTANCE_LINES.append(line)
        raise
    line = f"PASS  {number:>2}. {name}" + (f"  [{'; '.join(notes)}]" if notes else "")
    print(line)
    ACCEPTANCE_LINES.append(line)




def test_01_flux_triangle_chirality():
    with criterion(1, "flux-triangle chirality") as notes:
        start = time.perf_counter()
        J = 1.0
        t_star = 2 * PI / (3 * math.sqrt(3) * J)
        tri = FluxTriangle((J,) * 3, (-PI / 6,) * 3)
        t = np.linspace(0.0, 2 * t_star, 401)
        fwd = triangle_dynamics(tri, t)
        rev = triangle_dynamics(tri.conjugate(), t)
        # direct diagonalization oracle for the population at t_star
        w, V = np.linalg.eigh(build_h3(tri))
        psi = V @ (np.exp(-1j * w * t_star) * V.conj().T[:, 0])
        p2 = triangle_dynamics(tri, np.array([0.0, t_star])).population(2)[-1]
        notes.append(f"P2(t*)={p2:.12f}")
        assert abs(psi[1]) ** 2 == pytest.approx(p2, abs=1e-12)
        assert p2 >= 0.999
        assert t[np.argmax(fwd.population(2))] < t[np.argmax(fwd.population(3))]
        assert t[np.argmax(rev.population(3))] < t[np.argmax(rev.population(2))]
        assert np.abs(fwd.population(2) - rev.population(3)).max() <= 1e-9
        assert np.abs(fwd.population(3) - rev.population(2)).max() <= 1e-9
        assert np.abs(fwd.population(1) - rev.population(1)).max() <= 1e-9
        elapsed = time.perf_counter() - start
        notes.append(f"{elapsed:.3f} s")
        assert elapsed < 1.0


def test_02_transfer_phase_law():
    with criterion(2, "transfer phase law") as notes:
        for N in (3, 7, 11):
            p = scan_protocol(N)
            assert p["P_T"] >= 0.95
            law = (-PI / 2) * (N + 1) % (2 * PI)
            err = abs(wrap_phase(p["zeta"] - law))
            notes.append(f"N={N} P_T={p['P_T']:.4f} dzeta={err:.1e}")
            assert err <= 0.05


def test_03_chain_transfer_scalability():
    with criterion(3, "chain transfer scalability") as notes:
        start = time.perf_counter()
        for N in (3, 11, 31):
            p = scan_protocol(N, model="nearest_neighbor")
            notes.append(f"N={N} P_T={p['P_T']:.4f}")
            assert p["P_T"] >= 0.95
        elapsed = time.perf_counter() - start
        notes.append(f"{elapsed:.1f} s")
        assert elapsed < 120.0


def test_04_spectrum_formulas():
    with criterion(4, "spectrum formulas") as notes:
        r2 = math.sqrt(2)
        # exact up to rounding: 2 cos(pi/2) evaluates to 1.2e-16, not 0
        nn = np.sort(chain_spectrum(3, 1.0, "nearest_neighbor"))
        lr = np.sort(chain_spectrum(3, 1.0, "dipolar_r3"))
        assert np.abs(nn - np.array([-r2, 0.0, r2])).max() <= 1e-15
        assert np.abs(lr - np.array([-r2, -0.25, r2])).max() <= 1e-15
        worst = 0.0
        for N in range(1, 102):
            formula = np.sort(chain_spectrum(N, 1.0, "nearest_neighbor"))
            diag = np.linalg.eigvalsh(chain_hamiltonian(N, 1.0).static_hamiltonian())
            worst = max(worst, float(np.abs(formula - diag).max()))
        notes.append(f"max |formula - eig| = {worst:.1e}")
        assert worst <= 1e-10


def test_05_effective_triangle(flux_solution):
    # |J| depends on the radial integrals and defect tables; see the decisions ledger.
    with criterion(5, "effective triangle") as notes:
        sol = flux_solution
        notes.append(f"b={sol.b:.3f} c={sol.c:.3f}")
        assert sol.b == pytest.approx(9.39, rel=0.10)
        assert sol.c == pytest.approx(10.04, rel=0.10)
        eff = sol.effective
        assert abs(wrap_phase(eff.gamma[0] - eff.gamma[2])) <= 1e-6
        assert abs(wrap_phase(eff.gamma_tot + PI / 2)) <= 1e-6
        notes.append(f"|J| at solution = {eff.j_abs.mean() * 1e3 / (2 * PI):.1f} 2pi kHz")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            quoted = effective_triangle(router_geometry(17.0, 9.39, 10.04, sol.aux_sign),
                                        detuning=2 * PI * 14.29)
        kHz = quoted.j_abs * 1e3 / (2 * PI)
        notes.append("|J| at quoted point = " + "/".join(f"{k:.1f}" for k in kHz) + " 2pi kHz")
        for k in kHz:
            assert k == pytest.approx(198.1, rel=0.10)


def test_06_full_model_distortion_and_recovery(flux_solution):
    with criterion(6, "full-model distortion and recovery") as notes:
        start = time.perf_counter()
        sol = flux_solution
        unopt = full_model_chirality(sol.a, sol.b, sol.c, sol.B)[0]
        notes.append(f"unoptimized={unopt:.4f}")
        assert unopt < 0.5
        res = optimize_geometry({"b": sol.b, "c": sol.c, "B": sol.B})
        notes.append(f"optimized={res.score:.4f} ({res.evaluations} evals)")
        assert res.score > unopt
        ref = full_model_chirality(17.0, 12.25, 9.83, 46.38)[0]
        notes.append(f"reference point={ref:.4f}")
        assert ref > 0
        elapsed = time.perf_counter() - start
        notes.append(f"{elapsed:.0f} s")
        assert elapsed < 600.0


def _router_report(aux, decay=None, samples=101):
    P, U = ROUTER_POINT, ROUTER_PULSE
    snd = PulseProfile("ramp_on", U["t_m"], U["T"], U["peak"])
    rcv = PulseProfile("ramp_off", U["t_m"], U["T"], U["peak"])
    model = compensated(router_model(P["a"], P["b"], P["c"], P["B"], aux))
    return run_router(model, snd, rcv, np.linspace(0.0, U["T"], samples), decay)


def test_07_seven_atom_router():
    with criterion(7, "seven-atom router") as notes:
        r4 = _router_report(4).trajectory
        rL, rR = r4.population("rL"), r4.population("rR")
        notes.append(f"aux4 rL={rL[-1]:.4f} max rR={rR.max():.4f}")
        assert rL[-1] >= 0.95
        assert rR.max() <= 0.015
        rep = _router_report(4, DecayModel.at_temperature(0.0))
        assert rep.gamma_tot == pytest.approx(1 / 62)
        t, norms = rep.trajectory.times, rep.trajectory.norms
        ratio = norms / np.exp(-rep.gamma_tot * t)
        notes.append(f"norm/exp ratio in [{ratio.min():.4f}, {ratio.max():.4f}]")
        assert np.all(np.abs(ratio - 1.0) <= 0.10)
        r5 = _router_report(5).trajectory
        notes.append(f"aux5 rR={r5.population('rR')[-1]:.4f} max rL={r5.population('rL').max():.4f}")
        assert r5.population("rR")[-1] >= 0.95
        assert r5.population("rL").max() <= 0.015


def test_08_blockade_gate():
    with criterion(8, "blockade gate") as notes:
        grid = [(1.0, 0.0), (0.0, 1.0), (1 / math.sqrt(2), 1 / math.sqrt(2)),
                (1 / math.sqrt(2), 1j / math.sqrt(2)), (0.6, -0.8), (0.8j, 0.6),
                (math.cos(0.3), math.sin(0.3) * np.exp(2.1j)), (-0.28, 0.96j), (0.5, -math.sqrt(3) / 2)]
        worst = 0.0
        for a, b in grid:
            ctrl = ControlQubit(a, b)
            out = blockade_gate(ctrl).state
            worst = max(worst, float(np.abs(out - blockade_target(ctrl)).max()))
            # the target written out independently: i a |g>4 |->5 + i b |->4 |e>5
            ref = np.zeros((3, 3), dtype=complex)
            ref[0, 2], ref[2, 1] = 1j * a, 1j * b
            worst = max(worst, float(np.abs(out - ref.ravel()).max()))
        notes.append(f"max ideal error={worst:.1e}")
        assert worst <= 1e-12
        ctrl = ControlQubit(1 / math.sqrt(2), 1 / math.sqrt(2))
        leak = [blockade_gate(ctrl, V=10.0, omega=10.0 * x, mode="finite_blockade", samples=4000).leakage
                for x in (0.2, 0.1, 0.05)]
        notes.append("leakage=" + "/".join(f"{x:.2e}" for x in leak))
        assert leak[0] > leak[1] > leak[2]


def test_09_level_shift_compensation(unit_effective_triangle):
    with criterion(9, "level-shift compensation") as notes:
        tri = unit_effective_triangle
        target = "rL" if tri.gamma_tot < 0 else "rR"
        for n in (1, 3, 5):
            L, R = router_ends(n, n)
            rec = {"rL": L, "rR": R}
            base = router_network(n, n, tri, 1.0)
            comp = base.with_onsite({k + 1: -tri.mu[k] for k in range(3)})
            p = scan_router_protocol(comp, rec, target, n + 2)
            P = {}
            for mode, net in (("on", comp), ("off", base)):
                full = with_transfer_boundaries(net, 1, rec, p["t_m"], p["T"], 1.0)
                traj = propagate(full, "s", np.array([0.0, p["T"]]))
                P[mode] = transfer_result(traj, "s", target).P_T
            notes.append(f"arm {n}: {P['on']:.4f} vs {P['off']:.4f}")
            assert P["off"] < P["on"]
            assert P["on"] >= 0.9


def test_10_property_suites():
    with criterion(10, "property suites") as notes:
        rng = np.random.default_rng(2024)
        # Hermiticity of the 128-state Hamiltonian
        basis = build_basis(router_atoms())
        for _ in range(3):
            g = Geometry({k: rng.uniform(-12, 12, size=3) for k in (1, 2, 3, 4)})
            H = build_full_hamiltonian(basis, g, float(rng.uniform(0, 50)))
            assert np.abs(H - H.conj().T).max() <= 1e-12 * max(1.0, np.abs(H).max())
        # norm conservation for a time-dependent chain transfer
        net = with_transfer_boundaries(chain_hamiltonian(7, 1.0), 1, {"r": 7}, 11.5, 19.7, 1.0)
        traj = propagate(net, "s", np.linspace(0.0, 19.7, 60))
        assert np.abs(traj.norms - 1.0).max() <= 1e-9
        # gauge invariance of triangle dynamics
        tri = FluxTriangle(tuple(rng.uniform(0.3, 2.0, 3)), tuple(rng.uniform(-PI, PI, 3)))
        U = np.diag(np.exp(1j * rng.uniform(-PI, PI, 3)))
        gauged = FluxTriangle.from_matrix(U @ build_h3(tri) @ U.conj().T)
        t = np.linspace(0.0, 6.0, 13)
        assert np.abs(triangle_dynamics(tri, t).populations()
                      - triangle_dynamics(gauged, t).populations()).max() <= 1e-12
        # 3j orthogonality on the scanned grid
        halves = [x / 2 for x in range(0, 7)]
        worst = 0.0
        for j1 in halves:
            for j2 in halves:
                ms = [(m1, m2) for m1 in np.arange(-j1, j1 + 1) for m2 in np.arange(-j2, j2 + 1)]
                js = np.arange(abs(j1 - j2), j1 + j2 + 1)
                for m1, m2 in ms:
                    for m1p, m2p in ms:
                        if m1 + m2 != m1p + m2p:
                            continue
                        s = sum((2 * j3 + 1) * wigner3j(j1, j2, j3, m1, m2, -m1 - m2)
                                * wigner3j(j1, j2, j3, m1p, m2p, -m1 - m2) for j3 in js)
                        worst = max(worst, abs(s - float(m1 == m1p and m2 == m2p)))
        notes.append(f"3j orthogonality {worst:.1e}")
        assert worst <= 1e-12
        # angular-dipole selection rules
        for l, lp in ((0, 1), (1, 0), (0, 0), (1, 1), (0, 2)):
            for j in (l - 0.5, l + 0.5):
                for jp in (lp - 0.5, lp + 0.5):
                    if j < 0 or jp < 0:
                        continue
                    for m in np.arange(-j, j + 1):
                        for mp in np.arange(-jp, jp + 1):
                            v = angular_dipole(AtomLevel("Rb", 70, l, j, m), AtomLevel("Rb", 70, lp, jp, mp))
                            if abs(l - lp) != 1 or abs(mp - m) > 1 or abs(j - jp) > 1:
                                assert v == 0.0
        # truncation consistency
        main, aux = router_transitions()
        C = c_coefficients(main, aux)
        for _ in range(5):
            r, th, ph = rng.uniform(3, 20), rng.uniform(0, PI), rng.uniform(0, 2 * PI)
            g = Geometry({1: (0, 0, 0), 2: (r * math.sin(th) * math.cos(ph), r * math.sin(th) * math.sin(ph),
                                            r * math.cos(th))})
            lv = [main.lower, main.upper]
            aa = pair_coupling_full(lv, lv, g, 1, 2, main.species, main.species)
            tol = 1e-12 / r**3
            assert abs(aa.element(0, 1, 1, 0) - pair_coupling_AA(r, th, C["C_AA"])) <= tol * abs(C["C_AA"])
            la = [aux.lower, aux.upper]
            ab = pair_coupling_full(lv, la, g, 1, 2, main.species, aux.species)
            assert abs(ab.element(1, 0, 0, 1) - pair_coupling_AB(r, th, ph, C["C_AB"])) <= tol * abs(C["C_AB"])
