import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chiralrouter.interaction import Geometry, router_geometry
from chiralrouter.network import propagate
from chiralrouter.triangle import (FluxTriangle, build_h3, check_flux_conditions, circulation_metric,
                                   effective_triangle, flux_residuals, four_state_hamiltonian,
                                   triangle_dynamics, triangle_network, wrap_phase)

PI = math.pi
T_STAR = 2 * PI / (3 * math.sqrt(3))  # first arrival on the next site for J = 1
PERIOD = 2 * PI / math.sqrt(3)


def ideal(gamma_tot=-PI / 2, J=1.0):
    return FluxTriangle.uniform(J, gamma_tot)


def _eig(H):
    return np.sort(np.linalg.eigvalsh(H))


# --- abstract triangle -------------------------------------------------------

def test_real_circulant_spectrum():
    assert _eig(build_h3(FluxTriangle((1.3,) * 3, (0.0,) * 3))) == pytest.approx([-1.3, -1.3, 2.6], abs=1e-14)


@pytest.mark.parametrize("gammas", [(-PI / 6,) * 3, (-PI / 2, 0.0, 0.0), (0.1, -1.2, -0.4707963267948966)])
def test_chiral_spectrum_depends_only_on_total_phase(gammas):
    tri = FluxTriangle((0.7,) * 3, gammas)
    assert _eig(build_h3(tri)) == pytest.approx(0.7 * np.array([-math.sqrt(3), 0.0, math.sqrt(3)]), abs=1e-14)


def test_matrix_layout_and_conjugation():
    tri = FluxTriangle((1.0, 2.0, 3.0), (0.1, 0.2, 0.3), (0.5, 0.0, -0.5))
    H = build_h3(tri)
    assert np.allclose(H, H.conj().T, atol=0)
    assert H[0, 1] == pytest.approx(np.exp(-0.1j))
    assert H[1, 2] == pytest.approx(2 * np.exp(-0.2j))
    assert H[2, 0] == pytest.approx(3 * np.exp(-0.3j))
    conj = tri.conjugate()
    assert conj.gamma_tot == pytest.approx(-tri.gamma_tot)
    assert np.allclose(build_h3(conj), H.T)
    assert FluxTriangle.from_matrix(H).gamma_tot == pytest.approx(tri.gamma_tot)


def test_wrap_phase_range():
    assert wrap_phase(-PI) == PI
    assert wrap_phase(3 * PI) == pytest.approx(PI)
    assert wrap_phase(-2.5 * PI) == pytest.approx(-PI / 2)


def test_flux_condition_examples():
    d = check_flux_conditions(FluxTriangle((1.0,) * 3, (-PI / 6,) * 3))
    assert d.satisfied and d.chirality == -1 and d.gamma_tot == pytest.approx(-PI / 2)
    d = check_flux_conditions(FluxTriangle((1.0,) * 3, (-PI / 2, 0.0, 0.0)))
    assert d.satisfied and d.chirality == -1
    d = check_flux_conditions(FluxTriangle((2.0, 1.0, 1.0), (-PI / 6,) * 3))
    assert not d.satisfied and not d.equal_magnitudes
    assert check_flux_conditions(ideal(PI / 2)).chirality == 1
    assert not check_flux_conditions(ideal(0.3)).chiral_phase
    with pytest.raises(ValueError):
        check_flux_conditions(ideal(), tol=0.0)


def test_perfect_chiral_transfer_order():
    t = np.array([0.0, T_STAR, 2 * T_STAR, 3 * T_STAR])
    traj = triangle_dynamics(ideal(), t)
    assert traj.population(2)[1] >= 1 - 1e-9
    assert traj.population(3)[2] >= 1 - 1e-9
    assert traj.population(1)[3] >= 1 - 1e-9
    rev = triangle_dynamics(ideal(PI / 2), t)
    assert rev.population(3)[1] >= 1 - 1e-9


@given(st.floats(0.2, 5.0), st.floats(0.0, 20.0))
def test_reversed_flux_mirrors_populations(J, t):
    grid = np.array([0.0, t + 1e-3])
    a = triangle_dynamics(ideal(-PI / 2, J), grid)
    b = triangle_dynamics(ideal(PI / 2, J), grid)
    assert a.population(2) == pytest.approx(b.population(3), abs=1e-9)
    assert a.population(3) == pytest.approx(b.population(2), abs=1e-9)


@given(st.lists(st.floats(-PI, PI), min_size=3, max_size=3),
       st.lists(st.floats(0.2, 3.0), min_size=3, max_size=3),
       st.lists(st.floats(-PI, PI), min_size=3, max_size=3))
def test_gauge_invariance(alpha, mags, gammas):
    tri = FluxTriangle(tuple(mags), tuple(gammas))
    H = build_h3(tri)
    U = np.diag(np.exp(1j * np.asarray(alpha)))
    gauged = FluxTriangle.from_matrix(U @ H @ U.conj().T)
    assert wrap_phase(gauged.gamma_tot - tri.gamma_tot) == pytest.approx(0.0, abs=1e-12)
    assert _eig(build_h3(gauged)) == pytest.approx(_eig(H), abs=1e-12)
    t = np.linspace(0, 7, 15)
    pa, pb = triangle_dynamics(tri, t).populations(), triangle_dynamics(gauged, t).populations()
    assert np.abs(pa - pb).max() <= 1e-12


def test_equal_onsite_shift_is_a_global_offset():
    t = np.linspace(0, 5, 11)
    a = triangle_dynamics(ideal(), t).populations()
    b = triangle_dynamics(FluxTriangle((1.0,) * 3, (-PI / 6,) * 3, (0.4, 0.4, 0.4)), t).populations()
    assert np.abs(a - b).max() < 1e-12


# --- circulation metric ------------------------------------------------------

def test_metric_examples():
    t = np.linspace(0, PERIOD, 401)
    assert circulation_metric(triangle_dynamics(ideal(), t), mean_coupling=1.0) >= 0.99
    assert circulation_metric(triangle_dynamics(ideal(PI / 2), t), mean_coupling=1.0) <= -0.99
    assert abs(circulation_metric(triangle_dynamics(ideal(0.0), t), mean_coupling=1.0)) < 1e-9


def test_metric_needs_a_full_period():
    traj = triangle_dynamics(ideal(), np.linspace(0, PERIOD / 2, 11))
    with pytest.raises(ValueError):
        circulation_metric(traj, mean_coupling=1.0)
    with pytest.raises(ValueError):
        circulation_metric(traj)


# --- effective Rydberg triangle ----------------------------------------------

def test_solver_solution(flux_solution):
    sol = flux_solution
    assert sol.converged and sol.residual < 1e-9
    r, eff = flux_residuals(sol.a, sol.b, sol.c, sol.detuning, aux_sign=sol.aux_sign)
    assert np.max(np.abs(r)) < 1e-9
    d = check_flux_conditions(eff.to_flux_triangle(), tol=1e-8)
    assert d.chirality == -1
    assert eff.gamma[0] == pytest.approx(eff.gamma[2], abs=1e-12)
    mu = eff.mu
    assert mu[0] == pytest.approx(mu[1], abs=1e-9 * abs(mu[0])) and mu[1] == pytest.approx(mu[2], abs=1e-9 * abs(mu[0]))


def test_solver_geometry_matches_reference_values(flux_solution):
    assert flux_solution.b == pytest.approx(9.39, rel=0.10)
    assert flux_solution.c == pytest.approx(10.04, rel=0.10)


@pytest.mark.xfail(strict=True, reason="the shipped defect tables put the auxiliary line on the other "
                                       "side of the main line; the solved detuning is about -107 MHz")
def test_solver_detuning_matches_reference_value(flux_solution):
    assert flux_solution.detuning == pytest.approx(2 * PI * 14.29, rel=0.10)


def test_reference_phases_map_onto_solution(flux_solution):
    # Reference phases use the opposite orientation convention: gamma -> pi - gamma.
    reference = np.array([-0.151, -0.198, -0.151]) * PI
    ours = flux_solution.effective.gamma
    for g, p in zip(ours, reference):
        assert abs(wrap_phase(g - (PI - p))) <= 0.01 * PI


def test_effective_invariants(flux_solution):
    g = flux_solution.geometry()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for delta in (2 * PI * 50, -2 * PI * 50):
            eff = effective_triangle(g, detuning=delta)
            assert np.allclose(eff.hamiltonian, eff.hamiltonian.conj().T, atol=0)
            if delta > 0:
                assert np.all(eff.mu <= 0)
            else:
                assert np.all(eff.mu >= 0)
            T, T2 = eff.provenance["T"], eff.provenance["T2"]
            assert eff.hamiltonian[1, 0] == pytest.approx(T[(1, 2)] + T2[(1, 2)])


def test_zero_detuning_rejected(flux_solution):
    with pytest.raises(ValueError):
        effective_triangle(flux_solution.geometry(), detuning=0.0)


def test_weak_detuning_warns(flux_solution):
    with pytest.warns(RuntimeWarning, match="adiabatic"):
        effective_triangle(flux_solution.geometry(), detuning=2 * PI * 0.01)


def test_aux_on_axis_gives_no_second_order_exchange():
    base = router_geometry(17.0, 9.4, 10.0)
    g = Geometry({**base.positions, 4: base.positions[1] + np.array([0.0, 0.0, 8.0])})
    eff = effective_triangle(g, detuning=2 * PI * 100)
    for j in (2, 3):
        assert eff.provenance["T2"][(1, j)] == 0.0
        assert eff.hamiltonian[j - 1, 0].imag == 0.0


def test_mirrored_aux_flips_total_phase(flux_solution):
    g = flux_solution.geometry()
    e4 = effective_triangle(g, detuning=flux_solution.detuning, aux=4)
    e5 = effective_triangle(g, detuning=flux_solution.detuning, aux=5)
    assert e5.gamma_tot == pytest.approx(-e4.gamma_tot, abs=1e-12)
    assert np.allclose(e5.j_abs, e4.j_abs, rtol=1e-12)


@given(st.floats(0.5, 3.0))
def test_scaling_distances_and_coefficients(s):
    C = {"C_AA": -17581.5, "C_AB": -17607.6}
    Cs = {k: v * s**3 for k, v in C.items()}
    g = router_geometry(17.0, 9.4, 10.0)
    gs = Geometry({k: s * v for k, v in g.positions.items()})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a = effective_triangle(g, detuning=-600.0, coefficients=C)
        b = effective_triangle(gs, detuning=-600.0, coefficients=Cs)
    assert np.abs(a.hamiltonian - b.hamiltonian).max() <= 1e-10 * np.abs(a.hamiltonian).max()


def test_effective_model_converges_to_four_state_model(flux_solution):
    g = flux_solution.geometry()
    vmax = max(abs(v) for v in effective_triangle(g, detuning=flux_solution.detuning).provenance["V_AB"].values())
    errors = []
    for k in (2, 5, 10, 20):
        delta = -k * vmax
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            eff = effective_triangle(g, detuning=delta)
        H4 = four_state_hamiltonian(g, detuning=delta)
        t = np.linspace(0.0, eff.to_flux_triangle().period, 300)
        w, U = np.linalg.eigh(H4)
        psi4 = (U @ (np.exp(-1j * np.outer(w, t)) * U.conj()[0][:, None])).T
        w3, U3 = np.linalg.eigh(eff.hamiltonian)
        psi3 = (U3 @ (np.exp(-1j * np.outer(w3, t)) * U3.conj()[0][:, None])).T
        errors.append(np.abs(np.abs(psi4[:, :3]) ** 2 - np.abs(psi3) ** 2).max())
    assert all(b < a for a, b in zip(errors, errors[1:]))
    assert errors[-1] < 0.05


def test_four_state_model_is_hermitian_and_truncates_consistently(flux_solution):
    g = flux_solution.geometry()
    H4 = four_state_hamiltonian(g, detuning=flux_solution.detuning)
    assert np.abs(H4 - H4.conj().T).max() <= 1e-12 * np.abs(H4).max()
    eff = effective_triangle(g, detuning=flux_solution.detuning)
    A = eff.provenance["V_AB"]
    for i in (1, 2, 3):
        assert abs(H4[i - 1, 3] - A[i]) <= 1e-12 * abs(A[i])
        for j in (1, 2, 3):
            if i != j:
                assert abs(H4[j - 1, i - 1] - eff.provenance["T"][(i, j)]) <= 1e-12 * abs(H4[j - 1, i - 1])


def test_network_form_matches_direct_evolution():
    tri = FluxTriangle((1.0, 0.8, 1.2), (0.3, -0.2, 0.9), (0.1, -0.3, 0.2))
    t = np.linspace(0, 4, 9)
    traj = propagate(triangle_network(tri), 1, t)
    H = build_h3(tri)
    w, U = np.linalg.eigh(H)
    psi = (U @ (np.exp(-1j * np.outer(w, t)) * U.conj()[0][:, None])).T
    assert np.abs(np.abs(psi) ** 2 - traj.populations()).max() < 1e-12
