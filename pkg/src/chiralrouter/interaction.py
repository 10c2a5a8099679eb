"""Dipole-dipole couplings between Rydberg atoms.

Phase convention: ``d^+``, ``d^-`` and ``d^z`` are the spherical components
d_{+1}, d_{-1}, d_0 of the dipole operator, with matrix elements
<a'|d_q|a> = C R as returned by :func:`atomic.dipole_element` (q = m' - m).
They obey d_{+1}^dagger = -d_{-1}. In these components the operator
[d_i.d_j - 3 (d_i.n)(d_j.n)] / r^3 reads

    (1 - 3cos^2) d_i^z d_j^z
    + 1/2 (1 - 3cos^2) (d_i^+ d_j^- + d_i^- d_j^+)
    + 3/sqrt2 sin cos e^{-i phi} (d_i^+ d_j^z + d_i^z d_j^+)
    - 3/sqrt2 sin cos e^{+i phi} (d_i^- d_j^z + d_i^z d_j^-)
    - 3/2 sin^2 (d_i^+ d_j^+ e^{-2i phi} + d_i^- d_j^- e^{+2i phi})

Only the third line's sign is fixed by hermiticity rather than read off a
formula; :func:`dipole_dipole_cartesian` evaluates the same operator from
Cartesian components as an independent check.

The flip-flop amplitude <0_i 1_j|V|1_i 0_j> for a Delta m = +1 transition
equals C_AA (1 - 3cos^2) / (2 r^3) with the *signed* coefficient
C_AA = <0|d^-|1><1|d^+|0> = -|d^+|^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .atomic import dipole_element
from .units import DIPOLE_AU_TO_C3


@dataclass(frozen=True)
class Geometry:
    """Atom positions (um) keyed by atom id; quantization axis is z."""

    positions: dict

    def __post_init__(self):
        pos = {k: np.asarray(v, dtype=float).reshape(3) for k, v in self.positions.items()}
        keys = list(pos)
        for a in range(len(keys)):
            for b in range(a + 1, len(keys)):
                if np.linalg.norm(pos[keys[a]] - pos[keys[b]]) == 0.0:
                    raise ValueError(f"atoms {keys[a]} and {keys[b]} coincide")
        object.__setattr__(self, "positions", pos)

    def vector(self, i, j):
        return self.positions[j] - self.positions[i]

    def distance(self, i, j):
        return float(np.linalg.norm(self.vector(i, j)))

    def angles(self, i, j):
        """(r, theta, phi) of r_ij = r_j - r_i; theta in [0, pi], phi in [0, 2pi)."""
        v = self.vector(i, j)
        r = float(np.linalg.norm(v))
        if r == 0.0:
            raise ValueError(f"atoms {i} and {j} coincide")
        theta = math.acos(max(-1.0, min(1.0, v[2] / r)))
        phi = math.atan2(v[1], v[0]) % (2 * math.pi)
        return r, theta, phi

    def rotated(self, chi):
        """Copy rotated by chi about z."""
        c, s = math.cos(chi), math.sin(chi)
        R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return Geometry({k: R @ v for k, v in self.positions.items()})

    def with_positions(self, **updates):
        pos = dict(self.positions)
        pos.update(updates)
        return Geometry(pos)


def router_geometry(a, b, c, aux_sign=1.0):
    """Flux-triangle geometry with atoms 1..5.

    Atoms 2 and 3 sit on the x axis a apart, atom 1 in the xz plane at
    distance c from both, and the auxiliary atoms 4 and 5 in the xy plane at
    distance b from both 2 and 3, on opposite sides of the 2-3 axis
    (atom 4 on the ``aux_sign`` * y side).
    """
    if c <= a / 2 or b <= a / 2:
        raise ValueError(f"b and c must exceed a/2 (a={a}, b={b}, c={c})")
    h = math.sqrt(c * c - a * a / 4)
    y = math.sqrt(b * b - a * a / 4)
    return Geometry({
        1: (0.0, 0.0, h),
        2: (-a / 2, 0.0, 0.0),
        3: (a / 2, 0.0, 0.0),
        4: (0.0, aux_sign * y, 0.0),
        5: (0.0, -aux_sign * y, 0.0),
    })


# ---------------------------------------------------------------------------
# Dipole matrices on a level manifold
# ---------------------------------------------------------------------------

def dipole_matrices(levels, species):
    """Spherical dipole matrices {q: D_q} (e a0) with <a'|D_q|a> for m'-m = q."""
    n = len(levels)
    D = {q: np.zeros((n, n)) for q in (-1, 0, 1)}
    for a, frm in enumerate(levels):
        for b, to in enumerate(levels):
            el = dipole_element(species, frm, to)
            if el.angular != 0.0:
                D[el.delta_m][b, a] = el.value
    return D


def _cartesian(D):
    dx = (D[-1] - D[1]) / math.sqrt(2)
    dy = 1j * (D[-1] + D[1]) / math.sqrt(2)
    return dx.astype(complex), dy, D[0].astype(complex)


def dipole_dipole_cartesian(Di, Dj, r, theta, phi):
    """[d_i.d_j - 3(d_i.n)(d_j.n)] / r^3 from Cartesian components (rad/us)."""
    n = np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi),
                  math.cos(theta)])
    ci, cj = _cartesian(Di), _cartesian(Dj)
    V = sum(np.kron(ci[k], cj[k]) for k in range(3))
    dni = sum(n[k] * ci[k] for k in range(3))
    dnj = sum(n[k] * cj[k] for k in range(3))
    V = V - 3.0 * np.kron(dni, dnj)
    return DIPOLE_AU_TO_C3 * V / r**3


def dipole_dipole_expansion(Di, Dj, r, theta, phi):
    """The same operator assembled line by line in spherical components."""
    c, s = math.cos(theta), math.sin(theta)
    ep, em = np.exp(-1j * phi), np.exp(1j * phi)
    k = np.kron
    V = ((1 - 3 * c * c) * k(Di[0], Dj[0])
         + 0.5 * (1 - 3 * c * c) * (k(Di[1], Dj[-1]) + k(Di[-1], Dj[1]))
         + 3 / math.sqrt(2) * s * c * ep * (k(Di[1], Dj[0]) + k(Di[0], Dj[1]))
         - 3 / math.sqrt(2) * s * c * em * (k(Di[-1], Dj[0]) + k(Di[0], Dj[-1]))
         - 1.5 * s * s * (k(Di[1], Dj[1]) * ep**2 + k(Di[-1], Dj[-1]) * em**2))
    return DIPOLE_AU_TO_C3 * V / r**3


@dataclass(frozen=True)
class PairCoupling:
    """Two-atom dipole-dipole operator on levels_i (x) levels_j.

    ``block[(a', b'), (a, b)]`` with the row/column index a * len(levels_j) + b.
    ``c_coefficients`` holds the signed C_AA / C_AB (2pi MHz um^3) when the
    manifolds contain the designated transitions, else ``None``.
    """

    block: np.ndarray
    levels_i: tuple
    levels_j: tuple
    c_coefficients: dict | None = None

    def element(self, a_to, b_to, a_from, b_from):
        nj = len(self.levels_j)
        return self.block[a_to * nj + b_to, a_from * nj + b_from]

    def restrict(self, keep_i, keep_j):
        """Sub-block over the listed level indices of each atom."""
        nj = len(self.levels_j)
        idx = [a * nj + b for a in keep_i for b in keep_j]
        return self.block[np.ix_(idx, idx)]


def pair_coupling_full(levels_i, levels_j, geometry, i, j, species_i, species_j,
                       c_coefficients=None):
    """Full dipole-dipole operator between atoms i and j over their manifolds."""
    r, theta, phi = geometry.angles(i, j)
    Di = dipole_matrices(levels_i, species_i)
    Dj = dipole_matrices(levels_j, species_j)
    V = dipole_dipole_expansion(Di, Dj, r, theta, phi)
    return PairCoupling(V, tuple(levels_i), tuple(levels_j), c_coefficients)


# ---------------------------------------------------------------------------
# Truncated two-level couplings
# ---------------------------------------------------------------------------

def c_coefficients(main, aux):
    """Signed C_AA and C_AB (rad/us um^3) for the designated transitions.

    C_AA = <0|d^-|1><1|d^+|0> (negative) and C_AB = <1|d^+|0><-|d^+|+>,
    so that the truncated couplings below hold exactly.
    """
    dA_up = main.dipole()                        # <1|d^+|0>
    dA_down = dipole_element(main.species, main.upper, main.lower).value  # <0|d^-|1>
    dB_down = dipole_element(aux.species, aux.upper, aux.lower).value     # <-|d^+|+>
    return {
        "C_AA": DIPOLE_AU_TO_C3 * dA_down * dA_up,
        "C_AB": DIPOLE_AU_TO_C3 * dA_up * dB_down,
    }


def pair_coupling_AA(r, theta, c_aa):
    """Flip-flop amplitude <0_i 1_j|V|1_i 0_j> = C_AA (1 - 3cos^2) / (2 r^3)."""
    if r <= 0:
        raise ValueError("r must be positive")
    return c_aa / r**3 * 0.5 * (1.0 - 3.0 * math.cos(theta) ** 2)


def pair_coupling_AB(r, theta, phi, c_ab):
    """Amplitude <1_i -_j|V|0_i +_j> = -(3/2) C_AB sin^2 e^{-2i phi} / r^3.

    The reverse process |1_i -_j> -> |0_i +_j> is its complex conjugate.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    return -1.5 * c_ab / r**3 * math.sin(theta) ** 2 * np.exp(-2j * phi)


def two_level_levels(transition):
    return (transition.lower, transition.upper)
