"""Angular-momentum algebra and single-atom Rydberg data.

Wigner symbols use the Racah sums. Up to ``EXACT_J_MAX`` every factorial is
an exact integer and the square-root prefactor is an exact rational; beyond
that the terms are accumulated through log-gamma to avoid overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.integrate import quad

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .units import MU_B, TWO_PI, WAVENUMBER_MHZ

EXACT_J_MAX = 20
ELECTRON_SPIN = 0.5


def _twice(x, name):
    """Return 2*x as an int, rejecting values that are not half-integers."""
    t = 2.0 * float(x)
    r = round(t)
    if abs(t - r) > 1e-9:
        raise ValueError(f"{name}={x} is not a half-integer")
    return int(r)


def _is_triad(a, b, c):
    # doubled arguments
    return (a + b + c) % 2 == 0 and abs(a - b) <= c <= a + b


def _fact(n):
    return math.factorial(n)


def _lfact(n):
    return math.lgamma(n + 1)


# ---------------------------------------------------------------------------
# Wigner symbols
# ---------------------------------------------------------------------------

def wigner3j(j1, j2, j3, m1, m2, m3):
    """Wigner 3j symbol (j1 j2 j3; m1 m2 m3).

    Arguments are integers or half-integers. Returns 0.0 whenever the
    selection rules fail.
    """
    J = [_twice(v, n) for v, n in ((j1, "j1"), (j2, "j2"), (j3, "j3"))]
    M = [_twice(v, n) for v, n in ((m1, "m1"), (m2, "m2"), (m3, "m3"))]
    if any(j < 0 for j in J):
        raise ValueError("negative angular momentum")
    return _wigner3j_2(*J, *M)


@lru_cache(maxsize=65536)
def _wigner3j_2(a, b, c, x, y, z):
    if x + y + z != 0 or not _is_triad(a, b, c):
        return 0.0
    for j, m in ((a, x), (b, y), (c, z)):
        if abs(m) > j or (j - m) % 2:
            return 0.0
    # integer combinations (all even in doubled units)
    t1 = (c - b + x) // 2
    t2 = (c - a - y) // 2
    t3 = (a + b - c) // 2
    t4 = (a - x) // 2
    t5 = (b + y) // 2
    kmin = max(0, -t1, -t2)
    kmax = min(t3, t4, t5)
    if kmin > kmax:
        return 0.0
    phase_exp = (a - b - z) // 2
    fac_args = [(a + b - c) // 2, (a - b + c) // 2, (-a + b + c) // 2,
                (a + x) // 2, (a - x) // 2, (b + y) // 2, (b - y) // 2,
                (c + z) // 2, (c - z) // 2]
    top = (a + b + c) // 2 + 1

    if max(a, b, c) <= 2 * EXACT_J_MAX:
        pref = Fraction(math.prod(_fact(n) for n in fac_args), _fact(top))
        s = 0
        for k in range(kmin, kmax + 1):
            den = (_fact(k) * _fact(t1 + k) * _fact(t2 + k) * _fact(t3 - k)
                   * _fact(t4 - k) * _fact(t5 - k))
            s += Fraction((-1) ** k, den)
        val = float(s) * math.sqrt(pref)
    else:
        lpref = 0.5 * (sum(_lfact(n) for n in fac_args) - _lfact(top))
        val = 0.0
        for k in range(kmin, kmax + 1):
            lden = (_lfact(k) + _lfact(t1 + k) + _lfact(t2 + k) + _lfact(t3 - k)
                    + _lfact(t4 - k) + _lfact(t5 - k))
            val += (-1) ** k * math.exp(lpref - lden)
    return -val if phase_exp % 2 else val


def _delta_exact(a, b, c):
    return Fraction(_fact((a + b - c) // 2) * _fact((a - b + c) // 2)
                    * _fact((-a + b + c) // 2), _fact((a + b + c) // 2 + 1))


def _delta_log(a, b, c):
    return (_lfact((a + b - c) // 2) + _lfact((a - b + c) // 2)
            + _lfact((-a + b + c) // 2) - _lfact((a + b + c) // 2 + 1))


def wigner6j(j1, j2, j3, j4, j5, j6):
    """Wigner 6j symbol {j1 j2 j3; j4 j5 j6}; zero if any triad is invalid."""
    J = [_twice(v, f"j{i + 1}") for i, v in enumerate((j1, j2, j3, j4, j5, j6))]
    if any(j < 0 for j in J):
        raise ValueError("negative angular momentum")
    return _wigner6j_2(*J)


@lru_cache(maxsize=65536)
def _wigner6j_2(a, b, c, d, e, f):
    triads = ((a, b, c), (a, e, f), (d, b, f), (d, e, c))
    if not all(_is_triad(*t) for t in triads):
        return 0.0
    s1 = [(x + y + z) // 2 for x, y, z in triads]
    s2 = [(a + b + d + e) // 2, (b + c + e + f) // 2, (c + a + f + d) // 2]
    tmin = max(s1)
    tmax = min(s2)
    if max(J for J in (a, b, c, d, e, f)) <= 2 * EXACT_J_MAX:
        pref = math.prod((_delta_exact(*t) for t in triads), start=Fraction(1))
        s = 0
        for t in range(tmin, tmax + 1):
            den = math.prod(_fact(t - x) for x in s1) * math.prod(_fact(x - t) for x in s2)
            s += Fraction((-1) ** t * _fact(t + 1), den)
        return float(s) * math.sqrt(pref)
    lpref = 0.5 * sum(_delta_log(*t) for t in triads)
    val = 0.0
    for t in range(tmin, tmax + 1):
        lden = sum(_lfact(t - x) for x in s1) + sum(_lfact(x - t) for x in s2)
        val += (-1) ** t * math.exp(lpref + _lfact(t + 1) - lden)
    return val


def clebsch_gordan(j1, m1, j2, m2, j, m):
    """<j1 m1; j2 m2 | j m> via the 3j symbol."""
    phase = -1 if _twice(j1 - j2 + m, "phase") // 2 % 2 else 1
    return phase * math.sqrt(2 * j + 1) * wigner3j(j1, j2, j, m1, m2, -m)


# ---------------------------------------------------------------------------
# Species and levels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AtomLevel:
    """A single-valence-electron level |n l j m> of a given species."""

    species: str
    n: int
    l: int
    j: float
    m: float

    def __post_init__(self):
        if self.n < 1 or self.l < 0 or self.l >= self.n:
            raise ValueError(f"invalid n, l: {self.n}, {self.l}")
        tj, tm = _twice(self.j, "j"), _twice(self.m, "m")
        if abs(tj - 2 * self.l) != 1:
            raise ValueError(f"|j - l| must be 1/2, got l={self.l}, j={self.j}")
        if abs(tm) > tj or (tj - tm) % 2:
            raise ValueError(f"invalid m={self.m} for j={self.j}")

    @property
    def label(self):
        letter = "SPDFGH"[self.l] if self.l < 6 else f"l{self.l}"
        return f"{self.species}{self.n}{letter}{int(2 * self.j)}/2({self.m:+g})"


@dataclass(frozen=True)
class DipoleElement:
    """Angular and radial parts of <to| r_q |from>; ``angular * radial`` is in e a0."""

    angular: float
    radial: float
    delta_m: int

    @property
    def value(self):
        return self.angular * self.radial


def _lj_key(l, j):
    return (int(l), _twice(j, "j"))


@dataclass(frozen=True, eq=False)
class SpeciesParams:
    """Quantum defects, Lande factors and Rydberg constant of one species.

    ``quantum_defects`` maps (l, j) to the Rydberg-Ritz coefficients
    (d0, d2, d4, ...) so that delta(n) = d0 + d2/(n-d0)^2 + d4/(n-d0)^4 + ...
    A bare float is accepted as a single coefficient. ``rydberg_constant``
    is an angular frequency in rad/us.
    """

    name: str
    quantum_defects: dict
    rydberg_constant: float
    g_factors: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rydberg_constant <= 0:
            raise ValueError("rydberg_constant must be positive")
        qd = {_lj_key(*k): tuple(np.atleast_1d(np.asarray(v, float)))
              for k, v in self.quantum_defects.items()}
        g = {_lj_key(*k): float(v) for k, v in self.g_factors.items()}
        for req in ((0, 1), (1, 3)):
            if req not in qd:
                raise ValueError(f"{self.name}: missing quantum defect for (l, 2j)={req}")
        object.__setattr__(self, "quantum_defects", qd)
        object.__setattr__(self, "g_factors", g)

    def defect(self, n, l, j):
        try:
            coeffs = self.quantum_defects[_lj_key(l, j)]
        except KeyError:
            raise KeyError(f"{self.name}: no quantum defect for l={l}, j={j}") from None
        x = n - coeffs[0]
        return coeffs[0] + sum(c / x ** (2 * k) for k, c in enumerate(coeffs[1:], start=1))

    def n_eff(self, n, l, j):
        ns = n - self.defect(n, l, j)
        if ns <= 0:
            raise ValueError(f"non-positive effective quantum number for n={n}, l={l}")
        return ns

    def g_factor(self, l, j):
        key = _lj_key(l, j)
        if key in self.g_factors:
            return self.g_factors[key]
        # Lande g_j with g_s = 2, g_l = 1
        return 1.0 + (j * (j + 1) - l * (l + 1) + 0.75) / (2 * j * (j + 1))

    def level(self, n, l, j, m):
        return AtomLevel(self.name, n, l, j, m)


def _parse_lj(key, where):
    try:
        l_str, j_str = key.split(",")
        return int(l_str), float(Fraction(j_str.strip()))
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"{where}: bad (l, j) key {key!r}; expected e.g. \"0,1/2\"") from None


def parse_species_table(data):
    """Build ``{name: SpeciesParams}`` from a parsed TOML document."""
    out = {}
    entries = data.get("species")
    if not isinstance(entries, list) or not entries:
        raise ValueError("species: expected a non-empty array of [[species]] tables")
    allowed = {"name", "rydberg_constant_2piMHz", "rydberg_constant_cm", "defects", "g"}
    for i, ent in enumerate(entries):
        where = f"species[{i}]"
        for k in ent:
            if k not in allowed:
                raise ValueError(f"{where}.{k}: unknown key")
        if "name" not in ent:
            raise ValueError(f"{where}.name: missing")
        where = f"species.{ent['name']}"
        if "rydberg_constant_2piMHz" in ent:
            ry = TWO_PI * float(ent["rydberg_constant_2piMHz"])
        elif "rydberg_constant_cm" in ent:
            ry = TWO_PI * WAVENUMBER_MHZ * float(ent["rydberg_constant_cm"])
        else:
            raise ValueError(f"{where}.rydberg_constant_2piMHz: missing")
        defects = {}
        for key, val in ent.get("defects", {}).items():
            try:
                coeffs = [float(v) for v in np.atleast_1d(val)]
            except (TypeError, ValueError):
                raise ValueError(f"{where}.defects.{key}: expected number or list of numbers") from None
            defects[_parse_lj(key, f"{where}.defects")] = coeffs
        gf = {}
        for key, val in ent.get("g", {}).items():
            if not isinstance(val, (int, float)):
                raise ValueError(f"{where}.g.{key}: expected a number")
            gf[_parse_lj(key, f"{where}.g")] = float(val)
        try:
            out[ent["name"]] = SpeciesParams(ent["name"], defects, ry, gf)
        except ValueError as exc:
            raise ValueError(f"{where}: {exc}") from None
    return out


def load_species_table(path=None):
    """Load a species table; ``None`` gives the bundled defaults."""
    if path is None:
        text = resources.files("chiralrouter.data").joinpath("species.toml").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValueError(f"{path or 'species.toml'}: {exc}") from None
    return parse_species_table(data)


@lru_cache(maxsize=1)
def default_species():
    return load_species_table()


# ---------------------------------------------------------------------------
# Energies and dipole elements
# ---------------------------------------------------------------------------

def rydberg_energy(species, n, l, j):
    """Field-free level energy -Ry/(n - delta)^2 in rad/us."""
    return -species.rydberg_constant / species.n_eff(n, l, j) ** 2


def zeeman_shift(level, species, B):
    """Linear Zeeman shift mu_B B g_j m (rad/us) for a field B (Gauss) along z.

    Negative B means a field pointing along -z.
    """
    return MU_B * B * species.g_factor(level.l, level.j) * level.m


def level_energy(level, species, B=0.0):
    return rydberg_energy(species, level.n, level.l, level.j) + zeeman_shift(level, species, B)


def angular_dipole(frm, to):
    """Angular factor of <to| r_q |frm> with q = m_to - m_frm.

    Evaluates sqrt((2j'+1)(2j+1)(2l'+1)(2l+1)) (-1)^(j-m+j'+s+1)
    {j 1 j'; l' s l} (l 1 l'; 0 0 0) (j 1 j'; -m -q m'). Combined with the
    radial integral this is the spherical component r_q of the dipole
    operator, so <a|r_-q|b> = (-1)^q <b|r_q|a>.
    """
    if frm.species != to.species:
        raise ValueError("dipole element between different species")
    l, j, m = frm.l, frm.j, frm.m
    lp, jp, mp = to.l, to.j, to.m
    dm = mp - m
    if abs(lp - l) != 1 or abs(jp - j) > 1 or abs(dm) > 1:
        return 0.0
    s = ELECTRON_SPIN
    ph = _twice(j - m + jp + s + 1, "phase") // 2
    val = (math.sqrt((2 * jp + 1) * (2 * j + 1) * (2 * lp + 1) * (2 * l + 1))
           * wigner6j(j, 1, jp, lp, s, l)
           * wigner3j(l, 1, lp, 0, 0, 0)
           * wigner3j(j, 1, jp, -m, -dm, mp))
    return -val if ph % 2 else val


def anger(nu, z):
    """Anger function J_nu(z) = (1/pi) int_0^pi cos(nu t - z sin t) dt."""
    return quad(lambda t: math.cos(nu * t - z * math.sin(t)), 0.0, math.pi, limit=200)[0] / math.pi


def semiclassical_radial(ns1, l1, ns2, l2):
    """Quasiclassical <ns1 l1| r |ns2 l2> in a0 for effective quantum numbers.

    Uses the Anger-function form for dipole matrix elements between
    Rydberg states; reduces to 3/2 n^2 sqrt(1 - (l_c/n)^2) when the
    effective quantum numbers coincide.
    """
    if abs(l1 - l2) != 1:
        raise ValueError("radial dipole needs |l - l'| = 1")
    if ns1 <= 0 or ns2 <= 0:
        raise ValueError("effective quantum numbers must be positive")
    dn = ns1 - ns2
    dl = l2 - l1
    nc = 2.0 * ns1 * ns2 / (ns1 + ns2)
    lc = 0.5 * (l1 + l2 + 1)
    e = math.sqrt(max(0.0, 1.0 - (lc / nc) ** 2))
    if abs(dn) < 1e-9:
        return 1.5 * nc**2 * e
    g = ((1.0 - dl * lc / nc) * anger(dn - 1.0, -e * dn)
         - (1.0 + dl * lc / nc) * anger(dn + 1.0, -e * dn)
         + 2.0 / math.pi * math.sin(math.pi * dn) * (1.0 - e))
    return nc**2 * g / (2.0 * dn)


@lru_cache(maxsize=4096)
def _radial_cached(species, n, l, j, n2, l2, j2):
    return semiclassical_radial(species.n_eff(n, l, j), l, species.n_eff(n2, l2, j2), l2)


def radial_dipole(species, n, l, j, n2, l2, j2):
    """Radial integral int R_nl R_n'l' r^3 dr (atomic units), semiclassically."""
    if abs(l - l2) != 1:
        raise ValueError(f"forbidden radial transition l={l} -> l'={l2}")
    return _radial_cached(species, n, l, float(j), n2, l2, float(j2))


def dipole_element(species, frm, to):
    """Full <to| r_q |frm> as a :class:`DipoleElement`."""
    ang = angular_dipole(frm, to)
    if ang == 0.0:
        return DipoleElement(0.0, 0.0, int(round(to.m - frm.m)))
    rad = radial_dipole(species, frm.n, frm.l, frm.j, to.n, to.l, to.j)
    return DipoleElement(ang, rad, int(round(to.m - frm.m)))


# ---------------------------------------------------------------------------
# Two-level transitions and the main/auxiliary detuning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Transition:
    """A designated lower -> upper transition of one species."""

    species: SpeciesParams
    lower: AtomLevel
    upper: AtomLevel

    def frequency(self, B=0.0):
        return (level_energy(self.upper, self.species, B)
                - level_energy(self.lower, self.species, B))

    def zeeman_slope(self):
        """d(frequency)/dB in rad/us per Gauss."""
        sp = self.species
        return MU_B * (sp.g_factor(self.upper.l, self.upper.j) * self.upper.m
                       - sp.g_factor(self.lower.l, self.lower.j) * self.lower.m)

    @property
    def delta_m(self):
        return int(round(self.upper.m - self.lower.m))

    def dipole(self):
        """<upper| r_q |lower> in e a0 (q = delta_m)."""
        return dipole_element(self.species, self.lower, self.upper).value


# Sublevel assignments for |0>,|1> (main, delta m = +1) and |->,|+> (aux,
# delta m = -1). Both satisfy the stated delta-m rules.
SUBLEVELS = {
    "inner": {"main": (-0.5, 0.5), "aux": (0.5, -0.5)},
    "stretched": {"main": (0.5, 1.5), "aux": (-0.5, -1.5)},
}


def sp_transition(species, n, m_lower, m_upper):
    """nS_1/2(m_lower) -> nP_3/2(m_upper)."""
    return Transition(species, species.level(n, 0, 0.5, m_lower),
                      species.level(n, 1, 1.5, m_upper))


def router_transitions(main_species="Rb", n_main=70, aux_species="Cs", n_aux=71,
                       assignment="inner", table=None):
    """Return (main, aux) transitions for the router atoms."""
    table = default_species() if table is None else table
    try:
        sub = SUBLEVELS[assignment]
    except KeyError:
        raise ValueError(f"unknown sublevel assignment {assignment!r}; "
                         f"valid: {sorted(SUBLEVELS)}") from None
    main = sp_transition(table[main_species], n_main, *sub["main"])
    aux = sp_transition(table[aux_species], n_aux, *sub["aux"])
    return main, aux


def transition_detuning(main, aux, B):
    """Delta = omega_aux(B) - omega_main(B) in rad/us.

    With this sign the adiabatically eliminated terms carry -1/Delta.
    """
    return aux.frequency(B) - main.frequency(B)


def field_for_detuning(main, aux, delta):
    """Invert the affine Zeeman model: the B (Gauss) at which Delta is reached."""
    slope = aux.zeeman_slope() - main.zeeman_slope()
    if slope == 0:
        raise ValueError("detuning does not depend on B for these sublevels")
    return (delta - transition_detuning(main, aux, 0.0)) / slope
