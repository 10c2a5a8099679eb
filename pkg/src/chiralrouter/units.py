"""Unit conventions.

Energies and rates are angular frequencies in rad/us, so a value quoted as
"2pi x 1 MHz" is stored as ``TWO_PI * 1.0``. Distances are in um, fields in
Gauss and times in us.
"""

import math

TWO_PI = 2.0 * math.pi

# Bohr magneton, as an angular frequency per Gauss.
MU_B = TWO_PI * 1.399624

# (e a0)^2 / (4 pi eps0) expressed in (2pi x MHz) um^3: Hartree/h * a0^3.
HARTREE_MHZ = 6.579683920502e9
BOHR_UM = 5.29177210903e-5
DIPOLE_AU_TO_C3 = TWO_PI * HARTREE_MHZ * BOHR_UM**3

# 1 cm^-1 in MHz.
WAVENUMBER_MHZ = 29979.2458


def mhz(value):
    """Convert a value quoted in units of 2pi x MHz to rad/us."""
    return TWO_PI * value


def to_mhz(value):
    """Convert rad/us to a value in units of 2pi x MHz."""
    return value / TWO_PI
