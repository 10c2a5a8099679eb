"""
Routing an excitation left or right
===================================

A flux triangle joins a sender to two receivers. Which auxiliary atom is
present fixes the sign of the flux and therefore the receiver. Putting the
auxiliary atoms in a superposition through a blockade gate routes the
excitation into both receivers at once.
"""

import math

import numpy as np

from chiralrouter.network import router_ends, router_network, scan_router_protocol
from chiralrouter.protocols import ControlQubit, blockade_gate
from chiralrouter.triangle import FluxTriangle

# an ideal triangle with three-site arms
n = 3
L, R = router_ends(n, n)
for gamma_tot in (-math.pi / 2, math.pi / 2):
    net = router_network(n, n, FluxTriangle.uniform(1.0, gamma_tot), 1.0)
    target = "rL" if gamma_tot < 0 else "rR"
    best = scan_router_protocol(net, {"rL": L, "rR": R}, target, n + 2, n_T=16, n_tm=16)
    print(f"gamma_tot = {gamma_tot / math.pi:+.1f} pi -> {target}: P_T = {best['P_T']:.4f}, "
          f"zeta = {best['zeta']:+.3f}")

# the blockade gate maps a control qubit onto which auxiliary atom is excited
ctrl = ControlQubit(1 / math.sqrt(2), 1j / math.sqrt(2))
out = blockade_gate(ctrl).state.reshape(3, 3)
print("aux amplitudes (rows: atom 4 g/e/-, cols: atom 5 g/e/-):")
print(np.round(out, 3))

# finite interaction strength lets some population leak out
for ratio in (0.2, 0.1, 0.05):
    r = blockade_gate(ctrl, V=10.0, omega=10.0 * ratio, mode="finite_blockade", samples=2000)
    print(f"Omega/V = {ratio}: leakage {r.leakage:.2e}")

# The seven-atom version of this lives in the CLI scenarios:
#   chiralrouter run scenarios/fig4_router_aux4.toml
#   chiralrouter run scenarios/fig5_routing_superposition.toml
