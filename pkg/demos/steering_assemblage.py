# A steering assemblage from commuting measurements
#
# Alice's outcome a for setting x leaves Bob with the unnormalized operator
#     sigma^x_a = Phi_*( sqrt(E^x_a) rho sqrt(E^x_a) )
# where Phi projects onto the algebra of Bob's measurements.  Summing over a
# gives the same operator for every x, and pairing with Bob's POVM elements
# gives back the joint probabilities.

# %%
import numpy as np

from atomexp import behavior, build_assemblage, expectation_onto, generated_algebra
from atomexp import verify_reproduction, verify_x_independence
from atomexp.generators import gen

m = gen("direct-sum", seed=5, blocks=[(2, 2), (1, 3)])
cexp = expectation_onto(generated_algebra(m.dim, m.bob.all_elements()))
s = build_assemblage(m, cexp)

# %%
for x, members in s.members.items():
    print(x, "traces:", [round(float(np.trace(sig).real), 6) for sig in members])
print("setting independence residual:", verify_x_independence(s))
print("reproduction residual:", verify_reproduction(s, m, behavior(m)))

# %%
# For a product state on C^2 (x) C^3 the members take the textbook form:
# a maximally mixed first factor next to Bob's conditional state.

from atomexp.matrixlab import partial_trace

m = gen("hidden-tensor", seed=2, dA=2, dB=3, obfuscate=False, product_state=True)
s = build_assemblage(m, expectation_onto(generated_algebra(6, m.bob.all_elements())))
alice_el = m.alice["x0"][0]
hand = np.kron(np.eye(2) / 2, partial_trace(alice_el @ m.state, (2, 3), "first"))
print("deviation from hand form:", np.abs(s.members["x0"][0] - hand).max())
