# Commuting measurements, then a tensor product
#
# Two parties measure on one shared Hilbert space.  Their measurement
# operators commute but nothing says the space splits as a product.  Here we
# hide the usual two-qubit CHSH setup behind a random change of basis and get
# the product structure back.

# %%
import numpy as np

from atomexp import behavior, chsh_value, tensorize, verify_tensor_model
from atomexp.generators import gen
from atomexp.tensorize import behavior_of

rng = np.random.default_rng(1)
m = gen("chsh", seed=1, obfuscate=True)
print("dimension:", m.dim)
print("Alice x0, outcome 0, in the scrambled basis:")
print(np.round(m.alice["x0"][0], 3))

# %%
# The correlations do not care about the basis.

b = behavior(m)
print("p(a,b|x0,y0) =")
print(np.round(b.table[("x0", "y0")], 6))
print("CHSH value:", chsh_value(b), " (2*sqrt(2) =", 2 * np.sqrt(2), ")")

# %%
# Decompose the algebra Alice's operators generate, then rewrite everything on
# C^2 (x) C^2 with Alice acting on the first factor and Bob on the second.

t = tensorize(m, rng)
print("factor dimensions:", t.dimA, t.dimB, " blocks:", t.blocks)
print("largest probability error:", verify_tensor_model(t, b))
print("CHSH value of the tensor model:", chsh_value(behavior_of(t)))
