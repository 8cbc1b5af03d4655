# Block structure of a finite-dimensional algebra
#
# Any unital *-algebra of matrices is, in a suitable basis, a direct sum of
# full matrix algebras each repeated some number of times:
#     A  =  M_{n_1} (x) I_{m_1}  (+)  M_{n_2} (x) I_{m_2}  (+) ...
# We build such an algebra, hide it with a random unitary and recover the
# pairs (n_k, m_k) from two generators alone.

# %%
import numpy as np

from atomexp import center, commutant, generated_algebra, minimal_projection_resolution, wedderburn
from atomexp.generators import random_block_algebra_generators

rng = np.random.default_rng(7)
profile = [(2, 2), (1, 3), (3, 1)]
gens = random_block_algebra_generators(profile, rng)
n = gens[0].shape[0]
print("ambient dimension", n)

# %%
alg = generated_algebra(n, gens)
print("dim A          =", alg.dimension, " expected", sum(a * a for a, _ in profile))
print("dim commutant  =", commutant(n, alg.basis).dimension, " expected", sum(b * b for _, b in profile))
print("dim center     =", center(alg).dimension, " expected", len(profile))

# %%
data = wedderburn(alg, rng)
print("recovered blocks:", sorted(data.profile))
for blk in data.blocks:
    print(f"  block ({blk.n},{blk.m}): rank of central projection = {np.trace(blk.projection).real:.0f}")

# %%
# Minimal projections: one per row of each M_{n_k}, summing to the identity.

ps = minimal_projection_resolution(alg, rng)
print(len(ps), "minimal projections, ranks", [round(np.trace(p).real) for p in ps])
print("sum - I:", np.abs(sum(ps) - np.eye(n)).max())
