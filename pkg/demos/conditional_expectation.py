# Conditional expectations onto matrix algebras
#
# Projecting orthogonally (in the Hilbert-Schmidt inner product) onto a unital
# *-subalgebra gives a positive, unital, idempotent map that is also a
# bimodule map over the subalgebra.  Two familiar cases first.

# %%
import numpy as np

from atomexp import expectation_onto, generated_algebra, predual_apply
from atomexp.condexp import choi_matrix, invariant_residuals
from atomexp.matrixlab import partial_trace
from atomexp.vnalg import span_algebra

T = np.arange(16, dtype=complex).reshape(4, 4)

diag = span_algebra(4, [np.diag(np.eye(4)[i]) for i in range(4)])
print("onto the diagonal (pinching):")
print(expectation_onto(diag)(T).real)

# %%
# M_2 (x) I_2: averaging over the second factor.

units = [np.kron(np.outer(np.eye(2)[i], np.eye(2)[j]), np.eye(2)) for i in range(2) for j in range(2)]
cexp = expectation_onto(span_algebra(4, units))
print(np.allclose(cexp(T), np.kron(partial_trace(T, (2, 2), "second") / 2, np.eye(2))))

# %%
# A less obvious target: the algebra generated by two random Bob measurements
# of a hidden-tensor model.

from atomexp.generators import gen

m = gen("hidden-tensor", seed=3, dA=2, dB=3)
cexp = expectation_onto(generated_algebra(m.dim, m.bob.all_elements()), check_cp=True)
print("range dimension", cexp.target.dimension)
print({k: f"{v:.1e}" for k, v in invariant_residuals(cexp, np.random.default_rng(0)).items()})
print("smallest Choi eigenvalue", np.linalg.eigvalsh(choi_matrix(cexp))[0])
print("trace of predual image of the state:", np.trace(predual_apply(cexp, m.state)).real)
