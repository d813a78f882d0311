# %% [markdown]
# How far the solution moves when the labels move
#
# Unconstrained: ||H - H'|| <= ||Y - Y'|| / (gamma * lam_min + 1).
# Constrained: the same with C = gamma * lam_min - max(rho, rho') plus a term
# proportional to |rho - rho'|.

# %%
import numpy as np

from mavr import EigenCache, SolverConfig, solve_constrained, solve_unconstrained, volume_approx

rng = np.random.default_rng(3)
n, c = 10, 3
B = rng.normal(size=(c, c))
P = B @ B.T + 0.5 * np.eye(c)
A = rng.normal(size=(n, n))
Q = A @ A.T / n
cache = EigenCache()
_, _, kron = cache.factors(P, Q)
lam1 = kron.values[0]


def labels():
    Y = np.zeros((n, c))
    rows = rng.choice(n, 4, replace=False)
    Y[rows, rng.integers(c, size=4)] = 1.0
    return Y


# %%
gamma, tau = 5.0, 1.5
for _ in range(5):
    Y, Y2 = labels(), labels()
    u = SolverConfig(gamma, mode="unconstrained")
    d_u = np.linalg.norm(solve_unconstrained(P, Q, Y, u, cache=cache).H - solve_unconstrained(P, Q, Y2, u, cache=cache).H)
    a = solve_constrained(P, Q, Y, SolverConfig(gamma, tau), cache=cache)
    b = solve_constrained(P, Q, Y2, SolverConfig(gamma, tau), cache=cache)
    C = gamma * lam1 - max(a.rho, b.rho)
    dy = np.linalg.norm(Y - Y2)
    bound_c = dy / C + abs(a.rho - b.rho) * min(np.linalg.norm(Y), np.linalg.norm(Y2)) / C**2
    print(f"unconstrained {d_u:.4f} <= {dy / (gamma * lam1 + 1):.4f}   constrained {np.linalg.norm(a.H - b.H):.4f} <= {bound_c:.4f}")

# %% [markdown]
# Recovering a smooth ground truth from noisy labels. With H* on a
# low-eigenvalue direction of P kron Q, the unconstrained bias is at most
# (gamma * V(H*) / 4) ||H*||^2, so for gamma <= 1 it is at most V(H*)/4 ||H*||^2.

# %%
vecs = np.linalg.eigh(Q)[1]
H_star = np.outer(vecs[:, 0], np.linalg.eigh(P)[1][:, 0]) * 3.0
C_h = volume_approx(H_star, P, Q)
for g in (0.5, 1.0, 20.0):
    H = solve_unconstrained(P, Q, H_star, SolverConfig(g, mode="unconstrained"), cache=cache).H
    bias = np.sum((H - H_star) ** 2)
    print(f"gamma={g:5.1f}: bias {bias:.5f}  g*C_h/4*||H*||^2 = {g * C_h / 4 * np.sum(H_star ** 2):.5f}")
