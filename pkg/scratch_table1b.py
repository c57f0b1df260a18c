"""Debug: exact lattice delta vs regression variants."""
import math
import numpy as np

S0, sigma, K, T, kk = 49.0, 0.2, 55.0, 1.0, 3
eps = 2.0 ** -kk
m = 64
u_fac, d_fac = 1.0 + sigma * eps, 1.0 - sigma * eps

# exact recombining-lattice rho and v (unclamped)
rho = [None] * (m + 1)
vex = [None] * m
Snode = [S0 * u_fac ** np.arange(l + 1) * d_fac ** (l - np.arange(l + 1)) for l in range(m + 1)]
rho[m] = np.maximum(Snode[m] - K, 0.0)
for l in range(m - 1, -1, -1):
    up = rho[l + 1][1:]       # child with one more up-move
    dn = rho[l + 1][:-1]
    vex[l] = (up - dn) / (2.0 * Snode[l] * sigma * eps)
    rho[l] = 0.5 * (up + dn)
print("lattice price:", rho[0][0], " root delta:", vex[0][0])
print("delta range over all nodes:", min(v.min() for v in vex), max(v.max() for v in vex))

def simulate(seed, n_paths):
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], size=(n_paths, m))
    S = np.empty((n_paths, m + 1)); S[:, 0] = S0
    up_count = np.zeros(n_paths, dtype=int)
    UC = np.empty((n_paths, m), dtype=int)
    for j in range(m):
        UC[:, j] = up_count
        S[:, j + 1] = S[:, j] * np.where(signs[:, j] > 0, u_fac, d_fac)
        up_count += (signs[:, j] > 0)
    return signs, S, np.diff(S, axis=1)

signs, S, dS = simulate(0, 20000)
H = np.maximum(S[:, -1] - K, 0.0)

# exact-policy replication check
X = np.zeros(len(S))
uc = np.zeros(len(S), dtype=int)
for j in range(m):
    X += vex[j][uc] * dS[:, j]
    uc += (signs[:, j] > 0).astype(int)
R = H - X
print("exact policy: c=", R.mean(), " mse=", np.mean((R - R.mean()) ** 2), " (should be lattice price, ~0)")

def mc_policy(seed, n_paths, degree, standardized=True, in_sample=True):
    signs, S, dS = simulate(seed, n_paths)
    H = np.maximum(S[:, -1] - K, 0.0)
    future = np.zeros(n_paths)
    vhat = np.empty((n_paths, m))
    for j in range(m - 1, -1, -1):
        ratio = -(future - H) * dS[:, j] / (S[:, j] ** 2 * sigma ** 2 * eps ** 2)
        if j == 0:
            v = np.full(n_paths, np.clip(ratio.mean(), -1, 1))
        else:
            if standardized:
                z = np.log(S[:, j] / K) / (sigma * math.sqrt(j * eps * eps))
            else:
                z = S[:, j] / S0
            zc = np.clip(z, -4, 4) if standardized else z
            Xb = np.vander(zc, degree + 1)
            beta, *_ = np.linalg.lstsq(Xb, ratio, rcond=None)
            v = np.clip(Xb @ beta, -1.0, 1.0)
        vhat[:, j] = v
        future = future + v * dS[:, j]
    XT = np.sum(vhat * dS, axis=1)
    R = H - XT
    c = R.mean(); mse = np.mean((c + XT - H) ** 2); se = R.std(ddof=1) / math.sqrt(n_paths)
    # pointwise error vs exact delta at a mid step
    jmid = 32
    uc = (signs[:, :jmid] > 0).sum(axis=1)
    err = vhat[:, jmid] - vex[jmid][uc]
    return c, mse, se, float(np.sqrt(np.mean(err ** 2)))

for degree in (3, 5, 7):
    for seed in (0, 1, 2):
        c, mse, se, derr = mc_policy(seed, 20000, degree)
        print(f"std-logm deg={degree} seed={seed}: c={c:.6f} mse={mse:.6f} se={se:.6f} vRMSE@32={derr:.4f} |c-1.815708|/se={abs(c-1.815708)/se:.2f}")
