"""Dev-time oracle computations (frozen values for tests). Not part of the package."""
import math
import numpy as np
from scipy import integrate
from scipy.stats import binom

def Phi(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))

def bs_call(S0, K, sigma, T):
    d1 = (math.log(S0 / K) + 0.5 * sigma * sigma * T) / (sigma * math.sqrt(T))
    d2 = d1 - sigma * math.sqrt(T)
    return S0 * Phi(d1) - K * Phi(d2)

cstar = bs_call(49, 55, 0.2, 1.0)
print("bs_call(49,55,0.2,1) =", repr(cstar))
print("bs_call(100,100,0.2,1) =", repr(bs_call(100, 100, 0.2, 1.0)))

# quadrature oracle for the ATM case: E[max(S_T - K,0)] under lognormal, mu=0 (martingale: S_T = S0 exp(-s^2/2 + s Z))
def lognormal_call_quad(S0, K, sigma, T):
    s = sigma * math.sqrt(T)
    def integrand(z):
        ST = S0 * math.exp(-0.5 * s * s + s * z)
        return max(ST - K, 0.0) * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    val, err = integrate.quad(integrand, -12, 12, limit=400)
    return val, err

print("quad oracle (100,100):", lognormal_call_quad(100, 100, 0.2, 1.0))
print("quad oracle (49,55):", lognormal_call_quad(49, 55, 0.2, 1.0))

# Binomial lattice price with n = 4^k steps, factors 1 +/- sigma*2^-k, p = 1/2
def lattice_call_price(S0, K, sigma, k, T=1.0):
    eps = 2.0 ** -k
    n = math.ceil(eps ** -2 * T)
    u = np.arange(n + 1)
    logS = math.log(S0) + u * math.log1p(sigma * eps) + (n - u) * math.log1p(-sigma * eps)
    ST = np.exp(logS)
    w = binom.pmf(u, n, 0.5)
    return float(np.sum(w * np.maximum(ST - K, 0.0)))

for k in (1, 2, 3, 4, 5):
    p = lattice_call_price(49, 55, 0.2, k)
    print(f"k={k} n={4**k} lattice={p!r} |err|={abs(p - cstar):.8f}")

# Sampled-timing convention: E[H] with N_eff = min(e, #stops <= T).
# Unit exit-time sampler via spectral/image series inverse CDF (quick inline version).
def unit_survival(t):
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = t < 0.35
    # image series for small t
    ts = t[small]
    acc = np.zeros_like(ts)
    for n in range(-8, 9):
        acc += (-1) ** n * (Phi_vec((1 - 2 * n) / np.sqrt(ts)) - Phi_vec((-1 - 2 * n) / np.sqrt(ts)))
    out[small] = acc
    tl = t[~small]
    acc = np.zeros_like(tl)
    for n in range(0, 64):
        acc += (-1) ** n / (2 * n + 1) * np.exp(-((2 * n + 1) ** 2) * math.pi ** 2 * tl / 8.0)
    out[~small] = 4.0 / math.pi * acc
    return out

from scipy.special import erfc as serfc
def Phi_vec(x):
    return 0.5 * serfc(-x / np.sqrt(2.0))

# inverse CDF table
tgrid = np.geomspace(1e-3, 40.0, 1 << 14)
cdf = 1.0 - unit_survival(tgrid)
keep = np.concatenate(([True], np.diff(cdf) > 0))
tg, cg = tgrid[keep], cdf[keep]

rng = np.random.default_rng(12345)
def draw_unit(nsamp):
    u = rng.random(nsamp)
    return np.interp(u, cg, tg)

m = draw_unit(200000)
print("unit exit mean:", m.mean(), "var:", m.var(), "(theory 1, 2/3)")

# distribution of N_eff at k=3: 64 waiting times each = eps^2 * unit draw
k = 3; eps = 2.0 ** -k; e = 64
NREP = 400000
w = eps * eps * draw_unit(NREP * e).reshape(NREP, e)
Tn = np.cumsum(w, axis=1)
Neff = (Tn <= 1.0).sum(axis=1)          # number of stops at or before T
print("Neff mean:", Neff.mean(), "P(Neff=64):", (Neff == 64).mean(), "min:", Neff.min())

# price as function of step count n (lattice with k=3 factors)
def lattice_price_nsteps(n, S0=49.0, K=55.0, sigma=0.2, k=3):
    epsk = 2.0 ** -k
    u = np.arange(n + 1)
    logS = math.log(S0) + u * math.log1p(sigma * epsk) + (n - u) * math.log1p(-sigma * epsk)
    w = binom.pmf(u, n, 0.5)
    return float(np.sum(w * np.maximum(np.exp(logS) - K, 0.0)))

pn = np.array([lattice_price_nsteps(n) for n in range(0, e + 1)])
eH_sampled = pn[Neff].mean()
se = pn[Neff].std() / math.sqrt(NREP)
print("deterministic 64-step E[H]:", pn[64])
print("sampled-truncation   E[H]:", eH_sampled, "+/-", se)
print("paper value 1.815708; c* =", cstar)
