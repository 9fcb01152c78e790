"""Independent Darcy-flow references: KL spectrum, mean-point LSF value,
and crude Monte Carlo exceedance probabilities on the 513-node grid.

Usage: python3 darcy_refs.py [n_mc]
"""
import sys
import numpy as np
from scipy.linalg import eigh
from scipy.stats import norm


def kl_basis(m, terms, corr_len=0.1):
    y = np.linspace(0.0, 1.0, m)
    h = y[1] - y[0]
    w = np.full(m, h)
    w[0] = w[-1] = h / 2
    C = np.exp(-np.abs(y[:, None] - y[None, :]) / corr_len)
    sw = np.sqrt(w)
    lam, V = eigh(sw[:, None] * C * sw[None, :], subset_by_index=[m - terms, m - 1])
    lam, V = lam[::-1], V[:, ::-1]
    phi = V / sw[:, None]
    phi *= np.sign(phi[0])[None, :]
    return y, h, lam, phi


def make_lsf(d, m=513, source_sign=1.0):
    y, h, lam, phi = kl_basis(m, d - 1)
    Q = 0.8 * sum(norm.cdf((y - mu) / 0.05) - norm.cdf(-mu / 0.05) for mu in 0.2 * np.arange(1, 5))
    B = (phi * np.sqrt(lam)[None, :]).T  # (d-1) x m

    def g(X):
        F = 2.0 + np.sqrt(0.5) * X[:, 0]
        logk = 1.0 + np.sqrt(0.3) * (X[:, 1:] @ B)
        f = (F[:, None] + source_sign * Q[None, :]) * np.exp(-logk)
        seg = 0.5 * (f[:, 1:] + f[:, :-1]) * h
        tail = np.cumsum(seg[:, ::-1], axis=1)[:, ::-1]
        umax = 1.0 + np.maximum(tail.max(axis=1), 0.0)
        return 2.7 - umax

    return g


if __name__ == "__main__":
    _, _, lam_fine, _ = kl_basis(4097, 4)
    print("fine-grid (4097) KL eigenvalues:", ", ".join(f"{v:.12g}" for v in lam_fine))
    _, _, lam513, _ = kl_basis(513, 4)
    print("513-grid KL eigenvalues:", ", ".join(f"{v:.12g}" for v in lam513))
    for sign in (1.0, -1.0):
        g = make_lsf(10, source_sign=sign)
        print(f"source_sign={sign:+.0f} g(0) at d=10, m=513: {g(np.zeros((1, 10)))[0]:.15g}")
    n_mc = int(float(sys.argv[1])) if len(sys.argv) > 1 else 0
    if n_mc:
        for sign in (1.0, -1.0):
            g = make_lsf(10, source_sign=sign)
            rng = np.random.default_rng(7)
            hits, chunk = 0, 20000
            for start in range(0, n_mc, chunk):
                hits += int(np.count_nonzero(g(rng.standard_normal((min(chunk, n_mc - start), 10))) <= 0))
            p = hits / n_mc
            print(f"source_sign={sign:+.0f} d=10 crude MC n={n_mc}: p={p:.10g} hits={hits} "
                  f"cov={np.sqrt((1 - p) / (n_mc * p)):.4g}", flush=True)
