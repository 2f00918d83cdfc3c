"""Independent reference runs used to pin the long-run acceptance bounds.

Each model is re-implemented from its rules with numpy's generator and
stack-driven (sequential) toppling, sharing nothing with the C++ kernels.
Usage: python3 criticality_reference.py {btw,oslo,ofc} [seed]
"""
import sys

import numpy as np
from numba import njit


@njit(cache=True)
def btw_run(L, warm, n, sites):
    z = np.zeros((L, L), np.int64)
    stack = np.empty(16 * L * L, np.int64)
    sizes = np.zeros(n, np.int64)
    height_sum = 0.0
    total = 0
    for k in range(warm + n):
        i = sites[k]
        z.flat[i] += 1
        total += 1
        top = 0
        s = 0
        if z.flat[i] >= 4:
            stack[top] = i
            top += 1
        while top > 0:
            top -= 1
            j = stack[top]
            if z.flat[j] < 4:
                continue
            z.flat[j] -= 4
            s += 1
            r, c = j // L, j % L
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                rr, cc = r + dr, c + dc
                if rr < 0 or rr >= L or cc < 0 or cc >= L:
                    total -= 1
                    continue
                m = rr * L + cc
                z.flat[m] += 1
                if z.flat[m] >= 4:
                    stack[top] = m
                    top += 1
            if z.flat[j] >= 4:
                stack[top] = j
                top += 1
        if k >= warm:
            sizes[k - warm] = s
            height_sum += total / (L * L)
    return sizes, height_sum / n


@njit(cache=True)
def oslo_run(L, warm, n, u):
    h = np.zeros(L + 1, np.int64)
    sc = np.ones(L, np.int64)
    ui = 0
    for i in range(L):
        sc[i] = 1 if u[ui] < 0.5 else 2
        ui += 1
    sizes = np.zeros(n, np.int64)
    for k in range(warm + n):
        h[0] += 1
        s = 0
        unstable = True
        while unstable:
            unstable = False
            for i in range(L):
                if h[i] - h[i + 1] > sc[i]:
                    h[i] -= 1
                    if i + 1 < L:
                        h[i + 1] += 1
                    sc[i] = 1 if u[ui % u.size] < 0.5 else 2
                    ui += 1
                    s += 1
                    unstable = True
        if k >= warm:
            sizes[k - warm] = s
    return sizes


@njit(cache=True)
def ofc_run(L, alpha, warm, n, f0):
    f = f0.copy()
    sizes = np.zeros(n, np.int64)
    stack = np.empty(64 * L * L, np.int64)
    for k in range(warm + n):
        i = np.argmax(f)
        f += 1.0 - f.flat[i]
        f.flat[i] = 1.0
        top = 1
        stack[0] = i
        s = 0
        while top > 0:
            top -= 1
            j = stack[top]
            if f.flat[j] < 1.0:
                continue
            share = alpha * f.flat[j]
            f.flat[j] = 0.0
            s += 1
            r, c = j // L, j % L
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < L and 0 <= cc < L:
                    m = rr * L + cc
                    f.flat[m] += share
                    if f.flat[m] >= 1.0:
                        stack[top] = m
                        top += 1
        if k >= warm:
            sizes[k - warm] = s
    return sizes


def mle(sizes, s_min):
    t = sizes[sizes >= s_min].astype(float)
    return 1.0 + t.size / np.log(t / (s_min - 0.5)).sum()


def log_hist(sizes, per_decade=5):
    s = sizes[sizes > 0]
    k = np.floor(per_decade * np.log10(s) + 1e-12).astype(int)
    out = []
    for b in np.unique(k):
        lo = int(np.ceil(10 ** (b / per_decade) - 1e-9))
        hi = int(np.ceil(10 ** ((b + 1) / per_decade) - 1e-9)) - 1
        out.append((lo, hi, (k == b).sum() / (s.size * (hi - lo + 1))))
    return out


def summarize(name, sizes):
    s = sizes[sizes > 0]
    h = log_hist(sizes)
    dens = [d for _, _, d in h]
    print(f"{name}: events>0={s.size} decades={np.log10(s.max() / s.min()):.2f} "
          f"decreasing={all(b < a for a, b in zip(dens, dens[1:]))}")
    for s_min in (1, 5, 10):
        print(f"  tau_hat(s_min={s_min}) = {mle(s, s_min):.4f}")


if __name__ == "__main__":
    which = sys.argv[1]
    rng = np.random.default_rng(int(sys.argv[2]) if len(sys.argv) > 2 else 0)
    if which == "btw":
        L, warm, n = 64, 100_000, 200_000
        sizes, mean_h = btw_run(L, warm, n, rng.integers(0, L * L, warm + n))
        print(f"btw mean stable height = {mean_h:.4f}")
        summarize("btw", sizes)
    elif which == "oslo":
        summarize("oslo", oslo_run(32, 10_000, 100_000, rng.random(50_000_000)))
    elif which == "ofc":
        L = 64
        summarize("ofc", ofc_run(L, 0.25, 100_000, 1_000_000, rng.random((L, L))))
