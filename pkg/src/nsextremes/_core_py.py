"""Pure numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_core.pyx``.
Results must agree to rounding; ``tests/test_backend.py`` enforces it.
"""

import numpy as np

# Small-shape branch: Taylor coefficients (in powers of xi) of
#   log(1+xi) - (1/xi + 1) * log(1 + xi*(1+xi)*a)
# and of its xi-derivative, with a = y/nu.


def _series_loglik(xi, a):
    a2 = a * a
    a3 = a2 * a
    c1 = 0.5 * a2 - 2.0 * a + 1.0
    c2 = -a3 / 3.0 + 1.5 * a2 - a - 0.5
    c3 = 0.25 * a2 * a2 - 4.0 * a3 / 3.0 + 1.5 * a2 + 1.0 / 3.0
    return -a + xi * (c1 + xi * (c2 + xi * c3))


def _series_dxi(xi, a):
    a2 = a * a
    a3 = a2 * a
    d0 = 0.5 * a2 - 2.0 * a + 1.0
    d1 = -2.0 * a3 / 3.0 + 3.0 * a2 - 2.0 * a - 1.0
    d2 = 0.75 * a2 * a2 - 4.0 * a3 + 4.5 * a2 + 1.0
    return d0 + xi * (d1 + xi * d2)


def gpd_loglik(y, xi, nu, tol):
    """Total GP log-likelihood; ``-inf`` on any infeasible observation."""
    y = np.asarray(y, dtype=float)
    xi = np.asarray(xi, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if y.size == 0:
        return 0.0
    if np.any(nu <= 0.0) or np.any(1.0 + xi <= 0.0) or np.any(y < 0.0):
        return -np.inf
    a = y / nu
    x = xi * (1.0 + xi) * a
    if np.any(1.0 + x <= 0.0):
        return -np.inf
    small = np.abs(xi) < tol
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        general = -(1.0 + xi) / xi * np.log1p(x)
    body = np.where(small, _series_loglik(xi, a) - np.log1p(xi), general)
    return float(np.sum(np.log1p(xi) - np.log(nu) + body))


def gpd_score(y, xi, nu, tol):
    """Per-observation derivatives of the log-likelihood.

    Returns ``(dxi, dnu, ok)``; ``ok`` is False when any observation is
    outside the support or the parameters are infeasible.
    """
    y = np.asarray(y, dtype=float)
    xi = np.asarray(xi, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if y.size == 0:
        return np.zeros(0), np.zeros(0), True
    a = y / nu
    x = xi * (1.0 + xi) * a
    g = 1.0 + x
    ok = bool(np.all(nu > 0.0) and np.all(1.0 + xi > 0.0) and np.all(g > 0.0)
              and np.all(y >= 0.0))
    if not ok:
        return np.full(y.shape, np.nan), np.full(y.shape, np.nan), False
    dnu = (-1.0 + (1.0 + xi) ** 2 * a / g) / nu
    small = np.abs(xi) < tol
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        general = 1.0 / (1.0 + xi) + (np.log1p(x) - (1.0 + 2.0 * xi) * x / g) / (xi * xi)
    dxi = np.where(small, _series_dxi(xi, a), general)
    return dxi, dnu, True


def sector_maxima(angles, sizes, width):
    """Maxima per sector of ``width`` degrees centred on 0, width, ...

    Returns ``n_sectors + 1`` values; the last is the maximum over all
    angles. Empty sectors hold 0.
    """
    angles = np.asarray(angles, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    n_sectors = int(round(360.0 / width))
    out = np.zeros(n_sectors + 1)
    if angles.size == 0:
        return out
    idx = np.floor(np.mod(angles + 0.5 * width, 360.0) / width).astype(np.intp)
    np.minimum(idx, n_sectors - 1, out=idx)
    np.maximum.at(out, idx, sizes)
    out[n_sectors] = max(0.0, float(sizes.max()))
    return out


def ips_tau(x):
    """Integrated autocorrelation time, truncated by Geyer's initial positive sequence.

    Autocovariances are computed lazily by direct sums, lag pair by lag
    pair, so a well-mixing chain costs O(m) rather than O(m^2).
    """
    x = np.asarray(x, dtype=float)
    m = x.size
    d = x - x.mean()
    gamma0 = float(d @ d) / m
    if gamma0 <= 0.0:
        return 1.0
    max_lag = m // 2
    total = 0.0
    k = 0
    while 2 * k + 1 <= max_lag:
        lag0 = 2 * k
        lag1 = lag0 + 1
        c0 = 1.0 if lag0 == 0 else float(d[:-lag0] @ d[lag0:]) / m / gamma0
        c1 = float(d[:-lag1] @ d[lag1:]) / m / gamma0
        pair = c0 + c1
        if pair <= 0.0:
            break
        total += pair
        k += 1
    return max(-1.0 + 2.0 * total, 1.0 / m)
