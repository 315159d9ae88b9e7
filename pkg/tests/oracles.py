"""Independent reference computations used only by the tests.

None of these touch the package: plain Python loops, no eigendecomposition,
no incomplete gamma.
"""

import math


def gauss_jordan_inverse(a):
    """Inverse of a square matrix (list of lists) by Gauss-Jordan with partial pivoting."""
    n = len(a)
    m = [list(map(float, row)) + [1.0 if i == j else 0.0 for j in range(n)] for i, row in enumerate(a)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(m[r][col]))
        if m[pivot][col] == 0.0:
            raise ZeroDivisionError("singular matrix")
        m[col], m[pivot] = m[pivot], m[col]
        p = m[col][col]
        m[col] = [v / p for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0.0:
                f = m[r][col]
                m[r] = [vr - f * vc for vr, vc in zip(m[r], m[col])]
    return [row[n:] for row in m]


def quadratic_form(x, mu, inv):
    d = [xi - mi for xi, mi in zip(x, mu)]
    return sum(d[i] * inv[i][j] * d[j] for i in range(len(d)) for j in range(len(d)))


def erf_series(x, terms=80):
    """Maclaurin series of erf; converges fast for |x| <= 3."""
    total = 0.0
    for k in range(terms):
        total += (-1) ** k * x ** (2 * k + 1) / (math.factorial(k) * (2 * k + 1))
    return 2.0 / math.sqrt(math.pi) * total


def _simpson(f, a, b, panels):
    h = (b - a) / panels
    s = f(a) + f(b)
    for i in range(1, panels):
        s += (4 if i % 2 else 2) * f(a + i * h)
    return s * h / 3.0


def chi2_cdf_simpson(n, eps, tol=1e-12):
    """Pr(chi2_n < eps) by composite Simpson, doubling panels until stable.

    Integrates the chi-squared density after t = u^2, which removes the
    t^(n/2 - 1) singularity at the origin for n = 1:
    integrand 2 u^(n-1) exp(-u^2/2) / (2^(n/2) Gamma(n/2)) on [0, sqrt(eps)].
    """
    if eps <= 0:
        return 0.0
    log_norm = (n / 2) * math.log(2.0) + math.lgamma(n / 2)

    def f(u):
        if u == 0.0:
            return 2.0 * math.exp(-log_norm) if n == 1 else 0.0
        return 2.0 * math.exp((n - 1) * math.log(u) - 0.5 * u * u - log_norm)

    b = math.sqrt(eps)
    panels = 64
    prev = _simpson(f, 0.0, b, panels)
    while True:
        panels *= 2
        cur = _simpson(f, 0.0, b, panels)
        if abs(cur - prev) < tol or panels > 2**20:
            return cur
        prev = cur
