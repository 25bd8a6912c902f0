"""Independent reference implementations used only by the test-suite.

None of these touch the theta-series path in turbulent.elliptic; they work
directly from the lattice sums/products, with the inner sum over m done in
closed form (pi^2/sin^2, pi*cot, sin ratios) and the outer sum over
|n| <= nmax truncated.  Terms decay like exp(-2*pi*|n|*Im tau), so for the
moduli used in the tests the truncation tail is below 1e-15 well before
nmax = 200.
"""

import cmath
import math

import numpy as np

NMAX = 200


def _u(a):
    """exp(2 pi i a) for Im a > 0, exp(-2 pi i a) otherwise (always |u| <= 1)."""
    return np.exp(2j * np.pi * np.where(a.imag > 0, a, -a))


def _inv_sin2(a):
    u = _u(a)
    return -4.0 * u / (1.0 - u) ** 2


def _cot(a):
    u = _u(a)
    return np.where(a.imag > 0, -1j * (1 + u) / (1 - u), 1j * (1 + u) / (1 - u))


def g2_eisenstein(tau, nmax=NMAX):
    """G2(tau) = sum_n sum'_m (m + n tau)^-2, Eisenstein order (m innermost)."""
    n = np.arange(1, nmax + 1)
    return math.pi**2 / 3.0 + 2.0 * np.sum(math.pi**2 * _inv_sin2(n * tau))


def wp_oracle(z, tau, nmax=NMAX):
    z = complex(z)
    total = math.pi**2 / cmath.sin(math.pi * z) ** 2 - math.pi**2 / 3.0
    n = np.concatenate([np.arange(-nmax, 0), np.arange(1, nmax + 1)])
    a = z - n * tau
    total += np.sum(math.pi**2 * _inv_sin2(a) - math.pi**2 * _inv_sin2(n * tau))
    return complex(total)


def zeta_oracle(z, tau, nmax=NMAX):
    z = complex(z)
    n = np.concatenate([np.arange(-nmax, 0), np.arange(1, nmax + 1)])
    total = g2_eisenstein(tau, nmax) * z + math.pi / cmath.tan(math.pi * z)
    total += np.sum(math.pi * _cot(z - n * tau) + math.pi * _cot(n * tau))
    return complex(total)


def quasi_periods_oracle(tau, nmax=NMAX):
    return g2_eisenstein(tau, nmax), 2.0 * zeta_oracle(tau / 2.0, tau, nmax)


def log_sigma_oracle(z, tau, nmax=NMAX):
    """log sigma(z) from the Weierstrass product, grouped by rows n of the lattice."""
    z = complex(z)
    total = cmath.log(cmath.sin(math.pi * z) / math.pi) + math.pi**2 * z**2 / 6.0
    for n in (s * k for k in range(1, nmax + 1) for s in (1, -1)):
        a = n * tau
        if a.imag > 0:
            u, uz = cmath.exp(2j * math.pi * a), cmath.exp(2j * math.pi * (a - z))
            ratio = cmath.exp(1j * math.pi * z) * (1 - uz) / (1 - u)
            cot = -1j * (1 + u) / (1 - u)
            isin2 = -4 * u / (1 - u) ** 2
        else:
            u, uz = cmath.exp(-2j * math.pi * a), cmath.exp(-2j * math.pi * (a - z))
            ratio = cmath.exp(-1j * math.pi * z) * (1 - uz) / (1 - u)
            cot = 1j * (1 + u) / (1 - u)
            isin2 = -4 * u / (1 - u) ** 2
        term = cmath.log(ratio) + math.pi * z * cot + 0.5 * math.pi**2 * z**2 * isin2
        total += term
        if n < 0 and abs(u) < 1e-300:
            break
    return total


def sigma_oracle(z, tau, nmax=NMAX):
    return cmath.exp(log_sigma_oracle(z, tau, nmax))


def wp_brute_force(z, tau, nmax=NMAX):
    """Raw symmetric double lattice sum over |m|, |n| <= nmax (tail O(|z|^2/nmax^2))."""
    m = np.arange(-nmax, nmax + 1)
    mm, nn = np.meshgrid(m, m)
    w = (mm + nn * tau).ravel()
    w = w[w != 0]
    return complex(1 / z**2 + np.sum(1 / (z - w) ** 2 - 1 / w**2))


def sigma_quotient_oracle(z, x_lifts, y_lifts, tau, scale=1.0):
    """Elliptic function with zeros y and poles x via the product sigma oracle.

    The lifts are shifted so that sum(x) == sum(y) exactly; the quotient is then
    periodic without any exponential correction.
    """
    x = list(x_lifts)
    y = list(y_lifts)
    shift = sum(x) - sum(y)
    y[-1] += shift
    num = sum(log_sigma_oracle(z - yi, tau) for yi in y)
    den = sum(log_sigma_oracle(z - xi, tau) for xi in x)
    return scale * cmath.exp(num - den)


def laurent_residue(fun, center, radius, n_samples=64, n_terms=24):
    """Residue via least-squares fit of sum_{k=-1}^{n_terms} c_k (z - center)^k."""
    theta = 2 * np.pi * np.arange(n_samples) / n_samples
    dz = radius * np.exp(1j * theta)
    vals = np.array([fun(center + d) for d in dz])
    ks = np.arange(-1, n_terms + 1)
    A = dz[:, None] ** ks[None, :]
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    return complex(coef[0])


def fit_mobius(src, dst):
    """Least-squares Mobius map dst ~ (a src + b)/(c src + d); returns (matrix, residual)."""
    src = np.asarray(src, dtype=complex)
    dst = np.asarray(dst, dtype=complex)
    A = np.stack([src, np.ones_like(src), -src * dst, -dst], axis=1)
    _, _, vh = np.linalg.svd(A)
    a, b, c, d = vh[-1].conj()
    m = np.array([[a, b], [c, d]])
    pred = (a * src + b) / (c * src + d)
    return m, float(np.max(np.abs(pred - dst)))


def _row_inv4(a):
    """sum_m (a + m)^-4 = pi^4 (csc^4 - 2/3 csc^2)."""
    s = _inv_sin2(a)  # csc^2(pi a)
    return math.pi**4 * (s * s - 2.0 / 3.0 * s)


def _row_inv6(a):
    """sum_m (a + m)^-6 = pi^6 (csc^6 - csc^4 + 2/15 csc^2)."""
    s = _inv_sin2(a)
    return math.pi**6 * (s**3 - s * s + 2.0 / 15.0 * s)


def g2_g3_oracle(tau, nmax=NMAX):
    """(g2, g3) = (60 G4, 140 G6) from row sums over n with the m-sum in closed form."""
    n = np.arange(1, nmax + 1)
    g4 = 2.0 * math.pi**4 / 90.0 + 2.0 * np.sum(_row_inv4(n * tau))
    g6 = 2.0 * math.pi**6 / 945.0 + 2.0 * np.sum(_row_inv6(n * tau))
    return complex(60.0 * g4), complex(140.0 * g6)


def partial_g4(tau, nmax):
    m = np.arange(-nmax, nmax + 1)
    mm, nn = np.meshgrid(m, m)
    w = (mm + nn * tau).ravel()
    w = w[w != 0]
    return complex(np.sum(w**-4.0))


def wp_brute_force_corrected(z, tau, nmax=NMAX):
    """Raw square-lattice sum plus its leading tail 3 z^2 (G4 - partial G4); remainder O(z^4/nmax^4)."""
    g2, _ = g2_g3_oracle(tau)
    return wp_brute_force(z, tau, nmax) + 3.0 * z**2 * (g2 / 60.0 - partial_g4(tau, nmax))
