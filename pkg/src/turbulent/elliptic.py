"""Complex lattices Z + Z*tau and the Weierstrass functions on them.

Evaluation goes through the Jacobi theta function theta_1 in the nome
q = exp(i*pi*tau') of a modular-reduced modulus tau', then is carried back to
the caller's lattice by homogeneity.  All functions accept scalars or numpy
arrays and return the same shape.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, PoleProximityError

POLE_DISTANCE = 1e-8
SERIES_RTOL = 1e-16
MAX_ORDER = 64


def _reduce_modulus(tau):
    """Map tau into the standard fundamental domain, tracking the SL2(Z) word."""
    a, b, c, d = 1, 0, 0, 1
    for _ in range(10_000):
        n = round(tau.real)
        if n:
            tau -= n
            a, b = a - n * c, b - n * d
        if abs(tau) < 1.0 - 1e-15:
            tau = -1.0 / tau
            a, b, c, d = -c, -d, a, b
        else:
            return tau, (a, b, c, d)
    raise ConvergenceError(f"modular reduction of tau={tau} did not terminate")


def _frac(x):
    r = np.mod(x, 1.0)
    return np.where(r >= 1.0, 0.0, r)


@dataclass(frozen=True)
class TorusPoint:
    """Point a + b*tau of C/(Z + Z*tau), with 0 <= a, b < 1."""

    a: float
    b: float

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (0.0 <= a < 1.0 and 0.0 <= b < 1.0):
            raise ValueError(f"TorusPoint coordinates must lie in [0, 1): ({a}, {b})")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def wrap(cls, a, b=0.0):
        """Build a point from arbitrary real coordinates, reducing mod 1."""
        return cls(float(_frac(a)), float(_frac(b)))


@dataclass(frozen=True)
class Lattice:
    """The lattice Z + Z*tau.

    ``reduced_tau`` is the SL2(Z)-equivalent modulus with |Re| <= 1/2 and
    |tau| >= 1; ``modular`` is the matrix (a, b, c, d) taking tau to it.
    """

    tau: complex
    reduced_tau: complex = field(init=False, repr=False, compare=False)
    modular: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tau = complex(self.tau)
        if not tau.imag > 0:
            raise ValueError(f"Im(tau) must be positive, got tau={tau}")
        object.__setattr__(self, "tau", tau)
        rt, mat = _reduce_modulus(tau)
        object.__setattr__(self, "reduced_tau", rt)
        object.__setattr__(self, "modular", mat)

    @property
    def homothety(self):
        """lambda with Z + Z*tau = lambda * (Z + Z*reduced_tau)."""
        _, _, c, d = self.modular
        return c * self.tau + d

    @property
    def area(self):
        return self.tau.imag

    def lift(self, p):
        return p.a + p.b * self.tau

    def coordinates(self, z):
        """Real coordinates (a, b) with z = a + b*tau."""
        z = np.asarray(z, dtype=complex)
        b = z.imag / self.tau.imag
        a = z.real - b * self.tau.real
        return a, b

    def nearest_vector(self, z):
        """Integer coordinates (m, n) of the lattice vector m + n*tau nearest to z."""
        z = np.asarray(z, dtype=complex)
        lam = self.homothety
        rt = self.reduced_tau
        w = z / lam
        nb0 = np.round(w.imag / rt.imag)
        na0 = np.round(w.real - nb0 * rt.real)
        best = np.full(w.shape, np.inf)
        best_a = na0.copy()
        best_b = nb0.copy()
        for da in (-1, 0, 1):
            for db in (-1, 0, 1):
                na, nb = na0 + da, nb0 + db
                dist = np.abs(w - na - nb * rt)
                better = dist < best
                best = np.where(better, dist, best)
                best_a = np.where(better, na, best_a)
                best_b = np.where(better, nb, best_b)
        a, b, c, d = self.modular
        m = best_a * d + best_b * b
        n = best_a * c + best_b * a
        return m.astype(int), n.astype(int)

    def distance_to_lattice(self, z):
        z = np.asarray(z, dtype=complex)
        m, n = self.nearest_vector(z)
        return np.abs(z - m - n * self.tau)

    def torus_distance(self, p, q):
        """Flat distance between two torus points (or complex lifts)."""
        zp = self.lift(p) if isinstance(p, TorusPoint) else p
        zq = self.lift(q) if isinstance(q, TorusPoint) else q
        return float(self.distance_to_lattice(zp - zq))


def reduce_point(z, L):
    """Representative of z in the fundamental parallelogram, as a TorusPoint."""
    a, b = L.coordinates(complex(z))
    return TorusPoint(float(_frac(a)), float(_frac(b)))


# ---------------------------------------------------------------------------
# theta-series backbone on the reduced lattice Z + Z*t, Im t >= sqrt(3)/2


@lru_cache(maxsize=256)
def _theta_coefficients(t):
    """Coefficients 2(-1)^n q^((n+1/2)^2) for n = 0..MAX_ORDER-1."""
    n = np.arange(MAX_ORDER)
    return 2.0 * (-1.0) ** n * np.exp(1j * math.pi * t * (n + 0.5) ** 2)


def _series_order(t, max_imag_v):
    """Number of theta terms needed for relative accuracy SERIES_RTOL."""
    y = t.imag
    for n in range(1, MAX_ORDER):
        k = 2 * n + 1
        # |c_n / c_0| * k^3 * exp((k - 1) * |Im v|)
        log_rel = -math.pi * y * ((n + 0.5) ** 2 - 0.25) + 3 * math.log(k) + (k - 1) * max_imag_v
        if log_rel < math.log(SERIES_RTOL):
            return n
    raise ConvergenceError(
        f"theta series for tau={t} needs more than {MAX_ORDER} terms at |Im v|={max_imag_v}"
    )


def _theta1(v, t, nderiv=0):
    """theta_1 and its first ``nderiv`` derivatives in v, for nome exp(i pi t)."""
    v = np.asarray(v, dtype=complex)
    order = _series_order(t, float(np.max(np.abs(v.imag), initial=0.0)))
    coef = _theta_coefficients(t)
    out = [np.zeros(v.shape, dtype=complex) for _ in range(nderiv + 1)]
    for n in range(order):
        k = 2 * n + 1
        kv = k * v
        s, c = np.sin(kv), np.cos(kv)
        trig = (s, c, -s, -c)
        for j in range(nderiv + 1):
            out[j] += coef[n] * k**j * trig[j]
    return out


@lru_cache(maxsize=256)
def _reduced_constants(t):
    """(theta_1'(0), eta1, eta2) for the lattice Z + Z*t (full-period quasi-periods)."""
    _, d1, _, d3 = (complex(x[0]) for x in _theta1(np.zeros(1), t, 3))
    th1p0 = complex(d1)
    eta1 = -(math.pi**2 / 3.0) * complex(d3) / th1p0
    v = math.pi * t / 2.0
    th, thp = _theta1(np.array([v]), t, 1)
    zeta_half = eta1 * t / 2.0 + math.pi * complex(thp[0] / th[0])
    return th1p0, eta1, 2.0 * zeta_half


def _split(z, t):
    """z = z0 + na + nb*t with z0 in the centred cell of Z + Z*t."""
    nb = np.round(z.imag / t.imag)
    na = np.round(z.real - nb * t.real)
    return z - na - nb * t, na, nb


def _check_poles(z0, t):
    near = np.full(z0.shape, np.inf)
    for da in (-1, 0, 1):
        for db in (-1, 0, 1):
            near = np.minimum(near, np.abs(z0 - da - db * t))
    return near


def _as_complex(z):
    arr = np.asarray(z, dtype=complex)
    return arr, arr.ndim == 0


def _finish(values, scalar):
    return complex(values) if scalar else values


def _reduced_eval(z, t, kind):
    z0, na, nb = _split(z, t)
    th1p0, eta1, eta2 = _reduced_constants(t)
    if kind in ("wp", "wp_prime", "zeta"):
        if np.any(_check_poles(z0, t) < POLE_DISTANCE):
            raise PoleProximityError(f"{kind} evaluated within {POLE_DISTANCE} of a lattice point")
    v = math.pi * z0
    if kind == "sigma":
        (th,) = _theta1(v, t, 0)
        sig0 = np.exp(0.5 * eta1 * z0**2) * th / (math.pi * th1p0)
        eta_w = na * eta1 + nb * eta2
        omega = na + nb * t
        sign = np.where(((na + nb + na * nb) % 2) == 0, 1.0, -1.0)
        return sign * np.exp(eta_w * (z0 + 0.5 * omega)) * sig0
    th, d1, d2, d3 = _theta1(v, t, 3)
    r1 = d1 / th
    if kind == "zeta":
        return eta1 * z0 + math.pi * r1 + na * eta1 + nb * eta2
    r2 = d2 / th
    if kind == "wp":
        return -eta1 - math.pi**2 * (r2 - r1**2)
    r3 = d3 / th
    return -math.pi**3 * (r3 - 3.0 * r2 * r1 + 2.0 * r1**3)


def _evaluate(z, L, kind):
    z, scalar = _as_complex(z)
    lam = L.homothety
    w = _reduced_eval(z / lam, L.reduced_tau, kind)
    power = {"sigma": 1, "zeta": -1, "wp": -2, "wp_prime": -3}[kind]
    return _finish(w * lam**power, scalar)


def wp(z, L):
    """Weierstrass p-function."""
    return _evaluate(z, L, "wp")


def wp_prime(z, L):
    return _evaluate(z, L, "wp_prime")


def zeta_w(z, L):
    """Weierstrass zeta, normalised so zeta(z + 1) = zeta(z) + eta1."""
    return _evaluate(z, L, "zeta")


def sigma_w(z, L):
    """Weierstrass sigma; entire, simple zeros on the lattice."""
    return _evaluate(z, L, "sigma")


# ---------------------------------------------------------------------------
# invariants


@dataclass(frozen=True)
class WeierstrassCache:
    tau: complex
    g2: complex
    g3: complex
    eta1: complex
    eta2: complex
    order: int

    @property
    def discriminant(self):
        return self.g2**3 - 27.0 * self.g3**2

    @property
    def legendre_residual(self):
        return abs(self.eta1 * self.tau - self.eta2 - 2j * math.pi)


def _eisenstein_g2_g3(t):
    q2 = cmath.exp(2j * math.pi * t)
    s3 = s5 = 0.0
    for n in range(1, MAX_ORDER + 1):
        qn = q2**n
        lam = qn / (1.0 - qn)
        t3, t5 = n**3 * lam, n**5 * lam
        s3 += t3
        s5 += t5
        if abs(t5) * 504 < SERIES_RTOL:
            break
    else:
        raise ConvergenceError(f"Eisenstein series for tau={t} did not converge")
    e4 = 1.0 + 240.0 * s3
    e6 = 1.0 - 504.0 * s5
    return (4.0 * math.pi**4 / 3.0) * e4, (8.0 * math.pi**6 / 27.0) * e6


def quasi_periods(L):
    """(eta1, eta2): zeta(z+1) = zeta(z) + eta1, zeta(z+tau) = zeta(z) + eta2."""
    _, e1, e2 = _reduced_constants(L.reduced_tau)
    a, b, c, d = L.modular
    lam = L.homothety
    return (a * e1 - c * e2) / lam, (d * e2 - b * e1) / lam


def lattice_invariants(L, tol=1e-9):
    """g2, g3 and quasi-periods of Z + Z*tau, checked against Legendre's relation."""
    t = L.reduced_tau
    lam = L.homothety
    g2n, g3n = _eisenstein_g2_g3(t)
    eta1, eta2 = quasi_periods(L)
    order = _series_order(t, math.pi * t.imag / 2.0)
    cache = WeierstrassCache(L.tau, g2n / lam**4, g3n / lam**6, eta1, eta2, order)
    scale = max(1.0, abs(eta1 * L.tau))
    if cache.legendre_residual > tol * scale:
        raise ConvergenceError(f"Legendre relation residual {cache.legendre_residual:.3e} exceeds {tol}")
    if abs(cache.discriminant) <= tol * max(1.0, abs(cache.g2) ** 3):
        raise ConvergenceError("lattice invariants give a vanishing discriminant")
    return cache


def identity_residuals(L, n=100, seed=0):
    """Worst-case residuals of the classical identities at n random points.

    Residuals are relative to the natural size of each side.  Points are drawn
    from the fundamental parallelogram, kept at least 0.05 from the lattice.
    """
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < n:
        a, b = rng.random(2)
        z = a + b * L.tau
        if L.distance_to_lattice(z) > 0.05:
            pts.append(z)
    z = np.array(pts)
    cache = lattice_invariants(L)
    p, dp = wp(z, L), wp_prime(z, L)
    rhs = 4 * p**3 - cache.g2 * p - cache.g3
    ode = np.max(np.abs(dp**2 - rhs) / np.maximum(1.0, np.abs(rhs)))
    s = sigma_w(z, L)
    s1 = sigma_w(z + 1, L)
    st = sigma_w(z + L.tau, L)
    q1 = np.abs(s1 + np.exp(cache.eta1 * (z + 0.5)) * s) / np.maximum(1.0, np.abs(s1))
    qt = np.abs(st + np.exp(cache.eta2 * (z + 0.5 * L.tau)) * s) / np.maximum(1.0, np.abs(st))
    h = 1e-5
    dz = (zeta_w(z + h, L) - zeta_w(z - h, L)) / (2 * h)
    zeta_ode = np.max(np.abs(dz + p) / np.maximum(1.0, np.abs(p)))
    ds = (sigma_w(z + h, L) - sigma_w(z - h, L)) / (2 * h)
    zw = zeta_w(z, L)
    log_deriv = np.max(np.abs(ds / s - zw) / np.maximum(1.0, np.abs(zw)))
    return {
        "wp_ode": float(ode),
        "legendre": float(cache.legendre_residual),
        "sigma_quasi_period": float(max(q1.max(), qt.max())),
        "zeta_derivative": float(zeta_ode),
        "sigma_log_derivative": float(log_deriv),
        "wp_even": float(np.max(np.abs(wp(-z, L) - p) / np.maximum(1.0, np.abs(p)))),
        "wp_periodic": float(
            np.max(np.abs(np.concatenate([wp(z + 1, L), wp(z + L.tau, L)]) - np.tile(p, 2))
                   / np.maximum(1.0, np.abs(np.tile(p, 2))))
        ),
    }


IDENTITY_THRESHOLDS = {
    "wp_ode": 1e-9,
    "legendre": 1e-12,
    "sigma_quasi_period": 1e-9,
    "zeta_derivative": 1e-6,
    "sigma_log_derivative": 1e-6,
    "wp_even": 1e-10,
    "wp_periodic": 1e-10,
}
