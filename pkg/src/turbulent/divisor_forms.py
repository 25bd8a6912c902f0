"""Divisor pairs on an elliptic curve and the meromorphic forms they carry.

A pair (x, y) of reduced degree-d divisors with sum(x) = sum(y) mod the
lattice is the divisor of a meromorphic function, unique up to scale.  It is
realised here as the sigma quotient

    f(z) = scale * exp(kappa z) * prod sigma(z - y_i) / prod sigma(z - x_i),

where kappa cancels the quasi-periodicity left over when the chosen lifts of
the points sum to a nonzero lattice vector.  The one-form is f(z) dz.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import contour
from .elliptic import Lattice, TorusPoint, quasi_periods, reduce_point, sigma_w
from .errors import AbelConditionError, DivisorError, PoleProximityError

DISTINCT_TOL = 1e-6
DEFAULT_TOL = 1e-9
POLE_DISTANCE = 1e-8


def abel_defect(x, y, L):
    """sum(x) - sum(y) minus the nearest lattice vector."""
    if len(x) != len(y):
        raise ValueError(f"divisor length mismatch: {len(x)} poles vs {len(y)} zeros")
    diff = sum(L.lift(p) for p in x) - sum(L.lift(p) for p in y)
    m, n = L.nearest_vector(diff)
    return complex(diff - m - n * L.tau), (int(m), int(n))


def abel_check(x, y, L, tol=DEFAULT_TOL):
    """(verdict, defect) for the Abel condition sum(x) == sum(y) on C/L."""
    if len(x) != len(y):
        raise ValueError(f"divisor length mismatch: {len(x)} poles vs {len(y)} zeros")
    if len(x) < 2:
        raise ValueError("divisors must have degree at least 2")
    defect, _ = abel_defect(x, y, L)
    return abs(defect) < tol, defect


@dataclass(frozen=True)
class DivisorPair:
    """Pole support x and zero support y, each of size d, on C/L.

    Distinctness and disjointness are enforced here; the Abel condition is
    not (it is checked when a form is built), so that off-locus pairs can be
    represented and reported.
    """

    x: tuple
    y: tuple
    lattice: Lattice

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(self.x))
        object.__setattr__(self, "y", tuple(self.y))
        if len(self.x) != len(self.y):
            raise ValueError(f"divisor length mismatch: {len(self.x)} poles vs {len(self.y)} zeros")
        if len(self.x) < 2:
            raise ValueError("divisors must have degree d >= 2")
        L = self.lattice
        for name, pts in (("x", self.x), ("y", self.y)):
            for i in range(len(pts)):
                for j in range(i):
                    if L.torus_distance(pts[i], pts[j]) <= DISTINCT_TOL:
                        raise DivisorError(f"points {name}[{j}] and {name}[{i}] coincide")
        for i, p in enumerate(self.x):
            for j, q in enumerate(self.y):
                if L.torus_distance(p, q) <= DISTINCT_TOL:
                    raise DivisorError(f"pole x[{i}] and zero y[{j}] coincide; supports must be disjoint")

    @property
    def d(self):
        return len(self.x)

    @property
    def abel_defect(self):
        return abel_defect(self.x, self.y, self.lattice)[0]

    def points(self):
        return list(self.x) + list(self.y)

    def min_separation(self):
        pts = self.points()
        L = self.lattice
        return min(L.torus_distance(pts[i], pts[j]) for i in range(len(pts)) for j in range(i))

    def translated(self, w):
        """All 2d points moved by the complex translation w."""
        L = self.lattice
        return DivisorPair(
            tuple(reduce_point(L.lift(p) + w, L) for p in self.x),
            tuple(reduce_point(L.lift(p) + w, L) for p in self.y),
            L,
        )


class MeromorphicOneForm:
    """f(z) dz with divisor y - x, represented as a sigma quotient."""

    def __init__(self, pair, scale, kappa):
        self.pair = pair
        self.scale = complex(scale)
        self.kappa = complex(kappa)
        L = pair.lattice
        self._x = np.array([L.lift(p) for p in pair.x])
        self._y = np.array([L.lift(p) for p in pair.y])

    @property
    def lattice(self):
        return self.pair.lattice

    def _ratio(self, z, invert=False):
        z = np.asarray(z, dtype=complex)
        args = np.concatenate([z[..., None] - self._y, z[..., None] - self._x], axis=-1)
        s = sigma_w(args, self.lattice)
        num = np.prod(s[..., : self.pair.d], axis=-1)
        den = np.prod(s[..., self.pair.d :], axis=-1)
        if invert:
            return np.exp(-self.kappa * z) * den / (num * self.scale)
        return self.scale * np.exp(self.kappa * z) * num / den

    def __call__(self, z):
        """Coefficient of dz at complex z, evaluated as written (no reduction)."""
        out = self._ratio(z)
        return complex(out) if np.ndim(out) == 0 else out

    def reciprocal(self, z):
        """1/f(z); finite at the poles, infinite at the zeros."""
        out = self._ratio(z, invert=True)
        return complex(out) if np.ndim(out) == 0 else out

    def scaled(self, c):
        return MeromorphicOneForm(self.pair, self.scale * c, self.kappa)

    def periodicity_residual(self, n=20, seed=0):
        """max |f(z + w) - f(z)| / |f(z)| over w in {1, tau} and n random z."""
        L = self.lattice
        rng = np.random.default_rng(seed)
        pts = []
        special = np.concatenate([self._x, self._y])
        while len(pts) < n:
            a, b = rng.random(2)
            z = a + b * L.tau
            if np.min(L.distance_to_lattice(z - special)) > 0.05:
                pts.append(z)
        z = np.array(pts)
        f0 = self._ratio(z)
        worst = 0.0
        for w in (1.0, L.tau):
            worst = max(worst, float(np.max(np.abs(self._ratio(z + w) - f0) / np.abs(f0))))
        return worst


def build_one_form(pair, scale=1.0, check_abel=True, tol=DEFAULT_TOL):
    """The meromorphic one-form with zero divisor pair.y and pole divisor pair.x."""
    scale = complex(scale)
    if scale == 0:
        raise ValueError("scale must be nonzero")
    L = pair.lattice
    defect, (m, n) = abel_defect(pair.x, pair.y, L)
    if check_abel and abs(defect) >= tol:
        raise AbelConditionError(f"abel condition violated: defect {abs(defect):.3e}")
    eta1, eta2 = quasi_periods(L)
    kappa = -(m * eta1 + n * eta2)
    return MeromorphicOneForm(pair, scale, kappa)


def _check_clear(z, centres, L, what):
    dist = L.distance_to_lattice(z - centres)
    if np.min(dist) < POLE_DISTANCE:
        raise PoleProximityError(f"evaluation point within {POLE_DISTANCE} of a {what}")


def eval_one_form(w, z):
    """Value of the dz-coefficient at a torus point (or complex number)."""
    L = w.lattice
    zc = L.lift(z) if isinstance(z, TorusPoint) else complex(z)
    _check_clear(zc, w._x, L, "pole")
    return w(zc)


def eval_reciprocal(w, z):
    L = w.lattice
    zc = L.lift(z) if isinstance(z, TorusPoint) else complex(z)
    _check_clear(zc, w._y, L, "zero")
    return w.reciprocal(zc)


# ---------------------------------------------------------------------------
# residues and divisor counting


def _trapezoid_residue(w, centre, radius, n):
    theta = 2 * np.pi * np.arange(n) / n
    e = np.exp(1j * theta)
    return complex(radius * np.mean(w(centre + radius * e) * e))


def residues(w, radius=None, rtol=1e-10, max_order=1 << 14):
    """Residue of f at each pole by trapezoidal quadrature on a circle.

    The order doubles from 16 until two successive estimates agree to rtol
    (relative to max(1, |residue|)).
    """
    sep = w.pair.min_separation()
    if radius is None:
        radius = 0.4 * sep
    if radius >= 0.5 * sep:
        raise ValueError(f"radius {radius} too large: contour would enclose another divisor point (limit {0.5 * sep})")
    out = []
    for p, centre in zip(w.pair.x, w._x):
        n = 16
        prev = _trapezoid_residue(w, centre, radius, n)
        while True:
            n *= 2
            cur = _trapezoid_residue(w, centre, radius, n)
            if abs(cur - prev) < rtol * max(1.0, abs(cur)):
                break
            if n >= max_order:
                raise RuntimeError(f"residue quadrature did not settle by order {n}")
            prev = cur
        out.append((p, cur))
    return out


def count_divisor(w, grid=8, seed=0):
    """(zeros, poles) of f over one fundamental domain by the argument principle.

    Each leaf cell is guaranteed to hold at most one special point, so the sign
    of its winding number classifies it as a zero (+1) or a pole (-1).
    """
    L = w.lattice
    pts = [(p.a, p.b) for p in w.pair.points()]
    offset = contour.choose_offset(pts, grid, L.tau, seed=seed)
    cells = contour.build_cells(grid, offset, pts, L.tau)
    windings = contour.cell_windings(w, cells, L.tau)
    zeros = int(np.sum(windings[windings > 0]))
    poles = int(-np.sum(windings[windings < 0]))
    return zeros, poles


def sample_divisor_pair(d, L, seed, max_attempts=1000):
    """Random pair on the Abel locus: x and y[:-1] uniform, y[-1] solved."""
    if d < 2:
        raise ValueError("d must be at least 2")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        xs = rng.random((d, 2))
        ys = rng.random((d - 1, 2))
        last = np.mod(xs.sum(axis=0) - ys.sum(axis=0), 1.0)
        x = tuple(TorusPoint.wrap(a, b) for a, b in xs)
        y = tuple(TorusPoint.wrap(a, b) for a, b in ys) + (TorusPoint.wrap(*last),)
        try:
            return DivisorPair(x, y, L)
        except DivisorError:
            continue
    raise DivisorError(f"no admissible pair after {max_attempts} draws")


# ---------------------------------------------------------------------------
# JSON document: {"tau": [re, im], "x": [[a, b], ...], "y": [...], "scale": [re, im]}


def _pair_xy(doc, key):
    return tuple(TorusPoint.wrap(a, b) for a, b in doc[key])


def pair_from_dict(doc):
    tau = complex(*doc["tau"])
    return DivisorPair(_pair_xy(doc, "x"), _pair_xy(doc, "y"), Lattice(tau))


def pair_to_dict(pair, scale=1.0):
    scale = complex(scale)
    return {
        "tau": [pair.lattice.tau.real, pair.lattice.tau.imag],
        "x": [[p.a, p.b] for p in pair.x],
        "y": [[p.a, p.b] for p in pair.y],
        "scale": [scale.real, scale.imag],
        "abel_defect": abs(pair.abel_defect),
    }


def residue_sum(w, radius=None):
    return sum(r for _, r in residues(w, radius))


def exact_residue(w, k):
    """Closed-form residue at x_k: sigma'(0) = 1 gives it directly."""
    L = w.lattice
    xk = w._x[k]
    num = np.prod(sigma_w(xk - w._y, L))
    others = np.delete(w._x, k)
    den = np.prod(sigma_w(xk - others, L))
    return complex(w.scale * np.exp(w.kappa * xk) * num / den)
