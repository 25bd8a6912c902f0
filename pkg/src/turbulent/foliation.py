"""Turbulent foliations on C x X defined by the closed form omega + beta dx.

The foliation is the kernel of  omega(c) dc + beta dx.  Its line field is
computed in two charts:

    chart A (|omega(c)| <= 1):  direction (1, -omega/beta)
    chart B (|omega(c)| >  1):  direction (-beta/omega, 1)

so that it stays finite at both the zeros and the poles of omega.  The fibres
{x_i} x X over the poles are the compact leaves.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import ode
from .divisor_forms import MeromorphicOneForm, count_divisor, eval_one_form, eval_reciprocal, exact_residue
from .elliptic import Lattice, TorusPoint, reduce_point
from .errors import StepCollapseError

CLASSIFY_BAND = 1e-8
# a chart-B trace closer than this to a pole is placed exactly on the compact fibre
ABSORB_RADIUS = 1e-9
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True, eq=False)
class TurbulentFoliation:
    lattice_c: Lattice
    lattice_x: Lattice
    omega: MeromorphicOneForm
    beta_coeff: complex

    @property
    def d(self):
        return self.omega.pair.d


def build_turbulent(omega, beta_coeff, lattice_x):
    beta_coeff = complex(beta_coeff)
    if beta_coeff == 0:
        raise ValueError("beta_coeff must be nonzero: beta = 0 degenerates to the fibration over C")
    return TurbulentFoliation(omega.lattice, lattice_x, omega, beta_coeff)


def _lift(p, L):
    return L.lift(p) if isinstance(p, TorusPoint) else complex(p)


def _nearest(F, c):
    """Distances from c to the nearest pole and to the nearest zero of omega."""
    L = F.lattice_c
    w = F.omega
    return float(np.min(L.distance_to_lattice(c - w._x))), float(np.min(L.distance_to_lattice(c - w._y)))


def omega_and_reciprocal(F, c):
    """(omega(c), 1/omega(c)) with whichever side is infinite given as inf/0."""
    dp, dz = _nearest(F, c)
    if dp < dz:
        u = eval_reciprocal(F.omega, c)
        return (complex(math.inf) if u == 0 else 1.0 / u), u
    om = eval_one_form(F.omega, c)
    return om, (complex(math.inf) if om == 0 else 1.0 / om)


def chart_at(F, c):
    om, u = omega_and_reciprocal(F, _lift(c, F.lattice_c))
    return "A" if abs(om) <= 1.0 else "B"


def line_field(F, c, x=None):
    """Unit vector (v_c, v_x) spanning the leaf direction at (c, x)."""
    om, u = omega_and_reciprocal(F, _lift(c, F.lattice_c))
    beta = F.beta_coeff
    if abs(om) <= 1.0:
        v = np.array([1.0, -om / beta], dtype=complex)
    else:
        v = np.array([-beta * u, 1.0], dtype=complex)
    return v / np.linalg.norm(v)


def kernel_residual(F, c, v):
    """|omega(c) v_c + beta v_x| in the chart where omega is finite (A) or scaled by 1/omega (B)."""
    om, u = omega_and_reciprocal(F, _lift(c, F.lattice_c))
    if abs(om) <= 1.0:
        return abs(om * v[0] + F.beta_coeff * v[1])
    return abs(v[0] + F.beta_coeff * u * v[1])


def projective_distance(u, v):
    u = np.asarray(u) / np.linalg.norm(u)
    v = np.asarray(v) / np.linalg.norm(v)
    # sine of the angle between the lines; the determinant avoids 1 - cos^2 cancellation
    return float(abs(u[0] * v[1] - u[1] * v[0]))


def tangency(F, c, x=None, band=CLASSIFY_BAND):
    """'horizontal' on y x X, 'vertical' on x x X, otherwise 'transverse'."""
    v = line_field(F, c, x)
    if abs(v[1]) < band:
        return "horizontal"
    if abs(v[0]) < band:
        return "vertical"
    return "transverse"


def compact_leaves(F):
    """Base points of the compact leaves {x_i} x X: the poles of omega."""
    return list(F.omega.pair.x)


# ---------------------------------------------------------------------------
# leaf tracing


@dataclass
class LeafTrace:
    samples: list = field(default_factory=list)  # (t, c, x) with TorusPoints
    charts: list = field(default_factory=list)
    drifts: list = field(default_factory=list)
    drift: float = 0.0
    chart_switches: int = 0
    max_residual: float = 0.0
    steps: int = 0
    absorbed: bool = False

    def c_distance(self, L, p):
        """Minimum torus distance from the traced c(t) to the point p."""
        return min(L.torus_distance(c, p) for _, c, _ in self.samples)

    def max_c_excursion(self, L, p):
        return max(L.torus_distance(c, p) for _, c, _ in self.samples)


def _field(F, chart, sign=1.0):
    beta = sign * F.beta_coeff
    w = F.omega
    if chart == "A":
        def fun(t, y):
            return np.array([beta, -sign * w(y[0])])
    else:
        def fun(t, y):
            return np.array([-sign * F.beta_coeff**2 * w.reciprocal(y[0]), beta])
    return fun


def _chord_integral(w, c0, c1, pole=None):
    """Integral of omega along the straight segment c0 -> c1.

    With ``pole = (p, r)`` the simple-pole part r/(c - p) is integrated in
    closed form and only the regular remainder by quadrature, which keeps the
    increment accurate when the segment shrinks towards p geometrically.
    """
    dc = c1 - c0
    if dc == 0:
        return 0j
    nodes = 0.5 * (c0 + c1) + 0.5 * dc * _GL_NODES
    vals = 1.0 / w.reciprocal(nodes)
    if pole is None:
        return complex(0.5 * dc * np.sum(_GL_WEIGHTS * vals))
    p, r = pole
    vals = vals - r / (nodes - p)
    return complex(r * cmath.log((c1 - p) / (c0 - p)) + 0.5 * dc * np.sum(_GL_WEIGHTS * vals))


def _nearest_pole(F, c, residues):
    L = F.lattice_c
    lifts = F.omega._x
    k = int(np.argmin(L.distance_to_lattice(c - lifts)))
    m, n = L.nearest_vector(c - lifts[k])
    return lifts[k] + m + n * L.tau, residues[k]


def _wrap(z, L):
    a, b = L.coordinates(z)
    m, n = math.floor(a), math.floor(b)
    if m == 0 and n == 0:
        return z
    return z - m - n * L.tau


def trace_leaf(F, c0, x0, horizon=200.0, step_tol=1e-10, max_steps=None, h0=1e-2, backward=False):
    """Follow the leaf through (c0, x0) for real time ``horizon``.

    Chart A integrates dc/dt = beta, dx/dt = -omega(c); chart B integrates
    dc/dt = -beta^2/omega(c), dx/dt = beta.  The chart is chosen at the start
    of every step.  Drift accumulates the increments of the local first
    integral W(c) + beta*x, with dW integrated independently along each step
    (the log singularity at a pole is split off in chart B).  ``backward``
    runs both fields in reverse time; sample times are then negative.
    """
    if step_tol <= 0:
        raise ValueError("step_tol must be positive")
    Lc, Lx = F.lattice_c, F.lattice_x
    beta = F.beta_coeff
    c = _lift(c0, Lc)
    x = _lift(x0, Lx)
    t = 0.0
    h = h0
    trace = LeafTrace()
    chart = chart_at(F, c)
    running = 0j
    res_at_poles = [exact_residue(F.omega, k) for k in range(F.d)]
    trace.samples.append((t, reduce_point(c, Lc), reduce_point(x, Lx)))
    trace.charts.append(chart)
    trace.drifts.append(0.0)
    with np.errstate(all="ignore"):
        while t < horizon - 1e-12 and (max_steps is None or trace.steps < max_steps):
            new_chart = chart_at(F, c)
            if new_chart != chart:
                trace.chart_switches += 1
                chart = new_chart
            fun = _field(F, chart, -1.0 if backward else 1.0)
            h = min(h, horizon - t)
            if h < ode.MIN_STEP:
                raise StepCollapseError(f"leaf tracer step collapsed at t={t}", state=(t, c, x))
            y_new, err = ode.dp54_step(fun, t, np.array([c, x]), h)
            if chart == "B":
                # measure the c-error in the primitive W = int omega, not in c itself
                p, _ = _nearest_pole(F, c, res_at_poles)
                if abs(c - p) >= ABSORB_RADIUS:
                    err = err * np.array([abs(1.0 / F.omega.reciprocal(c)), 1.0])
            ratio = float(np.max(np.abs(err))) / (step_tol * h)
            if not np.isfinite(ratio) or not np.all(np.isfinite(y_new)):
                h *= 0.25
                continue
            if ratio > 1.0:
                h = ode.next_step(h, ratio)
                continue
            c1, x1 = complex(y_new[0]), complex(y_new[1])
            if chart == "B":
                p, r = _nearest_pole(F, c, res_at_poles)
                if abs(c - p) < ABSORB_RADIUS:
                    c1 = p
                elif abs(c1 - p) < ABSORB_RADIUS:
                    # the primitive diverges on the compact fibre; stop accruing there
                    trace.absorbed = True
                    c1 = p
                else:
                    running += _chord_integral(F.omega, c, c1, (p, r)) + beta * (x1 - x)
            else:
                running += _chord_integral(F.omega, c, c1) + beta * (x1 - x)
            vel = fun(t + h, y_new)
            speed = float(np.linalg.norm(vel))
            if speed > 0:
                if chart == "A":
                    res = abs(F.omega(c1) * vel[0] + beta * vel[1])
                else:
                    res = abs(vel[0] + beta * F.omega.reciprocal(c1) * vel[1])
                trace.max_residual = max(trace.max_residual, res / speed)
            t += h
            c, x = _wrap(c1, Lc), _wrap(x1, Lx)
            trace.steps += 1
            trace.drift = max(trace.drift, abs(running))
            trace.samples.append((-t if backward else t, reduce_point(c, Lc), reduce_point(x, Lx)))
            trace.charts.append(chart)
            trace.drifts.append(abs(running))
            h = ode.next_step(h, ratio)
    return trace


def write_trace_csv(trace, fh):
    """CSV with header t,c_a,c_b,x_a,x_b,chart,drift."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t", "c_a", "c_b", "x_a", "x_b", "chart", "drift"])
    for (t, c, x), chart, drift in zip(trace.samples, trace.charts, trace.drifts):
        writer.writerow([repr(t), repr(c.a), repr(c.b), repr(x.a), repr(x.b), chart, repr(drift)])


# ---------------------------------------------------------------------------
# normal bundle along C x {z}


def normal_bundle_degree(F, z, grid=8):
    """Degree of the normal bundle restricted to C x {z}.

    The tangency map TC -> N along C x {z} is omega(c) in the chart-A frame,
    so its zeros are the zeros of omega; they are counted by the argument
    principle and the total is the degree.
    """
    if not isinstance(z, TorusPoint):
        z = reduce_point(complex(z), F.lattice_x)
    zeros, poles = count_divisor(F.omega, grid=grid)
    return zeros
