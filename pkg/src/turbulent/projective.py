"""Flat P^1-bundles over an elliptic curve, Riccati transport and developing maps.

A flat bundle is modelled on the universal cover C of the curve: the trivial
bundle C x P^1 with an sl2-valued connection form A(z) dz, glued by
(z, w) ~ (z + 1, rho_a w) ~ (z + tau, rho_b w).  Gluing is compatible with the
connection when A(z + 1) = rho_a A(z) rho_a^-1 (and likewise for tau).

Convention for the connection matrix A = [[a, b], [c, -a]]: horizontal vectors
satisfy Y' = -A Y, so the fibre coordinate w = y1/y2 obeys the Riccati equation

    w' = R(z, w) = -b - 2 a w + c w^2,

and in the chart u = 1/w at infinity, u' = b u^2 + 2 a u - c.  A constant
nilpotent A = [[0, 1], [0, 0]] therefore moves w to w - dz, and a constant
diag(a, -a) multiplies w by exp(-2 a dz).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import contour, ode
from .elliptic import Lattice, wp
from .errors import ChartDegeneracyError, ContourError, ConvergenceError, StepCollapseError

INF = complex(math.inf, 0.0)
DEGENERATE_DET = 1e-14
TRACE_TOL = 1e-12
COMMUTE_TOL = 1e-10
FD_STEP = 1e-5
FD_FINE = 1e-6
FD_AGREE = 1e-7
ZERO_SFF = 1e-12


def is_infinite(w):
    return not cmath.isfinite(complex(w))


# ---------------------------------------------------------------------------
# SL2 / Mobius algebra


@dataclass(frozen=True)
class SL2Element:
    """A 2x2 complex matrix, used either as a Mobius map or as an sl2 element."""

    a: complex
    b: complex
    c: complex
    d: complex

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        return cls(complex(m[0, 0]), complex(m[0, 1]), complex(m[1, 0]), complex(m[1, 1]))

    @classmethod
    def identity(cls):
        return cls(1, 0, 0, 1)

    @property
    def matrix(self):
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    @property
    def det(self):
        return self.a * self.d - self.b * self.c

    @property
    def trace(self):
        return self.a + self.d

    def is_trace_free(self, tol=TRACE_TOL):
        return abs(self.trace) <= tol * max(1.0, float(np.max(np.abs(self.matrix))))

    def normalized(self):
        """Determinant-1 representative of the same Mobius map."""
        det = self.det
        if abs(det) < DEGENERATE_DET:
            raise ValueError("degenerate matrix: determinant is zero")
        return SL2Element.from_matrix(self.matrix / cmath.sqrt(det))

    def __matmul__(self, other):
        return SL2Element.from_matrix(self.matrix @ other.matrix)


def _as_element(m):
    return m if isinstance(m, SL2Element) else SL2Element.from_matrix(m)


def mobius_apply(m, w):
    """(a w + b)/(c w + d), with infinity as the point [1 : 0]."""
    m = _as_element(m)
    if abs(m.det) < DEGENERATE_DET:
        raise ValueError("degenerate matrix: determinant is zero")
    w = complex(w)
    if is_infinite(w):
        return INF if m.c == 0 else m.a / m.c
    den = m.c * w + m.d
    if den == 0:
        return INF
    return (m.a * w + m.b) / den


def compose(m1, m2):
    """The map 'apply m1, then m2'."""
    return _as_element(m2) @ _as_element(m1)


def inverse(m):
    m = _as_element(m)
    if abs(m.det) < DEGENERATE_DET:
        raise ValueError("degenerate matrix: determinant is zero")
    return SL2Element(m.d, -m.b, -m.c, m.a)


def projective_residual(m1, m2):
    """Distance between two matrices as Mobius maps (up to scale)."""
    p = _as_element(m1).normalized().matrix
    q = _as_element(m2).normalized().matrix
    return float(min(np.max(np.abs(p - q)), np.max(np.abs(p + q))))


def killing_form(u, v):
    """K(u, v) = 4 tr(uv) on sl2."""
    u, v = _as_element(u), _as_element(v)
    for name, m in (("u", u), ("v", v)):
        if not m.is_trace_free():
            raise ValueError(f"{name} is not trace-free (trace {m.trace})")
    return complex(4.0 * np.trace(u.matrix @ v.matrix))


def is_nilpotent(v, tol=1e-12):
    v = _as_element(v)
    scale = max(1.0, float(np.max(np.abs(v.matrix)))) ** 2
    return abs(killing_form(v, v)) <= tol * scale


# ---------------------------------------------------------------------------
# bundles


def _riccati(A, w):
    return -A[0, 1] - 2.0 * A[0, 0] * w + A[1, 0] * w * w


def _riccati_u(A, u):
    return A[0, 1] * u * u + 2.0 * A[0, 0] * u - A[1, 0]


@dataclass(frozen=True, eq=False)
class FlatP1Bundle:
    """Gluing maps around 1 and tau plus an optional connection form on the cover.

    ``connection`` maps z to a 2x2 trace-free array (None means A = 0).
    """

    lattice: Lattice
    monodromy_a: SL2Element
    monodromy_b: SL2Element
    connection: Optional[Callable] = None
    theta: Optional[SL2Element] = None

    def __post_init__(self):
        object.__setattr__(self, "monodromy_a", _as_element(self.monodromy_a).normalized())
        object.__setattr__(self, "monodromy_b", _as_element(self.monodromy_b).normalized())
        if self.theta is not None:
            object.__setattr__(self, "theta", _as_element(self.theta))
            if not self.theta.is_trace_free():
                raise ValueError("theta must be trace-free")
        res = self.commutation_residual()
        if res >= COMMUTE_TOL:
            raise ValueError(f"monodromies do not commute (residual {res:.3e}); bundle is not flat")
        if self.connection is not None:
            res = self.compatibility_residual()
            if res > 1e-8:
                raise ValueError(f"connection form is not invariant under the gluing maps (residual {res:.3e})")

    @classmethod
    def trivial(cls, lattice, connection=None):
        return cls(lattice, SL2Element.identity(), SL2Element.identity(), connection)

    @classmethod
    def constant(cls, lattice, matrix, monodromy_a=None, monodromy_b=None):
        """Bundle with a constant connection matrix (and gluing maps commuting with it)."""
        A = np.asarray(matrix, dtype=complex)
        if abs(np.trace(A)) > TRACE_TOL * max(1.0, float(np.max(np.abs(A)))):
            raise ValueError("connection matrix must be trace-free")
        ident = SL2Element.identity()
        return cls(lattice, monodromy_a or ident, monodromy_b or ident, lambda z: A)

    def commutation_residual(self):
        ab = compose(self.monodromy_b, self.monodromy_a)
        ba = compose(self.monodromy_a, self.monodromy_b)
        return projective_residual(ab, ba)

    def compatibility_residual(self, n=8):
        rng = np.random.default_rng(0)
        L = self.lattice
        worst = 0.0
        for rho, shift in ((self.monodromy_a, 1.0), (self.monodromy_b, L.tau)):
            R = rho.matrix
            Rinv = np.linalg.inv(R)
            for _ in range(n):
                z = complex(rng.random(2) @ np.array([1.0, L.tau]))
                lhs = np.asarray(self.connection(z + shift), dtype=complex)
                rhs = R @ np.asarray(self.connection(z), dtype=complex) @ Rinv
                worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        return worst

    def form(self, z):
        if self.connection is None:
            return np.zeros((2, 2), dtype=complex)
        return np.asarray(self.connection(z), dtype=complex)

    def gluing(self, m, n):
        """Mobius map glueing the fibre over z to the fibre over z + m + n tau."""
        out = SL2Element.identity()
        for rho, k in ((self.monodromy_a, m), (self.monodromy_b, n)):
            step = rho if k >= 0 else inverse(rho)
            for _ in range(abs(k)):
                out = compose(out, step)
        return out


# ---------------------------------------------------------------------------
# transport


def _segment_fields(bundle, z0, dz):
    def fw(s, y):
        A = bundle.form(z0 + s * dz)
        return np.array([dz * _riccati(A, y[0])])

    def fu(s, y):
        A = bundle.form(z0 + s * dz)
        return np.array([dz * _riccati_u(A, y[0])])

    return fw, fu


def _transport_segment(bundle, z0, z1, w0, tol):
    dz = z1 - z0
    if dz == 0:
        return w0
    fw, fu = _segment_fields(bundle, z0, dz)
    chart = "u" if (is_infinite(w0) or abs(w0) > 1.0) else "w"
    y = 0j if is_infinite(w0) else (1.0 / w0 if chart == "u" else complex(w0))
    s, h = 0.0, 0.125
    scale = tol * abs(dz)
    while s < 1.0 - 1e-15:
        h = min(h, 1.0 - s)
        if h < ode.MIN_STEP:
            raise StepCollapseError(f"transport step collapsed at z={z0 + s * dz}", state=(s, chart, y))
        y_new, err = ode.dp54_step(fw if chart == "w" else fu, s, np.array([y]), h)
        ratio = float(abs(err[0])) / (scale * h)
        if not np.isfinite(ratio):
            h *= 0.25
            continue
        if ratio <= 1.0:
            s += h
            y = complex(y_new[0])
            if abs(y) > 1.0:
                # flip chart so the coordinate stays bounded
                chart = "u" if chart == "w" else "w"
                y = 1.0 / y
        h = ode.next_step(h, ratio)
    if chart == "w":
        return y
    return INF if y == 0 else 1.0 / y


def riccati_transport(bundle, path, w0, tol=1e-10):
    """Parallel transport of the fibre point w0 along a polyline on the cover.

    Local error is at most ``tol`` per unit path length, in whichever of the
    charts w, 1/w is active (the chart flips whenever the coordinate exceeds 1
    in modulus).
    """
    path = [complex(p) for p in path]
    if len(path) < 2:
        raise ValueError("path needs at least two points")
    if bundle.connection is None:
        return complex(w0)
    w = complex(w0)
    for z0, z1 in zip(path[:-1], path[1:]):
        w = _transport_segment(bundle, z0, z1, w, tol)
    return w


def transport_matrix(bundle, path, tol=1e-12):
    """Fundamental solution of Y' = -A Y along the path (the Mobius map of transport)."""
    path = [complex(p) for p in path]
    Y = np.eye(2, dtype=complex).ravel()
    if bundle.connection is None:
        return SL2Element.identity()
    for z0, z1 in zip(path[:-1], path[1:]):
        dz = z1 - z0
        if dz == 0:
            continue

        def fun(s, y, z0=z0, dz=dz):
            return (-dz * bundle.form(z0 + s * dz) @ y.reshape(2, 2)).ravel()

        Y = ode.integrate(fun, 0.0, Y, 1.0, tol)
    return SL2Element.from_matrix(Y.reshape(2, 2))


def holonomy(bundle, z0, which="a", tol=1e-12):
    """Mobius map gamma(z + period) = H gamma(z) for developing maps based at z0.

    H is the gluing map followed by transport from z0 + period back to z0.
    """
    period = 1.0 if which == "a" else bundle.lattice.tau
    rho = bundle.monodromy_a if which == "a" else bundle.monodromy_b
    back = transport_matrix(bundle, [z0 + period, z0], tol)
    return compose(rho, back)


def commutator_holonomy(bundle, z0, tol=1e-12):
    """Holonomy around the loop 1, tau, -1, -tau; the identity for a flat bundle."""
    ha = holonomy(bundle, z0, "a", tol)
    hb = holonomy(bundle, z0, "b", tol)
    return compose(compose(compose(ha, hb), inverse(ha)), inverse(hb))


# ---------------------------------------------------------------------------
# sections


@dataclass(frozen=True, eq=False)
class EquivariantSection:
    """A meromorphic map s: C -> P^1 with s(z+1) = rho_a s(z), s(z+tau) = rho_b s(z).

    ``func`` accepts complex arrays and returns complex values, inf at poles.
    ``poles`` lists the pole locations in one fundamental domain as
    (a, b, order) in lattice coordinates; it guides the contour refinement.
    """

    func: Callable
    monodromy_a: SL2Element
    monodromy_b: SL2Element
    name: str = "custom"
    poles: tuple = field(default_factory=tuple)

    def __call__(self, z):
        out = self.func(np.asarray(z, dtype=complex))
        return complex(out) if np.ndim(out) == 0 else out

    def equivariance_residual(self, lattice, n=20, seed=0):
        """max chordal distance between s(z + w) and rho_w s(z) at random z."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for rho, shift in ((self.monodromy_a, 1.0), (self.monodromy_b, lattice.tau)):
            for _ in range(n):
                z = complex(rng.random(2) @ np.array([1.0, lattice.tau]))
                worst = max(worst, chordal_distance(self(z + shift), mobius_apply(rho, self(z))))
        return worst


def chordal_distance(w1, w2):
    """Chordal distance on the Riemann sphere (infinity allowed)."""
    i1, i2 = is_infinite(w1), is_infinite(w2)
    if i1 and i2:
        return 0.0
    if i1 or i2:
        w = w2 if i1 else w1
        return 2.0 / math.sqrt(1.0 + abs(w) ** 2)
    return 2.0 * abs(w1 - w2) / math.sqrt((1.0 + abs(w1) ** 2) * (1.0 + abs(w2) ** 2))


def constant_section(value):
    value = complex(value)
    return EquivariantSection(
        lambda z: np.full(np.shape(z), value, dtype=complex) if np.ndim(z) else value,
        SL2Element.identity(), SL2Element.identity(), "constant",
    )


def identity_section(lattice):
    """s(z) = z, glued by the translations w -> w + 1 and w -> w + tau."""
    return EquivariantSection(
        lambda z: z, SL2Element(1, 1, 0, 1), SL2Element(1, lattice.tau, 0, 1), "identity",
    )


def wp_section(lattice):
    """s = wp on the trivial bundle; infinity at the lattice points."""
    def func(z):
        z = np.asarray(z, dtype=complex)
        near = lattice.distance_to_lattice(z) < 1e-8
        safe = np.where(near, 0.5, z)
        out = np.where(near, INF, wp(safe, lattice))
        return complex(out) if np.ndim(out) == 0 else out

    ident = SL2Element.identity()
    return EquivariantSection(func, ident, ident, "wp", poles=((0.0, 0.0, 2),))


def quotient_section(form):
    """The elliptic function underlying a meromorphic one-form, as a section of the trivial bundle."""
    lattice = form.lattice
    lifts = form._x

    def func(z):
        z = np.asarray(z, dtype=complex)
        dist = np.min(lattice.distance_to_lattice(z[..., None] - lifts), axis=-1)
        near = dist < 1e-8
        with np.errstate(all="ignore"):
            out = np.where(near, INF, form(np.where(near, 0.0, z) if np.ndim(z) else z))
        return complex(out) if np.ndim(out) == 0 else out

    ident = SL2Element.identity()
    poles = tuple((p.a, p.b, 1) for p in form.pair.x)
    return EquivariantSection(func, ident, ident, "quotient", poles=poles)


@dataclass(frozen=True, eq=False)
class ProjectiveTriple:
    bundle: FlatP1Bundle
    section: EquivariantSection
    theta: Optional[SL2Element] = None

    def __post_init__(self):
        b, s = self.bundle, self.section
        if projective_residual(b.monodromy_a, s.monodromy_a) > 1e-10 or projective_residual(b.monodromy_b, s.monodromy_b) > 1e-10:
            raise ValueError("section monodromy does not match the bundle gluing maps")
        if self.theta is not None:
            object.__setattr__(self, "theta", _as_element(self.theta))
            if not self.theta.is_trace_free():
                raise ValueError("theta must be trace-free")


# ---------------------------------------------------------------------------
# second fundamental form


def _chart_values(section, z, chart):
    s = np.asarray(section.func(np.asarray(z, dtype=complex)), dtype=complex)
    if chart == "w":
        return s
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(np.isfinite(s), 1.0 / s, 0.0)


def _central(section, z, chart, h):
    return (_chart_values(section, z + h, chart) - _chart_values(section, z - h, chart)) / (2 * h)


def _richardson(section, z, chart, h):
    """Central differences at h and h/2 with the h^2 error term eliminated."""
    return (4.0 * _central(section, z, chart, 0.5 * h) - _central(section, z, chart, h)) / 3.0


def _sff_values(triple, z, chart):
    """SFF in the given chart ('w' or 'u'), vectorized over z."""
    z = np.asarray(z, dtype=complex)
    charts = np.broadcast_to(np.asarray(chart), z.shape)
    out = np.empty(z.shape, dtype=complex)
    for ch in ("w", "u"):
        mask = charts == ch
        if not mask.any():
            continue
        zs = z[mask]
        coarse = _richardson(triple.section, zs, ch, FD_STEP)
        deriv = _richardson(triple.section, zs, ch, 2.0 * FD_FINE)
        if not (np.all(np.isfinite(coarse)) and np.all(np.isfinite(deriv))):
            raise ChartDegeneracyError("section crosses infinity inside the difference stencil")
        gap = np.abs(coarse - deriv)
        if np.any(gap > FD_AGREE * np.maximum(1.0, np.abs(deriv))):
            raise ConvergenceError(f"finite-difference derivative unstable (gap {float(np.max(gap)):.2e})")
        val = _chart_values(triple.section, zs, ch)
        if triple.bundle.connection is None:
            horiz = np.zeros_like(val)
        else:
            forms = [triple.bundle.form(zz) for zz in zs]
            rhs = _riccati if ch == "w" else _riccati_u
            horiz = np.array([rhs(A, v) for A, v in zip(forms, val)])
        out[mask] = deriv - horiz
    return out


def second_fundamental_form(triple, z):
    """s'(z) - R(z, s(z)) in the chart w when |s(z)| <= 1, else u' - R_u in u = 1/w.

    The two chart values differ by the nonvanishing factor -1/w^2, so their
    zero sets agree.
    """
    z = complex(z)
    s = triple.section(z)
    chart = "w" if (not is_infinite(s) and abs(s) <= 1.0) else "u"
    return complex(_sff_values(triple, np.array([z]), chart)[0])


def _poles_in(section, cell):
    return sum(p[2] for p in section.poles
               if any(cell.contains(p[0] + i, p[1] + j) for i in (0, 1) for j in (0, 1)))


def _cell_charts(section, cells, tau):
    """Per-cell chart in which the section is holomorphic, or None where a split is needed.

    The section's own winding around a cell is zeros - poles; with the pole
    order known, a cell free of zeros may use u = 1/s and a cell free of poles
    may use w.  Where both charts work the one with the smaller values wins.
    """
    wind = contour.cell_windings(lambda z: section.func(z), cells, tau)
    out = []
    for cell, k in zip(cells, wind):
        poles = _poles_in(section, cell)
        zeros = k + poles
        if poles and zeros:
            out.append(None)
        elif poles:
            out.append("u")
        elif zeros:
            out.append("w")
        else:
            centre = 0.5 * (cell.a0 + cell.a1) + 0.5 * (cell.b0 + cell.b1) * tau
            out.append("w" if abs(section(centre)) <= 1.0 else "u")
    return out


def _quarter(cell):
    am = 0.5 * (cell.a0 + cell.a1)
    bm = 0.5 * (cell.b0 + cell.b1)
    return [contour.Cell(cell.a0, am, cell.b0, bm), contour.Cell(am, cell.a1, cell.b0, bm),
            contour.Cell(cell.a0, am, bm, cell.b1), contour.Cell(am, cell.a1, bm, cell.b1)]


def sff_vanishing_count(triple, lattice, grid=8, seed=0):
    """Zeros of the second fundamental form over one fundamental domain.

    Each cell uses a chart in which the section is holomorphic, so the SFF is
    holomorphic there and its winding counts zeros.  Cells containing a pole
    together with a zero of the section are quartered until that is resolved.
    """
    tau = lattice.tau
    probe = np.array([(i + 0.37) / 8 + (j + 0.61) / 8 * tau for i in range(8) for j in range(8)])
    probe_charts = ["w" if (np.isfinite(v) and abs(v) <= 1.0) else "u" for v in triple.section(probe)]
    if np.max(np.abs(_sff_values(triple, probe, np.array(probe_charts)))) < ZERO_SFF:
        raise ValueError("second fundamental form vanishes identically (section is horizontal)")
    pts = [(p[0], p[1]) for p in triple.section.poles]
    offset = contour.choose_offset(pts, grid, tau, seed=seed) if pts else tuple(np.random.default_rng(seed).uniform(0, 1.0 / grid, 2))
    pending = contour.build_cells(grid, offset, pts, tau)
    cells, charts = [], []
    while pending:
        for cell, chart in zip(pending, _cell_charts(triple.section, pending, tau)):
            if chart is not None:
                cells.append(cell)
                charts.append(chart)
        pending = [q for cell, chart in zip(pending, _cell_charts(triple.section, pending, tau)) if chart is None
                   for q in _quarter(cell)]
        if pending and pending[0].a1 - pending[0].a0 < 1e-6:
            raise ContourError("could not separate a pole of the section from its zeros")
    chart_arr = np.array(charts)
    wind = contour.cell_windings(lambda z, ci: _sff_values(triple, z, chart_arr[ci]), cells, tau, per_cell=True)
    if np.any(wind < 0):
        raise ContourError("negative winding of a holomorphic chart value; chart selection failed")
    return int(np.sum(wind))


# ---------------------------------------------------------------------------
# developing map


def develop(triple, path, tol=1e-10):
    """gamma(z) for z = path[-1]: s(z) transported back to the fibre over path[0]."""
    path = [complex(p) for p in path]
    s = triple.section(path[-1])
    if len(path) < 2 or triple.bundle.connection is None:
        return s
    return riccati_transport(triple.bundle, path[::-1], s, tol)


def flat_quadratic_sections_dim(deg):
    """Dimension of flat sections of a line bundle of degree ``deg`` on the curve.

    A line bundle admitting a flat connection has degree zero, and then its
    flat sections are the constants of the trivial bundle; nothing else
    carries a nonzero flat section.
    """
    deg = int(deg)
    return 1 if deg == 0 else 0


# ---------------------------------------------------------------------------
# JSON: {"tau": [re, im], "monodromy_a": [[[re, im], [re, im]], [[re, im], [re, im]]],
#        "monodromy_b": ..., "theta": optional, "connection": optional constant matrix,
#        "section": {"name": "constant" | "identity" | "wp", "value": [re, im]}}


def _matrix_from_json(m):
    return np.array([[complex(*e) for e in row] for row in m], dtype=complex)


def _matrix_to_json(m):
    m = m.matrix if isinstance(m, SL2Element) else np.asarray(m)
    return [[[complex(e).real, complex(e).imag] for e in row] for row in m]


def triple_from_dict(doc):
    lattice = Lattice(complex(*doc.get("tau", [0.0, 1.0])))
    ident = [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]
    ma = SL2Element.from_matrix(_matrix_from_json(doc.get("monodromy_a", ident)))
    mb = SL2Element.from_matrix(_matrix_from_json(doc.get("monodromy_b", ident)))
    theta = SL2Element.from_matrix(_matrix_from_json(doc["theta"])) if "theta" in doc else None
    conn = None
    if "connection" in doc:
        A = _matrix_from_json(doc["connection"])
        conn = lambda z, A=A: A  # noqa: E731
    bundle = FlatP1Bundle(lattice, ma, mb, conn, theta)
    sec = doc.get("section", {"name": "wp"})
    name = sec.get("name")
    if name == "constant":
        section = constant_section(complex(*sec.get("value", [0.0, 0.0])))
    elif name == "identity":
        section = identity_section(lattice)
    elif name == "wp":
        section = wp_section(lattice)
    else:
        raise ValueError(f"unknown section builtin {name!r}; expected constant, identity or wp")
    return ProjectiveTriple(bundle, section, theta), lattice
