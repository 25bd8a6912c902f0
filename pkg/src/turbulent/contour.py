"""Argument-principle zero/pole counting over a fundamental parallelogram.

The parallelogram [oa, oa+1) x [ob, ob+1) (coordinates w.r.t. 1 and tau) is
cut into grid x grid cells; cells holding two or more known special points
are split further so that every leaf cell holds at most one.  The winding
number of the function around each leaf cell is obtained by tracking its
phase along the cell edges, bisecting any segment whose phase jumps by more
than ``MAX_PHASE_STEP``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContourError

MAX_PHASE_STEP = 0.5
EDGE_SAMPLES = 8
MAX_BISECTIONS = 60
CLEARANCE = 1e-4
SHIFT_ATTEMPTS = 16
_SPLITS = (0.5, 0.4, 0.6, 0.3, 0.7, 0.45, 0.55, 0.35, 0.65, 0.25, 0.75)


@dataclass(frozen=True)
class Cell:
    a0: float
    a1: float
    b0: float
    b1: float

    def corners(self):
        return [(self.a0, self.b0), (self.a1, self.b0), (self.a1, self.b1), (self.a0, self.b1)]

    def contains(self, a, b):
        return (a >= self.a0) & (a < self.a1) & (b >= self.b0) & (b < self.b1)


def _line_distance_a(da, tau):
    return np.abs(da) * tau.imag / abs(tau)


def _line_distance_b(db, tau):
    return np.abs(db) * tau.imag


def _clear_of_grid(pa, pb, offset, grid, tau, clearance):
    ka = (pa - offset[0]) * grid
    kb = (pb - offset[1]) * grid
    da = np.abs(ka - np.round(ka)) / grid
    db = np.abs(kb - np.round(kb)) / grid
    return bool(np.all(_line_distance_a(da, tau) > clearance) and np.all(_line_distance_b(db, tau) > clearance))


def choose_offset(points_ab, grid, tau, seed=0, clearance=CLEARANCE, attempts=SHIFT_ATTEMPTS):
    """Random small translation of the grid keeping every point clear of its lines."""
    pa = np.array([p[0] for p in points_ab], dtype=float)
    pb = np.array([p[1] for p in points_ab], dtype=float)
    rng = np.random.default_rng(seed)
    for _ in range(attempts):
        offset = tuple(rng.uniform(0.0, 1.0 / grid, size=2))
        if _clear_of_grid(pa, pb, offset, grid, tau, clearance):
            return offset
    raise ContourError(f"could not shift a {grid}x{grid} contour grid clear of the divisor after {attempts} attempts")


def _wrap_into(points_ab, offset):
    """Translate points (mod 1) into the window [oa, oa+1) x [ob, ob+1)."""
    out = []
    for a, b in points_ab:
        out.append((offset[0] + (a - offset[0]) % 1.0, offset[1] + (b - offset[1]) % 1.0))
    return np.array(out, dtype=float).reshape(-1, 2)


def _split(cell, pts, tau, clearance, depth):
    inside = pts[cell.contains(pts[:, 0], pts[:, 1])]
    if len(inside) < 2:
        return [cell]
    if depth > 40:
        raise ContourError("special points too close together to separate into cells")
    for fa in _SPLITS:
        am = cell.a0 + fa * (cell.a1 - cell.a0)
        if np.all(_line_distance_a(inside[:, 0] - am, tau) > clearance):
            break
    else:
        raise ContourError("no clear vertical split line")
    for fb in _SPLITS:
        bm = cell.b0 + fb * (cell.b1 - cell.b0)
        if np.all(_line_distance_b(inside[:, 1] - bm, tau) > clearance):
            break
    else:
        raise ContourError("no clear horizontal split line")
    out = []
    for sub in (Cell(cell.a0, am, cell.b0, bm), Cell(am, cell.a1, cell.b0, bm),
                Cell(cell.a0, am, bm, cell.b1), Cell(am, cell.a1, bm, cell.b1)):
        out.extend(_split(sub, inside, tau, clearance, depth + 1))
    return out


def build_cells(grid, offset, points_ab, tau, clearance=CLEARANCE):
    """Leaf cells covering the shifted parallelogram, at most one point per cell."""
    pts = _wrap_into(points_ab, offset)
    h = 1.0 / grid
    cells = []
    for i in range(grid):
        for j in range(grid):
            base = Cell(offset[0] + i * h, offset[0] + (i + 1) * h, offset[1] + j * h, offset[1] + (j + 1) * h)
            cells.extend(_split(base, pts, tau, clearance, 0))
    return cells


def phase_changes(fun, za, zb, samples=EDGE_SAMPLES):
    """Total continuous change of arg(fun) along each straight segment za[k] -> zb[k].

    ``fun`` maps (z, edge_index) arrays to complex values.
    """
    za = np.asarray(za, dtype=complex)
    zb = np.asarray(zb, dtype=complex)
    n_edges = za.size
    s = np.linspace(0.0, 1.0, samples + 1)
    idx = np.repeat(np.arange(n_edges), samples + 1)
    pts = (za[:, None] + (zb - za)[:, None] * s[None, :]).ravel()
    vals = fun(pts, idx).reshape(n_edges, samples + 1)
    pts = pts.reshape(n_edges, samples + 1)
    seg_a = pts[:, :-1].ravel()
    seg_b = pts[:, 1:].ravel()
    fa = vals[:, :-1].ravel()
    fb = vals[:, 1:].ravel()
    owner = np.repeat(np.arange(n_edges), samples)
    total = np.zeros(n_edges)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (seg_a + seg_b)
        fm = fun(mid, owner)
        for f in (fa, fb, fm):
            if np.any(f == 0) or not np.all(np.isfinite(f)):
                raise ContourError("function vanishes or blows up on the contour")
        r1, r2 = fm / fa, fb / fm
        d1, d2 = np.angle(r1), np.angle(r2)
        # both halves must show small phase and log-modulus changes; checking the
        # midpoint catches a singularity placed symmetrically between the endpoints
        bad = np.zeros(len(seg_a), dtype=bool)
        for r, d in ((r1, d1), (r2, d2)):
            bad |= (np.abs(d) > MAX_PHASE_STEP) | (np.abs(np.log(np.abs(r))) > MAX_PHASE_STEP)
        np.add.at(total, owner[~bad], d1[~bad] + d2[~bad])
        if not bad.any():
            return total
        seg_a, seg_b, fa, fb, fm, mid, owner = (v[bad] for v in (seg_a, seg_b, fa, fb, fm, mid, owner))
        seg_a, seg_b = np.concatenate([seg_a, mid]), np.concatenate([mid, seg_b])
        fa, fb = np.concatenate([fa, fm]), np.concatenate([fm, fb])
        owner = np.concatenate([owner, owner])
    raise ContourError("phase tracking did not resolve within the bisection limit")


def cell_windings(fun, cells, tau, per_cell=False):
    """Winding number of ``fun`` around each cell.

    With ``per_cell`` the evaluator receives the cell index (charts may differ
    between cells) and edges are not shared; otherwise ``fun`` takes z only and
    coincident edges of neighbouring cells are evaluated once.
    """
    edge_index = {}
    za, zb, owners = [], [], []
    cell_edges = []
    for ci, cell in enumerate(cells):
        cs = cell.corners()
        signed = []
        for k in range(4):
            p, q = cs[k], cs[(k + 1) % 4]
            if per_cell:
                key = (ci, p, q)
                sign = 1.0
            else:
                p_r = (round(p[0], 12), round(p[1], 12))
                q_r = (round(q[0], 12), round(q[1], 12))
                key, sign = ((p_r, q_r), 1.0) if p_r <= q_r else ((q_r, p_r), -1.0)
                if sign < 0:
                    p, q = q, p
            if key not in edge_index:
                edge_index[key] = len(za)
                za.append(p[0] + p[1] * tau)
                zb.append(q[0] + q[1] * tau)
                owners.append(ci)
            signed.append((edge_index[key], sign))
        cell_edges.append(signed)
    owners = np.array(owners)
    if per_cell:
        changes = phase_changes(lambda z, e: fun(z, owners[e]), za, zb)
    else:
        changes = phase_changes(lambda z, e: fun(z), za, zb)
    windings = []
    for signed in cell_edges:
        w = sum(sign * changes[e] for e, sign in signed) / (2 * math.pi)
        k = round(w)
        if abs(w - k) > 0.1:
            raise ContourError(f"non-integral winding {w:.4f}")
        windings.append(int(k))
    return np.array(windings, dtype=int)
