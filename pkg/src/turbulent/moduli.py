"""Dimension bookkeeping for the space of turbulent data and its obstruction.

A point of the moduli space is a divisor pair on the Abel locus together
with the scale of omega and the coefficient of beta, modulo simultaneous
rescaling.  Its dimension 2d is compared with the bound d + 7 on the data
(bundle class, connection, deformation, section) that a transversely
projective structure would have to supply.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .divisor_forms import DivisorPair
from .errors import RankConditioningError

RANK_THRESHOLD = 1e-6
RANK_GAP = 10.0


@dataclass(frozen=True)
class ModuliPoint:
    pair: DivisorPair
    scale: complex
    beta_coeff: complex

    def __post_init__(self):
        if complex(self.scale) == 0 or complex(self.beta_coeff) == 0:
            raise ValueError("scale and beta_coeff must be nonzero")
        object.__setattr__(self, "scale", complex(self.scale))
        object.__setattr__(self, "beta_coeff", complex(self.beta_coeff))

    @property
    def gauge_fixed(self):
        return self.beta_coeff == 1

    def gauge_fix(self):
        """Representative with beta_coeff = 1 (rescale both by 1/beta)."""
        return ModuliPoint(self.pair, self.scale / self.beta_coeff, 1.0)

    def equivalent(self, other, tol=1e-12):
        a, b = self.gauge_fix(), other.gauge_fix()
        L = a.pair.lattice
        same = all(L.torus_distance(p, q) < tol for p, q in zip(a.pair.x + a.pair.y, b.pair.x + b.pair.y))
        return same and abs(a.scale - b.scale) < tol * max(1.0, abs(a.scale))


def moduli_dimension(d):
    """2d: (2d - 1) for pairs on the Abel locus plus 1 for the scale modulo rescaling."""
    if d < 2:
        raise ValueError("d must be at least 2")
    return abel_locus_dimension(d) + 1


def abel_locus_dimension(d):
    return 2 * d - 1


QUADRUPLE_SUMMANDS = ("bundle_class", "connection", "deformation", "section")


def quadruple_summands(d):
    """Upper bounds on the four pieces of data: 1, 3, 3 and d."""
    if d < 1:
        raise ValueError("d must be at least 1")
    return {"bundle_class": 1, "connection": 3, "deformation": 3, "section": d}


def quadruple_bound(d):
    return sum(quadruple_summands(d).values())


@dataclass(frozen=True)
class DimensionReport:
    d: int
    dim_moduli: int
    dim_quadruples_bound: int
    obstructed: bool
    margin: int

    def to_dict(self):
        return asdict(self)


def obstruction_report(d):
    """Compare 2d with d + 7; obstructed when the moduli dimension is strictly larger."""
    dim = moduli_dimension(d)
    bound = quadruple_bound(d)
    return DimensionReport(d, dim, bound, bound < dim, dim - bound)


def abel_constraint(pair_vector, d, tau):
    """sum(x) - sum(y) for the complex coordinate vector (x_1..x_d, y_1..y_d)."""
    return np.array([np.sum(pair_vector[:d]) - np.sum(pair_vector[d:])])


def numerical_rank(jac, threshold=RANK_THRESHOLD, gap=RANK_GAP):
    """Count singular values above threshold * largest; insist on a clear gap."""
    sv = np.linalg.svd(np.atleast_2d(jac), compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    keep = sv > threshold * sv[0]
    rank = int(np.sum(keep))
    if rank < sv.size and sv[rank] > 0 and sv[rank - 1] < gap * sv[rank]:
        raise RankConditioningError(f"no clear singular-value gap: {sv[rank - 1]:.3e} vs {sv[rank]:.3e}")
    return rank


def abel_constraint_rank(pair, h=1e-5, constraint=None):
    """Complex rank of the finite-difference Jacobian of the Abel constraint.

    Rank 1 means the constraint removes one complex dimension from the 2d
    parameters of the pair.
    """
    if not 1e-7 <= h <= 1e-3:
        raise ValueError("h must lie in [1e-7, 1e-3]")
    L = pair.lattice
    d = pair.d
    fun = constraint or (lambda v: abel_constraint(v, d, L.tau))
    base = np.array([L.lift(p) for p in pair.x + pair.y], dtype=complex)
    cols = []
    for k in range(2 * d):
        e = np.zeros(2 * d, dtype=complex)
        e[k] = h
        cols.append((np.asarray(fun(base + e)) - np.asarray(fun(base - e))) / (2 * h))
    return numerical_rank(np.array(cols).T)
