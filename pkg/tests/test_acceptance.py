"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import cmath
import time

import numpy as np
import pytest

from turbulent.divisor_forms import (
    DivisorPair,
    build_one_form,
    count_divisor,
    exact_residue,
    residue_sum,
    sample_divisor_pair,
)
from turbulent.elliptic import Lattice, TorusPoint, identity_residuals
from turbulent.foliation import build_turbulent, kernel_residual, line_field, tangency, trace_leaf
from turbulent.moduli import abel_constraint_rank, moduli_dimension, obstruction_report, quadruple_bound
from turbulent.projective import (
    FlatP1Bundle,
    ProjectiveTriple,
    chordal_distance,
    develop,
    flat_quadratic_sections_dim,
    riccati_transport,
    sff_vanishing_count,
    wp_section,
)

import oracles

DEGREES = (2, 3, 5, 8)
SAMPLES = 50
TAU = 0.3 + 1.1j


def report(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def sampled_forms():
    L = Lattice(TAU)
    return [(d, seed, build_one_form(sample_divisor_pair(d, L, seed))) for d in DEGREES for seed in range(SAMPLES)]


def _perturbed(pair):
    y = list(pair.y)
    y[-1] = TorusPoint.wrap(y[-1].a + 1e-3, y[-1].b)
    return DivisorPair(pair.x, tuple(y), pair.lattice)


def test_criterion_1_abel_equivalence(capsys):
    t0 = time.perf_counter()
    L = Lattice(TAU)
    worst_on, least_off = 0.0, np.inf
    for d in DEGREES:
        for seed in range(SAMPLES):
            pair = sample_divisor_pair(d, L, seed)
            worst_on = max(worst_on, build_one_form(pair).periodicity_residual())
            off = build_one_form(_perturbed(pair), check_abel=False)
            least_off = min(least_off, off.periodicity_residual())
    elapsed = time.perf_counter() - t0
    ok = worst_on < 1e-9 and least_off > 1e-5 and elapsed < 30
    report(capsys, 1, "Abel locus <-> periodic one-form", ok,
           f"max on-locus residual {worst_on:.2e} (<1e-9), min off-locus residual {least_off:.2e} (>1e-5), {elapsed:.1f}s")


def test_criterion_2_divisor_recovery(capsys, sampled_forms):
    t0 = time.perf_counter()
    failures = []
    for d, seed, w in sampled_forms:
        for grid in (8, 16):
            counts = count_divisor(w, grid=grid)
            if counts != (d, d):
                failures.append((d, seed, grid, counts))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 60
    report(capsys, 2, "count_divisor = (d, d), stable under grid doubling", ok,
           f"{len(sampled_forms)} forms x grids 8,16, failures {failures[:3]}, {elapsed:.1f}s")


def test_criterion_3_identity_suite(capsys):
    t0 = time.perf_counter()
    worst = {"wp_ode": 0.0, "legendre": 0.0, "sigma_quasi_period": 0.0}
    for tau in (1j, 2j, 0.3 + 1.1j):
        res = identity_residuals(Lattice(tau), n=100, seed=0)
        for key in worst:
            worst[key] = max(worst[key], res[key])
    elapsed = time.perf_counter() - t0
    ok = worst["wp_ode"] < 1e-9 and worst["legendre"] < 1e-12 and worst["sigma_quasi_period"] < 1e-9 and elapsed < 10
    report(capsys, 3, "elliptic identity suite", ok,
           f"wp ODE {worst['wp_ode']:.2e}, Legendre {worst['legendre']:.2e}, sigma quasi-period "
           f"{worst['sigma_quasi_period']:.2e}, {elapsed:.1f}s")


def test_criterion_4_residue_theorem(capsys, sampled_forms):
    worst = max(abs(residue_sum(w)) for _, _, w in sampled_forms)
    report(capsys, 4, "sum of residues vanishes", worst < 1e-8,
           f"max |sum| {worst:.2e} over {len(sampled_forms)} forms (<1e-8)")


def test_criterion_5_foliation_structure(capsys):
    L = Lattice(TAU)
    LX = Lattice(0.2 + 1.3j)
    rng = np.random.default_rng(0)
    wrong = 0
    for seed in range(20):
        d = DEGREES[seed % len(DEGREES)]
        beta = complex(*rng.normal(size=2))
        F = build_turbulent(build_one_form(sample_divisor_pair(d, L, seed)), beta, LX)
        wrong += sum(tangency(F, y) != "horizontal" for y in F.omega.pair.y)
        wrong += sum(tangency(F, x) != "vertical" for x in F.omega.pair.x)
    F = build_turbulent(build_one_form(sample_divisor_pair(5, L, 11)), 0.7 - 0.4j, LX)
    worst = 0.0
    for a, b in rng.random((10_000, 2)):
        c = a + b * L.tau
        worst = max(worst, kernel_residual(F, c, line_field(F, c)))
    ok = wrong == 0 and worst < 1e-12
    report(capsys, 5, "tangency dichotomy and kernel residual", ok,
           f"misclassified divisor points {wrong}, max kernel residual {worst:.2e} at 1e4 points (<1e-12)")


def test_criterion_6_leaf_dynamics(capsys):
    t0 = time.perf_counter()
    L = Lattice(1j)
    x0 = TorusPoint(0.3, 0.3)

    # traces started on compact fibres stay there over horizon 200
    F = build_turbulent(build_one_form(sample_divisor_pair(2, L, 0)), 1.0, L)
    excursion = 0.0
    for p in F.omega.pair.x:
        tr = trace_leaf(F, p, x0, horizon=200.0)
        excursion = max(excursion, tr.max_c_excursion(L, p))

    # first-integral drift over 1000 accepted steps at step_tol 1e-10
    drift = 0.0
    for seed in range(3):
        Fs = build_turbulent(build_one_form(sample_divisor_pair(2, L, seed)), 1.0, L)
        tr = trace_leaf(Fs, TorusPoint(0.123, 0.456), x0, horizon=1e9, step_tol=1e-10, max_steps=1000)
        drift = max(drift, tr.drift)

    # generic trace approaching both compact fibres (finite-horizon proxy)
    pair = sample_divisor_pair(2, L, 3)
    w = build_one_form(pair)
    w = w.scaled(0.01 / abs(exact_residue(w, 0)))
    Fa = build_turbulent(w, cmath.exp(1j), L)
    tr = trace_leaf(Fa, TorusPoint(0.123, 0.456), x0, horizon=200.0, step_tol=1e-8)
    distances = [tr.c_distance(L, p) for p in pair.x]
    elapsed = time.perf_counter() - t0
    ok = excursion < 1e-6 and drift < 1e-6 and max(distances) < 0.05 and elapsed < 120
    report(capsys, 6, "leaf dynamics", ok,
           f"pole-fibre excursion {excursion:.2e} (<1e-6), drift per 1e3 steps {drift:.2e} (<1e-6), "
           f"closest approach to compact fibres {distances[0]:.4f}, {distances[1]:.4f} (<0.05), {elapsed:.1f}s")


def test_criterion_7_dimension_ledger(capsys):
    t0 = time.perf_counter()
    dims_ok = all(moduli_dimension(d) == 2 * d and quadruple_bound(d) == d + 7 for d in range(2, 100))
    first = next(d for d in range(2, 100) if obstruction_report(d).obstructed)
    monotone = all(obstruction_report(d).obstructed == (d >= 8) for d in range(2, 100))
    L = Lattice(TAU)
    ranks = {abel_constraint_rank(sample_divisor_pair(d, L, seed)) for d in (2, 8) for seed in range(20)}
    elapsed = time.perf_counter() - t0
    ok = dims_ok and first == 8 and monotone and ranks == {1} and elapsed < 10
    report(capsys, 7, "dimension count and obstruction threshold", ok,
           f"dim = 2d and bound = d+7: {dims_ok}, first obstructed d = {first}, Abel ranks {sorted(ranks)}, {elapsed:.1f}s")


def test_criterion_8_projective_machinery(capsys):
    t0 = time.perf_counter()
    L = Lattice(1j)
    A = np.array([[0.3, 0.5], [-0.8, -0.3]])

    z0 = 0.1 + 0.2j
    loop = [z0, z0 + 1, z0 + 1 + L.tau, z0 + L.tau, z0]
    loop_err = 0.0
    for bundle in (FlatP1Bundle.trivial(L), FlatP1Bundle.constant(L, A)):
        for w0 in (0.3 + 0.4j, -2.0, 5.0j):
            loop_err = max(loop_err, chordal_distance(riccati_transport(bundle, loop, w0, tol=1e-12), w0))

    diag_err = 0.0
    for a in (0.4, -0.7 + 0.3j, 1.5j):
        b = FlatP1Bundle.constant(L, np.diag([a, -a]))
        dz, w0 = 0.6 + 0.35j, 0.3 - 0.2j
        exact = w0 * cmath.exp(-2 * a * dz)
        diag_err = max(diag_err, abs(riccati_transport(b, [0.0, dz], w0, tol=1e-12) - exact) / max(1.0, abs(exact)))

    wp_triple = ProjectiveTriple(FlatP1Bundle.trivial(L), wp_section(L))
    counts = {sff_vanishing_count(wp_triple, L, grid=g) for g in (8, 16)}

    fit = 0.0
    rng = np.random.default_rng(4)
    zs = 0.3 + 0.2j + 0.15 * (rng.random(20) + 1j * rng.random(20))
    for bundle in (FlatP1Bundle.trivial(L), FlatP1Bundle.constant(L, A)):
        t = ProjectiveTriple(bundle, wp_section(L))
        g1 = [develop(t, [0.25 + 0.15j, z], tol=1e-12) for z in zs]
        g2 = [develop(t, [0.45 + 0.35j, z], tol=1e-12) for z in zs]
        fit = max(fit, oracles.fit_mobius(g1, g2)[1])
    elapsed = time.perf_counter() - t0
    ok = loop_err < 1e-7 and diag_err < 1e-9 and counts == {4} and fit < 1e-6 and elapsed < 30
    report(capsys, 8, "projective machinery", ok,
           f"flat loop {loop_err:.2e} (<1e-7), diagonal Riccati {diag_err:.2e} (<1e-9), SFF count for wp {sorted(counts)}, "
           f"Mobius fit {fit:.2e} (<1e-6), {elapsed:.1f}s")


def test_criterion_9_no_flat_quadratic_sections(capsys):
    values = {flat_quadratic_sections_dim(-2 * d) for d in range(2, 1000)}
    report(capsys, 9, "flat quadratic sections of degree -2d", values == {0}, f"dimensions for d = 2..999: {sorted(values)}")
