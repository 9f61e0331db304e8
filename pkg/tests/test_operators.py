"""Operator construction against independent oracles.

The Hamiltonian has three internal construction routes; beyond checking
that they agree, both it and the momenta are rebuilt here through sympy
from their defining symmetrization (rho^{-1/2} d rho^{1/2} with
rho = sqrt(det g)), which shares no code with the package expressions.
Deliberately broken orderings must show O(1) hermiticity defects, or the
defect checks would have no teeth.
"""

import numpy as np
import pytest
import sympy as sp

from rotorkit import expressions as ex
from rotorkit.geometry import CHART_HYPERSPHERICAL, ModelParams
from rotorkit.operators import (
    OperatorTag,
    QuadratureSpec,
    apply_hamiltonian_cartesian,
    apply_hamiltonian_curvilinear,
    apply_momentum_cartesian,
    apply_operator,
    harmonic_polynomials,
    hermiticity_defect,
    hyperspherical_var_names,
    inner_product,
    pullback_to_hyperspherical,
    pullback_to_reduced,
)
from rotorkit.operators import TestFunction as Probe
from rotorkit.spectra import harmonic_multiplicity
from sympy_bridge import to_sympy

P3 = ModelParams(D=3, R=1.0, hbar=1.0)


def _ball(D, n, rng, shell=0.85):
    x = rng.normal(size=(n, D - 1))
    r = shell * rng.uniform(0.05, 1.0, size=(n, 1)) ** 0.5
    return x * r / np.linalg.norm(x, axis=1, keepdims=True)


@pytest.mark.parametrize("D", (2, 3, 4, 5))
def test_harmonic_basis_size_matches_degeneracy(D):
    for l in range(5):
        assert len(harmonic_polynomials(D, l)) == harmonic_multiplicity(D, l)


def test_harmonic_polynomials_are_harmonic():
    rng = np.random.default_rng(7)
    for D, l in ((3, 3), (4, 3), (5, 2)):
        pts = rng.normal(size=(30, D))
        env = {f"x{i + 1}": pts[:, i] for i in range(D)}
        for h in harmonic_polynomials(D, l):
            lap = ex.add(*[h.diff(f"x{i}").diff(f"x{i}") for i in range(1, D + 1)])
            scale = np.max(np.abs(ex.evaluate(h, env))) or 1.0
            assert np.max(np.abs(ex.evaluate(lap, env))) < 1e-12 * scale * l * l


@pytest.mark.parametrize("route", ("composition", "divergence"))
def test_hamiltonian_routes_agree(route):
    rng = np.random.default_rng(11)
    pts = _ball(3, 40, rng)
    for l in (1, 2, 3):
        f = pullback_to_reduced(harmonic_polynomials(3, l)[0], P3)
        a = apply_hamiltonian_cartesian(f, pts, P3, route="laplace_beltrami")
        b = apply_hamiltonian_cartesian(f, pts, P3, route=route)
        assert np.max(np.abs(a - b)) < 1e-13 * max(np.max(np.abs(a)), 1.0)


@pytest.mark.parametrize("D,l", [(2, 3), (3, 2), (4, 2)])
def test_harmonic_pullbacks_are_eigenfunctions(D, l):
    # H f_l = hbar^2 l(l+D-2)/(2 R^2) f_l in both charts
    p = ModelParams(D=D, R=1.4, hbar=0.7)
    rng = np.random.default_rng(13 + D)
    pts = _ball(D, 40, rng) * p.R
    eig = p.hbar ** 2 * l * (l + D - 2) / (2.0 * p.R ** 2)
    h = harmonic_polynomials(D, l)[-1]
    f_red = pullback_to_reduced(h, p)
    names = [f"x{i + 1}" for i in range(D - 1)]
    fvals = ex.evaluate(f_red.expr, dict(zip(names, pts.T)))
    got = apply_hamiltonian_cartesian(f_red, pts, p)
    scale = max(np.max(np.abs(eig * fvals)), eig)
    assert np.max(np.abs(got - eig * fvals)) < 1e-12 * scale
    # same statement in the angular chart
    f_ang = pullback_to_hyperspherical(h, p)
    ang = np.concatenate([rng.uniform(0.3, np.pi - 0.3, size=(40, D - 2)),
                          rng.uniform(0, 2 * np.pi, size=(40, 1))], axis=1)
    anames = hyperspherical_var_names(p)
    avals = ex.evaluate(f_ang.expr, dict(zip(anames, ang.T)))
    got_a = apply_hamiltonian_curvilinear(f_ang, ang, p)
    assert np.max(np.abs(got_a - eig * avals)) < 1e-12 * scale


def test_hamiltonian_matches_sympy_divergence_oracle():
    # H = -hbar^2/(2 sqrt g) d_i (sqrt g g^{ij} d_j f), built in sympy
    f = pullback_to_reduced(harmonic_polynomials(3, 2)[1], P3)
    rng = np.random.default_rng(17)
    pts = _ball(3, 40, rng)
    x1, x2 = sp.symbols("x1 x2")
    xs = [x1, x2]
    s = x1 ** 2 + x2 ** 2
    rho = 1 / sp.sqrt(1 - s)  # sqrt(det g) for R = 1
    fs = to_sympy(f.expr)
    Hf = 0
    for i in range(2):
        for j in range(2):
            gij = (1 if i == j else 0) - xs[i] * xs[j]
            Hf += sp.diff(rho * gij * sp.diff(fs, xs[j]), xs[i])
    Hf = -Hf / (2 * rho)
    want = sp.lambdify((x1, x2), sp.simplify(Hf), "numpy")(pts[:, 0], pts[:, 1])
    got = apply_hamiltonian_cartesian(f, pts, P3)
    assert np.max(np.abs(got - want)) < 1e-12 * max(np.max(np.abs(want)), 1.0)


def test_momentum_matches_sympy_symmetrization_oracle():
    # pi_i = -i hbar rho^{-1/2} d_i rho^{1/2}, the measure-weighted ordering
    f = pullback_to_reduced(harmonic_polynomials(3, 2)[1], P3)
    rng = np.random.default_rng(19)
    pts = _ball(3, 40, rng)
    x1, x2 = sp.symbols("x1 x2")
    rho = 1 / sp.sqrt(1 - x1 ** 2 - x2 ** 2)
    fs = to_sympy(f.expr)
    for i, xi in ((1, x1), (2, x2)):
        pi = -sp.I * sp.diff(sp.sqrt(rho) * fs, xi) / sp.sqrt(rho)
        want = sp.lambdify((x1, x2), pi, "numpy")(pts[:, 0], pts[:, 1])
        got = apply_momentum_cartesian(f, pts, i, P3)
        assert np.iscomplexobj(got)
        assert np.max(np.abs(got - want)) < 1e-13 * max(np.max(np.abs(want)), 1.0)


def test_angular_momentum_sum_reproduces_hamiltonian():
    # sum_{a<b} L_ab^2 / (2 R^2) applied pointwise equals H
    p = ModelParams(D=3, R=1.6, hbar=1.0)
    rng = np.random.default_rng(23)
    pts = _ball(3, 30, rng) * p.R
    for l in (1, 2, 3):
        f = pullback_to_reduced(harmonic_polynomials(3, l)[0], p)
        a = apply_operator(OperatorTag("L2"), f, pts, p)
        b = apply_operator(OperatorTag("H_cart", route="laplace_beltrami"), f, pts, p)
        assert np.max(np.abs(a - b)) < 1e-12 * max(np.max(np.abs(b)), 1.0)


def test_hemisphere_pullback_pair():
    # the lower lift evaluates the polynomial at x_D -> -sqrt(R^2 - |x|^2)
    h = harmonic_polynomials(3, 2)[0]
    up = pullback_to_reduced(h, P3, hemisphere=1)
    dn = pullback_to_reduced(h, P3, hemisphere=-1)
    rng = np.random.default_rng(29)
    pts = _ball(3, 30, rng)
    env = {"x1": pts[:, 0], "x2": pts[:, 1]}
    xd = np.sqrt(1.0 - pts[:, 0] ** 2 - pts[:, 1] ** 2)
    env3u = {"x1": pts[:, 0], "x2": pts[:, 1], "x3": xd}
    env3d = {"x1": pts[:, 0], "x2": pts[:, 1], "x3": -xd}
    assert np.max(np.abs(ex.evaluate(up.expr, env) - ex.evaluate(h, env3u))) < 1e-14
    assert np.max(np.abs(ex.evaluate(dn.expr, env) - ex.evaluate(h, env3d))) < 1e-14


def test_hermiticity_on_full_sphere_grid():
    h1 = pullback_to_hyperspherical(harmonic_polynomials(3, 1)[0], P3)
    h2 = pullback_to_hyperspherical(harmonic_polynomials(3, 2)[1], P3)
    spec = QuadratureSpec(res=32)
    assert hermiticity_defect(OperatorTag("H_curv"), h1, h2, P3, spec) < 1e-12
    # polar momentum: integer sine powers for D = 3, so the Gauss grid is exact
    assert hermiticity_defect(OperatorTag("pi_curv", i=1), h1, h2, P3, spec) < 1e-12


def test_broken_orderings_show_large_defects():
    # harmonics are eigenfunctions, which hides ordering mistakes; generic
    # smooth functions expose them at O(1)
    th = ex.Var(hyperspherical_var_names(P3)[0])
    f = Probe(ex.mul(ex.cos(th), ex.cos(th)), CHART_HYPERSPHERICAL)
    g = Probe(ex.exp(ex.mul(ex.Const(0.5), ex.cos(th))), CHART_HYPERSPHERICAL)
    spec = QuadratureSpec(res=32)
    norm = (inner_product(f, f, P3, spec) * inner_product(g, g, P3, spec)) ** 0.5
    assert hermiticity_defect(OperatorTag("H_curv"), f, g, P3, spec) < 1e-12 * norm
    assert hermiticity_defect(OperatorTag("H_curv_unsym"), f, g, P3, spec) > 0.1 * norm
    assert hermiticity_defect(
        OperatorTag("pi_curv", i=1, convention="displayed"), f, g, P3, spec) > 0.1 * norm


def test_momentum_conventions_on_parity_matched_pair():
    # the polar momentum turns even sine powers into odd ones; pairing an
    # odd-power probe with an even-power one keeps every integrand
    # polynomial in cos(theta), which the Gauss grid integrates exactly.
    # Pairs that do not vanish at the poles instead probe the cot(theta)
    # endpoint singularity of the quadrature, not the operator.
    th = ex.Var(hyperspherical_var_names(P3)[0])
    f = Probe(ex.mul(ex.sin(th), ex.cos(th)), CHART_HYPERSPHERICAL)
    g = Probe(ex.mul(ex.sin(th), ex.sin(th),
                     ex.exp(ex.mul(ex.Const(0.5), ex.cos(th)))), CHART_HYPERSPHERICAL)
    spec = QuadratureSpec(res=32)
    norm = (inner_product(f, f, P3, spec) * inner_product(g, g, P3, spec)) ** 0.5
    assert hermiticity_defect(
        OperatorTag("pi_curv", i=1, convention="measure"), f, g, P3, spec) < 1e-12 * norm
    assert hermiticity_defect(
        OperatorTag("pi_curv", i=1, convention="displayed"), f, g, P3, spec) > 0.1 * norm


def test_inner_product_normalization():
    # <1, 1> over the full sphere is the sphere area
    one = Probe(ex.ONE, CHART_HYPERSPHERICAL)
    from rotorkit.geometry import sphere_area
    got = inner_product(one, one, P3, QuadratureSpec(res=16))
    assert abs(got - sphere_area(3, 1.0)) < 1e-10
