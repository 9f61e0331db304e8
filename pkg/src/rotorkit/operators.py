"""Quantum operators applied exactly to closed-form test functions.

The momentum operator in the reduced cartesian chart is the hermitized
pi_i = -i hbar g^{-1/4} d_i g^{1/4} with g = R^2/(R^2-|x|^2), and the
Hamiltonian is the Laplace-Beltrami operator written two independent ways:

* ``laplace_beltrami`` (default): -(hbar^2/2) (R^2-|x|^2)^{1/2}
      d_i [ (delta_ij - x_i x_j/R^2) (R^2-|x|^2)^{-1/2} d_j f ]
* ``composition``: the symmetrized product
      (1/2) g^{-1/4} pi_i g^{1/2} g^{ij} pi_j g^{-1/4}
  composed literally from momentum applications.
* ``divergence``: the expanded form
      -(hbar^2/2) [ g^{ij} d_i d_j f - ((D-1)/R^2) x.grad f ],
  obtained by carrying out the derivatives of sqrt(g) g^{ij} once and for
  all (d_i g^{ij} = -D x_j/R^2 and g^{ij} d_i ln sqrt(g) = x_j/R^2).

All three must agree at machine precision; keeping them separate is the
point, since their agreement *is* the test.  The hyperspherical-chart
Hamiltonian is the curvilinear form

  -(hbar^2/2R^2) sum_i [prod_{j<i} sin^{-2}phi_j]
      sin^{-(D-1-i)}phi_i d_i [ sin^{D-1-i}phi_i d_i f ],

and angular momenta are L_ij = -i hbar (x_i d_j - x_j d_i) with
L_iD = +i hbar sqrt(R^2-|x|^2) d_i; the identity
sum_{a<b} L_ab^2 / R^2 = H closes the loop between the two charts.

Standalone curvilinear momenta carry a sine-power convention knob: the
symmetric split of the sphere weight sin^{D-1-i}phi_i gives the exponent
(D-1-i)/2 (``measure``, default; this is the one that is hermitian under the
sphere measure and the one the Hamiltonian's weak form corresponds to), while
``displayed`` selects (D-i)/2, which is *not* hermitian under the sphere
measure for i <= D-2.  The mismatch is deliberate and documented rather than
hidden; see README "Conventions and findings".
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from . import expressions as ex
from .geometry import (CHART_HYPERSPHERICAL, CHART_REDUCED, ChartDomainError,
                       ModelParams)
from .quadrature import reduced_ball_grid, sphere_angular_grid

__all__ = [
    "TestFunction", "OperatorTag", "QuadratureSpec",
    "reduced_var_names", "hyperspherical_var_names", "embedded_var_names",
    "embedding_exprs_hyperspherical", "pullback_to_reduced",
    "pullback_to_hyperspherical", "harmonic_polynomials",
    "momentum_cartesian_expr", "apply_momentum_cartesian",
    "hamiltonian_cartesian_expr", "apply_hamiltonian_cartesian",
    "hamiltonian_curvilinear_expr", "apply_hamiltonian_curvilinear",
    "momentum_curvilinear_expr", "apply_momentum_curvilinear",
    "angular_momentum_expr", "apply_angular_momentum",
    "l2_hamiltonian_expr", "inner_product", "hermiticity_defect",
    "apply_operator", "operator_expr",
]


@dataclass(frozen=True)
class TestFunction:
    """A differentiable scalar field on a named chart."""

    expr: ex.Expr
    chart: str


@dataclass(frozen=True)
class OperatorTag:
    """Names one of the implemented operators plus its indices/options.

    kinds: H_cart, H_curv, L2, pi_cart(i), pi_curv(i), L(i,j),
    multiply (payload expression, symmetric control) and H_curv_unsym
    (the deliberately unsymmetrized control).
    """

    kind: str
    i: int = 0
    j: int = 0
    convention: str = "measure"
    route: str = "laplace_beltrami"
    payload: object = field(default=None, compare=False)


@dataclass(frozen=True)
class QuadratureSpec:
    res: int = 64

    def __post_init__(self):
        if self.res < 2:
            raise ValueError("quadrature resolution must be at least 2 nodes")


def reduced_var_names(p):
    return [f"x{i}" for i in range(1, p.D)]


def embedded_var_names(p):
    return [f"x{i}" for i in range(1, p.D + 1)]


def hyperspherical_var_names(p):
    return [f"phi{i}" for i in range(1, p.D)]


def _radius2_expr(p):
    """|x|^2 over the reduced chart variables."""
    return ex.add(*[ex.power(ex.Var(n), 2) for n in reduced_var_names(p)])


def embedding_exprs_hyperspherical(p):
    """x_1..x_D on the sphere r = R as expressions in the angles."""
    names = hyperspherical_var_names(p)
    out = [None] * p.D
    chain = ex.Const(p.R)
    for k in range(p.D - 2):
        out[p.D - 1 - k] = ex.mul(chain, ex.cos(ex.Var(names[k])))
        chain = ex.mul(chain, ex.sin(ex.Var(names[k])))
    out[1] = ex.mul(chain, ex.cos(ex.Var(names[p.D - 2])))
    out[0] = ex.mul(chain, ex.sin(ex.Var(names[p.D - 2])))
    return out


def pullback_to_reduced(expr, p, hemisphere=1):
    """Restrict an embedded-coordinate expression to one hemisphere chart.

    hemisphere=+1 substitutes x_D = +sqrt(R^2 - |x|^2), -1 the lower lift.
    Integrals over the whole sphere are sums over both lifts; that sum is
    also what cancels the equator boundary terms in hermiticity checks.
    """
    s = _radius2_expr(p)
    xd = ex.sqrt(ex.Const(p.R ** 2) - s)
    if hemisphere < 0:
        xd = ex.mul(ex.Const(-1.0), xd)
    sub = {f"x{p.D}": xd}
    return TestFunction(expr.subs(sub), CHART_REDUCED)


def pullback_to_hyperspherical(expr, p):
    emb = embedding_exprs_hyperspherical(p)
    sub = {f"x{i + 1}": emb[i] for i in range(p.D)}
    return TestFunction(expr.subs(sub), CHART_HYPERSPHERICAL)


def _monomials(D, degree):
    """All exponent tuples of total degree ``degree`` in D variables."""
    if D == 1:
        return [(degree,)]
    out = []
    for e in range(degree + 1):
        for rest in _monomials(D - 1, degree - e):
            out.append((e,) + rest)
    return out


def harmonic_polynomials(D, degree):
    """A basis of degree-``degree`` harmonic polynomials in D variables.

    Built from scratch as the null space of the Laplacian on the monomial
    coefficient space, so it serves as an oracle independent of any spectral
    machinery.  The count matches C(D+l-1,l) - C(D+l-3,l-2).
    """
    if degree == 0:
        return [ex.ONE]
    if degree == 1:
        return [ex.Var(f"x{i}") for i in range(1, D + 1)]
    high = _monomials(D, degree)
    low = _monomials(D, degree - 2)
    low_index = {m: k for k, m in enumerate(low)}
    L = np.zeros((len(low), len(high)))
    for c, mono in enumerate(high):
        for i in range(D):
            if mono[i] >= 2:
                tgt = mono[:i] + (mono[i] - 2,) + mono[i + 1:]
                L[low_index[tgt], c] += mono[i] * (mono[i] - 1)
    basis = null_space(L)
    polys = []
    for col in basis.T:
        terms = []
        for c, mono in zip(col, high):
            if c == 0.0:
                continue
            factors = [ex.Const(c)]
            for i, e in enumerate(mono):
                if e:
                    factors.append(ex.power(ex.Var(f"x{i + 1}"), e))
            terms.append(ex.mul(*factors))
        polys.append(ex.add(*terms))
    return polys


def _env_from_points(names, points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        if pts.shape[0] != len(names):
            raise ChartDomainError(f"expected {len(names)} coordinates")
        return {n: pts[k] for k, n in enumerate(names)}
    if pts.shape[-1] != len(names):
        raise ChartDomainError(f"expected {len(names)} coordinates")
    return {n: pts[..., k] for k, n in enumerate(names)}


def _require_chart(f, chart):
    if f.chart != chart:
        raise ChartDomainError(f"operator needs a {chart}-chart function, got {f.chart}")


def _check_reduced_domain(points, p):
    pts = np.asarray(points, dtype=float)
    s = np.sum(pts * pts, axis=-1)
    if np.any(s >= p.R ** 2):
        raise ChartDomainError("evaluation point outside the open chart ball")


# -- reduced cartesian chart -------------------------------------------------

def momentum_cartesian_expr(f, i, p):
    """pi_i f as an expression: -i hbar g^{-1/4} d_i (g^{1/4} f)."""
    _require_chart(f, CHART_REDUCED)
    if not 1 <= i <= p.D - 1:
        raise IndexError(f"momentum index {i} out of range 1..{p.D - 1}")
    s = _radius2_expr(p)
    body = ex.Const(p.R ** 2) - s
    g14 = ex.mul(ex.Const(p.R ** 0.5), ex.power(body, -0.25))
    g14_inv = ex.mul(ex.Const(p.R ** -0.5), ex.power(body, 0.25))
    inner = ex.mul(g14, f.expr).diff(f"x{i}")
    return ex.mul(ex.Const(-1j * p.hbar), g14_inv, inner)


def apply_momentum_cartesian(f, x, i, p):
    _check_reduced_domain(x, p)
    expr = momentum_cartesian_expr(f, i, p)
    return ex.evaluate(expr, _env_from_points(reduced_var_names(p), x))


def _inverse_metric_entry(i, j, p):
    e = ex.mul(ex.Const(-1.0 / p.R ** 2), ex.Var(f"x{i}"), ex.Var(f"x{j}"))
    if i == j:
        e = ex.add(ex.ONE, e)
    return e


def hamiltonian_cartesian_expr(f, p, route="laplace_beltrami"):
    _require_chart(f, CHART_REDUCED)
    names = reduced_var_names(p)
    s = _radius2_expr(p)
    body = ex.Const(p.R ** 2) - s
    if route == "laplace_beltrami":
        w = ex.power(body, -0.5)
        terms = []
        for i in range(1, p.D):
            inner = ex.add(*[
                ex.mul(_inverse_metric_entry(i, j, p), w, f.expr.diff(names[j - 1]))
                for j in range(1, p.D)
            ])
            terms.append(inner.diff(names[i - 1]))
        return ex.mul(ex.Const(-0.5 * p.hbar ** 2), ex.power(body, 0.5), ex.add(*terms))
    if route == "composition":
        g14_inv = ex.mul(ex.Const(p.R ** -0.5), ex.power(body, 0.25))
        g12 = ex.mul(ex.Const(p.R), ex.power(body, -0.5))
        e0 = TestFunction(ex.mul(g14_inv, f.expr), CHART_REDUCED)
        e1 = [momentum_cartesian_expr(e0, j, p) for j in range(1, p.D)]
        total = []
        for i in range(1, p.D):
            e2 = ex.add(*[
                ex.mul(g12, _inverse_metric_entry(i, j, p), e1[j - 1])
                for j in range(1, p.D)
            ])
            total.append(momentum_cartesian_expr(TestFunction(e2, CHART_REDUCED), i, p))
        # the two (-i hbar) factors recombine to the real -hbar^2
        return ex.mul(ex.Const(0.5), g14_inv, ex.add(*total))
    if route == "divergence":
        second = []
        for i in range(1, p.D):
            di = f.expr.diff(names[i - 1])
            for j in range(1, p.D):
                second.append(ex.mul(_inverse_metric_entry(i, j, p), di.diff(names[j - 1])))
        drift = ex.add(*[
            ex.mul(ex.Var(n), f.expr.diff(n)) for n in names
        ])
        return ex.mul(
            ex.Const(-0.5 * p.hbar ** 2),
            ex.add(ex.add(*second), ex.mul(ex.Const(-(p.D - 1) / p.R ** 2), drift)),
        )
    raise ValueError(f"unknown Hamiltonian route '{route}'")


def apply_hamiltonian_cartesian(f, x, p, route="laplace_beltrami"):
    _check_reduced_domain(x, p)
    expr = hamiltonian_cartesian_expr(f, p, route=route)
    return ex.evaluate(expr, _env_from_points(reduced_var_names(p), x))


def angular_momentum_expr(f, a, b, p):
    """L_ab f on the reduced chart; a < b <= D."""
    _require_chart(f, CHART_REDUCED)
    if not (1 <= a < b <= p.D):
        raise IndexError(f"need 1 <= a < b <= D, got ({a}, {b})")
    if b < p.D:
        xa, xb = ex.Var(f"x{a}"), ex.Var(f"x{b}")
        return ex.mul(
            ex.Const(-1j * p.hbar),
            ex.add(ex.mul(xa, f.expr.diff(f"x{b}")),
                   ex.mul(ex.Const(-1), xb, f.expr.diff(f"x{a}"))),
        )
    body = ex.Const(p.R ** 2) - _radius2_expr(p)
    return ex.mul(ex.Const(1j * p.hbar), ex.sqrt(body), f.expr.diff(f"x{a}"))


def apply_angular_momentum(f, a, b, x, p):
    _check_reduced_domain(x, p)
    expr = angular_momentum_expr(f, a, b, p)
    return ex.evaluate(expr, _env_from_points(reduced_var_names(p), x))


def l2_hamiltonian_expr(f, p):
    """sum_{a<b} L_ab(L_ab f) / (2 R^2), the total-angular-momentum form.

    The pair sum over a < b is the standard Casimir L^2 (eigenvalues
    hbar^2 l(l+D-2)); dividing by 2R^2 reproduces the Hamiltonian.  The
    factor is pinned by the D=2 circle: the single pair gives
    L^2 = -hbar^2 d^2/dphi^2 and H = L^2/(2R^2) with eigenvalues m^2/2.
    """
    _require_chart(f, CHART_REDUCED)
    terms = []
    for a in range(1, p.D + 1):
        for b in range(a + 1, p.D + 1):
            once = TestFunction(angular_momentum_expr(f, a, b, p), CHART_REDUCED)
            terms.append(angular_momentum_expr(once, a, b, p))
    return ex.mul(ex.Const(0.5 / p.R ** 2), ex.add(*terms))


# -- hyperspherical chart ----------------------------------------------------

def _sin_power(name, k):
    if k == 0:
        return ex.ONE
    return ex.power(ex.sin(ex.Var(name)), k)


def hamiltonian_curvilinear_expr(f, p):
    _require_chart(f, CHART_HYPERSPHERICAL)
    names = hyperspherical_var_names(p)
    terms = []
    prefix = ex.ONE
    for i in range(1, p.D):
        name = names[i - 1]
        k = p.D - 1 - i  # sine weight carried by this angle
        weighted = ex.mul(_sin_power(name, k), f.expr.diff(name)).diff(name)
        terms.append(ex.mul(prefix, _sin_power(name, -k), weighted))
        if i < p.D - 1:
            prefix = ex.mul(prefix, _sin_power(name, -2))
    return ex.mul(ex.Const(-0.5 * p.hbar ** 2 / p.R ** 2), ex.add(*terms))


def apply_hamiltonian_curvilinear(f, angles, p):
    expr = hamiltonian_curvilinear_expr(f, p)
    return ex.evaluate(expr, _env_from_points(hyperspherical_var_names(p), angles))


def _unsymmetrized_curvilinear_expr(f, p):
    # control operator: same 1/sin^2 chains but no sine weights inside the
    # derivatives; visibly non-hermitian under the sphere measure
    _require_chart(f, CHART_HYPERSPHERICAL)
    names = hyperspherical_var_names(p)
    terms = []
    prefix = ex.ONE
    for i in range(1, p.D):
        name = names[i - 1]
        terms.append(ex.mul(prefix, f.expr.diff(name).diff(name)))
        if i < p.D - 1:
            prefix = ex.mul(prefix, _sin_power(name, -2))
    return ex.mul(ex.Const(-0.5 * p.hbar ** 2 / p.R ** 2), ex.add(*terms))


def momentum_curvilinear_expr(f, i, p, convention="measure"):
    """pi_phi_i f = -i hbar sin^{-a}phi_i d_i (sin^{a}phi_i f).

    ``measure``: a = (D-1-i)/2, the symmetric split of the sphere weight
    sin^{D-1-i}, hermitian under the sphere measure.  ``displayed``:
    a = (D-i)/2 as printed in the source convention this package follows;
    kept selectable because the two disagree for every polar angle.
    """
    _require_chart(f, CHART_HYPERSPHERICAL)
    if not 1 <= i <= p.D - 1:
        raise IndexError(f"momentum index {i} out of range 1..{p.D - 1}")
    if convention == "measure":
        a = 0.5 * (p.D - 1 - i)
    elif convention == "displayed":
        a = 0.5 * (p.D - i)
    else:
        raise ValueError(f"unknown momentum convention '{convention}'")
    name = hyperspherical_var_names(p)[i - 1]
    if a == 0:
        return ex.mul(ex.Const(-1j * p.hbar), f.expr.diff(name))
    sa = ex.power(ex.sin(ex.Var(name)), a)
    inv = ex.power(ex.sin(ex.Var(name)), -a)
    return ex.mul(ex.Const(-1j * p.hbar), inv, ex.mul(sa, f.expr).diff(name))


def apply_momentum_curvilinear(f, angles, i, p, convention="measure"):
    expr = momentum_curvilinear_expr(f, i, p, convention=convention)
    return ex.evaluate(expr, _env_from_points(hyperspherical_var_names(p), angles))


# -- inner products and hermiticity ------------------------------------------

def _chart_grid(chart, p, spec):
    if chart == CHART_REDUCED:
        pts, w = reduced_ball_grid(p, spec.res)
        names = reduced_var_names(p)
    elif chart == CHART_HYPERSPHERICAL:
        pts, w = sphere_angular_grid(p, spec.res)
        names = hyperspherical_var_names(p)
    else:
        raise ChartDomainError(f"no quadrature for chart '{chart}'")
    return pts, w, names


def inner_product(f, h, p, spec=QuadratureSpec()):
    """<f, h> = integral of conj(f) h over the chart, sphere measure."""
    if f.chart != h.chart:
        raise ChartDomainError("inner product needs both functions on one chart")
    pts, w, names = _chart_grid(f.chart, p, spec)
    env = _env_from_points(names, pts)
    fv = ex.evaluate(f.expr, env)
    hv = ex.evaluate(h.expr, env)
    return np.sum(w * np.conjugate(fv) * hv)


def operator_expr(tag, f, p):
    """Expression for (tag f); dispatch point shared by all batch appliers."""
    if tag.kind == "H_cart":
        return hamiltonian_cartesian_expr(f, p, route=tag.route)
    if tag.kind == "H_curv":
        return hamiltonian_curvilinear_expr(f, p)
    if tag.kind == "H_curv_unsym":
        return _unsymmetrized_curvilinear_expr(f, p)
    if tag.kind == "L2":
        return l2_hamiltonian_expr(f, p)
    if tag.kind == "pi_cart":
        return momentum_cartesian_expr(f, tag.i, p)
    if tag.kind == "pi_curv":
        return momentum_curvilinear_expr(f, tag.i, p, convention=tag.convention)
    if tag.kind == "L":
        return angular_momentum_expr(f, tag.i, tag.j, p)
    if tag.kind == "multiply":
        return ex.mul(tag.payload, f.expr)
    raise ValueError(f"unknown operator kind '{tag.kind}'")


def apply_operator(tag, f, points, p):
    names = (reduced_var_names(p) if f.chart == CHART_REDUCED
             else hyperspherical_var_names(p))
    return ex.evaluate(operator_expr(tag, f, p), _env_from_points(names, points))


def hermiticity_defect(tag, f, h, p, spec=QuadratureSpec()):
    """|<f, T h> - <T f, h>| under the sphere (sqrt(g)) measure."""
    if f.chart != h.chart:
        raise ChartDomainError("hermiticity check needs both functions on one chart")
    pts, w, names = _chart_grid(f.chart, p, spec)
    env = _env_from_points(names, pts)
    fv = ex.evaluate(f.expr, env)
    hv = ex.evaluate(h.expr, env)
    tf = ex.evaluate(operator_expr(tag, f, p), env)
    th = ex.evaluate(operator_expr(tag, h, p), env)
    lhs = np.sum(w * np.conjugate(fv) * th)
    rhs = np.sum(w * np.conjugate(tf) * hv)
    return abs(lhs - rhs)
