"""Constrained classical dynamics: two independent integration routes, the
bracket algebra on the constraint shell, and the symplectic-form pullback.

The embedded oracle never touches the reduced chart machinery: it
integrates x'' = -(|x'|^2/R^2) x in ambient coordinates with per-step
projection, so agreement between the two routes cross-validates the
Lagrangian reduction end to end.
"""

import numpy as np
import pytest
import sympy as sp

from rotorkit import dynamics
from rotorkit import expressions as ex
from rotorkit.dynamics import (
    ChartMarginError,
    Observable,
    PHASE_CANONICAL,
    PHASE_EMBEDDED,
    PHASE_REDUCED,
    PhaseState,
    StepConvergenceError,
    bracket_check_report,
    canonical_chart_map,
    canonical_phase_vars,
    conserved_series,
    constraint_residuals,
    dirac_bracket,
    dirac_bracket_expr,
    embedded_from_reduced,
    embedded_phase_vars,
    fundamental_bracket_reference,
    hamiltonian_value,
    integrate_embedded_oracle,
    integrate_reduced,
    omega2_pullback_expr,
    physical_hamiltonian,
    reduced_from_embedded,
    trajectory_csv_text,
    trajectory_json_dict,
)
from rotorkit.geometry import ChartDomainError, ModelParams
from sympy_bridge import to_sympy

P3 = ModelParams(D=3, R=1.0, hbar=1.0)
SLOW = PhaseState(PHASE_REDUCED, q=np.array([0.2, 0.0]), p=np.array([0.0, 0.08]))


def test_reduced_route_matches_embedded_oracle():
    traj = integrate_reduced(SLOW, 5.0, 1e-3, P3)
    x0, v0 = embedded_from_reduced(SLOW, P3)
    oracle = integrate_embedded_oracle(x0, v0, 5.0, 1e-3, P3)
    lifted = np.array([embedded_from_reduced(s, P3)[0] for s in traj])
    assert np.max(np.abs(lifted - oracle.q)) < 1e-7


def test_oracle_pins_constraints_and_invariants():
    x0, v0 = embedded_from_reduced(SLOW, P3)
    oracle = integrate_embedded_oracle(x0, v0, 5.0, 1e-3, P3)
    c_rad, c_tan = constraint_residuals(oracle.q, oracle.p, P3)
    assert np.max(np.abs(c_rad)) < 1e-13
    assert np.max(np.abs(c_tan)) < 1e-13
    cs = conserved_series(oracle, P3)
    assert np.max(np.abs(cs["energy"] - cs["energy"][0])) < 1e-12
    assert np.max(np.abs(cs["L"] - cs["L"][0:1, :])) < 1e-12
    assert cs["pairs"] == [(0, 1), (0, 2), (1, 2)]


def test_reduced_route_conserves_energy_and_angular_momentum():
    traj = integrate_reduced(SLOW, 5.0, 1e-3, P3)
    states = [embedded_from_reduced(s, P3) for s in traj]
    lifted = dynamics.Trajectory(PHASE_EMBEDDED, traj.times,
                                 np.array([x for x, _ in states]),
                                 np.array([v for _, v in states]))
    cs = conserved_series(lifted, P3)
    assert np.max(np.abs(cs["energy"] - cs["energy"][0])) < 1e-8
    assert np.max(np.abs(cs["L"] - cs["L"][0:1, :])) < 1e-8


def test_multiplier_elimination_identity_along_oracle():
    # eliminating the Lagrange multiplier uses x . xdd = -|xd|^2; check it
    # on the integrated flow with a central-difference second derivative
    x0, v0 = embedded_from_reduced(SLOW, P3)
    oracle = integrate_embedded_oracle(x0, v0, 2.0, 1e-3, P3)
    dt = 1e-3
    x, v = oracle.q, oracle.p
    xdd = (x[2:] - 2.0 * x[1:-1] + x[:-2]) / dt ** 2
    resid = (np.einsum("ij,ij->i", x[1:-1], xdd)
             + np.einsum("ij,ij->i", v[1:-1], v[1:-1]))
    speed2 = float(np.max(np.einsum("ij,ij->i", v, v)))
    assert np.max(np.abs(resid)) < 1e-4 * speed2


def test_chart_margin_error_carries_exit_time():
    # every geodesic crosses the chart equator eventually; a faster start
    # reaches the margin inside the window
    fast = PhaseState(PHASE_REDUCED, q=np.array([0.2, 0.0]), p=np.array([0.0, 0.3]))
    with pytest.raises(ChartMarginError) as err:
        integrate_reduced(fast, 10.0, 1e-3, P3)
    assert abs(err.value.time - 4.155) < 1e-6
    assert "margin limit" in str(err.value)


def test_step_convergence_error_on_absurd_step():
    bad = PhaseState(PHASE_REDUCED, q=np.array([0.9, 0.0]), p=np.array([0.0, 2.0]))
    with np.errstate(all="ignore"):  # the diverging iteration overflows first
        with pytest.raises(StepConvergenceError):
            integrate_reduced(bad, 10.0, 5.0, P3, margin=0.0)


def test_phase_state_validation():
    with pytest.raises(ChartDomainError):
        PhaseState(PHASE_REDUCED, q=np.array([1.2, 0.0]),
                   p=np.zeros(2)).validate(P3)
    with pytest.raises(ChartDomainError):
        PhaseState(PHASE_REDUCED, q=np.zeros(3), p=np.zeros(3)).validate(P3)
    with pytest.raises(ValueError):
        PhaseState(PHASE_REDUCED, q=np.zeros(2), p=np.zeros(3))


def test_oracle_rejects_off_shell_starts():
    with pytest.raises(ChartDomainError):
        integrate_embedded_oracle(np.array([1.1, 0, 0]), np.zeros(3), 1.0, 1e-2, P3)
    with pytest.raises(ChartDomainError):
        integrate_embedded_oracle(np.array([1.0, 0, 0]),
                                  np.array([0.5, 0, 0]), 1.0, 1e-2, P3)


def test_chart_round_trip_and_energy_agreement():
    x0, v0 = embedded_from_reduced(SLOW, P3)
    back = reduced_from_embedded(x0, v0, P3)
    assert np.max(np.abs(back.q - SLOW.q)) < 1e-14
    assert np.max(np.abs(back.p - SLOW.p)) < 1e-14
    assert abs(hamiltonian_value(back, P3) - 0.5 * float(v0 @ v0)) < 1e-14
    with pytest.raises(ChartDomainError):
        reduced_from_embedded(np.array([1.0, 0.0, 0.0]), np.zeros(3), P3)


def test_canonical_chart_lands_on_constraint_shell():
    qv, pv = canonical_phase_vars(P3)
    cmap = canonical_chart_map(P3)
    rng = np.random.default_rng(5)
    for _ in range(20):
        env = {qv[0]: rng.uniform(0.4, np.pi - 0.4),
               qv[1]: rng.uniform(0.0, 2 * np.pi),
               pv[0]: rng.normal(), pv[1]: rng.normal()}
        xs = np.array([ex.evaluate(cmap[f"x{i + 1}"], env) for i in range(3)])
        ps = np.array([ex.evaluate(cmap[f"p{i + 1}"], env) for i in range(3)])
        c1, c2 = constraint_residuals(xs, ps, P3)
        assert abs(float(c1)) < 1e-12 and abs(float(c2)) < 1e-12


def test_physical_hamiltonian_equals_shell_energy():
    rng = np.random.default_rng(9)
    qv, pv = canonical_phase_vars(P3)
    cmap = canonical_chart_map(P3)
    for _ in range(10):
        pt = PhaseState(PHASE_CANONICAL,
                        q=np.array([rng.uniform(0.4, np.pi - 0.4),
                                    rng.uniform(0.0, 2 * np.pi)]),
                        p=rng.normal(size=2))
        env = {qv[0]: pt.q[0], qv[1]: pt.q[1], pv[0]: pt.p[0], pv[1]: pt.p[1]}
        ps = np.array([ex.evaluate(cmap[f"p{i + 1}"], env) for i in range(3)])
        assert abs(physical_hamiltonian(pt, P3) - 0.5 * float(ps @ ps)) < 1e-13


def test_fundamental_brackets_match_closed_forms():
    rng = np.random.default_rng(11)
    qv, pv = canonical_phase_vars(P3)
    cmap = canonical_chart_map(P3)
    xn, pn = embedded_phase_vars(P3)
    pt = PhaseState(PHASE_CANONICAL,
                    q=np.array([rng.uniform(0.4, np.pi - 0.4),
                                rng.uniform(0.0, 2 * np.pi)]),
                    p=rng.normal(size=2))
    env = {qv[0]: pt.q[0], qv[1]: pt.q[1], pv[0]: pt.p[0], pv[1]: pt.p[1]}
    xs = np.array([ex.evaluate(cmap[f"x{i + 1}"], env) for i in range(3)])
    ps = np.array([ex.evaluate(cmap[f"p{i + 1}"], env) for i in range(3)])
    for a in range(3):
        for b in range(3):
            for kind, A, B in (("xx", ex.Var(xn[a]), ex.Var(xn[b])),
                               ("xp", ex.Var(xn[a]), ex.Var(pn[b])),
                               ("pp", ex.Var(pn[a]), ex.Var(pn[b]))):
                got = dirac_bracket(Observable(A, PHASE_EMBEDDED),
                                    Observable(B, PHASE_EMBEDDED), pt, P3)
                want = fundamental_bracket_reference(kind, xs, ps, P3.R)[a, b]
                assert abs(got - want) < 1e-12


def test_bracket_families_at_scale():
    report = bracket_check_report(P3, samples=100, seed=7)
    assert report["max_deviation"] < 1e-12
    for fam in ("xx", "xp", "pp"):
        assert report["families"][fam]["max_deviation"] < 1e-12


def test_bracket_antisymmetry_is_bitwise():
    xn, pn = embedded_phase_vars(P3)
    obs = [Observable(ex.Var(xn[0]), PHASE_EMBEDDED),
           Observable(ex.Var(pn[2]), PHASE_EMBEDDED),
           Observable(ex.mul(ex.Var(xn[1]), ex.Var(pn[1])), PHASE_EMBEDDED)]
    qs, ps = dynamics._random_canonical_points(P3, 200, seed=1)
    angles, moms = canonical_phase_vars(P3)
    env = {n: qs[:, i] for i, n in enumerate(angles)}
    env.update({n: ps[:, i] for i, n in enumerate(moms)})
    for a in range(3):
        for b in range(a + 1, 3):
            fwd = np.broadcast_to(
                ex.evaluate(dirac_bracket_expr(obs[a], obs[b], P3), env), 200)
            rev = np.broadcast_to(
                ex.evaluate(dirac_bracket_expr(obs[b], obs[a], P3), env), 200)
            assert np.all(fwd == -rev)  # exact, not approximate


def test_jacobi_identity():
    xn, pn = embedded_phase_vars(P3)
    A = Observable(ex.Var(xn[0]), PHASE_EMBEDDED)
    B = Observable(ex.Var(pn[1]), PHASE_EMBEDDED)
    C = Observable(ex.mul(ex.Var(xn[2]), ex.Var(pn[0])), PHASE_EMBEDDED)

    def nest(f, g, h):
        inner = Observable(dirac_bracket_expr(g, h, P3), PHASE_CANONICAL)
        return dirac_bracket_expr(f, inner, P3)

    total = ex.add(nest(A, B, C), nest(B, C, A), nest(C, A, B))
    qs, ps = dynamics._random_canonical_points(P3, 50, seed=2)
    angles, moms = canonical_phase_vars(P3)
    env = {n: qs[:, i] for i, n in enumerate(angles)}
    env.update({n: ps[:, i] for i, n in enumerate(moms)})
    vals = np.broadcast_to(ex.evaluate(total, env), 50)
    assert np.max(np.abs(vals)) < 1e-12


def test_symplectic_two_form_pullback_vanishes():
    w2 = omega2_pullback_expr(P3)
    qv, pv = canonical_phase_vars(P3)
    rng = np.random.default_rng(13)
    env = {qv[0]: rng.uniform(0.3, np.pi - 0.3, 50),
           qv[1]: rng.uniform(0.0, 2 * np.pi, 50),
           pv[0]: rng.normal(size=50), pv[1]: rng.normal(size=50)}
    vals = np.broadcast_to(ex.evaluate(w2, env), 50)
    assert np.max(np.abs(vals)) < 1e-12
    # and symbolically: the pullback is identically zero, not just small
    assert sp.simplify(to_sympy(w2)) == 0


def test_trajectory_serialization():
    traj = integrate_reduced(SLOW, 0.02, 1e-3, P3)
    csv = trajectory_csv_text(traj, P3)
    lines = csv.strip().splitlines()
    assert lines[0] == "t,q1,q2,p1,p2,H,constraint_radial,constraint_tangent"
    assert len(lines) == 1 + len(traj)
    d = trajectory_json_dict(traj, P3)
    assert len(d["t"]) == len(traj)
    assert trajectory_csv_text(traj, P3) == csv
