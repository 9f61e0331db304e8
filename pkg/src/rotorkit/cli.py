"""Command-line front end: spectrum, check, classical, pathintegral.

Every run resolves a flat key=value configuration (file < flags, flags win),
validates it against a per-command schema with unknown-key rejection, and
emits a report whose payload is a pure function of the resolved config:
deterministic JSON (sorted keys) or a CSV table, never wall-clock state.
The resolved config is embedded in the report, so re-running from it
reproduces the report byte for byte.

Exit codes:
  0  all checks passed
  1  a tolerance was exceeded (report still written, pass: false)
  2  configuration error (bad key, bad value, unsupported dimension,
     kernel width preconditions)
  3  an iterative scheme failed to converge
  4  classical trajectory left the chart margin (exit time in the report)
"""

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from . import expressions as ex
from .geometry import (ChartDomainError, ModelParams, lift,
                       to_hyperspherical)
from .operators import (OperatorTag, QuadratureSpec, harmonic_polynomials,
                        apply_operator, hyperspherical_var_names,
                        operator_expr, pullback_to_hyperspherical,
                        pullback_to_reduced, reduced_var_names)
from .spectra import (NonConvergenceError, SpectralGrid, SpectrumResult,
                      assemble, cluster_eigenvalues, compute_spectrum,
                      extrapolate, reference_eigenvalues, reference_spectrum,
                      sector_spectrum, spectrum_csv_text)
from . import dynamics
from .dynamics import (PHASE_CANONICAL, PHASE_EMBEDDED, PHASE_REDUCED,
                       ChartMarginError, Observable, PhaseState,
                       StepConvergenceError, bracket_check_report,
                       conserved_series, dirac_bracket_expr,
                       embedded_from_reduced, embedded_phase_vars,
                       integrate_embedded_oracle, integrate_reduced,
                       trajectory_csv_text)
from .quadrature import reduced_ball_grid
from .pathintegral import (CORRECTED_POLAR, NAIVE_POLAR, KernelWidthError,
                           QuadratureConvergenceError, RadialGrid,
                           default_probe_family, extract_effective_potential,
                           potential_csv_text, potential_json_dict)

__all__ = ["main", "build_parser", "resolve_config", "config_text",
           "ConfigError", "SCHEMAS", "CHECK_SUITES"]


class ConfigError(ValueError):
    """Configuration rejected; maps to exit code 2."""


# ---------------------------------------------------------------------------
# configuration schema and parsing

# field spec: type, default, help, optional choices, optional positivity
def _f(typ, default, help_, choices=None, positive=False):
    return {"type": typ, "default": default, "help": help_,
            "choices": choices, "positive": positive}


CHECK_SUITES = ("chart-equivalence", "hermiticity", "angular-momentum",
                "dirac-brackets")

SCHEMAS = {
    "spectrum": {
        "dim": _f("int", 3, "embedding dimension (2, 3 or 4)"),
        "radius": _f("float", 1.0, "sphere radius R", positive=True),
        "hbar": _f("float", 1.0, "Planck constant", positive=True),
        "levels": _f("int", 4, "exact levels l = 0..levels-1 to compare",
                     positive=True),
        "res": _f("ints", (48, 64, 96),
                  "grid resolutions; two or more enable extrapolation"),
        "method": _f("str", "auto", "eigenvalue route",
                     choices=("auto", "sector", "dense", "iterative")),
        "tolerance": _f("float_or_auto", None,
                        "max |cluster value - exact| accepted"),
        "cluster_tol": _f("float_or_auto", None,
                          "gap below which eigenvalues share a cluster"),
        "e0_tol": _f("float", 1e-8, "ground state |E0| bound", positive=True),
        "seed": _f("int", 0, "start-vector seed for the iterative route"),
    },
    "check": {
        "suite": _f("str", None, "which invariant family to verify",
                    choices=CHECK_SUITES),
        "dim": _f("int", 3, "embedding dimension"),
        "radius": _f("float", 1.0, "sphere radius R", positive=True),
        "hbar": _f("float", 1.0, "Planck constant", positive=True),
        "lmax": _f("int", 9, "largest harmonic degree in the test family"),
        "samples": _f("int_or_auto", None,
                      "evaluation points (brackets: phase-space samples)"),
        "res": _f("int", 64, "quadrature resolution for hermiticity",
                  positive=True),
        "tolerance": _f("float_or_auto", None, "pass threshold"),
        "seed": _f("int", 7, "sampling seed"),
    },
    "classical": {
        "dim": _f("int", 3, "embedding dimension"),
        "radius": _f("float", 1.0, "sphere radius R", positive=True),
        "q0": _f("floats", (0.2, 0.0), "initial reduced position"),
        "p0": _f("floats", (0.0, 0.08), "initial reduced momentum"),
        "duration": _f("float", 10.0, "integration time", positive=True),
        "dt": _f("float", 1e-3, "time step", positive=True),
        "margin": _f("float", 0.05, "chart margin fraction of R"),
        "sup_tol": _f("float", 1e-6,
                      "sup-norm bound between the two integrators",
                      positive=True),
        "conserve_tol": _f("float", 1e-8, "drift bound for E and L_ab",
                           positive=True),
        "seed": _f("int", 0, "unused; recorded for config uniformity"),
    },
    "pathintegral": {
        "hbar": _f("float", 1.0, "Planck constant", positive=True),
        "eps_list": _f("floats", (1e-3, 5e-4, 2.5e-4),
                       "descending Euclidean slice widths"),
        "r_min": _f("float", 0.1, "inner radial cutoff", positive=True),
        "r_max": _f("float", 8.0, "outer radial cutoff", positive=True),
        "nodes": _f("int", 2048, "radial grid nodes", positive=True),
        "r_eval_min": _f("float", 0.5, "first extraction radius",
                         positive=True),
        "r_eval_max": _f("float", 3.0, "last extraction radius",
                         positive=True),
        "r_eval_count": _f("int", 26, "extraction radii count",
                           positive=True),
        "prescription": _f("str", "naive", "polar slice kernel variant",
                           choices=("naive", "corrected")),
        "midpoint_rule": _f("str", "geometric",
                            "radius entering the angular width",
                            choices=("geometric", "arithmetic")),
        "fit_tol": _f("float", 0.02,
                      "bound on |8 r^2 dV / hbar^2 - 1| (naive)",
                      positive=True),
        "corrected_tol": _f("float", 1e-3,
                            "relative residual bound (corrected)",
                            positive=True),
        "seed": _f("int", 0, "unused; recorded for config uniformity"),
    },
}


def _coerce(cmd, key, raw, spec):
    """Turn a string (or already-typed default) into the schema's type."""
    typ = spec["type"]
    try:
        if typ == "int" or typ == "int_or_auto":
            if typ == "int_or_auto" and (raw is None or raw == "auto"):
                return None
            val = int(raw)
        elif typ == "float" or typ == "float_or_auto":
            if typ == "float_or_auto" and (raw is None or raw == "auto"):
                return None
            val = float(raw)
        elif typ == "floats":
            toks = raw.split(",") if isinstance(raw, str) else raw
            val = tuple(float(t) for t in toks)
        elif typ == "ints":
            toks = raw.split(",") if isinstance(raw, str) else raw
            val = tuple(int(t) for t in toks)
        elif typ == "str":
            val = str(raw)
        else:  # pragma: no cover - schema bug
            raise AssertionError(f"unhandled schema type {typ}")
    except (TypeError, ValueError):
        raise ConfigError(
            f"{cmd}: key '{key}' expects {typ}, got {raw!r}") from None
    if spec["choices"] is not None and val not in spec["choices"]:
        raise ConfigError(
            f"{cmd}: key '{key}' must be one of {', '.join(spec['choices'])}; "
            f"got {val!r}")
    if spec["positive"]:
        seq = val if isinstance(val, tuple) else (val,)
        if any(not (v > 0) for v in seq):
            raise ConfigError(f"{cmd}: key '{key}' must be positive, got {val!r}")
    return val


def parse_config_text(text):
    """key = value lines; '#' comments and blank lines ignored."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, _, value = body.partition("=")
        out[key.strip()] = value.strip()
    return out


def config_text(cfg):
    """Inverse of parse_config_text for a resolved config (round-trip).

    Keys resolved to None mean "derive at run time"; they have no written
    form, so they are omitted and resolution restores them as defaults.
    """
    lines = []
    for key in sorted(cfg):
        val = cfg[key]
        if val is None:
            continue
        if isinstance(val, (tuple, list)):
            text = ",".join(repr(v) if isinstance(v, float) else str(v)
                            for v in val)
        elif isinstance(val, float):
            text = repr(val)
        else:
            text = str(val)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def resolve_config(cmd, file_entries, flag_entries):
    """defaults < config file < flags; unknown keys are errors."""
    schema = SCHEMAS[cmd]
    cfg = {k: spec["default"] for k, spec in schema.items()}
    for key, raw in file_entries.items():
        if key not in schema:
            raise ConfigError(f"{cmd}: unknown config key '{key}'")
        cfg[key] = _coerce(cmd, key, raw, schema[key])
    for key, raw in flag_entries.items():
        if raw is None:
            continue
        cfg[key] = _coerce(cmd, key, raw, schema[key])
    return cfg


def _json_value(v):
    if isinstance(v, tuple):
        return list(v)
    return v


def _report(cmd, cfg, results, max_deviations, passed):
    return {
        "tool_version": __version__,
        "command": cmd,
        "resolved_config": {k: _json_value(v) for k, v in cfg.items()},
        "results": results,
        "max_deviations": max_deviations,
        "pass": bool(passed),
    }


def json_text(report):
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# spectrum

def _spectrum_tolerances(method, n_res, p, cfg):
    scale = p.hbar ** 2 / p.R ** 2
    tol = cfg["tolerance"]
    ctol = cfg["cluster_tol"]
    if tol is None:
        if method == "sector":
            tol = 1e-8 * scale
        elif n_res >= 2:
            tol = 1e-4 * scale      # Richardson-extrapolated dense route
        else:
            tol = 5e-2 * scale      # raw single-resolution dense/iterative
    if ctol is None:
        ctol = (1e-6 if method == "sector" else 1e-2) * scale
    return float(tol), float(ctol)


def run_spectrum(cfg):
    if cfg["dim"] not in (2, 3, 4):
        raise ConfigError(
            f"unsupported dimension {cfg['dim']}; the grid assembler covers "
            "D = 2, 3, 4")
    p = ModelParams(D=cfg["dim"], R=cfg["radius"], hbar=cfg["hbar"])
    ref_clusters = reference_spectrum(p.D, cfg["levels"] - 1, p)
    ref_eigs = reference_eigenvalues(p.D, cfg["levels"] - 1, p)
    k = len(ref_eigs)
    res_list = list(cfg["res"])
    if not res_list:
        raise ConfigError("spectrum: 'res' needs at least one resolution")
    method = cfg["method"]
    if method == "auto":
        method = "dense" if len(res_list) > 1 else "sector"
    tol, cluster_tol = _spectrum_tolerances(method, len(res_list), p, cfg)
    cfg = dict(cfg, method=method, tolerance=tol, cluster_tol=cluster_tol)

    per_res = []
    route = method
    err_estimates = None
    if method == "sector":
        result = sector_spectrum(p, max(res_list), k, cluster_tol=cluster_tol)
        values = result.eigenvalues
    elif method == "iterative":
        # single-vector Krylov resolves degenerate copies only through
        # rounding noise, so compare leading distinct values, not counts
        op = assemble(SpectralGrid.build(p, max(res_list)))
        result = compute_spectrum(op, k, method="iterative",
                                  seed=cfg["seed"], cluster_tol=cluster_tol)
        values = result.eigenvalues
    else:
        raws = []
        for r in res_list:
            op = assemble(SpectralGrid.build(p, r))
            raw = compute_spectrum(op, k, method="dense")
            raws.append(raw)
            per_res.append({
                "res": r,
                "max_raw_deviation":
                    float(np.max(np.abs(raw.eigenvalues - ref_eigs))),
            })
        if len(raws) >= 2:
            values, errs, flags = extrapolate(raws)
            err_estimates = [float(e) for e in errs]
            route = "dense+extrapolation"
        else:
            values = raws[-1].eigenvalues
        result = SpectrumResult(
            eigenvalues=np.sort(values),
            clusters=cluster_eigenvalues(values, cluster_tol),
            meta={"route": route, "res": res_list, "D": p.D, "R": p.R,
                  "hbar": p.hbar, "scale": p.hbar ** 2 / p.R ** 2,
                  "cluster_tol": cluster_tol},
        )
        values = result.eigenvalues

    clusters = result.clusters
    distinct_only = bool(result.meta.get("distinct_only", False))
    if distinct_only:
        pattern_ok = len(clusters) >= len(ref_clusters)
        clusters = clusters[: len(ref_clusters)]
    else:
        pattern_ok = (len(clusters) == len(ref_clusters)
                      and all(c[1] == rc[1]
                              for c, rc in zip(clusters, ref_clusters)))
    value_dev = (max(abs(c[0] - rc[0]) for c, rc in zip(clusters, ref_clusters))
                 if pattern_ok else float("inf"))
    e0 = float(values[0])
    e0_tol = cfg["e0_tol"] * p.hbar ** 2 / p.R ** 2
    passed = pattern_ok and value_dev <= tol and abs(e0) <= e0_tol

    results = {
        "route": route,
        "eigenvalues": [float(v) for v in values],
        "clusters": [[float(v), int(m)] for v, m in clusters],
        "reference_clusters": [[float(v), int(m)] for v, m in ref_clusters],
        "pattern_matches": bool(pattern_ok),
        "distinct_only": distinct_only,
        "ground_state": e0,
    }
    if per_res:
        results["per_res"] = per_res
    if err_estimates is not None:
        results["extrapolation_error_estimates"] = err_estimates
    max_dev = {
        "cluster_value": (None if value_dev == float("inf")
                          else float(value_dev)),
        "ground_state": abs(e0),
    }
    return ((0 if passed else 1),
            _report("spectrum", cfg, results, max_dev, passed),
            spectrum_csv_text(result))


# ---------------------------------------------------------------------------
# check suites

def _ball_samples(p, n, seed, shell=0.9):
    """Reduced-chart points in the ball |x| <= shell R, plus their angles."""
    rng = np.random.default_rng(seed)
    d = p.D - 1
    dirs = rng.standard_normal((n, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = shell * p.R * rng.random(n) ** (1.0 / d)
    pts = dirs * radii[:, None]
    angles = np.array([to_hyperspherical(lift(x, p), p)[1] for x in pts])
    return pts, angles


def _harmonic_family(p, lmax):
    out = []
    for l in range(lmax + 1):
        for h in harmonic_polynomials(p.D, l):
            out.append((l, h))
    return out


def suite_chart_equivalence(p, lmax, samples, seed):
    """H applied in the reduced and hyperspherical charts must agree."""
    pts, angles = _ball_samples(p, samples, seed)
    cart = OperatorTag("H_cart", route="laplace_beltrami")
    curv = OperatorTag("H_curv")
    scale = p.hbar ** 2 / p.R ** 2
    worst = 0.0
    family = _harmonic_family(p, lmax)
    for l, h in family:
        f_red = pullback_to_reduced(h, p)
        f_ang = pullback_to_hyperspherical(h, p)
        a = apply_operator(cart, f_red, pts, p)
        b = apply_operator(curv, f_ang, angles, p)
        ref = max(float(np.max(np.abs(b))), scale)
        worst = max(worst, float(np.max(np.abs(a - b))) / ref)
    return {"family_size": len(family), "points": samples,
            "max_relative_deviation": worst}, worst


def suite_angular_momentum(p, lmax, samples, seed):
    """sum_{a<b} L_ab^2 / (2 R^2) must reproduce H on the reduced chart."""
    pts, _ = _ball_samples(p, samples, seed)
    l2 = OperatorTag("L2")
    cart = OperatorTag("H_cart", route="laplace_beltrami")
    scale = p.hbar ** 2 / p.R ** 2
    worst = 0.0
    family = _harmonic_family(p, lmax)
    for l, h in family:
        f = pullback_to_reduced(h, p)
        a = apply_operator(l2, f, pts, p)
        b = apply_operator(cart, f, pts, p)
        ref = max(float(np.max(np.abs(b))), scale)
        worst = max(worst, float(np.max(np.abs(a - b))) / ref)
    return {"family_size": len(family), "points": samples,
            "max_relative_deviation": worst}, worst


def _midpoint_angular_grid(p, res):
    """Tensor angular grid with midpoint polar nodes and uniform azimuth.

    Every integrand the hermiticity suite meets is a trig polynomial once
    the sin^{D-1-i} measure factors are folded into the weights, and the
    midpoint offset keeps all nodes away from the removable pole
    singularities of the momentum operators, so these sums are exact.
    """
    axes_nodes, axes_w = [], []
    for i in range(1, p.D - 1):
        nodes = (np.arange(res) + 0.5) * math.pi / res
        axes_nodes.append(nodes)
        axes_w.append((math.pi / res) * np.sin(nodes) ** (p.D - 1 - i))
    axes_nodes.append(np.arange(res) * 2.0 * math.pi / res)
    axes_w.append(np.full(res, 2.0 * math.pi / res))
    mesh = np.meshgrid(*axes_nodes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    w = np.ones(pts.shape[0]) * p.R ** (p.D - 1)
    for wm in np.meshgrid(*axes_w, indexing="ij"):
        w = w * wm.ravel()
    return pts, w


def _reduced_sphere_defect(tag, h1, h2, p, spec):
    """Normalized hermiticity defect over the sphere via both hemisphere lifts.

    The reduced chart covers half the sphere; equator boundary terms only
    cancel in the sum of the two lifts, which is the honest statement of
    hermiticity for this chart.
    """
    pts, w = reduced_ball_grid(p, spec.res)
    env = {n: pts[:, i] for i, n in enumerate(reduced_var_names(p))}
    n = len(w)
    lhs = rhs = 0.0
    nf = ng = 0.0
    for hemi in (1, -1):
        f = pullback_to_reduced(h1, p, hemisphere=hemi)
        g = pullback_to_reduced(h2, p, hemisphere=hemi)
        fv = np.broadcast_to(ex.evaluate(f.expr, env), n)
        gv = np.broadcast_to(ex.evaluate(g.expr, env), n)
        tf = np.broadcast_to(ex.evaluate(operator_expr(tag, f, p), env), n)
        tg = np.broadcast_to(ex.evaluate(operator_expr(tag, g, p), env), n)
        lhs = lhs + np.sum(w * np.conjugate(fv) * tg)
        rhs = rhs + np.sum(w * np.conjugate(tf) * gv)
        nf += float(np.sum(w * fv * fv))
        ng += float(np.sum(w * gv * gv))
    return abs(lhs - rhs) / math.sqrt(nf * ng)


def _angular_sphere_defect(tag, h1, h2, p, res):
    pts, w = _midpoint_angular_grid(p, res)
    env = {n: pts[:, i] for i, n in enumerate(hyperspherical_var_names(p))}
    n = len(w)
    f = pullback_to_hyperspherical(h1, p)
    g = pullback_to_hyperspherical(h2, p)
    fv = np.broadcast_to(ex.evaluate(f.expr, env), n)
    gv = np.broadcast_to(ex.evaluate(g.expr, env), n)
    tf = np.broadcast_to(ex.evaluate(operator_expr(tag, f, p), env), n)
    tg = np.broadcast_to(ex.evaluate(operator_expr(tag, g, p), env), n)
    lhs = np.sum(w * np.conjugate(fv) * tg)
    rhs = np.sum(w * np.conjugate(tf) * gv)
    nf = float(np.sum(w * fv * fv))
    ng = float(np.sum(w * gv * gv))
    return abs(lhs - rhs) / math.sqrt(nf * ng)


def suite_hermiticity(p, res, seed):
    """<f, T h> = <T f, h> under the sphere measure for H and every pi.

    The displayed-convention curvilinear momentum is reported but excluded
    from the pass criterion; it is documented as non-hermitian.
    """
    spec = QuadratureSpec(res=res)
    harmonics = [harmonic_polynomials(p.D, l)[0] for l in (1, 2, 3)]
    # pi_cart is symmetric on functions vanishing at the chart edge (the
    # equator); x_D^2 damping puts the test pair in that domain and keeps
    # the rational (R^2-|x|^2)^{-1} factor of the operator polynomial
    xd2 = ex.mul(ex.Var(f"x{p.D}"), ex.Var(f"x{p.D}"))
    damped = [ex.mul(xd2, h) for h in harmonics]
    pairs = [(0, 1), (0, 2), (1, 2)]
    tags_reduced = [("H_cart", OperatorTag("H_cart", route="laplace_beltrami"))]
    tags_angular = [("H_curv", OperatorTag("H_curv"))]
    tags_angular += [(f"pi_curv_{i}", OperatorTag("pi_curv", i=i))
                     for i in range(1, p.D)]
    rows = []
    worst = 0.0
    for name, tag in tags_reduced:
        for a, b in pairs:
            d = _reduced_sphere_defect(tag, harmonics[a], harmonics[b], p, spec)
            rows.append({"operator": name, "pair": f"l{a + 1},l{b + 1}",
                         "defect": float(d)})
            worst = max(worst, float(d))
    for i in range(1, p.D):
        tag = OperatorTag("pi_cart", i=i)
        for a, b in pairs:
            d = _reduced_sphere_defect(tag, damped[a], damped[b], p, spec)
            rows.append({"operator": f"pi_cart_{i}",
                         "pair": f"xD^2 l{a + 1},l{b + 1}",
                         "defect": float(d)})
            worst = max(worst, float(d))
    for name, tag in tags_angular:
        for a, b in pairs:
            d = _angular_sphere_defect(tag, harmonics[a], harmonics[b], p, res)
            rows.append({"operator": name, "pair": f"l{a + 1},l{b + 1}",
                         "defect": float(d)})
            worst = max(worst, float(d))
    # deliberately non-hermitian control, excluded from the max; the pair is
    # picked so no parity accident hides the defect
    displayed = OperatorTag("pi_curv", i=1, convention="displayed")
    deg1 = harmonic_polynomials(p.D, 1)
    deg2 = harmonic_polynomials(p.D, 2)
    control = _angular_sphere_defect(displayed, deg1[min(2, len(deg1) - 1)],
                                     deg2[min(1, len(deg2) - 1)], p, res)
    return {"rows": rows, "max_defect": worst,
            "displayed_convention_defect": float(control)}, worst


def _jacobi_deviation(p, samples, seed):
    """Cyclic sum of nested brackets over a mixed observable triple."""
    xnames, pnames = embedded_phase_vars(p)
    A = Observable(ex.Var(xnames[0]), PHASE_EMBEDDED)
    B = Observable(ex.Var(pnames[1]), PHASE_EMBEDDED)
    C = Observable(ex.mul(ex.Var(xnames[2]), ex.Var(pnames[0])), PHASE_EMBEDDED)
    def nest(f, g, h):
        inner = Observable(dirac_bracket_expr(g, h, p), PHASE_CANONICAL)
        return dirac_bracket_expr(f, inner, p)
    total = ex.add(nest(A, B, C), nest(B, C, A), nest(C, A, B))
    qs, ps = dynamics._random_canonical_points(p, samples, seed)
    angles, moms = dynamics.canonical_phase_vars(p)
    env = {n: qs[:, i] for i, n in enumerate(angles)}
    env.update({n: ps[:, i] for i, n in enumerate(moms)})
    vals = np.broadcast_to(ex.evaluate(total, env), samples)
    return float(np.max(np.abs(vals)))


def _antisymmetry_exact(p, samples, seed):
    """{A,B} + {B,A} must vanish bitwise, not merely to rounding."""
    xnames, pnames = embedded_phase_vars(p)
    obs = [Observable(ex.Var(xnames[0]), PHASE_EMBEDDED),
           Observable(ex.Var(pnames[2]), PHASE_EMBEDDED),
           Observable(ex.mul(ex.Var(xnames[1]), ex.Var(pnames[1])),
                      PHASE_EMBEDDED)]
    qs, ps = dynamics._random_canonical_points(p, samples, seed)
    angles, moms = dynamics.canonical_phase_vars(p)
    env = {n: qs[:, i] for i, n in enumerate(angles)}
    env.update({n: ps[:, i] for i, n in enumerate(moms)})
    ok = True
    for a in range(len(obs)):
        for b in range(a + 1, len(obs)):
            fwd = np.broadcast_to(
                ex.evaluate(dirac_bracket_expr(obs[a], obs[b], p), env), samples)
            rev = np.broadcast_to(
                ex.evaluate(dirac_bracket_expr(obs[b], obs[a], p), env), samples)
            ok = ok and bool(np.all(fwd == -rev))
    return ok


def suite_dirac_brackets(p, samples, seed):
    report = bracket_check_report(p, samples=samples, seed=seed)
    report["antisymmetry_exact"] = _antisymmetry_exact(p, samples, seed)
    report["jacobi_max_deviation"] = _jacobi_deviation(p, samples, seed)
    return report, float(report["max_deviation"])


_SUITE_DEFAULTS = {
    # suite -> (default samples, default tolerance)
    "chart-equivalence": (100, 1e-10),
    "angular-momentum": (100, 1e-10),
    "hermiticity": (None, 1e-8),
    "dirac-brackets": (1000, 1e-10),
}


def run_check(cfg):
    suite = cfg["suite"]
    if suite is None:
        raise ConfigError("check: no suite selected (positional argument "
                          f"or 'suite' config key; one of {', '.join(CHECK_SUITES)})")
    default_samples, default_tol = _SUITE_DEFAULTS[suite]
    samples = cfg["samples"] if cfg["samples"] is not None else default_samples
    tol = cfg["tolerance"] if cfg["tolerance"] is not None else default_tol
    cfg = dict(cfg, samples=samples, tolerance=tol)
    p = ModelParams(D=cfg["dim"], R=cfg["radius"], hbar=cfg["hbar"])

    if suite == "chart-equivalence":
        results, worst = suite_chart_equivalence(p, cfg["lmax"], samples,
                                                 cfg["seed"])
    elif suite == "angular-momentum":
        results, worst = suite_angular_momentum(p, cfg["lmax"], samples,
                                                cfg["seed"])
    elif suite == "hermiticity":
        results, worst = suite_hermiticity(p, cfg["res"], cfg["seed"])
    else:
        results, worst = suite_dirac_brackets(p, samples, cfg["seed"])
        if not results["antisymmetry_exact"]:
            worst = float("inf")

    passed = worst <= tol
    if suite == "dirac-brackets":
        passed = passed and results["jacobi_max_deviation"] <= 1e-9
    results["suite"] = suite
    max_dev = {"deviation": (None if worst == float("inf") else float(worst))}
    return ((0 if passed else 1),
            _report("check", cfg, results, max_dev, passed),
            _kv_csv_text(results))


def _kv_csv_text(results, prefix=""):
    """Flatten numeric/boolean leaves of a results dict into metric,value rows."""
    lines = ["metric,value"] if not prefix else []
    def walk(obj, path):
        if isinstance(obj, dict):
            for key in obj:
                walk(obj[key], f"{path}.{key}" if path else str(key))
        elif isinstance(obj, (list, tuple)):
            for i, item in enumerate(obj):
                walk(item, f"{path}[{i}]")
        elif isinstance(obj, bool):
            lines.append(f"{path},{obj}")
        elif isinstance(obj, (int, float)):
            lines.append(f"{path},{repr(float(obj)) if isinstance(obj, float) else obj}")
        elif isinstance(obj, str):
            lines.append(f"{path},{obj}")
    walk(results, prefix)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# classical

def run_classical(cfg):
    p = ModelParams(D=cfg["dim"], R=cfg["radius"])
    try:
        s0 = PhaseState(chart=PHASE_REDUCED, q=np.array(cfg["q0"]),
                        p=np.array(cfg["p0"])).validate(p)
    except (ChartDomainError, ValueError) as err:
        raise ConfigError(f"classical: bad initial state: {err}") from None
    T, dt = cfg["duration"], cfg["dt"]
    try:
        traj = integrate_reduced(s0, T, dt, p, margin=cfg["margin"])
    except ChartMarginError as err:
        results = {"chart_margin_exit_time": float(err.time),
                   "margin": cfg["margin"]}
        return (4, _report("classical", cfg, results,
                           {"deviation": None}, False), None)

    x0, v0 = embedded_from_reduced(s0, p)
    oracle = integrate_embedded_oracle(x0, v0, T, dt, p)

    lift_x = np.empty((len(traj), p.D))
    lift_v = np.empty((len(traj), p.D))
    for i, s in enumerate(traj):
        lift_x[i], lift_v[i] = embedded_from_reduced(s, p)
    sup = float(np.max(np.abs(lift_x - oracle.q)))

    drift = {}
    for name, tr_q, tr_v in (("reduced_lifted", lift_x, lift_v),
                             ("embedded_oracle", oracle.q, oracle.p)):
        series = conserved_series(
            dynamics.Trajectory(PHASE_EMBEDDED, traj.times, tr_q, tr_v), p)
        e = series["energy"]
        drift_e = float(np.max(np.abs(e - e[0])))
        L = series["L"]
        drift_l = float(np.max(np.abs(L - L[0])))
        drift[name] = {"energy": drift_e, "angular_momentum": drift_l}
    worst_drift = max(v for d in drift.values() for v in d.values())

    radial = np.abs(np.sum(oracle.q * oracle.q, axis=1) - p.R ** 2)
    tangent = np.abs(np.sum(oracle.q * oracle.p, axis=1))

    passed = sup <= cfg["sup_tol"] and worst_drift <= cfg["conserve_tol"]
    results = {
        "steps": len(traj) - 1,
        "sup_position_deviation": sup,
        "conservation_drift": drift,
        "oracle_constraint_max": {"radial": float(np.max(radial)),
                                  "tangent": float(np.max(tangent))},
        "final_state": {"t": float(traj.times[-1]),
                        "q": [float(v) for v in traj.q[-1]],
                        "p": [float(v) for v in traj.p[-1]]},
    }
    max_dev = {"sup_position": sup, "conservation": worst_drift}
    return ((0 if passed else 1),
            _report("classical", cfg, results, max_dev, passed),
            trajectory_csv_text(traj, p))


# ---------------------------------------------------------------------------
# pathintegral

def run_pathintegral(cfg):
    if cfg["r_min"] >= cfg["r_max"]:
        raise ConfigError("pathintegral: need r_min < r_max")
    if not (cfg["r_min"] <= cfg["r_eval_min"] < cfg["r_eval_max"] <= cfg["r_max"]):
        raise ConfigError("pathintegral: evaluation window must sit inside "
                          "[r_min, r_max]")
    p = ModelParams(D=2, R=1.0, hbar=cfg["hbar"])
    grid = RadialGrid(cfg["r_min"], cfg["r_max"], cfg["nodes"])
    family = default_probe_family(grid)
    r_samples = np.linspace(cfg["r_eval_min"], cfg["r_eval_max"],
                            cfg["r_eval_count"])
    prescription = {"naive": NAIVE_POLAR,
                    "corrected": CORRECTED_POLAR}[cfg["prescription"]]
    try:
        table = extract_effective_potential(
            family, r_samples, cfg["eps_list"], p,
            midpoint_rule=cfg["midpoint_rule"], prescription=prescription)
    except KernelWidthError as err:
        raise ConfigError(f"pathintegral: {err}") from None

    coeff = 1.0 + table.relative_error  # 8 r^2 dV / hbar^2
    results = potential_json_dict(table)
    if prescription == NAIVE_POLAR:
        dev = float(np.max(np.abs(coeff - 1.0)))
        results["coefficient_fit"] = {
            "mean": float(np.mean(coeff)),
            "min": float(np.min(coeff)),
            "max": float(np.max(coeff)),
        }
        passed = dev <= cfg["fit_tol"]
        max_dev = {"coefficient": dev}
    else:
        # corrected kernel: residual relative to the hbar^2/(8 r^2) scale
        rel = float(np.max(np.abs(table.delta_v / table.predicted)))
        results["residual_relative_max"] = rel
        passed = rel <= cfg["corrected_tol"]
        max_dev = {"residual_relative": rel}
    return ((0 if passed else 1),
            _report("pathintegral", cfg, results, max_dev, passed),
            potential_csv_text(table))


# ---------------------------------------------------------------------------
# argument parsing and dispatch

_RUNNERS = {
    "spectrum": run_spectrum,
    "check": run_check,
    "classical": run_classical,
    "pathintegral": run_pathintegral,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rotorkit",
        description="Cross-validation toolkit for the quantized particle "
                    "on a (D-1)-sphere.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "spectrum": "eigenvalues of the sphere Hamiltonian vs the exact ladder",
        "check": "operator and bracket identity suites",
        "classical": "reduced vs embedded geodesic integration",
        "pathintegral": "time-slicing effective potential extraction",
    }
    for cmd, schema in SCHEMAS.items():
        sp = sub.add_parser(cmd, help=helps[cmd])
        if cmd == "check":
            sp.add_argument("suite_pos", nargs="?", metavar="SUITE",
                            choices=CHECK_SUITES,
                            help="one of: " + ", ".join(CHECK_SUITES))
        for key, spec in schema.items():
            sp.add_argument(f"--{key.replace('_', '-')}", dest=f"cfg_{key}",
                            default=None, metavar="V", help=spec["help"])
        sp.add_argument("--config", default=None, metavar="PATH",
                        help="key = value file; flags override it")
        sp.add_argument("--out", default=None, metavar="PATH",
                        help="write the payload here instead of stdout")
        sp.add_argument("--format", default="json", choices=("json", "csv"),
                        help="payload format (errors always emit json)")
        sp.add_argument("--quiet", action="store_true",
                        help="suppress the stderr status line")
    return parser


def _emit(payload, out_path, quiet, status):
    if out_path is not None:
        with open(out_path, "w") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)
    if not quiet:
        print(status, file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    cmd = args.command
    try:
        file_entries = {}
        if args.config is not None:
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as err:
                raise ConfigError(f"cannot read config file: {err}") from None
            file_entries = parse_config_text(text)
        flag_entries = {k[len("cfg_"):]: v for k, v in vars(args).items()
                        if k.startswith("cfg_")}
        if cmd == "check" and getattr(args, "suite_pos", None) is not None:
            flag_entries["suite"] = args.suite_pos
        cfg = resolve_config(cmd, file_entries, flag_entries)
        code, report, csv_payload = _RUNNERS[cmd](cfg)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (NonConvergenceError, StepConvergenceError,
            QuadratureConvergenceError) as err:
        payload = json_text({"tool_version": __version__, "command": cmd,
                             "error": str(err),
                             "error_kind": "non_convergence", "pass": False})
        _emit(payload, args.out, args.quiet, f"non-convergence: {err}")
        return 3
    if code == 4:
        _emit(json_text(report), args.out, args.quiet,
              "chart margin exceeded at t = "
              f"{report['results']['chart_margin_exit_time']:.6g}")
        return 4
    payload = (json_text(report) if args.format == "json" or csv_payload is None
               else csv_payload)
    status = "pass" if code == 0 else "tolerance exceeded"
    worst = report.get("max_deviations", {})
    if worst:
        shown = {k: v for k, v in worst.items() if v is not None}
        if shown:
            status += " (" + ", ".join(f"{k}={v:.3g}" for k, v in shown.items()) + ")"
    _emit(payload, args.out, args.quiet, status)
    return code


if __name__ == "__main__":
    sys.exit(main())
