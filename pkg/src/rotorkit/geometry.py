"""Charts and metric algebra for the (D-1)-sphere of radius R in R^D.

Three charts are used throughout the package:

* ``embedded``       -- all D cartesian coordinates, |x| = R.
* ``reduced``        -- the first D-1 cartesian coordinates on the open upper
                        hemisphere x_D > 0; the constraint is solved as
                        x_D = sqrt(R^2 - |x|^2).
* ``hyperspherical`` -- polar angles phi_1..phi_{D-2} in (0, pi) and an
                        azimuth phi_{D-1} in [0, 2pi), with
                        x_D = r cos phi_1, x_{D-1} = r sin phi_1 cos phi_2, ...
                        x_1 = r sin phi_1 ... sin phi_{D-2} sin phi_{D-1}.

The induced metric in the reduced chart is
g_ij = delta_ij + x_i x_j / (R^2 - |x|^2), with inverse
g^ij = delta_ij - x_i x_j / R^2 and determinant R^2 / (R^2 - |x|^2).
All matrix functions accept a single point of shape (D-1,) or a batch of
shape (n, D-1) and are pure.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelParams", "ChartPoint", "ChartDomainError", "PoleSingularityError",
    "CHART_EMBEDDED", "CHART_REDUCED", "CHART_HYPERSPHERICAL",
    "metric", "inverse_metric", "metric_determinant", "lift",
    "to_hyperspherical", "from_hyperspherical", "curvilinear_inverse_metric",
    "sphere_area",
]

CHART_EMBEDDED = "embedded"
CHART_REDUCED = "reduced"
CHART_HYPERSPHERICAL = "hyperspherical"

_ANGLE_CLAMP_TOL = 1e-13  # slack allowed when clamping arccos arguments


class ChartDomainError(ValueError):
    """Point lies outside the open domain of the requested chart."""


class PoleSingularityError(ValueError):
    """Angle recovery hit sin(phi_k) = 0; carries the offending angle index."""

    def __init__(self, angle_index, message=None):
        self.angle_index = angle_index
        super().__init__(message or f"coordinate singularity at angle phi_{angle_index}")


@dataclass(frozen=True)
class ModelParams:
    """Physical constants: embedding dimension D, radius R, hbar.

    tol_constraint is the acceptance tolerance for the embedded-chart
    invariant |x|^2 = R^2 (integrator drift checks need the knob).
    """

    D: int
    R: float = 1.0
    hbar: float = 1.0
    tol_constraint: float = 1e-10

    def __post_init__(self):
        if not (isinstance(self.D, (int, np.integer)) and 2 <= self.D <= 10):
            raise ValueError(f"D must be an integer in [2, 10], got {self.D}")
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")


@dataclass(frozen=True)
class ChartPoint:
    chart: str
    coords: tuple

    def validate(self, p):
        c = np.asarray(self.coords, dtype=float)
        if self.chart == CHART_EMBEDDED:
            if c.shape != (p.D,):
                raise ChartDomainError(f"embedded point needs {p.D} coordinates")
            if abs(c @ c - p.R ** 2) > p.tol_constraint:
                raise ChartDomainError("embedded point violates |x|^2 = R^2")
        elif self.chart == CHART_REDUCED:
            if c.shape != (p.D - 1,):
                raise ChartDomainError(f"reduced point needs {p.D - 1} coordinates")
            if c @ c >= p.R ** 2:
                raise ChartDomainError("reduced point must satisfy |x|^2 < R^2")
        elif self.chart == CHART_HYPERSPHERICAL:
            if c.shape != (p.D - 1,):
                raise ChartDomainError(f"hyperspherical point needs {p.D - 1} angles")
            for k in range(p.D - 2):
                if not (0.0 < c[k] < math.pi):
                    raise ChartDomainError(f"polar angle phi_{k + 1} must lie in (0, pi)")
            if not (0.0 <= c[-1] < 2 * math.pi):
                raise ChartDomainError("azimuth must lie in [0, 2pi)")
        else:
            raise ChartDomainError(f"unknown chart '{self.chart}'")
        return self


def _check_ball(x, p):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.D - 1:
        raise ChartDomainError(f"expected {p.D - 1} reduced coordinates, got {x.shape[-1]}")
    s = np.sum(x * x, axis=-1)
    if np.any(s >= p.R ** 2):
        raise ChartDomainError("point outside the open chart ball |x|^2 < R^2")
    return x, s


def metric(x, p):
    """Reduced metric g_ij = delta_ij + x_i x_j / (R^2 - |x|^2)."""
    x, s = _check_ball(x, p)
    eye = np.eye(p.D - 1)
    outer = x[..., :, None] * x[..., None, :]
    return eye + outer / (p.R ** 2 - s)[..., None, None]


def inverse_metric(x, p):
    """Inverse reduced metric g^ij = delta_ij - x_i x_j / R^2."""
    x, _ = _check_ball(x, p)
    eye = np.eye(p.D - 1)
    outer = x[..., :, None] * x[..., None, :]
    return eye - outer / p.R ** 2


def metric_determinant(x, p):
    """Closed-form determinant R^2 / (R^2 - |x|^2) of the reduced metric."""
    _, s = _check_ball(x, p)
    return p.R ** 2 / (p.R ** 2 - s)


def lift(x, p):
    """Map reduced coordinates to the embedded chart: append sqrt(R^2 - |x|^2)."""
    x, s = _check_ball(x, p)
    xd = np.sqrt(p.R ** 2 - s)
    return np.concatenate([x, xd[..., None]], axis=-1)


def from_hyperspherical(r, angles, p):
    """Angles (shape (..., D-1)) to embedded cartesian coordinates.

    Ordering: x_D = r cos phi_1, each later coordinate picks up one more sine,
    and the last pair is x_2 = r (prod sin) cos phi_{D-1},
    x_1 = r (prod sin) sin phi_{D-1}.
    """
    angles = np.asarray(angles, dtype=float)
    if angles.shape[-1] != p.D - 1:
        raise ChartDomainError(f"expected {p.D - 1} angles, got {angles.shape[-1]}")
    out = np.empty(angles.shape[:-1] + (p.D,))
    sin_chain = np.asarray(r, dtype=float)
    for k in range(p.D - 2):
        out[..., p.D - 1 - k] = sin_chain * np.cos(angles[..., k])
        sin_chain = sin_chain * np.sin(angles[..., k])
    out[..., 1] = sin_chain * np.cos(angles[..., p.D - 2])
    out[..., 0] = sin_chain * np.sin(angles[..., p.D - 2])
    return out


def to_hyperspherical(x, p):
    """Embedded point to (r, angles); raises PoleSingularityError off-chart.

    Polar angles come from arc-cosines of cumulative radii; arguments are
    clamped to [-1, 1] with a 1e-13 slack so rounding cannot produce domain
    errors.  The azimuth uses atan2 and is reduced to [0, 2pi).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (p.D,):
        raise ChartDomainError(f"expected {p.D} embedded coordinates")
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise PoleSingularityError(1, "origin has no angular coordinates")
    angles = np.empty(p.D - 1)
    tail = r  # sqrt(x_1^2 + ... + x_{D-k}^2), shrinking as angles peel off
    for k in range(p.D - 2):
        c = x[p.D - 1 - k] / tail
        if abs(c) > 1.0 + _ANGLE_CLAMP_TOL:
            raise ChartDomainError("inconsistent cumulative radius")
        c = min(1.0, max(-1.0, c))
        angles[k] = math.acos(c)
        tail = tail * math.sin(angles[k])
        if tail == 0.0:
            raise PoleSingularityError(k + 2, f"sin phi_{k + 1} = 0 leaves phi_{k + 2} undetermined")
    az = math.atan2(x[0], x[1])
    angles[p.D - 2] = az if az >= 0 else az + 2 * math.pi
    return r, angles


def curvilinear_inverse_metric(angles, p):
    """Inverse metric on the sphere in hyperspherical angles.

    diag(1, 1/sin^2 phi_1, 1/(sin^2 phi_1 sin^2 phi_2), ...) / R^2.
    """
    angles = np.asarray(angles, dtype=float)
    if angles.shape != (p.D - 1,):
        raise ChartDomainError(f"expected {p.D - 1} angles")
    diag = np.empty(p.D - 1)
    chain = 1.0
    for k in range(p.D - 1):
        diag[k] = chain
        if k < p.D - 2:
            sk = math.sin(angles[k])
            if sk == 0.0:
                raise PoleSingularityError(k + 1)
            chain = chain / sk ** 2
    return np.diag(diag / p.R ** 2)


def sphere_area(D, R):
    """Surface measure of the (D-1)-sphere of radius R: 2 pi^{D/2} R^{D-1} / Gamma(D/2)."""
    return 2.0 * math.pi ** (D / 2) / math.gamma(D / 2) * R ** (D - 1)
