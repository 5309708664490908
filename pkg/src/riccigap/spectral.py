"""Spectral gaps of discretized reversible generators on the circle and on
zonal spheres, and every curvature-based lower bound evaluated on the same
problem.

All gaps and bounds are reported for the generator normalization
L = (1/2)(Laplacian - grad(phi).grad); classical formulas stated for the
full Laplacian are rescaled by the caller (the report pipeline does this).

Discretization is in divergence form on a half-cell-offset grid, which
makes the operator exactly self-adjoint for the discrete reversible
weights and second-order accurate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import (
    DegenerateSpectrumError,
    DimensionMismatchError,
    DimensionOneError,
    GridTooCoarseError,
    InputError,
    NonPositiveCurvatureError,
)
from .fields import DiffusionSpec, ZonalPolynomial
from .manifolds import SPHERE, ModelManifold

_GAP_ZERO_TOL = 1e-8  # relative threshold identifying the constant mode


@dataclass(frozen=True, eq=False)
class DiscretizedOperator:
    """Grid generator with its reversible weights.

    kind: "s1" (uniform angle grid) or "s2-zonal" / "s2-azimuthal"
    (half-cell colatitude grid with sin(theta) weights).  matrix rows sum
    to zero (exactly, up to roundoff) except for the azimuthal sector,
    which carries a positive diagonal angular-momentum term; weights are
    the discrete reversible measure, normalized to total mass one.
    """

    kind: str
    radius: float
    theta: np.ndarray
    matrix: np.ndarray
    weights: np.ndarray
    potential: ZonalPolynomial

    @property
    def size(self) -> int:
        return self.theta.size


def _validate(op: DiscretizedOperator, zero_rows: bool = True) -> DiscretizedOperator:
    scale = float(np.abs(op.matrix).max())
    if zero_rows:
        rowsum = float(np.abs(op.matrix.sum(axis=1)).max())
        if rowsum > 1e-10 * max(scale, 1.0):
            raise GridTooCoarseError(f"row sums {rowsum:.3e} exceed tolerance")
    sym = op.weights[:, None] * op.matrix
    asym = float(np.abs(sym - sym.T).max())
    if asym > 1e-8 * max(float(np.abs(sym).max()), 1.0):
        raise GridTooCoarseError(f"weighted symmetry residual {asym:.3e} exceeds tolerance")
    return op


def discretize_s1(potential: ZonalPolynomial, m: int, radius: float = 1.0) -> DiscretizedOperator:
    """L = (1/(2 r^2)) e^{phi} d/dth (e^{-phi} d/dth) on the circle,
    periodic uniform grid."""
    if m < 16:
        raise GridTooCoarseError("need at least 16 grid points")
    h = 2.0 * math.pi / m
    theta = h * np.arange(m)
    half = theta + 0.5 * h
    b = np.exp(-potential.value(half))        # conductances at i+1/2
    phi_i = potential.value(theta)
    L = np.zeros((m, m))
    idx = np.arange(m)
    nxt = (idx + 1) % m
    coef = 1.0 / (2.0 * radius**2 * h**2)
    L[idx, nxt] += coef * np.exp(phi_i) * b
    L[nxt, idx] += coef * np.exp(phi_i[nxt]) * b
    L[idx, idx] -= coef * np.exp(phi_i) * (b + np.roll(b, 1))
    w = np.exp(-phi_i)
    w = w / w.sum()
    return _validate(DiscretizedOperator("s1", radius, theta, L, w, potential))


def _zonal_parts(potential: ZonalPolynomial, m: int, radius: float):
    if m < 16:
        raise GridTooCoarseError("need at least 16 grid points")
    h = math.pi / m
    theta = (np.arange(m) + 0.5) * h
    edges = np.arange(m + 1) * h
    c = np.sin(edges) * np.exp(-potential.value(edges))  # conductance at cell edges
    c[0] = 0.0
    c[-1] = 0.0
    phi_i = potential.value(theta)
    sin_i = np.sin(theta)
    coef = 1.0 / (2.0 * radius**2 * h**2)
    L = np.zeros((m, m))
    idx = np.arange(m)
    diag = np.zeros(m)
    up = coef * np.exp(phi_i[:-1]) * c[1:-1] / sin_i[:-1]
    dn = coef * np.exp(phi_i[1:]) * c[1:-1] / sin_i[1:]
    L[idx[:-1], idx[:-1] + 1] = up
    L[idx[1:], idx[1:] - 1] = dn
    diag[:-1] -= up
    diag[1:] -= dn
    L[idx, idx] = diag
    w = sin_i * np.exp(-phi_i)
    w = w / w.sum()
    return theta, L, w


def discretize_zonal(potential: ZonalPolynomial, m: int, radius: float = 1.0) -> DiscretizedOperator:
    """Zonal sector of L = (1/2)(Laplacian - grad(phi).grad) on the
    2-sphere, for colatitude potentials; half-cell grid avoids the poles."""
    theta, L, w = _zonal_parts(potential, m, radius)
    return _validate(DiscretizedOperator("s2-zonal", radius, theta, L, w, potential))


def azimuthal_operator(potential: ZonalPolynomial, m: int, radius: float = 1.0) -> DiscretizedOperator:
    """First angular-momentum sector: the zonal operator plus the
    1/(2 r^2 sin^2 theta) centrifugal diagonal.  Its lowest eigenvalue
    competes with the zonal gap for the full spectral gap."""
    theta, L, w = _zonal_parts(potential, m, radius)
    L = L - np.diag(1.0 / (2.0 * radius**2 * np.sin(theta) ** 2))
    return _validate(DiscretizedOperator("s2-azimuthal", radius, theta, L, w, potential),
                     zero_rows=False)


def discretize(spec: DiffusionSpec, m: int) -> DiscretizedOperator:
    """Discretize a reversible metric-proportional diffusion on the circle
    or the zonal 2-sphere."""
    mf = spec.manifold
    pot = spec.potential or ZonalPolynomial((0.0,))
    if spec.diffusion.constant_inverse_metric not in (1.0, None):
        raise InputError("discretize expects the unit metric-proportional diffusion")
    if mf.kind == SPHERE and mf.dim == 1:
        return discretize_s1(pot, m, mf.radius)
    if mf.kind == SPHERE and mf.dim == 2:
        return discretize_zonal(pot, m, mf.radius)
    raise InputError("discretization is implemented for sphere:1:r and sphere:2:r")


def _sym_eigvals(op: DiscretizedOperator) -> np.ndarray:
    s = np.sqrt(op.weights)
    sym = (s[:, None] * (-op.matrix)) / s[None, :]
    sym = 0.5 * (sym + sym.T)
    return np.linalg.eigvalsh(sym)


def spectral_gap(op: DiscretizedOperator) -> float:
    """Smallest nonzero eigenvalue of -L in the weighted inner product."""
    w = _sym_eigvals(op)
    scale = max(abs(w[-1]), 1.0)
    if abs(w[0]) > _GAP_ZERO_TOL * scale:
        raise DegenerateSpectrumError("no zero mode found (operator does not kill constants)")
    if w.size > 1 and abs(w[1]) <= _GAP_ZERO_TOL * scale:
        raise DegenerateSpectrumError("zero eigenvalue is not simple")
    return float(w[1])


def lowest_eigenvalue(op: DiscretizedOperator) -> float:
    """Ground eigenvalue of -L (for sectors without a constant mode)."""
    return float(_sym_eigvals(op)[0])


def sphere_spectrum(potential: ZonalPolynomial, m: int, radius: float = 1.0,
                    refine: bool = True) -> dict:
    """Spectral gap of the full generator on the 2-sphere with a zonal
    potential: the minimum of the zonal-sector gap and the first azimuthal
    sector's ground eigenvalue.

    With refine=True both candidates are Richardson-extrapolated over
    (m, 2m), removing the O(h^2) discretization error.
    """

    def candidates(mm):
        gz = spectral_gap(discretize_zonal(potential, mm, radius))
        ga = lowest_eigenvalue(azimuthal_operator(potential, mm, radius))
        return gz, ga

    gz, ga = candidates(m)
    if refine:
        gz2, ga2 = candidates(2 * m)
        gz = (4.0 * gz2 - gz) / 3.0
        ga = (4.0 * ga2 - ga) / 3.0
    return {"zonal": gz, "azimuthal": ga, "lambda1": min(gz, ga)}


def s1_spectrum(potential: ZonalPolynomial, m: int, radius: float = 1.0,
                refine: bool = True) -> dict:
    g = spectral_gap(discretize_s1(potential, m, radius))
    if refine:
        g2 = spectral_gap(discretize_s1(potential, 2 * m, radius))
        g = (4.0 * g2 - g) / 3.0
    return {"lambda1": g}


# ---------------------------------------------------------------------------
# lower-bound formulas (stated for the full Laplacian; callers rescale)


def lichnerowicz_bound(n: int, K: float) -> float:
    """n K/(n-1) for Ricci >= K > 0 (generator: full Laplacian)."""
    if n < 2:
        raise DimensionOneError("the dimensional improvement needs n >= 2")
    if K < 0:
        raise NonPositiveCurvatureError("needs a nonnegative Ricci lower bound")
    return n * K / (n - 1)


def chen_wang_bounds(n: int, K: float, D: float) -> list[tuple[str, float]]:
    """Diameter-refined gap bounds (generator: full Laplacian).  Returns the
    applicable (label, value) branches.

    The K >= 0 additive branch carries an explicit factor K on the max(...)
    term; the flat-circle case (K = 0, D = pi, gap 1) forces that reading.
    """
    if n < 1 or D <= 0:
        raise InputError("need n >= 1 and D > 0")
    out = []
    if K >= 0:
        out.append(("additive", math.pi**2 / D**2
                    + max(math.pi / (4 * n), 1 - 2 / math.pi) * K))
        if n > 1:
            arg = min(max(D * math.sqrt(K * (n - 1)) / 2, 0.0), math.pi / 2)
            denom = (n - 1) * (1 - math.cos(arg) ** n)
            if denom > 0:
                out.append(("cosine", n * K / denom))
    if K <= 0:
        out.append(("additive-negative", math.pi**2 / D**2 + (math.pi / 2 - 1) * K))
        if n > 1:
            out.append(("cosh", math.pi**2 * math.sqrt(1 - 2 * D**2 * K / math.pi**4)
                        / (D**2 * math.cosh(D * math.sqrt(-K * (n - 1)) / 2))))
    return out


def harmonic_mean_bound(kappa_values, weights) -> float:
    """1 / integral of 1/kappa dpi over the quadrature grid."""
    k = np.asarray(kappa_values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if k.shape != w.shape:
        raise InputError("curvature values and weights must align")
    if k.min() <= 0:
        raise NonPositiveCurvatureError(f"curvature min {k.min():.3e} is not positive")
    return float(1.0 / np.sum(w / k))


def _maximize_scalar(fn, lo: float, hi: float, tol: float = 1e-10,
                     coarse: int = 129) -> tuple[float, float]:
    """Coarse scan then golden-section refinement of a scalar maximum on
    [lo, hi]; endpoint maxima are found exactly."""
    xs = np.linspace(lo, hi, coarse)
    vals = np.array([fn(x) for x in xs])
    i = int(np.argmax(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, coarse - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = fn(x1), fn(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = fn(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = fn(x1)
    candidates = [(fn(lo), lo), (fn(hi), hi), (f1, x1), (f2, x2)]
    best = max(candidates, key=lambda p: p[0])
    return best[1], best[0]


def interpolated_bound(ric_values, weights, n: int) -> tuple[float, float]:
    """max over c in [0, K] of n c/(n-1) + harmonic mean of (Ric - c);
    c = 0 recovers the plain harmonic-mean bound, c = K the
    dimensional-improvement endpoint."""
    if n < 2:
        raise DimensionOneError("the interpolated bound needs n >= 2")
    ric = np.asarray(ric_values, dtype=float)
    w = np.asarray(weights, dtype=float)
    K = float(ric.min())
    if K <= 0:
        raise NonPositiveCurvatureError("needs positive curvature on the grid")
    fac = n / (n - 1)

    def val(c):
        gap = ric - c
        if gap.min() <= 0:
            return fac * c
        return fac * c + 1.0 / float(np.sum(w / gap))

    return _maximize_scalar(val, 0.0, K)


def bakry_emery_rho(spec: DiffusionSpec, n_prime: float, mesh: int = 256):
    """Optimal curvature function of the dimension-n_prime
    curvature-dimension inequality for a zonal reversible diffusion on the
    2-sphere: at each point, half the minimum over unit directions of
    Ric(u,u) + Hess(phi)(u,u) - (grad(phi).u)^2/(n_prime - n).

    Returns rho(theta_array); the direction minimization scans `mesh`
    angles with golden-section refinement around the best one.
    """
    m = spec.manifold
    if m.kind != SPHERE or m.dim != 2:
        raise InputError("the curvature-dimension field is implemented on 2-spheres")
    n = m.dim
    if n_prime < n:
        raise DimensionMismatchError("effective dimension below the manifold dimension")
    pot = spec.potential or ZonalPolynomial((0.0,))
    if n_prime == n and not pot.is_zero:
        raise DimensionMismatchError(
            "effective dimension equal to the manifold dimension needs a zero potential")
    r2 = m.radius**2
    ric = 1.0 / r2

    def rho(theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        dphi = pot.dtheta(theta) / m.radius          # derivative along arclength
        h_tt = pot.d2theta(theta) / r2
        h_pp = np.cos(theta) / np.sin(theta) * pot.dtheta(theta) / r2
        slack = np.inf if n_prime == n else (n_prime - n)
        out = np.empty_like(theta)
        alphas = np.linspace(0.0, math.pi / 2, mesh)
        for i in range(theta.size):
            def val(a):
                cs2 = math.cos(a) ** 2
                hess = cs2 * h_tt[i] + (1 - cs2) * h_pp[i]
                pen = 0.0 if slack == np.inf else cs2 * dphi[i] ** 2 / slack
                return ric + hess - pen
            vals = [val(a) for a in alphas]
            j = int(np.argmin(vals))
            lo = alphas[max(j - 1, 0)]
            hi = alphas[min(j + 1, mesh - 1)]
            a_best, neg = _maximize_scalar(lambda a: -val(a), lo, hi, tol=1e-12)
            out[i] = 0.5 * min(min(vals), -neg)
        return out if out.size > 1 else float(out[0])

    return rho


def cd_bound(rho_values, weights, n_prime: float) -> tuple[float, float]:
    """max over c in [0, R) of n' c/(n'-1) + harmonic mean of (rho - c),
    R the infimum of rho on the grid."""
    rho = np.asarray(rho_values, dtype=float)
    w = np.asarray(weights, dtype=float)
    R = float(rho.min())
    if R <= 0:
        raise NonPositiveCurvatureError("needs positive curvature-dimension curvature")
    fac = 1.0 if n_prime == math.inf else n_prime / (n_prime - 1)

    def val(c):
        gap = rho - c
        if gap.min() <= 0:
            return fac * c
        return fac * c + 1.0 / float(np.sum(w / gap))

    return _maximize_scalar(val, 0.0, max(R - 1e-12, 0.0))


# ---------------------------------------------------------------------------
# Gamma calculus on the grid


def gamma_operators(op: DiscretizedOperator, f) -> tuple[np.ndarray, np.ndarray]:
    """Discrete carre du champ and its iteration:
    Gamma(f) = (L(f^2) - 2 f Lf)/2,
    Gamma2(f) = (L Gamma(f) - 2 Gamma(f, Lf))/2."""
    f = np.asarray(f, dtype=float)
    if f.shape != (op.size,):
        raise InputError("grid function has the wrong size")
    L = op.matrix

    def gamma_bilinear(a, b):
        return 0.5 * (L @ (a * b) - a * (L @ b) - b * (L @ a))

    g = gamma_bilinear(f, f)
    lf = L @ f
    g2 = 0.5 * (L @ g - 2.0 * gamma_bilinear(f, lf))
    return g, g2


def cd_inequality_residual(op: DiscretizedOperator, f, rho_values, n_prime: float,
                           exclude_cells: int = 2) -> float:
    """Most negative value of Gamma2 - rho Gamma - (Lf)^2/n' away from the
    poles (nonnegative means the curvature-dimension inequality holds)."""
    g, g2 = gamma_operators(op, f)
    lf = op.matrix @ np.asarray(f, dtype=float)
    rho = np.asarray(rho_values, dtype=float)
    slack = g2 - rho * g - lf**2 / n_prime
    if exclude_cells > 0:
        slack = slack[exclude_cells:-exclude_cells]
    return float(slack.min())


# ---------------------------------------------------------------------------
# semigroup identity for the derivative of the squared gradient norm


@dataclass(frozen=True)
class S1Coefficients:
    """Closed-form generator data on the circle: L = (1/2) a(x) d^2 + F(x) d."""

    a: object
    da: object
    F: object
    dF: object


@dataclass(frozen=True)
class S1TestFunction:
    """Three-times differentiable test function with closed-form derivatives."""

    f: object
    df: object
    d2f: object
    d3f: object


def build_s1_generator(coeffs: S1Coefficients, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference matrix of L = (1/2) a d^2 + F d on the periodic
    grid; returns (grid, matrix)."""
    h = 2.0 * math.pi / m
    x = h * np.arange(m)
    a = np.asarray(coeffs.a(x), dtype=float)
    Fv = np.asarray(coeffs.F(x), dtype=float)
    if a.min() <= 0:
        raise InputError("the diffusion coefficient must be positive")
    L = np.zeros((m, m))
    idx = np.arange(m)
    nxt = (idx + 1) % m
    prv = (idx - 1) % m
    L[idx, nxt] += 0.5 * a / h**2 + Fv / (2 * h)
    L[idx, prv] += 0.5 * a / h**2 - Fv / (2 * h)
    L[idx, idx] -= a / h**2
    return x, L


def lipschitz_derivative_identity_check(coeffs: S1Coefficients, fn: S1TestFunction,
                                        m: int = 1024, crit_tol: float = 1e-3,
                                        t_ladder=(1e-5, 5e-6)) -> float:
    """Sup-norm residual between the time derivative at zero of the squared
    gradient norm of the semigroup (matrix exponential on the grid, finite
    differenced and extrapolated in t) and its closed-form expression

        h (2 L h + u a' h' u) + h^2 (2 u F' u)

    with h = |f'| and u = sign(f'), evaluated away from critical points of
    f (cells with |f'| < crit_tol are excluded)."""
    x, L = build_s1_generator(coeffs, m)
    f = np.asarray(fn.f(x), dtype=float)
    df = np.asarray(fn.df(x), dtype=float)
    d2f = np.asarray(fn.d2f(x), dtype=float)
    d3f = np.asarray(fn.d3f(x), dtype=float)
    h = 2.0 * math.pi / m

    def grad(v):
        return (np.roll(v, -1) - np.roll(v, 1)) / (2 * h)

    psi0 = grad(f) ** 2
    derivs = []
    for t in t_ladder:
        ft = expm(t * L) @ f
        derivs.append((grad(ft) ** 2 - psi0) / t)
    ts = np.asarray(t_ladder, dtype=float)
    lhs = derivs[0]
    if len(t_ladder) > 1:
        # linear-in-t extrapolation using the two smallest steps
        lhs = (ts[0] * derivs[1] - ts[1] * derivs[0]) / (ts[0] - ts[1])
    hgrid = np.abs(df)
    u = np.sign(df)
    dh = u * d2f
    d2h = u * d3f
    a = np.asarray(coeffs.a(x), dtype=float)
    dav = np.asarray(coeffs.da(x), dtype=float)
    Fv = np.asarray(coeffs.F(x), dtype=float)
    dFv = np.asarray(coeffs.dF(x), dtype=float)
    lh = 0.5 * a * d2h + Fv * dh
    rhs = hgrid * (2.0 * lh + dav * dh) + hgrid**2 * (2.0 * dFv)
    mask = hgrid >= crit_tol
    if not np.any(mask):
        raise InputError("test function is constant to tolerance")
    return float(np.abs(lhs[mask] - rhs[mask]).max())


# ---------------------------------------------------------------------------
# full report: computed gap plus every applicable lower bound


@dataclass(frozen=True, eq=False)
class BoundsReport:
    """Computed spectral gap of one problem together with every applicable
    lower bound, all in the half-Laplacian normalization."""

    manifold: str
    potential: str
    m: int
    n_prime: float | None
    lambda1: float
    lambda1_zonal: float
    lambda1_azimuthal: float | None
    K: float
    diameter: float
    lichnerowicz: float | None
    chen_wang: list | None
    harmonic_mean: float | None
    interpolated: tuple | None
    bakry_emery_cd: tuple | None

    def applicable_bounds(self) -> list[tuple[str, float]]:
        out = []
        if self.lichnerowicz is not None:
            out.append(("lichnerowicz", self.lichnerowicz))
        for label, v in self.chen_wang or []:
            out.append((f"chen-wang-{label}", v))
        if self.harmonic_mean is not None:
            out.append(("harmonic-mean", self.harmonic_mean))
        if self.interpolated is not None:
            out.append(("interpolated", self.interpolated[1]))
        if self.bakry_emery_cd is not None:
            out.append(("curvature-dimension", self.bakry_emery_cd[2]))
        return out


def effective_kappa_grid(spec: DiffusionSpec, theta: np.ndarray) -> np.ndarray:
    """inf over unit directions of the directional coarse Ricci curvature at
    the zonal points x(theta) (half-Laplacian units)."""
    from .curvature import kappa_dir

    m = spec.manifold
    r = m.radius
    out = np.empty(theta.size)
    for i, th in enumerate(theta):
        x = m.point(np.array([math.sin(th), 0.0, math.cos(th)]) * r)
        e_th = m.tangent(x, np.array([math.cos(th), 0.0, -math.sin(th)]))
        e_ps = m.tangent(x, np.array([0.0, 1.0, 0.0]))
        out[i] = min(kappa_dir(spec, x, e_th).kappa, kappa_dir(spec, x, e_ps).kappa)
    return out


def s1_effective_kappa(potential: ZonalPolynomial, theta: np.ndarray,
                       radius: float = 1.0) -> np.ndarray:
    """Effective curvature on the circle: (1/2) phi'' (flat Ricci)."""
    return 0.5 * potential.d2theta(theta) / radius**2


def bounds_report(manifold: ModelManifold, potential: ZonalPolynomial, m: int,
                  n_prime: float | None = None) -> BoundsReport:
    """Evaluate the discretized gap and all applicable lower bounds for the
    reversible diffusion (1/2)(Laplacian - grad(phi).grad) on the circle or
    zonal 2-sphere."""
    from .fields import reversible_potential

    if manifold.kind != SPHERE or manifold.dim not in (1, 2):
        raise InputError("bounds reports cover sphere:1:r and sphere:2:r")
    r = manifold.radius
    diam = math.pi * r
    flat_phi = potential.is_zero
    if manifold.dim == 1:
        lam = s1_spectrum(potential, m, r)["lambda1"]
        op = discretize_s1(potential, m, r)
        kgrid = s1_effective_kappa(potential, op.theta, r)
        K = float(kgrid.min())
        chen = None
        if flat_phi:
            chen = [(lbl, 0.5 * v) for lbl, v in chen_wang_bounds(1, 0.0, diam)]
        return BoundsReport(
            manifold=f"sphere:1:{r:g}", potential=str(potential), m=m, n_prime=n_prime,
            lambda1=lam, lambda1_zonal=lam, lambda1_azimuthal=None, K=K, diameter=diam,
            lichnerowicz=None, chen_wang=chen, harmonic_mean=None, interpolated=None,
            bakry_emery_cd=None,
        )
    spec = reversible_potential(manifold, potential)
    gaps = sphere_spectrum(potential, m, r)
    op = discretize_zonal(potential, m, r)
    kgrid = effective_kappa_grid(spec, op.theta)
    K = float(kgrid.min())
    harmonic = interp = None
    if K > 0:
        harmonic = harmonic_mean_bound(kgrid, op.weights)
        interp = interpolated_bound(kgrid, op.weights, manifold.dim)
    lich = chen = None
    if flat_phi:
        k_ric = (manifold.dim - 1) / r**2
        lich = 0.5 * lichnerowicz_bound(manifold.dim, k_ric)
        chen = [(lbl, 0.5 * v) for lbl, v in chen_wang_bounds(manifold.dim, k_ric, diam)]
    cd = None
    if n_prime is not None:
        rho = bakry_emery_rho(spec, n_prime)(op.theta)
        if rho.min() > 0:
            c, v = cd_bound(rho, op.weights, n_prime)
            cd = (n_prime, c, v)
    return BoundsReport(
        manifold=f"sphere:2:{r:g}", potential=str(potential), m=m, n_prime=n_prime,
        lambda1=gaps["lambda1"], lambda1_zonal=gaps["zonal"],
        lambda1_azimuthal=gaps["azimuthal"], K=K, diameter=diam,
        lichnerowicz=lich, chen_wang=chen, harmonic_mean=harmonic,
        interpolated=interp, bakry_emery_cd=cd,
    )
