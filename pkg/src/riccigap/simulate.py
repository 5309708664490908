"""Single and coupled diffusion paths, the pathwise contraction identity,
and the Lipschitz variance check.

Discretization: Euler-Maruyama in the exponential chart.  The coupled step
draws one joint Gaussian tangent pair with block covariance
[[A(x), C+], [C+^T, A(y)]]; for metric-proportional diffusions this
degenerates to the parallel-transport coupling (same noise components in
transported frames), which is simulated vectorized over trajectories.
Drift substeps use the exact drift flow when the field provides one
(linear drifts), so flat linear cases satisfy the contraction identity to
machine precision.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .coupling import extremal_covariances, sym_psd_sqrt
from .curvature import kappa_pair
from .errors import CutLocusError, InputError
from .fields import DiffusionSpec, LinearDrift
from .manifolds import EUCLIDEAN, SPHERE, ModelManifold, Point, TangentVector, _scale_a, _scale_b

_CHUNK = 256  # trajectories per processing block (fixed: results do not
              # depend on the worker count)


@dataclass(frozen=True)
class SimConfig:
    dt: float
    horizon: float
    trajectories: int
    seed: int = 0
    cut_margin: float = 0.1
    record_every: int | None = None
    workers: int = 1
    store_states: bool = False

    def __post_init__(self):
        if not (0 < self.dt <= self.horizon):
            raise InputError("need 0 < dt <= horizon")
        if self.trajectories < 1:
            raise InputError("need at least one trajectory")
        if self.cut_margin <= 0:
            raise InputError("cut_margin must be positive")


@dataclass(frozen=True, eq=False)
class CoupledTrajectory:
    """Recorded states of one coupled pair.

    log_distance and kappa_integral are sampled on `times`; defect is the
    pathwise violation of the contraction identity,
    log d(t) - log d(0) + int_0^t kappa ds.
    """

    times: np.ndarray
    pair_states: list
    log_distance: np.ndarray
    kappa_integral: np.ndarray
    aborted: bool
    abort_reason: str = ""

    @property
    def defect(self) -> np.ndarray:
        return self.log_distance - self.log_distance[0] + self.kappa_integral


def _traj_rng(seed: int, index: int) -> np.random.Generator:
    key = np.array([seed & (2**64 - 1), index & (2**64 - 1)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def step_single(spec: DiffusionSpec, x: Point, dt: float, noise) -> Point:
    """One Euler step in the exponential chart: the tangent increment is the
    drift increment plus sqrt(dt) * A(x)^{1/2} applied to the noise vector
    (components in the deterministic frame at x)."""
    m = spec.manifold
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (m.dim,):
        raise InputError(f"noise must have dimension {m.dim}")
    if dt <= 0:
        raise InputError("dt must be positive")
    E = m.frame(x)
    root = sym_psd_sqrt(spec.diffusion.matrix(x, E))
    return _advance_ambient(spec, x, math.sqrt(dt) * m.from_frame(E, root @ noise), dt)


def _advance_ambient(spec: DiffusionSpec, x: Point, noise_inc: np.ndarray, dt: float) -> Point:
    m = spec.manifold
    inc = noise_inc
    flowed = spec.drift.flow(x, dt)
    if flowed is not None:
        if not _same_point(x, flowed):
            inc = inc + m.log_map(x, flowed).components
    else:
        inc = inc + dt * spec.drift.vector(x)
    return m.exp_map(x, TangentVector(x, m.project_tangent(x.coords, inc)))


def _same_point(a: Point, b: Point) -> bool:
    return np.array_equal(a.coords, b.coords)


def step_coupled(spec: DiffusionSpec, x: Point, y: Point, dt: float,
                 rng: np.random.Generator) -> tuple[Point, Point]:
    """One coupled Euler step with the parallel-transport-extremal block
    covariance.  Coincident points receive identical increments."""
    m = spec.manifold
    if _same_point(x, y):
        E = m.frame(x)
        z = rng.standard_normal(m.dim)
        xn = step_single(spec, x, dt, z)
        return xn, xn
    d = m.distance(x, y)
    if d >= m.cut_threshold:
        raise CutLocusError("coupled step undefined at the cut locus")
    jet = m.distance_jet(x, y)
    A_x = spec.diffusion.matrix(x, jet.frame_x)
    A_y = spec.diffusion.matrix(y, jet.frame_y)
    cplus, _ = extremal_covariances(A_x, A_y, jet)
    blk = np.block([[A_x, cplus.C], [cplus.C.T, A_y]])
    root = sym_psd_sqrt(blk)
    z = root @ rng.standard_normal(2 * m.dim)
    xi, eta = z[: m.dim], z[m.dim:]
    xn = _advance(spec, x, jet.frame_x, xi, dt)
    yn = _advance(spec, y, jet.frame_y, eta, dt)
    return xn, yn


def _advance(spec: DiffusionSpec, x: Point, frame: np.ndarray, comps: np.ndarray,
             dt: float) -> Point:
    m = spec.manifold
    return _advance_ambient(spec, x, math.sqrt(dt) * m.from_frame(frame, comps), dt)


# ---------------------------------------------------------------------------
# vectorized kappa along fast-path specs


def kappa_fast(spec: DiffusionSpec, d):
    """kappa(x, y) as a function of the distance only, for
    metric-proportional diffusions with zero or linear drift (matches
    kappa_pair; cross-checked in the test suite)."""
    m = spec.manifold
    c = spec.diffusion.constant_inverse_metric
    if c is None:
        raise InputError("kappa_fast needs A = c * g^{-1}")
    d = np.asarray(d, dtype=float)
    drift = 0.0
    if isinstance(spec.drift, LinearDrift):
        drift = spec.drift.rate
    elif not spec.drift.is_zero:
        raise InputError("kappa_fast supports zero or linear drift")
    if m.kind == EUCLIDEAN:
        return np.full_like(d, drift)
    th = d / m.radius
    quad = c * (m.dim - 1) * (_scale_b(m.kind, th) - _scale_a(m.kind, th)) / d**2
    return drift + quad


def _fast_path_ok(spec: DiffusionSpec) -> bool:
    if spec.diffusion.constant_inverse_metric is None:
        return False
    if spec.manifold.kind == EUCLIDEAN:
        return spec.drift.is_zero or isinstance(spec.drift, LinearDrift)
    return spec.manifold.kind == SPHERE and spec.drift.is_zero


def run_coupled(spec: DiffusionSpec, x0: Point, y0: Point, cfg: SimConfig) -> list[CoupledTrajectory]:
    """Simulate coupled pairs from (x0, y0); reproducible per seed and
    independent of the worker count (per-trajectory counter-based streams,
    fixed chunking)."""
    m = spec.manifold
    if m.kind == SPHERE and cfg.cut_margin >= math.pi * m.radius / 2:
        raise InputError("cut_margin must be below a quarter circumference")
    d0 = m.distance(x0, y0)
    if not 0 < d0 < m.cut_threshold - cfg.cut_margin + 1e-300:
        raise InputError("initial distance must lie in (0, cut threshold - margin)")
    steps = int(round(cfg.horizon / cfg.dt))
    if abs(steps * cfg.dt - cfg.horizon) > 1e-9 * cfg.horizon:
        steps = math.ceil(cfg.horizon / cfg.dt)
    stride = cfg.record_every or max(1, steps // 512)
    chunks = [(j, min(j + _CHUNK, cfg.trajectories)) for j in range(0, cfg.trajectories, _CHUNK)]
    results: list = [None] * cfg.trajectories

    def work(bounds):
        j0, j1 = bounds
        if _fast_path_ok(spec):
            return j0, _run_chunk_fast(spec, x0, y0, cfg, steps, stride, j0, j1 - j0)
        return j0, [_run_one_generic(spec, x0, y0, cfg, steps, stride, j)
                    for j in range(j0, j1)]

    if cfg.workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            for j0, trajs in pool.map(work, chunks):
                results[j0:j0 + len(trajs)] = trajs
    else:
        for bounds in chunks:
            j0, trajs = work(bounds)
            results[j0:j0 + len(trajs)] = trajs
    return results


def _record_times(steps: int, stride: int, dt: float) -> tuple[np.ndarray, np.ndarray]:
    idx = list(range(0, steps + 1, stride))
    if idx[-1] != steps:
        idx.append(steps)
    return np.asarray(idx, dtype=int), np.asarray(idx, dtype=float) * dt


def _run_chunk_fast(spec: DiffusionSpec, x0: Point, y0: Point, cfg: SimConfig,
                    steps: int, stride: int, j0: int, count: int) -> list[CoupledTrajectory]:
    m = spec.manifold
    k = m.ambient_dim
    dt = cfg.dt
    c = spec.diffusion.constant_inverse_metric
    sig = math.sqrt(c * dt)
    cut = m.cut_threshold - cfg.cut_margin if m.kind == SPHERE else math.inf
    noise = np.stack([_traj_rng(cfg.seed, j0 + i).standard_normal((steps, k))
                      for i in range(count)])
    X = np.broadcast_to(x0.coords, (count, k)).copy()
    Y = np.broadcast_to(y0.coords, (count, k)).copy()
    d = m.dist_many(X, Y)
    kap = kappa_fast(spec, d)
    integral = np.zeros(count)
    alive = np.ones(count, dtype=bool)
    rec_idx, times = _record_times(steps, stride, dt)
    rec_set = set(rec_idx.tolist())
    logs = np.empty((count, len(rec_idx)))
    integ = np.empty((count, len(rec_idx)))
    states = [[] for _ in range(count)]
    logs[:, 0] = np.log(d)
    integ[:, 0] = 0.0
    if cfg.store_states:
        for i in range(count):
            states[i].append((m.point(X[i].copy()), m.point(Y[i].copy())))
    pos = 1
    euclid = m.kind == EUCLIDEAN
    lam = spec.drift.rate if isinstance(spec.drift, LinearDrift) else 0.0
    decay = math.exp(-lam * dt)
    for s in range(steps):
        z = noise[:, s, :]
        if euclid:
            Xn = decay * X + sig * z
            Yn = decay * Y + sig * z
        else:
            zt = m.project_tangent(X, z)
            vx = sig * zt
            vy = sig * m.transport_many(X, Y, zt)
            Xn = m.exp_many(X, vx)
            Yn = m.exp_many(Y, vy)
        dn = m.dist_many(Xn, Yn)
        # abort before accepting a state at or beyond the guard
        newly_cut = alive & (dn >= cut)
        accept = alive & ~newly_cut
        X = np.where(accept[:, None], Xn, X)
        Y = np.where(accept[:, None], Yn, Y)
        kn = kappa_fast(spec, np.maximum(np.where(accept, dn, d), 1e-300))
        integral = np.where(accept, integral + 0.5 * dt * (kap + kn), integral)
        d = np.where(accept, dn, d)
        kap = np.where(accept, kn, kap)
        alive = alive & ~newly_cut
        if (s + 1) in rec_set:
            logs[:, pos] = np.log(np.maximum(d, 1e-300))
            integ[:, pos] = integral
            if cfg.store_states:
                for i in range(count):
                    states[i].append((m.point(X[i].copy()), m.point(Y[i].copy())))
            pos += 1
    if not cfg.store_states:
        for i in range(count):
            states[i].append((m.point(X[i].copy()), m.point(Y[i].copy())))
    out = []
    for i in range(count):
        out.append(CoupledTrajectory(
            times=times.copy(), pair_states=states[i], log_distance=logs[i].copy(),
            kappa_integral=integ[i].copy(), aborted=not alive[i],
            abort_reason="" if alive[i] else "cut-locus",
        ))
    return out


def _run_one_generic(spec: DiffusionSpec, x0: Point, y0: Point, cfg: SimConfig,
                     steps: int, stride: int, index: int) -> CoupledTrajectory:
    m = spec.manifold
    rng = _traj_rng(cfg.seed, index)
    cut = m.cut_threshold - cfg.cut_margin
    rec_idx, times = _record_times(steps, stride, cfg.dt)
    rec_set = set(rec_idx.tolist())
    x, y = x0, y0
    d = m.distance(x, y)
    kap = kappa_pair(spec, x, y).kappa
    integral = 0.0
    logs = [math.log(d)]
    integ = [0.0]
    states = [(x, y)] if cfg.store_states else []
    aborted = False
    reason = ""
    for s in range(steps):
        if not aborted:
            try:
                xn, yn = step_coupled(spec, x, y, cfg.dt, rng)
            except CutLocusError:
                aborted, reason = True, "cut-locus"
            if not aborted:
                dn = m.distance(xn, yn)
                if dn >= cut or dn <= 0:
                    aborted, reason = True, "cut-locus" if dn >= cut else "collapse"
                else:
                    x, y, d = xn, yn, dn
                    kn = kappa_pair(spec, x, y).kappa
                    integral += 0.5 * cfg.dt * (kap + kn)
                    kap = kn
        if (s + 1) in rec_set:
            logs.append(math.log(max(d, 1e-300)))
            integ.append(integral)
            if cfg.store_states:
                states.append((x, y))
    if not cfg.store_states:
        states.append((x, y))
    return CoupledTrajectory(times=times, pair_states=states,
                             log_distance=np.asarray(logs), kappa_integral=np.asarray(integ),
                             aborted=aborted, abort_reason=reason)


# ---------------------------------------------------------------------------
# variance of Lipschitz functions


def uniform_sphere_points(manifold: ModelManifold, count: int,
                          rng: np.random.Generator) -> np.ndarray:
    if manifold.kind != SPHERE:
        raise InputError("uniform sampling implemented on spheres")
    z = rng.standard_normal((count, manifold.ambient_dim))
    return z * (manifold.radius / np.linalg.norm(z, axis=1)[:, None])


def lipschitz_variance_check(manifold: ModelManifold, f=None, samples: int = 10**6,
                             seed: int = 0) -> tuple[float, float, float]:
    """Monte Carlo variance of a 1-Lipschitz function under the uniform
    measure, against the bound by the mean inverse Ricci curvature of the
    unit-diffusivity (full Laplacian) generator.

    Returns (variance estimate, bound, standard error of the estimate).
    Default f is the geodesic distance to a fixed pole.
    """
    if manifold.kind != SPHERE:
        raise InputError("the variance bound needs positive Ricci curvature")
    if manifold.dim < 2:
        raise InputError("Ricci curvature vanishes on the circle")
    rng = np.random.Generator(np.random.Philox(
        key=np.array([seed & (2**64 - 1), 0x11F], dtype=np.uint64)))
    pts = uniform_sphere_points(manifold, samples, rng)
    if f is None:
        pole = np.zeros(manifold.ambient_dim)
        pole[-1] = manifold.radius
        vals = manifold.dist_many(pts, pole[None, :])
    else:
        vals = np.asarray(f(pts), dtype=float)
    var = float(np.var(vals, ddof=1))
    centered = (vals - vals.mean()) ** 2
    se = float(centered.std(ddof=1) / math.sqrt(samples))
    ric_inf = (manifold.dim - 1) / manifold.radius**2
    bound = 1.0 / ric_inf
    return var, bound, se
