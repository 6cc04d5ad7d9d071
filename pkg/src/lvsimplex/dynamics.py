"""Trajectories, fixed points, periodic orbits and homotopy preimages."""

from __future__ import annotations

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import DriftExceeded
from .operators import LVOperator
from .simplex import (Face, ToleranceProfile, as_point, face_center,
                      face_lattice, iter_faces, probe_faces, sample_points, support)

log = logging.getLogger(__name__)

FD_STEP = 1e-7
MIN_SEPARATION = 1e-4
DEDUP_RADIUS = 1e-6
MAX_EXHAUSTIVE_M = 12

CONVERGED = "converged"
MAX_ITER = "max_iter_reached"
DRIFT_ABORTED = "drift_aborted"


def _pmap(fn, items, threads: int = 1) -> list:
    """Ordered map; results merge deterministically regardless of ``threads``."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Stored iterates of one orbit.

    ``steps[i]`` is the iteration index of ``points[i]``; ``sup_steps[i]`` is
    the sup-distance from iterate ``steps[i] - 1`` (NaN for the start).
    """

    start: np.ndarray
    steps: np.ndarray
    points: np.ndarray
    sup_steps: np.ndarray
    status: str
    stride: int
    drift_total: float = 0.0
    limit: np.ndarray | None = None
    at_step: int | None = None
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def last(self) -> np.ndarray:
        return self.points[-1]

    @property
    def n_steps(self) -> int:
        return int(self.steps[-1])


def iterate(V: LVOperator, x0, profile: ToleranceProfile | None = None) -> Trajectory:
    """Iterate ``V`` from ``x0`` until convergence, the iteration cap, or a drift abort.

    Convergence needs ``confirm_steps`` consecutive sup-steps at or below
    ``tau_conv``, except that an exactly repeated iterate converges at once.
    Every ``stride``-th iterate is stored; the stride doubles whenever the
    store would exceed ``max_stored``.  The last ``confirm_steps`` iterates are
    always kept.
    """
    V.require_trusted()
    p = profile or V.tolerances
    x = as_point(x0, p.tau_simplex)
    start = x.copy()
    store_steps, store_pts, store_sup = [0], [x], [np.nan]
    recent: deque = deque(maxlen=p.confirm_steps)
    stride = 1
    small = 0
    drift = 0.0
    status, message = MAX_ITER, ""
    n = 0
    for n in range(1, p.max_iter + 1):
        try:
            y, d = V.apply_with_drift(x)
        except DriftExceeded as exc:
            status, message = DRIFT_ABORTED, str(exc)
            n -= 1
            break
        drift += d
        s = float(np.abs(y - x).max())
        recent.append((n, y, s))
        if n % stride == 0:
            store_steps.append(n)
            store_pts.append(y)
            store_sup.append(s)
            if len(store_steps) > p.max_stored:
                keep = [i for i, k in enumerate(store_steps) if k % (2 * stride) == 0]
                store_steps = [store_steps[i] for i in keep]
                store_pts = [store_pts[i] for i in keep]
                store_sup = [store_sup[i] for i in keep]
                stride *= 2
        x = y
        if s == 0.0:
            status = CONVERGED
            break
        small = small + 1 if s <= p.tau_conv else 0
        if small >= p.confirm_steps:
            status = CONVERGED
            break

    merged = dict(zip(store_steps, zip(store_pts, store_sup)))
    for k, y, s in recent:
        merged[k] = (y, s)
    order = sorted(merged)
    traj = Trajectory(
        start=start,
        steps=np.array(order, dtype=int),
        points=np.array([merged[k][0] for k in order]),
        sup_steps=np.array([merged[k][1] for k in order]),
        status=status, stride=stride, drift_total=drift, message=message)
    if status == CONVERGED:
        traj.limit = x.copy()
        traj.at_step = n
    return traj


@dataclass
class Cluster:
    representative: np.ndarray
    visits: int


def omega_limit(V: LVOperator, x0, profile: ToleranceProfile | None = None,
                burn_in: int = 10_000, window: int = 100,
                radius: float = DEDUP_RADIUS) -> list[Cluster]:
    """Cluster the ``window`` iterates that follow ``burn_in`` steps.

    Clusters are greedy in sup-distance ``radius``, returned sorted by
    coordinates.  Raises ``DriftExceeded`` if the operator breaks the simplex.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    V.require_trusted()
    p = profile or V.tolerances
    x = as_point(x0, p.tau_simplex)
    for _ in range(burn_in):
        y = V.apply(x)
        if np.array_equal(y, x):
            break
        x = y
    reps: list[np.ndarray] = []
    counts: list[int] = []
    for _ in range(window):
        x = V.apply(x)
        for i, r in enumerate(reps):
            if np.abs(r - x).max() <= radius:
                counts[i] += 1
                break
        else:
            reps.append(x.copy())
            counts.append(1)
    out = [Cluster(r, c) for r, c in zip(reps, counts)]
    return sorted(out, key=lambda c: tuple(c.representative))


# ---------------------------------------------------------------------------
# Newton on a face
# ---------------------------------------------------------------------------

@dataclass
class NewtonResult:
    x: np.ndarray
    residual: float
    converged: bool
    iterations: int


def _face_basis(face: Face) -> np.ndarray:
    """Columns ``e_{a_i} - e_{a_last}`` spanning the face's tangent space."""
    idx = face.zero_based
    B = np.zeros((face.m, face.size - 1))
    for j, a in enumerate(idx[:-1]):
        B[a, j] = 1.0
        B[idx[-1], j] = -1.0
    return B


def face_newton(residual: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, face: Face,
                tol: float, max_iter: int = 60, fd_step: float = FD_STEP) -> NewtonResult:
    """Damped Gauss-Newton for ``residual(x) = 0`` with ``x`` on ``face``.

    Works in the ``|face| - 1`` affine coordinates of the face with a
    one-sided finite-difference Jacobian.  Steps are cut back to stay in the
    closed face, then halved until the sup-norm residual decreases.
    Evaluations that raise ``DriftExceeded`` count as failure.
    """
    idx = face.zero_based
    B = _face_basis(face)

    def res(x):
        return residual(x)[idx]

    x = np.asarray(x0, dtype=float).copy()
    try:
        r = res(x)
    except DriftExceeded:
        return NewtonResult(x, np.inf, False, 0)
    rn = float(np.abs(r).max())
    if face.size == 1 or rn <= tol:
        return NewtonResult(x, rn, rn <= tol, 0)

    last = idx[-1]
    for it in range(1, max_iter + 1):
        J = np.empty((face.size, face.size - 1))
        try:
            for j in range(face.size - 1):
                h = fd_step
                if x[last] >= h:
                    J[:, j] = (res(x + h * B[:, j]) - r) / h
                elif x[idx[j]] >= h:
                    J[:, j] = (r - res(x - h * B[:, j])) / h
                else:
                    h = max(x[last], x[idx[j]])
                    J[:, j] = 0.0 if h == 0 else (res(x + h * B[:, j]) - r) / h
        except DriftExceeded:
            return NewtonResult(x, rn, False, it)
        du = np.linalg.lstsq(J, -r, rcond=None)[0]
        dx = B @ du
        neg = dx < 0
        t = 1.0
        if neg.any():
            t = min(1.0, float(np.min(-x[neg] / dx[neg])))
        accepted = False
        for _ in range(40):
            xn = x + t * dx
            xn[xn < 0] = 0.0
            xn[idx] /= xn[idx].sum()
            try:
                rnew = res(xn)
            except DriftExceeded:
                t *= 0.5
                continue
            rnew_n = float(np.abs(rnew).max())
            if rnew_n < rn:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            return NewtonResult(x, rn, rn <= tol, it)
        x, r, rn = xn, rnew, rnew_n
        if rn <= tol:
            return NewtonResult(x, rn, True, it)
    return NewtonResult(x, rn, rn <= tol, max_iter)


def _dedup(candidates: Iterable[tuple[np.ndarray, float]], radius: float):
    kept: list[tuple[np.ndarray, float]] = []
    for x, r in candidates:
        if all(np.abs(x - y).max() >= radius for y, _ in kept):
            kept.append((x, r))
    return kept


def _all_faces(m: int) -> list[Face]:
    if m > MAX_EXHAUSTIVE_M:
        raise ValueError(f"exhaustive face enumeration is limited to m <= {MAX_EXHAUSTIVE_M}")
    return list(iter_faces(m))


# ---------------------------------------------------------------------------
# fixed points and periodic orbits
# ---------------------------------------------------------------------------

@dataclass
class FixedPoint:
    point: np.ndarray
    residual: float
    face: Face  # support of the point


@dataclass
class FixedPointSet:
    points: list[FixedPoint]
    dedup_radius: float

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def as_array(self) -> np.ndarray:
        return np.array([fp.point for fp in self.points])


def _search_face(V, face, grid_density, tol, power):
    def residual(x):
        return V.power(x, power) - x

    found = []
    for x0 in face_lattice(face, grid_density):
        res = face_newton(residual, x0, face, tol)
        if res.converged:
            found.append(res.x)
    return found


def _sort_key(x: np.ndarray):
    s = support(x, 1e-9)
    return (s.size, s.indices, tuple(np.round(x, 12)))


def find_fixed_points(V: LVOperator, grid_density: int = 6,
                      profile: ToleranceProfile | None = None,
                      dedup_radius: float = DEDUP_RADIUS, threads: int = 1) -> FixedPointSet:
    """Fixed points found by damped Newton on every face.

    Starts are the face center plus the lattice points of denominator
    ``grid_density`` in the face's relative interior.  Roots qualify when
    ``sup |Vp - p| <= tau_root``.
    """
    V.require_trusted()
    p = profile or V.tolerances
    faces = _all_faces(V.m)
    per_face = _pmap(lambda f: _search_face(V, f, grid_density, p.tau_root, 1), faces,
                     threads)
    cands = []
    for xs in per_face:
        for x in xs:
            r = float(np.abs(V.apply(x) - x).max())
            if r <= p.tau_root:
                cands.append((x, r))
    kept = _dedup(cands, dedup_radius)
    kept.sort(key=lambda item: _sort_key(item[0]))
    return FixedPointSet([FixedPoint(x, r, support(x, 1e-9)) for x, r in kept], dedup_radius)


@dataclass
class PeriodicOrbit:
    period: int
    orbit: np.ndarray  # shape (period, m), rotated to start at the lexicographic minimum
    residual: float


def find_periodic(V: LVOperator, r_max: int = 4, grid_density: int = 20,
                  profile: ToleranceProfile | None = None,
                  fixed_grid_density: int = 6, threads: int = 1) -> list[PeriodicOrbit]:
    """Minimal-period orbits with ``2 <= period <= r_max``.

    Newton on ``V^r x - x`` from lattice starts on every face.  A root is
    discarded if some ``V^i x`` with ``i < r`` returns within ``10 * tau_root``
    or if it is that close to a known fixed point or lies on an orbit
    already found.
    """
    if r_max < 2:
        raise ValueError("r_max must be >= 2")
    V.require_trusted()
    p = profile or V.tolerances
    margin = 10 * p.tau_root
    fixed = find_fixed_points(V, fixed_grid_density, p).as_array()
    faces = _all_faces(V.m)
    orbits: list[PeriodicOrbit] = []
    for r in range(2, r_max + 1):
        per_face = _pmap(lambda f: _search_face(V, f, grid_density, p.tau_root, r), faces,
                         threads)
        for x in (x for xs in per_face for x in xs):
            orbit = [x]
            for _ in range(r - 1):
                orbit.append(V.apply(orbit[-1]))
            back = V.apply(orbit[-1])
            res = float(np.abs(back - x).max())
            if res > p.tau_root:
                continue
            if any(np.abs(y - x).max() <= margin for y in orbit[1:]):
                continue  # not minimal
            if len(fixed) and np.abs(fixed - x).max(axis=1).min() <= margin:
                continue
            if any(np.abs(o.orbit - x).max(axis=1).min() <= max(margin, DEDUP_RADIUS)
                   for o in orbits):
                continue
            pts = np.array(orbit)
            first = min(range(r), key=lambda i: tuple(pts[i]))
            orbits.append(PeriodicOrbit(r, np.roll(pts, -first, axis=0), res))
    orbits.sort(key=lambda o: (o.period, tuple(np.round(o.orbit[0], 12))))
    return orbits


# ---------------------------------------------------------------------------
# homotopy preimages
# ---------------------------------------------------------------------------

@dataclass
class PreimageResult:
    target: np.ndarray
    preimage: np.ndarray | None
    residual: float
    path: list[tuple[float, np.ndarray]] = field(default_factory=list)
    status: str = "ok"  # "ok" or "stalled"
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.preimage is not None


def preimage(V: LVOperator, y, n_steps: int = 20, profile: ToleranceProfile | None = None,
             max_halvings: int = 20) -> PreimageResult:
    """Solve ``Vx = y`` by continuation along ``V_eps = (1 - eps) Id + eps V``.

    Starts from ``x = y`` at ``eps = 0`` and Newton-corrects on the face
    spanned by ``supp(y)`` (faces are invariant, so preimages live there).
    A failed correction halves the parameter step; more than
    ``max_halvings`` consecutive halvings reports a stall.
    """
    V.require_trusted()
    p = profile or V.tolerances
    y = as_point(y, p.tau_simplex)
    face = support(y)
    tol = p.tau_root
    x = y.copy()
    eps, h0 = 0.0, 1.0 / n_steps
    h = h0
    path = [(0.0, x.copy())]
    halvings = 0
    while eps < 1.0:
        e_new = eps + h
        if e_new >= 1.0 - 1e-12:  # absorb accumulated rounding in eps
            e_new = 1.0
        res = face_newton(lambda z: V.homotopy(z, e_new) - y, x, face, 0.1 * tol)
        if res.residual <= tol:
            eps, x = e_new, res.x
            path.append((eps, x.copy()))
            halvings = 0
            h = min(h0, 2 * h)
            continue
        halvings += 1
        if halvings > max_halvings:
            return PreimageResult(y, None, res.residual, path, "stalled",
                                  f"continuation stalled at eps={eps:.6g}")
        h *= 0.5
    final = float(np.abs(V.apply(x) - y).max())
    if final > tol:
        return PreimageResult(y, None, final, path, "stalled",
                              f"final residual {final:.3e} exceeds tau_root")
    return PreimageResult(y, x, final, path)


@dataclass
class SurjectivityReport:
    n_targets: int
    success_rate: float
    worst_residual: float
    failures: list[PreimageResult]
    results: list[PreimageResult]


def surjectivity_targets(m: int, n_targets: int, seed: int) -> np.ndarray:
    """Targets spread round-robin over faces of every dimension."""
    rng = np.random.default_rng(seed)
    faces = probe_faces(m, rng)
    faces = sorted(faces, key=lambda f: (-f.size, f.indices))
    out = []
    for i in range(n_targets):
        out.append(sample_points(faces[i % len(faces)], 1, rng, interior=True)[0])
    return np.array(out)


def surjectivity_probe(V: LVOperator, n_targets: int = 100, seed: int = 0,
                       profile: ToleranceProfile | None = None, n_steps: int = 20,
                       threads: int = 1) -> SurjectivityReport:
    if n_targets < 1:
        raise ValueError("n_targets must be >= 1")
    targets = surjectivity_targets(V.m, n_targets, seed)
    results = _pmap(lambda t: preimage(V, t, n_steps, profile), targets, threads)
    ok = [r for r in results if r.ok]
    worst = max((r.residual for r in ok), default=np.inf)
    return SurjectivityReport(n_targets, len(ok) / n_targets, worst,
                              [r for r in results if not r.ok], results)


def starts_across_faces(m: int, n: int, rng: np.random.Generator,
                        interior: bool = True) -> np.ndarray:
    """``n`` points on random faces (the full simplex half of the time)."""
    pts = np.empty((n, m))
    for i in range(n):
        if rng.random() < 0.5:
            face = Face.full(m)
        else:
            mask = rng.random(m) < 0.5
            if not mask.any():
                mask[rng.integers(m)] = True
            face = Face.from_mask(mask)
        pts[i] = sample_points(face, 1, rng, interior=interior)[0]
    return pts


def face_centers(m: int) -> np.ndarray:
    return np.array([face_center(f) for f in _all_faces(m)])


__all__ = [
    "Trajectory", "iterate", "omega_limit", "Cluster", "face_newton", "NewtonResult",
    "FixedPoint", "FixedPointSet", "find_fixed_points", "PeriodicOrbit", "find_periodic",
    "PreimageResult", "preimage", "SurjectivityReport", "surjectivity_probe",
    "surjectivity_targets", "starts_across_faces", "face_centers",
    "CONVERGED", "MAX_ITER", "DRIFT_ABORTED",
]
