"""Sampled membership probes: M1 / M0 monotonicity, f-monotonicity, injectivity.

Sampling can refute a property but never prove it, so passing probes report
``PassSampled`` together with the sample count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .dynamics import MIN_SEPARATION, face_newton, starts_across_faces
from .operators import LVOperator
from .simplex import ToleranceProfile, iter_faces, sample_points, support, vertex

PHI_SLACK = 1e-12
FMONO_TOL = 1e-10
FORM_AGREEMENT_TOL = 1e-12

PASS = "PassSampled"
FAIL = "Fail"
SKIPPED = "Skipped"


@dataclass(frozen=True)
class Witness:
    """Reproducible evidence for a failed probe."""

    points: tuple[tuple[float, ...], ...]
    quantity: str
    value: float
    step: int | None = None
    indices: tuple[int, ...] = ()  # 1-based coordinates involved, e.g. (k, j)
    image: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        d = {"points": [list(p) for p in self.points], "quantity": self.quantity,
             "value": self.value}
        if self.step is not None:
            d["step"] = self.step
        if self.indices:
            d["indices"] = list(self.indices)
        if self.image is not None:
            d["image"] = list(self.image)
        return d


@dataclass(frozen=True)
class Verdict:
    kind: Literal["PassSampled", "Fail", "Skipped"]
    samples: int = 0
    witness: Witness | None = None
    reason: str = ""
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.kind == PASS

    @property
    def failed(self) -> bool:
        return self.kind == FAIL

    def to_dict(self) -> dict:
        d: dict = {"verdict": self.kind, "samples": self.samples}
        if self.witness is not None:
            d["witness"] = self.witness.to_dict()
        if self.reason:
            d["reason"] = self.reason
        if self.details:
            d["details"] = dict(sorted(self.details.items()))
        return d


def _rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([seed, tag])


def _center_starts(m: int) -> np.ndarray:
    """Face centers of dimension >= 1 (vertices are fixed for every LV operator)."""
    if m > 12:
        return np.empty((0, m))
    return np.array([np.where(f.mask, 1.0 / f.size, 0.0)
                     for f in iter_faces(m) if f.size > 1])


def monotone_start_set(V: LVOperator, n_starts: int, seed: int) -> np.ndarray:
    """Starts used by the M1/M0 probes: face centers, then random points across faces."""
    rng = _rng(seed, 1)
    return np.vstack([_center_starts(V.m), starts_across_faces(V.m, n_starts, rng)])


def _difference_violations(V: LVOperator, starts: np.ndarray, horizon: int,
                           increasing: bool, profile: ToleranceProfile):
    """First violation per start (start index -> (t, k, j, change)), plus a motion flag."""
    X = np.array(starts, dtype=float)
    n, m = X.shape
    in_M = X >= X.max(axis=1, keepdims=True) - profile.tau_tie
    first: dict[int, tuple[int, int, int, float]] = {}
    moved = np.zeros(n, dtype=bool)
    D = X[:, :, None] - X[:, None, :]  # D[s, k, j] = x_k - x_j
    for t in range(horizon):
        Y = V.apply(X)
        moved |= np.abs(Y - X).max(axis=1) > 1e-6
        Dn = Y[:, :, None] - Y[:, None, :]
        change = Dn - D
        bad = (change < -PHI_SLACK) if increasing else (change > PHI_SLACK)
        bad &= in_M[:, :, None]
        for s in np.flatnonzero(bad.any(axis=(1, 2))):
            if s in first:
                continue
            ks, js = np.nonzero(bad[s])
            worst = np.argmax(np.abs(change[s, ks, js]))
            k, j = int(ks[worst]), int(js[worst])
            first[int(s)] = (t, k, j, float(change[s, k, j]))
        X, D = Y, Dn
    return first, moved


def _check_monotone(V, n_starts, horizon, seed, profile, increasing, starts):
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    p = profile or V.tolerances
    if starts is None:
        starts = monotone_start_set(V, n_starts, seed)
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    first, moved = _difference_violations(V, starts, horizon, increasing, p)
    details = {"horizon": horizon, "moving_starts": int(moved.sum())}
    if not first:
        return Verdict(PASS, len(starts), details=details)
    s = min(first)
    t, k, j, change = first[s]
    w = Witness(points=(tuple(starts[s].tolist()),), quantity="phi_change", value=change,
                step=t, indices=(k + 1, j + 1))
    details["violating_starts"] = len(first)
    return Verdict(FAIL, len(starts), w, details=details)


def check_m1(V: LVOperator, n_starts: int = 200, horizon: int = 50, seed: int = 0,
             profile: ToleranceProfile | None = None, starts=None) -> Verdict:
    """Is ``(V^t x)_k - (V^t x)_j`` nondecreasing in ``t`` for ``k`` in ``M(x)``?

    ``k`` is taken from the maximal set of the start and held fixed along the
    orbit.  Face centers come first in the start set, then ``n_starts``
    random points on random faces.  The witness is the lowest-numbered
    failing start; ``value`` is the change in ``x_k - x_j`` at ``step``.
    """
    return _check_monotone(V, n_starts, horizon, seed, profile, True, starts)


def check_m0(V: LVOperator, n_starts: int = 200, horizon: int = 50, seed: int = 0,
             profile: ToleranceProfile | None = None, starts=None) -> Verdict:
    """Mirror of :func:`check_m1` with the inequality reversed."""
    return _check_monotone(V, n_starts, horizon, seed, profile, False, starts)


def replay_phi_change(V: LVOperator, w: Witness) -> float:
    """Recompute the ``phi_change`` of a monotonicity witness."""
    k, j = w.indices[0] - 1, w.indices[1] - 1
    x = V.power(np.array(w.points[0]), w.step)
    y = V.apply(x)
    return float((y[k] - y[j]) - (x[k] - x[j]))


def f_monotone_pairs(m: int, n_pairs: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """All vertex pairs first, then ``n_pairs`` random pairs across faces."""
    rng = _rng(seed, 2)
    vx, vy = [], []
    for i in range(1, m + 1):
        for j in range(i + 1, m + 1):
            vx.append(vertex(m, i))
            vy.append(vertex(m, j))
    X = starts_across_faces(m, n_pairs, rng)
    Y = starts_across_faces(m, n_pairs, rng)
    if vx:
        X = np.vstack([np.array(vx), X])
        Y = np.vstack([np.array(vy), Y])
    return X, Y


def check_f_monotone(V: LVOperator, n_pairs: int = 1000, seed: int = 0,
                     profile: ToleranceProfile | None = None) -> Verdict:
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    X, Y = f_monotone_pairs(V.m, n_pairs, seed)
    FX, FY = V.f(X), V.f(Y)
    inner = np.sum((FX - FY) * (X - Y), axis=1)
    alt = np.sum(FX * Y, axis=1) + np.sum(X * FY, axis=1)
    # for a generating map the two forms satisfy inner == -alt
    disagreement = float(np.abs(inner + alt).max())
    details = {"min_inner_product": float(inner.min()),
               "max_form_disagreement": disagreement,
               "forms_agree": disagreement <= FORM_AGREEMENT_TOL}
    bad = np.flatnonzero(inner < -FMONO_TOL)
    if not bad.size:
        return Verdict(PASS, len(X), details=details)
    i = int(bad[0])
    w = Witness(points=(tuple(X[i].tolist()), tuple(Y[i].tolist())),
                quantity="inner_product", value=float(inner[i]))
    details["violating_pairs"] = int(bad.size)
    return Verdict(FAIL, len(X), w, details=details)


def replay_inner_product(V: LVOperator, w: Witness) -> float:
    x, y = np.array(w.points[0]), np.array(w.points[1])
    return float(np.dot(V.f(x) - V.f(y), x - y))


def _collision_witness(V, x, y) -> Witness:
    vx, vy = V.apply(x), V.apply(y)
    return Witness(points=(tuple(x.tolist()), tuple(y.tolist())), quantity="image_gap",
                   value=float(np.abs(vx - vy).max()), image=tuple(vx.tolist()))


def _bisect_level(V, a, b, level, iters=200):
    """Point between ``a`` and ``b`` (on S^1) where ``(Vx)_1`` equals ``level``."""
    ga = V.apply(a)[0] - level
    for _ in range(iters):
        mid = 0.5 * (a + b)
        gm = V.apply(mid)[0] - level
        if gm == 0:
            return mid
        if np.sign(gm) == np.sign(ga):
            a, ga = mid, gm
        else:
            b = mid
        if np.abs(b - a).max() < 1e-17:
            break
    return 0.5 * (a + b)


def _scan_circle(V: LVOperator, grid_density: int, tol: float) -> tuple[Witness | None, int]:
    t = np.linspace(0.0, 1.0, grid_density + 1)
    X = np.column_stack([t, 1.0 - t])
    U = V.apply(X)[:, 0]
    du = np.diff(U)
    flat = np.abs(du) <= tol
    # flat runs: images coincide across a whole interval
    i = 0
    n = len(du)
    while i < n:
        if not flat[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and flat[j + 1]:
            j += 1
        a, b = i, j + 1
        for lo, hi in ((a, b), (a, min(b, a + 2))):
            if hi > lo and abs(t[hi] - t[lo]) >= MIN_SEPARATION and abs(U[hi] - U[lo]) <= tol:
                return _collision_witness(V, X[lo], X[hi]), len(X)
        i = j + 1
    # folds: a sign change of the discrete derivative, refined by bisection
    sgn = np.sign(du)
    nz = np.flatnonzero(sgn != 0)
    for q in range(len(nz) - 1):
        i0, i1 = nz[q], nz[q + 1]
        if sgn[i0] == sgn[i1]:
            continue
        p = i1  # grid index at the extremum
        a = max(0, p - 2)
        level = U[a]
        for jj in range(p + 1, len(U)):
            if (U[jj] - level) * (U[jj - 1] - level) <= 0:
                y = _bisect_level(V, X[jj - 1], X[jj], level)
                if (np.abs(y - X[a]).max() >= MIN_SEPARATION
                        and np.abs(V.apply(y) - V.apply(X[a])).max() <= tol):
                    return _collision_witness(V, X[a], y), len(X)
                break
    return None, len(X)


def check_injective(V: LVOperator, n_pairs: int = 200, grid_density: int = 10_000,
                    seed: int = 0, profile: ToleranceProfile | None = None) -> Verdict:
    """Search for ``x != y`` (sup-distance >= 1e-4) with ``Vx == Vy`` within ``tau_root``.

    On S^1 this is a deterministic grid scan (flat runs, then folds refined
    by bisection).  For ``m >= 3``: random pairs compared directly, plus a
    Newton search for a second preimage of ``Vx`` started away from ``x``.
    """
    p = profile or V.tolerances
    tol = p.tau_root
    if V.m == 2:
        w, n = _scan_circle(V, grid_density, tol)
        if w is not None:
            return Verdict(FAIL, n, w, details={"method": "grid_scan"})
        return Verdict(PASS, n, details={"method": "grid_scan"})

    rng = _rng(seed, 3)
    X = starts_across_faces(V.m, n_pairs, rng)
    Y = starts_across_faces(V.m, n_pairs, rng)
    VX, VY = V.apply(X), V.apply(Y)
    far = np.abs(X - Y).max(axis=1) >= MIN_SEPARATION
    hit = np.flatnonzero(far & (np.abs(VX - VY).max(axis=1) <= tol))
    if hit.size:
        i = int(hit[0])
        return Verdict(FAIL, n_pairs, _collision_witness(V, X[i], Y[i]),
                       details={"method": "random_pairs"})
    for i in range(n_pairs):
        x, target = X[i], VX[i]
        face = support(x)
        if face.size < 2:
            continue
        z = sample_points(face, 1, rng, interior=True)[0]
        y0 = 0.5 * (x + z)
        res = face_newton(lambda u: V.apply(u) - target, y0, face, 0.1 * tol)
        if res.converged and np.abs(res.x - x).max() >= MIN_SEPARATION:
            if np.abs(V.apply(res.x) - target).max() <= tol:
                return Verdict(FAIL, n_pairs, _collision_witness(V, x, res.x),
                               details={"method": "newton"})
    return Verdict(PASS, n_pairs, details={"method": "random_pairs+newton"})


@dataclass
class ClassificationReport:
    operator_id: dict
    label: str
    m: int
    m1: Verdict
    m0: Verdict
    f_monotone: Verdict
    injective: Verdict
    samples: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "schema": "lvsimplex.classification/1",
            "operator": self.operator_id,
            "label": self.label,
            "m": self.m,
            "seed": self.seed,
            "budget": self.samples,
            "m1": self.m1.to_dict(),
            "m0": self.m0.to_dict(),
            "f_monotone": self.f_monotone.to_dict(),
            "injective": self.injective.to_dict(),
        }


def classify(V: LVOperator, budget: int = 200, seed: int = 0,
             profile: ToleranceProfile | None = None) -> ClassificationReport:
    """Run the four probes with sample counts derived from ``budget``."""
    if budget < 1:
        raise ValueError("budget must be positive")
    p = profile or V.tolerances
    horizon = 50
    return ClassificationReport(
        operator_id=V.describe(), label=V.label, m=V.m,
        m1=check_m1(V, budget, horizon, seed, p),
        m0=check_m0(V, budget, horizon, seed, p),
        f_monotone=check_f_monotone(V, 10 * budget, seed, p),
        injective=check_injective(V, budget, 10_000, seed, p),
        samples=budget, seed=seed)
