"""Points, faces and sampling on the standard simplex.

Points are plain 1-D ``float64`` arrays of length ``m``; batches are arrays
of shape ``(n, m)``.  Faces are addressed by 1-based index sets everywhere
they are shown to a user.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterator, Sequence

import numpy as np

from .errors import DimensionMismatch, DriftExceeded

#: Sum error above which drift is treated as an operator bug, not float noise.
SUM_DRIFT_LIMIT = 1e-6

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ToleranceProfile:
    """Numerical knobs shared by every probe.

    ``tau_tie`` is absolute because coordinates live in ``[0, 1]``.
    """

    tau_simplex: float = 1e-12
    tau_tie: float = 1e-9
    tau_conv: float = 1e-10
    tau_root: float = 1e-10
    max_iter: int = 1_000_000
    confirm_steps: int = 10
    max_stored: int = 10_000

    def __post_init__(self):
        for name in ("tau_simplex", "tau_tie", "tau_conv", "tau_root"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.confirm_steps < 1 or self.max_stored < 2:
            raise ValueError("confirm_steps must be >= 1 and max_stored >= 2")

    def replace(self, **changes) -> "ToleranceProfile":
        values = {**self.__dict__, **changes}
        return ToleranceProfile(**values)


DEFAULT_PROFILE = ToleranceProfile()


@dataclass(frozen=True, order=True)
class Face:
    """Nonempty index set ``alpha`` of the face ``Gamma_alpha`` (1-based)."""

    m: int
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if self.m < 1:
            raise ValueError("ambient dimension must be positive")
        if not idx:
            raise ValueError("a face needs at least one index")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"face indices must be strictly increasing: {idx}")
        if idx[0] < 1 or idx[-1] > self.m:
            raise ValueError(f"face indices must lie in 1..{self.m}: {idx}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def full(cls, m: int) -> "Face":
        return cls(m, tuple(range(1, m + 1)))

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "Face":
        return cls(len(mask), tuple(int(i) + 1 for i in np.flatnonzero(mask)))

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def zero_based(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=int) - 1

    @property
    def mask(self) -> np.ndarray:
        out = np.zeros(self.m, dtype=bool)
        out[self.zero_based] = True
        return out

    def __contains__(self, k: int) -> bool:
        return k in self.indices

    def __str__(self) -> str:
        return "{" + ",".join(str(i) for i in self.indices) + "}"


def as_point(v: Sequence[float], tol: float = DEFAULT_PROFILE.tau_simplex) -> np.ndarray:
    """Validate ``v`` as a simplex point and return a clean copy.

    Raises ``ValueError`` if ``v`` is not within ``tol`` of the simplex.
    """
    x = np.array(v, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("a simplex point must be a nonempty 1-D vector")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite coordinates in {x}")
    if x.min() < -tol or abs(x.sum() - 1.0) > tol:
        raise ValueError(f"{x.tolist()} is not on the simplex (tolerance {tol:g})")
    return project_to_simplex(x, tol)


def project_with_drift(v: np.ndarray, tol: float = DEFAULT_PROFILE.tau_simplex):
    """Repair float drift in ``v`` (shape ``(m,)`` or ``(n, m)``).

    Returns ``(point, drift)`` where ``drift`` is the largest sup-norm change
    made to any row.  Coordinates in ``[-tol, 0)`` are clamped to zero and
    rows are renormalized.  Anything larger raises ``DriftExceeded``.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise DriftExceeded(f"non-finite coordinates produced: {v}")
    low = v.min()
    if low < -tol:
        raise DriftExceeded(f"coordinate {low:.3e} below -{tol:g}")
    sums = v.sum(axis=-1, keepdims=True)
    err = np.abs(sums - 1.0).max()
    if err > SUM_DRIFT_LIMIT:
        raise DriftExceeded(f"coordinate sum is off by {err:.3e}")

    m = v.shape[-1]
    clean_limit = 4 * m * _EPS
    if low >= 0 and err <= clean_limit:
        return v.copy(), 0.0
    x = np.where(v < 0, 0.0, v)
    # A second division is occasionally needed to land inside clean_limit.
    for _ in range(3):
        s = x.sum(axis=-1, keepdims=True)
        x = x / s
        if np.abs(x.sum(axis=-1) - 1.0).max() <= clean_limit:
            break
    return x, float(np.abs(x - v).max())


def project_to_simplex(v: np.ndarray, tol: float = DEFAULT_PROFILE.tau_simplex) -> np.ndarray:
    """:func:`project_with_drift` without the drift value."""
    return project_with_drift(v, tol)[0]


def max_index_set(x: np.ndarray, tau_tie: float = DEFAULT_PROFILE.tau_tie) -> Face:
    """``M(x)``: indices within ``tau_tie`` of the largest coordinate."""
    x = np.asarray(x, dtype=float)
    return Face.from_mask(x >= x.max() - tau_tie)


def min_index_set(x: np.ndarray, tau_tie: float = DEFAULT_PROFILE.tau_tie) -> Face:
    """Indices within ``tau_tie`` of the smallest coordinate."""
    x = np.asarray(x, dtype=float)
    return Face.from_mask(x <= x.min() + tau_tie)


def support(x: np.ndarray, threshold: float = 0.0) -> Face:
    """Indices with coordinate strictly above ``threshold``."""
    return Face.from_mask(np.asarray(x) > threshold)


def face_center(face: Face) -> np.ndarray:
    x = np.zeros(face.m)
    x[face.zero_based] = 1.0 / face.size
    return x


def vertex(m: int, k: int) -> np.ndarray:
    """The vertex ``e_k`` (1-based ``k``)."""
    return face_center(Face(m, (k,)))


def barycenter(m: int) -> np.ndarray:
    return np.full(m, 1.0 / m)


def iter_faces(m: int) -> Iterator[Face]:
    """All ``2**m - 1`` faces, smallest first, lexicographic within a size."""
    for size in range(1, m + 1):
        for idx in combinations(range(1, m + 1), size):
            yield Face(m, idx)


def random_faces(m: int, count: int, rng: np.random.Generator) -> list[Face]:
    """Random faces for dimensions too large for exhaustive enumeration.

    Always contains the full simplex and the vertices.
    """
    faces = [Face(m, (k,)) for k in range(1, m + 1)] + [Face.full(m)]
    while len(faces) < count:
        mask = rng.random(m) < 0.5
        if mask.any():
            faces.append(Face.from_mask(mask))
    return faces


def probe_faces(m: int, rng: np.random.Generator, max_exhaustive: int = 12,
                cap: int = 4096) -> list[Face]:
    if m <= max_exhaustive:
        return list(iter_faces(m))
    return random_faces(m, cap, rng)


def sample_points(face: Face, n: int, rng: np.random.Generator,
                  interior: bool = False, floor: float = 1e-6) -> np.ndarray:
    """``n`` flat-Dirichlet points on ``face`` (normalized exponential spacings).

    With ``interior`` every coordinate on the face is at least ``floor``;
    rejected draws are redrawn, which keeps the law uniform on that region.
    """
    idx = face.zero_based
    out = np.zeros((n, face.m))
    if face.size == 1:
        out[:, idx[0]] = 1.0
        return out
    filled = 0
    while filled < n:
        e = rng.standard_exponential((n - filled, face.size))
        w = e / e.sum(axis=1, keepdims=True)
        if interior:
            w = w[w.min(axis=1) >= floor]
        out[filled:filled + len(w), idx] = w
        filled += len(w)
    return out


def sample_point(face: Face, interior: bool = False, seed: int = 0) -> np.ndarray:
    """One uniform point on ``face``; deterministic in ``seed``."""
    return sample_points(face, 1, np.random.default_rng(seed), interior)[0]


def sup_distance(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionMismatch(f"shapes {x.shape} and {y.shape} differ")
    return float(np.abs(x - y).max())


def face_lattice(face: Face, density: int) -> np.ndarray:
    """Lattice points with denominator ``density`` in the relative interior of ``face``.

    Always returns at least the face center (first row).
    """
    pts = [face_center(face)]
    d = face.size
    if d == 1 or density < d:
        return np.array(pts)
    idx = face.zero_based
    # compositions of density into d positive parts via bar positions
    for bars in combinations(range(1, density), d - 1):
        parts = np.diff((0,) + bars + (density,))
        x = np.zeros(face.m)
        x[idx] = parts / density
        pts.append(x)
    return np.array(pts)
