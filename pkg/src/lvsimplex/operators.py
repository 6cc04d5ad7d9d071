"""Generating maps and Lotka-Volterra type operators ``(Vx)_k = x_k (1 + f_k(x))``.

Every generating map evaluates on a single point of shape ``(m,)`` or on a
batch of shape ``(n, m)``.  Operators are immutable; applying one always
ends with :func:`~lvsimplex.simplex.project_with_drift`, so float drift is
repaired and genuine violations surface as ``DriftExceeded``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, ClassVar

import numpy as np

from .errors import (DimensionMismatch, EntryOutOfRange, LambdaOutOfRange,
                     NotSkewSymmetric, ParameterOutOfRange, UntrustedOperator)
from .simplex import (DEFAULT_PROFILE, ToleranceProfile, probe_faces,
                      project_with_drift, sample_points)

COND3_TOL = 1e-10
STRICT_TOL = 1e-12


class GeneratingMap:
    """Base class: a map ``f`` from the simplex to ``R^m``."""

    family: ClassVar[str] = "abstract"
    m: int

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.m:
            raise DimensionMismatch(f"{self.family} expects m={self.m}, got {x.shape[-1]}")
        return self.evaluate(x)

    def params(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {"family": self.family, "m": self.m, **self.params()}

    @property
    def label(self) -> str:
        p = ", ".join(f"{k}={v}" for k, v in self.params().items()
                      if not isinstance(v, (dict, list)))
        return f"{self.family}(m={self.m}{', ' + p if p else ''})"


@dataclass(frozen=True, eq=False)
class SkewMatrix:
    """Skew-symmetric interaction matrix with entries in ``[-1, 1]``."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
            raise DimensionMismatch(f"need a square matrix with m >= 2, got shape {a.shape}")
        if not np.array_equal(a, -a.T):
            raise NotSkewSymmetric("entries must satisfy a_ki == -a_ik exactly")
        if np.abs(a).max() > 1.0:
            raise EntryOutOfRange(f"max |a_ki| = {np.abs(a).max():g} exceeds 1")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_upper(cls, m: int, upper) -> "SkewMatrix":
        """Build from the strict upper triangle listed row-major: a_12, a_13, ..., a_(m-1)m."""
        upper = np.asarray(upper, dtype=float).ravel()
        need = m * (m - 1) // 2
        if upper.size != need:
            raise DimensionMismatch(f"m={m} needs {need} upper-triangle entries, got {upper.size}")
        a = np.zeros((m, m))
        a[np.triu_indices(m, 1)] = upper
        return cls(a - a.T)

    def upper(self) -> list[float]:
        return self.entries[np.triu_indices(self.m, 1)].tolist()

    @classmethod
    def random(cls, m: int, rng: np.random.Generator, scale: float = 1.0) -> "SkewMatrix":
        return cls.from_upper(m, rng.uniform(-scale, scale, m * (m - 1) // 2))


@dataclass(frozen=True, eq=False)
class Quadratic(GeneratingMap):
    family: ClassVar[str] = "quadratic"
    A: SkewMatrix

    @property
    def m(self) -> int:
        return self.A.m

    def evaluate(self, x):
        return x @ self.A.entries.T

    def params(self):
        return {"upper": self.A.upper()}


def _check_power(eps: float, ell: int):
    if not 0 < eps <= 1:
        raise ParameterOutOfRange(f"eps must lie in (0, 1], got {eps}")
    if int(ell) != ell or ell < 1:
        raise ParameterOutOfRange(f"ell must be a positive integer, got {ell}")


@dataclass(frozen=True)
class PowerAttract(GeneratingMap):
    """``f_k = eps (x_k^ell - sum_i x_i^(ell+1))``."""

    family: ClassVar[str] = "power_attract"
    m: int
    eps: float = 1.0
    ell: int = 1

    def __post_init__(self):
        _check_power(self.eps, self.ell)

    def evaluate(self, x):
        s = np.sum(x ** (self.ell + 1), axis=-1, keepdims=True)
        return self.eps * (x ** self.ell - s)

    def params(self):
        return {"eps": self.eps, "ell": self.ell}


@dataclass(frozen=True)
class PowerRepel(GeneratingMap):
    """``f_k = eps (sum_i x_i^(ell+1) - x_k^ell)``."""

    family: ClassVar[str] = "power_repel"
    m: int
    eps: float = 1.0
    ell: int = 1

    def __post_init__(self):
        _check_power(self.eps, self.ell)

    def evaluate(self, x):
        s = np.sum(x ** (self.ell + 1), axis=-1, keepdims=True)
        return self.eps * (s - x ** self.ell)

    def params(self):
        return {"eps": self.eps, "ell": self.ell}


@dataclass(frozen=True)
class CubicHomeomorphism(GeneratingMap):
    """Cubic homeomorphism that is not f-monotone.

    ``f_k = x_k^2 + 3 sum_{i<k} x_i - 3 sum_{i<j<k} x_i x_j - 1``.
    """

    family: ClassVar[str] = "cubic"
    m: int

    def evaluate(self, x):
        # exclusive prefix sums of x and x^2
        p = np.cumsum(x, axis=-1) - x
        q = np.cumsum(x * x, axis=-1) - x * x
        pairs = 0.5 * (p * p - q)
        return x * x + 3.0 * p - 3.0 * pairs - 1.0


class _Piecewise2(GeneratingMap):
    """Piecewise map on S^1, regions split on ``x_1``.

    Region ``i`` is ``[breaks[i-1], breaks[i])``; the last one is closed.
    """

    m = 2
    breaks: ClassVar[tuple[float, ...]] = ()

    def branches(self, x1, x2):
        raise NotImplementedError

    def region(self, x) -> np.ndarray:
        """0-based region index for each point."""
        return np.searchsorted(self.breaks, np.asarray(x)[..., 0], side="right")

    def evaluate(self, x):
        x1, x2 = x[..., 0], x[..., 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            f1s, f2s = self.branches(x1, x2)
        r = self.region(x)
        f1 = np.choose(r, [np.broadcast_to(b, x1.shape) for b in f1s])
        f2 = np.choose(r, [np.broadcast_to(b, x1.shape) for b in f2s])
        return np.stack([f1, f2], axis=-1).astype(float)

    def __eq__(self, other):
        return type(self) is type(other)

    def __hash__(self):
        return hash(type(self))

    def __repr__(self):
        return f"{type(self).__name__}()"


class PiecewisePeriodic2(_Piecewise2):
    """Five-piece map of S^1 with 2-periodic points and flat pieces."""

    family = "piecewise_periodic2"
    breaks = (9 / 30, 11 / 30, 19 / 30, 21 / 30)

    def branches(self, x1, x2):
        f1 = (2.0, 9 / (10 * x1) - 1, (4 * x2 - 2) / x1, 1 / (10 * x1) - 1, -2 * x2 / x1)
        f2 = (-2 * x1 / x2, 1 / (10 * x2) - 1, (4 * x1 - 2) / x2, 9 / (10 * x2) - 1, 2.0)
        return f1, f2


class PiecewiseM1(_Piecewise2):
    """Four-piece M1 map of S^1 that collapses a whole interval."""

    family = "piecewise_m1"
    breaks = (1 / 3, 5 / 12, 1 / 2)

    def branches(self, x1, x2):
        f1 = (0.0, (x2 - 2 * x1) / (3 * x1), (x1 - x2) / (2 * x1), 0.0)
        f2 = (0.0, (2 * x1 - x2) / (3 * x2), (x2 - x1) / (2 * x2), 0.0)
        return f1, f2


@dataclass(frozen=True)
class IdentityMap(GeneratingMap):
    family: ClassVar[str] = "identity"
    m: int

    def evaluate(self, x):
        return np.zeros_like(x)


@dataclass(frozen=True, eq=False)
class Composite(GeneratingMap):
    """Generating map of ``outer o inner``."""

    family: ClassVar[str] = "compose"
    outer: "LVOperator"
    inner: "LVOperator"

    def __post_init__(self):
        if self.outer.m != self.inner.m:
            raise DimensionMismatch("cannot compose operators of different dimension")

    @property
    def m(self) -> int:
        return self.inner.m

    def evaluate(self, x):
        fg = self.inner.f.evaluate(x)
        gx = self.inner.apply(x)
        return (1.0 + fg) * (1.0 + self.outer.f.evaluate(gx)) - 1.0

    def params(self):
        return {"outer": self.outer.describe(), "inner": self.inner.describe()}

    @property
    def label(self):
        return f"compose({self.outer.label}, {self.inner.label})"


@dataclass(frozen=True, eq=False)
class Mixture(GeneratingMap):
    """Generating map of ``(1 - lam) g + lam h``."""

    family: ClassVar[str] = "mix"
    lam: float
    first: "LVOperator"
    second: "LVOperator"

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise LambdaOutOfRange(f"lambda must lie in [0, 1], got {self.lam}")
        if self.first.m != self.second.m:
            raise DimensionMismatch("cannot mix operators of different dimension")

    @property
    def m(self) -> int:
        return self.first.m

    def evaluate(self, x):
        return ((1.0 - self.lam) * self.first.f.evaluate(x)
                + self.lam * self.second.f.evaluate(x))

    def params(self):
        return {"lam": self.lam, "first": self.first.describe(),
                "second": self.second.describe()}

    @property
    def label(self):
        return f"mix({self.lam}, {self.first.label}, {self.second.label})"


@dataclass(frozen=True, eq=False)
class CustomMap(GeneratingMap):
    """User-supplied generating map.

    ``func`` maps a point ``(m,)`` to ``(m,)``; pass ``vectorized=True`` if it
    also accepts ``(n, m)`` batches.  Continuity is the caller's obligation.
    """

    family: ClassVar[str] = "custom"
    m: int
    func: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    vectorized: bool = False

    def evaluate(self, x):
        if self.vectorized or x.ndim == 1:
            return np.asarray(self.func(x), dtype=float)
        return np.array([self.func(row) for row in x], dtype=float)

    def params(self):
        return {"name": self.name}


@dataclass(frozen=True, eq=False)
class LVOperator:
    """``(Vx)_k = x_k (1 + f_k(x))`` for a generating map ``f``."""

    f: GeneratingMap
    tolerances: ToleranceProfile = DEFAULT_PROFILE
    trusted: bool = True

    @property
    def m(self) -> int:
        return self.f.m

    @property
    def label(self) -> str:
        return self.f.label

    def describe(self) -> dict:
        return self.f.describe()

    @property
    def is_identity(self) -> bool:
        return isinstance(self.f, IdentityMap)

    def raw(self, x) -> np.ndarray:
        """``x * (1 + f(x))`` before any drift repair."""
        x = np.asarray(x, dtype=float)
        return x * (1.0 + self.f(x))

    def apply_with_drift(self, x):
        return project_with_drift(self.raw(x), self.tolerances.tau_simplex)

    def apply(self, x) -> np.ndarray:
        return self.apply_with_drift(x)[0]

    __call__ = apply

    def power(self, x, r: int) -> np.ndarray:
        """``V^r x``."""
        for _ in range(r):
            x = self.apply(x)
        return np.asarray(x, dtype=float)

    def homotopy(self, x, eps: float) -> np.ndarray:
        """``V_eps x = x (1 + eps f(x))``, i.e. ``(1 - eps) x + eps V x``."""
        x = np.asarray(x, dtype=float)
        return x * (1.0 + eps * self.f(x))

    def with_tolerances(self, tolerances: ToleranceProfile) -> "LVOperator":
        return LVOperator(self.f, tolerances, self.trusted)

    def require_trusted(self):
        if not self.trusted:
            raise UntrustedOperator(
                f"{self.label} has not passed validate_lv; use require_valid() first")


def evaluate_f(f: GeneratingMap, x) -> np.ndarray:
    return f(x)


def apply(V: LVOperator, x) -> np.ndarray:
    return V.apply(x)


def quadratic_from_matrix(A, tolerances: ToleranceProfile = DEFAULT_PROFILE) -> LVOperator:
    """Quadratic Volterra operator ``(Vx)_k = x_k (1 + sum_i a_ki x_i)``."""
    if not isinstance(A, SkewMatrix):
        A = SkewMatrix(A)
    return LVOperator(Quadratic(A), tolerances)


def power_attract(m: int, eps: float = 1.0, ell: int = 1) -> LVOperator:
    return LVOperator(PowerAttract(m, eps, ell))


def power_repel(m: int, eps: float = 1.0, ell: int = 1) -> LVOperator:
    return LVOperator(PowerRepel(m, eps, ell))


def cubic(m: int) -> LVOperator:
    return LVOperator(CubicHomeomorphism(m))


def piecewise_periodic2() -> LVOperator:
    return LVOperator(PiecewisePeriodic2())


def piecewise_m1() -> LVOperator:
    return LVOperator(PiecewiseM1())


def identity(m: int) -> LVOperator:
    return LVOperator(IdentityMap(m))


def custom(m: int, func, name: str = "custom", vectorized: bool = False) -> LVOperator:
    """Wrap a user map.  The result is untrusted until :func:`require_valid`."""
    return LVOperator(CustomMap(m, func, name, vectorized), trusted=False)


def compose(h: LVOperator, g: LVOperator) -> LVOperator:
    """``h o g``: apply ``g`` first."""
    return LVOperator(Composite(h, g), g.tolerances, g.trusted and h.trusted)


def mix(lam: float, g: LVOperator, h: LVOperator) -> LVOperator:
    """``(1 - lam) g + lam h``."""
    return LVOperator(Mixture(lam, g, h), g.tolerances, g.trusted and h.trusted)


@dataclass(frozen=True)
class ConditionWitness:
    point: tuple[float, ...]
    condition: str
    value: float
    index: int | None = None  # 1-based coordinate, when the condition is per-k


@dataclass
class ValidationReport:
    samples_used: int
    faces_checked: int
    cond2_ok: bool
    cond3_ok: bool
    cond4_ok: bool
    worst_cond2_margin: float
    worst_cond3_residual: float
    worst_cond4_margin: float
    witnesses: list[ConditionWitness] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.cond2_ok and self.cond3_ok and self.cond4_ok


def validate_lv(V: LVOperator, n_samples: int = 1000, seed: int = 0,
                max_witnesses: int = 3) -> ValidationReport:
    """Sampled check of the non-negativity, normalization and strict-interior conditions.

    ``n_samples`` points are drawn in the relative interior of each face
    (every face for ``m <= 12``, a random family otherwise).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    tol = V.tolerances.tau_simplex
    faces = probe_faces(V.m, rng)
    worst2, worst3, worst4 = np.inf, 0.0, np.inf
    found = {"cond2": [], "cond3": [], "cond4": []}
    used = 0

    def note(kind, X, rows, values, cols=None):
        for i, r in enumerate(rows[:max_witnesses - len(found[kind])]):
            k = None if cols is None else int(cols[i]) + 1
            found[kind].append(ConditionWitness(tuple(X[r].tolist()), kind,
                                                float(values[i]), k))

    for face in faces:
        n = 1 if face.size == 1 else n_samples
        X = sample_points(face, n, rng, interior=True)
        used += n
        F = V.f(X)
        margin = F + 1.0
        bad = ~np.isfinite(margin)
        margin = np.where(bad, -np.inf, margin)
        worst2 = min(worst2, float(margin.min()))
        r2, c2 = np.nonzero(margin < -tol)
        if r2.size and len(found["cond2"]) < max_witnesses:
            note("cond2", X, r2, F[r2, c2], c2)

        resid = np.abs(np.sum(X * np.where(bad, 0.0, F), axis=1))
        resid[bad.any(axis=1)] = np.inf
        worst3 = max(worst3, float(resid.max()))
        r3 = np.flatnonzero(resid > COND3_TOL)
        if r3.size and len(found["cond3"]) < max_witnesses:
            note("cond3", X, r3, resid[r3])

        on = margin[:, face.zero_based]
        worst4 = min(worst4, float(on.min()))
        r4, c4 = np.nonzero(on <= STRICT_TOL)
        if r4.size and len(found["cond4"]) < max_witnesses:
            note("cond4", X, r4, F[r4, face.zero_based[c4]], face.zero_based[c4])

    witnesses = found["cond2"] + found["cond3"] + found["cond4"]
    return ValidationReport(
        samples_used=used, faces_checked=len(faces),
        cond2_ok=not found["cond2"], cond3_ok=not found["cond3"],
        cond4_ok=not found["cond4"], worst_cond2_margin=worst2,
        worst_cond3_residual=worst3, worst_cond4_margin=worst4,
        witnesses=witnesses)


def require_valid(V: LVOperator, n_samples: int = 200, seed: int = 0) -> LVOperator:
    """Return a trusted copy of ``V`` if it passes :func:`validate_lv`."""
    report = validate_lv(V, n_samples, seed)
    if not report.passed:
        first = report.witnesses[0]
        raise UntrustedOperator(
            f"{V.label} fails {first.condition} at {first.point} (value {first.value:g})")
    return LVOperator(V.f, V.tolerances, True)


def from_description(desc: dict, tolerances: ToleranceProfile = DEFAULT_PROFILE) -> LVOperator:
    """Inverse of :meth:`LVOperator.describe` for the built-in families."""
    d = dict(desc)
    family = d.pop("family", None)
    m = d.pop("m", None)

    def take(*names, required=()):
        out = {}
        for n in names:
            if n in d:
                out[n] = d.pop(n)
            elif n in required:
                raise KeyError(f"operator family {family!r} needs {n!r}")
        return out

    if family == "quadratic":
        upper = take("upper", required=("upper",))["upper"]
        op = quadratic_from_matrix(SkewMatrix.from_upper(int(m), upper), tolerances)
    elif family in ("power_attract", "power_repel"):
        kw = take("eps", "ell")
        cls = PowerAttract if family == "power_attract" else PowerRepel
        op = LVOperator(cls(int(m), float(kw.get("eps", 1.0)), int(kw.get("ell", 1))), tolerances)
    elif family == "cubic":
        op = LVOperator(CubicHomeomorphism(int(m)), tolerances)
    elif family in ("piecewise_periodic2", "piecewise_m1"):
        if m not in (None, 2):
            raise DimensionMismatch(f"{family} is defined for m=2 only")
        cls = PiecewisePeriodic2 if family == "piecewise_periodic2" else PiecewiseM1
        op = LVOperator(cls(), tolerances)
    elif family == "identity":
        op = LVOperator(IdentityMap(int(m)), tolerances)
    elif family == "compose":
        kw = take("outer", "inner", required=("outer", "inner"))
        op = compose(from_description(kw["outer"], tolerances),
                     from_description(kw["inner"], tolerances))
    elif family == "mix":
        kw = take("lam", "first", "second", required=("lam", "first", "second"))
        op = mix(float(kw["lam"]), from_description(kw["first"], tolerances),
                 from_description(kw["second"], tolerances))
    else:
        raise KeyError(f"unknown operator family {family!r}")
    if d:
        raise KeyError(f"unexpected keys for {family!r}: {sorted(d)}")
    if m is not None and op.m != int(m):
        raise DimensionMismatch(f"declared m={m} but operator has m={op.m}")
    return op
