"""The Manneville-Pomeau / Liverani-Saussol-Vaienti map family.

    f(x) = x (1 + 2^a x^a)   for x in [0, 1/2)
    f(x) = 2x - 1            for x in [1/2, 1]

with a in (0, 1); 0 is an indifferent fixed point and 1 a repelling one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

SQRT5_MINUS_2 = math.sqrt(5.0) - 2.0


class DomainError(ValueError):
    """Argument outside [0, 1] (or not finite)."""


@dataclass(frozen=True)
class MapParams:
    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not math.isfinite(a) or not 0.0 < a < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    @property
    def thm2_window(self) -> bool:
        """True when alpha < sqrt(5) - 2, where an adjusted EVL at 0 exists."""
        return self.alpha < SQRT5_MINUS_2

    @property
    def k(self) -> float:
        return 2.0**self.alpha


@dataclass(frozen=True)
class Interval:
    """Half-open interval [lo, hi) inside [0, 1]."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (0.0 <= lo < hi <= 1.0):
            raise ValueError(f"need 0 <= lo < hi <= 1, got [{lo}, {hi})")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, x):
        x = np.asarray(x)
        return (x >= self.lo) & (x < self.hi)

    def __contains__(self, x) -> bool:
        return bool(self.lo <= x < self.hi)


@dataclass(frozen=True)
class BranchWord:
    """Finite word over {L, R} addressing a composition of inverse branches.

    The letters are applied left to right to a point, so the periodic point
    of ``RL`` satisfies ``zeta = g_L(g_R(zeta))`` and lies in [0, 1/2).
    """

    word: str

    def __post_init__(self):
        w = str(self.word).upper()
        if not w or set(w) - {"L", "R"}:
            raise ValueError(f"branch word must be a non-empty string over L/R, got {self.word!r}")
        object.__setattr__(self, "word", w)

    @property
    def period(self) -> int:
        return len(self.word)

    @property
    def all_left(self) -> bool:
        return set(self.word) == {"L"}


@dataclass(frozen=True)
class PeriodicPointRecord:
    zeta: float
    period: int
    deriv: float
    theta: float
    word: BranchWord | None = None


@dataclass(frozen=True)
class RenewalPartition:
    """Left preimages r_0 = 1 > r_1 = 1/2 > r_2 > ... of 1."""

    r: np.ndarray = field(repr=False)

    @property
    def M(self) -> int:
        return len(self.r) - 1

    def cells(self) -> list[Interval]:
        return [Interval(self.r[m + 1], self.r[m]) for m in range(self.M)]

    def spacings(self) -> np.ndarray:
        return -np.diff(self.r)

    def cell_index(self, x: float) -> int:
        """m such that x in [r_{m+1}, r_m), or -1 if x < r_M."""
        # r is decreasing
        m = int(np.searchsorted(-self.r, -x, side="right")) - 1
        if m >= self.M:
            return -1
        return m


def _check_domain(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"argument outside [0, 1]: {x!r}")
    return arr


def evaluate(params: MapParams, x):
    """Apply the map once. Accepts scalars or arrays."""
    arr = _check_domain(x)
    a = params.alpha
    out = np.where(arr < 0.5, arr * (1.0 + params.k * arr**a), 2.0 * arr - 1.0)
    return float(out) if out.ndim == 0 else out


def derivative(params: MapParams, x):
    """Df(x): 1 + 2^a (1 + a) x^a on the left branch and 2 on the right."""
    arr = _check_domain(x)
    a = params.alpha
    out = np.where(arr < 0.5, 1.0 + params.k * (1.0 + a) * arr**a, 2.0)
    return float(out) if out.ndim == 0 else out


def inverse_branch(params: MapParams, branch: str, y):
    """Inverse of the left (``"L"``) or right (``"R"``) branch.

    The left inverse is solved by bisection followed by Newton polishing;
    the result is accurate to a few ulps (far below 1e-14 absolute).
    """
    arr = _check_domain(y)
    b = str(branch).upper()
    if b == "R":
        out = 0.5 * (arr + 1.0)
    elif b == "L":
        out = _kernels.left_inverse_array(np.atleast_1d(arr).astype(float), params.alpha)
        out = out.reshape(arr.shape)
    else:
        raise ValueError(f"branch must be 'L' or 'R', got {branch!r}")
    return float(out) if np.ndim(out) == 0 else out


def orbit(params: MapParams, x0: float, n: int) -> np.ndarray:
    """(x0, f(x0), ..., f^{n-1}(x0))."""
    _check_domain(x0)
    if n < 1:
        raise ValueError("n must be >= 1")
    return _kernels.orbit(float(x0), params.alpha, int(n))


def preimage_ladder(params: MapParams, M: int) -> RenewalPartition:
    """r_0 = 1 and r_{m+1} = g_L(r_m) for m < M."""
    if M < 1:
        raise ValueError("M must be >= 1")
    r = np.empty(M + 1)
    r[0] = 1.0
    for m in range(M):
        r[m + 1] = _kernels.left_inverse(r[m], params.alpha)
    return RenewalPartition(r)


def periodic_point(params: MapParams, word: BranchWord | str, tol: float = 1e-14) -> PeriodicPointRecord:
    """Locate the periodic point coded by `word` by backward iteration.

    The composed inverse branch is a contraction unless the word is all L,
    so iterating it from 0.75 converges to the unique fixed point.

    Parameters
    ----------
    params : MapParams
    word : BranchWord or str
        Letters applied left to right, e.g. ``"RL"`` means g_L after g_R.
    tol : float
        Stop once successive iterates differ by less than this.

    Returns
    -------
    PeriodicPointRecord
        With ``theta = 1 - 1/Df^p(zeta)``.
    """
    if not isinstance(word, BranchWord):
        word = BranchWord(word)
    if word.all_left:
        raise ValueError(f"word {word.word!r} collapses onto the indifferent fixed point 0")

    def pull(x):
        for b in word.word:
            x = 0.5 * (x + 1.0) if b == "R" else _kernels.left_inverse(x, params.alpha)
        return x

    x = 0.75
    for _ in range(100_000):
        nxt = pull(x)
        if abs(nxt - x) < tol:
            x = nxt
            break
        x = nxt
    else:
        raise RuntimeError("backward iteration did not converge")
    # settle onto a float fixed point of the composition when one exists
    for _ in range(64):
        nxt = pull(x)
        if nxt == x:
            break
        x = nxt

    p = word.period
    pts = _kernels.orbit(x, params.alpha, p + 1)
    if abs(pts[p] - x) > 1e-10:
        raise RuntimeError(f"|f^p(zeta) - zeta| = {abs(pts[p] - x):.3g} exceeds 1e-10")
    deriv = float(np.prod([derivative(params, float(t)) for t in pts[:p]]))
    return PeriodicPointRecord(zeta=float(x), period=p, deriv=deriv, theta=1.0 - 1.0 / deriv, word=word)
