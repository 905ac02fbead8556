"""Parameter-region machinery for the radial gas model.

Everything here is exact or controlled-precision arithmetic on the exponent
parameters (alpha, gamma, N, kappa): membership in the dense rational set of
admissible integrability orders, the threshold curves that bound the usable
orders, selection of an order k just above 1/(2(1-alpha)), the sigma/gamma/beta
exponent windows of the density-bound argument, and the small constant of the
algebraic power inequality.  All functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

DEFAULT_S_MAX = 1000
DEFAULT_K_MAX = 1000

_N_BRACKET_LO = 1.0 + 1e-9
_N_BRACKET_HI = 1e12


class SearchExhaustedError(RuntimeError):
    """No lattice member satisfied the selection inequalities (lattice too coarse)."""


class NonPositiveEpsilonError(RuntimeError):
    """Sampled infimum of the power inequality came out non-positive."""


def a_set_contains(q) -> bool:
    """Membership in {1 + s/(2k+1) : s in N+, k in N}.

    Equivalent to: q > 1 and the lowest-terms denominator of q - 1 is odd.
    """
    q = Fraction(q)
    if q <= 1:
        return False
    return (q - 1).denominator % 2 == 1


def _check_n(n: float, tol: float = 1e-12) -> None:
    if not n > 1.0 + tol:
        raise ValueError(f"threshold curves defined for n > 1, got n={n!r}")


def alpha2_minus(n: float) -> float:
    """Lower threshold curve for N=2; increasing from 1/2 (n->1+) to 1 (n->inf).

    Rationalized form of 1 - (n*sqrt(2n-1) - 2n + 1)/(n-1)^2.
    """
    _check_n(n)
    return n / (n + math.sqrt(2.0 * n - 1.0))


def alpha2_plus(n: float) -> float:
    """Upper threshold curve for N=2; decreasing from +inf (n->1+) to 1."""
    _check_n(n)
    return n * (n + math.sqrt(2.0 * n - 1.0)) / (n - 1.0) ** 2


def alpha3_minus(n: float) -> float:
    """Lower threshold curve for N=3; increasing from 2/3 (n->1+) to 1.

    Rationalized form of 1 - (sqrt(4n(4n^2-n-1)+1) - 6n + 3)/(4n^2-8n+4).
    """
    _check_n(n)
    disc = math.sqrt(4.0 * n * (4.0 * n * n - n - 1.0) + 1.0)
    return 4.0 * n * n / (4.0 * n * n - 2.0 * n + 1.0 + disc)


def alpha3_plus(n: float) -> float:
    """Upper threshold curve for N=3; decreasing from +inf (n->1+) to 1."""
    _check_n(n)
    disc = math.sqrt(4.0 * n * (4.0 * n * n - n - 1.0) + 1.0)
    return (4.0 * n * n - 2.0 * n + 1.0 + disc) / (4.0 * (n - 1.0) ** 2)


def _bisect(curve, target: float, increasing: bool, rtol: float = 1e-13) -> float:
    lo, hi = _N_BRACKET_LO, _N_BRACKET_HI
    sgn = 1.0 if increasing else -1.0
    if sgn * (curve(lo) - target) >= 0.0 or sgn * (curve(hi) - target) <= 0.0:
        raise ValueError(f"target {target!r} not bracketed on [{lo}, {hi}]")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if sgn * (curve(mid) - target) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def n2(alpha: float) -> float:
    """Inverse of the N=2 threshold curves; +inf at alpha = 1."""
    if not alpha > 0.5:
        raise ValueError(f"n2 requires alpha > 1/2, got {alpha!r}")
    if alpha == 1.0:
        return math.inf
    if alpha < 1.0:
        return _bisect(alpha2_minus, alpha, increasing=True)
    return _bisect(alpha2_plus, alpha, increasing=False)


def n3(alpha: float) -> float:
    """Inverse of the N=3 threshold curves; +inf at alpha = 1."""
    if not alpha > 2.0 / 3.0:
        raise ValueError(f"n3 requires alpha > 2/3, got {alpha!r}")
    if alpha == 1.0:
        return math.inf
    if alpha < 1.0:
        return _bisect(alpha3_minus, alpha, increasing=True)
    return _bisect(alpha3_plus, alpha, increasing=False)


def selection_gap(a: float) -> float:
    """Gap (1 - alpha2_minus(a)) - 1/(2a); positive for every a > 1.

    Positivity is what makes the k-selection interval nonempty.
    """
    _check_n(a, tol=0.0)
    return math.sqrt(2.0 * a - 1.0) / (a + math.sqrt(2.0 * a - 1.0)) - 0.5 / a


@dataclass(frozen=True)
class KSelection:
    """A selected admissible order k = 1 + s/(2*k_idx+1) with its certificates."""

    k: Fraction
    s: int
    k_idx: int
    k0: float
    residuals: tuple[tuple[str, float], ...]

    def as_float(self) -> float:
        return float(self.k)


def _members_above(threshold: float, s_max: int, k_max: int):
    """Lattice members strictly above `threshold`, ascending, deduplicated.

    For each odd denominator only the few smallest admissible numerators are
    generated; that is enough because the selection scans upward from the
    threshold and stops at the first failure of a k-monotone inequality.
    """
    seen = {}
    for j in range(k_max + 1):
        d = 2 * j + 1
        s0 = math.floor((threshold - 1.0) * d) + 1
        for s in (s0 - 1, s0, s0 + 1):
            if 1 <= s <= s_max:
                q = Fraction(d + s, d)
                if float(q) > threshold:
                    seen.setdefault(q, None)
    out = []
    for q in sorted(seen):
        step = q - 1
        out.append((q, step.numerator, (step.denominator - 1) // 2))
    return out


def select_k_2d(alpha: float, s_max: int = DEFAULT_S_MAX, k_max: int = DEFAULT_K_MAX) -> KSelection:
    """Smallest lattice member above k0 = 1/(2(1-alpha)) inside the N=2 interval."""
    if not 0.5 < alpha < 1.0:
        raise ValueError(f"select_k_2d requires 1/2 < alpha < 1, got {alpha!r}")
    k0 = 1.0 / (2.0 * (1.0 - alpha))
    for q, s, j in _members_above(k0, s_max, k_max):
        kf = float(q)
        res = (
            ("alpha - alpha2_minus(k)", alpha - alpha2_minus(kf)),
            ("1 - 1/(2k) - alpha", (1.0 - 0.5 / kf) - alpha),
        )
        if all(r > 0.0 for _, r in res):
            return KSelection(q, s, j, k0, res)
        if res[0][1] <= 0.0:
            break  # lower curve already passed alpha; larger k only worse
    raise SearchExhaustedError(
        f"no member of the s<={s_max}, k<={k_max} lattice satisfies the N=2 "
        f"inequalities above k0={k0!r} (alpha={alpha!r})"
    )


def select_k_3d(alpha: float, gamma: float,
                s_max: int = DEFAULT_S_MAX, k_max: int = DEFAULT_K_MAX) -> KSelection:
    """Smallest lattice member above k0 satisfying the four N=3 inequalities."""
    if not 5.0 / 6.0 < alpha < 1.0:
        raise ValueError(f"select_k_3d requires 5/6 < alpha < 1, got alpha={alpha!r}")
    gamma_cap = 4.0 * alpha - 1.0 - alpha * alpha
    if not 4.0 / 3.0 < gamma < gamma_cap:
        raise ValueError(
            f"select_k_3d requires 4/3 < gamma < 4*alpha-1-alpha^2 = {gamma_cap!r}, "
            f"got gamma={gamma!r}"
        )
    k0 = 1.0 / (2.0 * (1.0 - alpha))
    threshold = max(k0, 3.0)  # k > 3 required; k0 > 3 whenever alpha > 5/6
    for q, s, j in _members_above(threshold, s_max, k_max):
        kf = float(q)
        res = (
            ("alpha - (4k+3)/(4k+6)", alpha - (4.0 * kf + 3.0) / (4.0 * kf + 6.0)),
            ("1 - 1/(2k) - alpha", (1.0 - 0.5 / kf) - alpha),
            ("gamma - 4/3", gamma - 4.0 / 3.0),
            ("3a - 1 + a/(2k) - gamma", 3.0 * alpha - 1.0 + 0.5 * alpha / kf - gamma),
            ("k - 3", kf - 3.0),
        )
        if all(r > 0.0 for _, r in res):
            return KSelection(q, s, j, k0, res)
        if res[0][1] <= 0.0 or res[3][1] <= 0.0:
            break
    raise SearchExhaustedError(
        f"no member of the s<={s_max}, k<={k_max} lattice satisfies the N=3 "
        f"inequalities above k0={k0!r} (alpha={alpha!r}, gamma={gamma!r})"
    )


@dataclass(frozen=True)
class ParamWindow:
    """Interval certificate for one inequality chain."""

    lo: float
    hi: float
    satisfied: bool = field(init=False)
    witness: float | None = field(init=False)

    def __post_init__(self):
        ok = self.lo < self.hi
        object.__setattr__(self, "satisfied", ok)
        object.__setattr__(self, "witness", 0.5 * (self.lo + self.hi) if ok else None)

    def contains(self, value: float) -> bool:
        return self.lo < value < self.hi


def sigma_window(alpha: float, k: float) -> ParamWindow:
    k = float(k)
    return ParamWindow((2.0 * k + 2.0 - (2.0 * k + 3.0) * alpha) / k, 0.5 / k)


def gamma_window(alpha: float, k: float, sigma: float) -> ParamWindow:
    k = float(k)
    return ParamWindow(alpha - 0.5 * alpha / k + sigma,
                       3.0 * alpha - 1.0 + 0.5 * (alpha - 1.0) / k + sigma)


def beta_window(alpha: float, k: float, sigma: float) -> ParamWindow:
    k = float(k)
    lo = max(sigma, 0.0, alpha - 1.0 + 0.5 / k)
    hi = min(2.0 * alpha - 1.0, (3.0 * alpha - 2.0) * (1.0 - 1.0 / k))
    return ParamWindow(lo, hi)


def sigma_window_for_gamma(alpha: float, k: float, gamma: float) -> ParamWindow:
    """Sub-window of sigma values whose gamma window contains the given gamma.

    The bare sigma window only constrains sigma; closing the chain requires a
    gamma-aware choice, so the witness is taken from this intersection.
    """
    k = float(k)
    base = sigma_window(alpha, k)
    lo = max(base.lo, gamma - (3.0 * alpha - 1.0) - 0.5 * (alpha - 1.0) / k)
    hi = min(base.hi, gamma - alpha + 0.5 * alpha / k)
    return ParamWindow(lo, hi)


def _odd_signed_power(x: np.ndarray, e: float) -> np.ndarray:
    # e is odd/odd rational, so x**e means sign(x)*|x|**e on the real line
    return np.sign(x) * np.abs(x) ** e


def mdense_epsilon(k: int, s: int, resolution: int = 2048) -> float:
    """Sampled positive constant for a(a+b)^(1+2s/(2k+1)) >= eps|a|^p - |b|^p.

    p = 2 + 2s/(2k+1).  By p-homogeneity, sampling reduces to b in {-1, +1}
    and a on a signed log grid; the sampled infimum is shrunk by 0.99.
    """
    if k < 0 or s < 1:
        raise ValueError("need k >= 0 and s >= 1")
    if resolution < 1000:
        raise ValueError(f"resolution must be >= 1000, got {resolution}")
    p = 2.0 + 2.0 * s / (2.0 * k + 1.0)
    mags = np.logspace(-6.0, 6.0, resolution)
    a = np.concatenate([-mags[::-1], mags])
    worst = math.inf
    for b in (-1.0, 1.0):
        vals = (a * _odd_signed_power(a + b, p - 1.0) + 1.0) / np.abs(a) ** p
        worst = min(worst, float(vals.min()))
    if worst <= 0.0:
        raise NonPositiveEpsilonError(
            f"sampled infimum {worst!r} <= 0 for k={k}, s={s}; contradicts the inequality"
        )
    return 0.99 * worst


@dataclass(frozen=True)
class ExponentPair:
    """Physical exponents: viscosity alpha, adiabatic gamma, dimension, coupling sign."""

    alpha: float
    gamma: float
    dim: int
    kappa: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim!r}")
        if self.kappa not in (-1, 1):
            raise ValueError(f"kappa must be -1 or +1, got {self.kappa!r}")
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")


@dataclass(frozen=True)
class Violation:
    bound: str
    margin: float

    def __str__(self):
        return f"{self.bound} (margin {self.margin:+.6g})"


def validate_params(p: ExponentPair) -> list[Violation]:
    """Empty list iff (N, alpha, gamma, kappa) sits inside one of the four regimes."""
    v: list[Violation] = []
    a, g = p.alpha, p.gamma
    if p.dim == 2:
        if a == 1.0:
            if not g > 1.0:
                v.append(Violation("N=2, alpha=1 requires gamma > 1", g - 1.0))
        elif 0.5 < a < 1.0:
            if not g > 2.0 - a:
                v.append(Violation("N=2 requires gamma > 2 - alpha", g - (2.0 - a)))
        else:
            v.append(Violation("N=2 requires 1/2 < alpha <= 1", min(a - 0.5, 1.0 - a)))
    else:
        if a == 1.0:
            if not g > 4.0 / 3.0:
                v.append(Violation("N=3, alpha=1 requires gamma > 4/3", g - 4.0 / 3.0))
            if not g < 3.0:
                v.append(Violation("N=3, alpha=1 requires gamma < 3", 3.0 - g))
        elif 5.0 / 6.0 < a < 1.0:
            cap = 4.0 * a - 1.0 - a * a
            if not g > 4.0 / 3.0:
                v.append(Violation("N=3 requires gamma > 4/3", g - 4.0 / 3.0))
            if not g < cap:
                v.append(Violation("N=3 requires gamma < 4*alpha - 1 - alpha^2", cap - g))
        else:
            v.append(Violation("N=3 requires 5/6 < alpha <= 1", min(a - 5.0 / 6.0, 1.0 - a)))
        if p.kappa == 1 and not g > 4.0 / 3.0:
            v.append(Violation("gaseous star (kappa=+1, N=3) requires gamma > 4/3",
                               g - 4.0 / 3.0))
    return v
