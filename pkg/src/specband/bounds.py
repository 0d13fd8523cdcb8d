"""Executable polynomial-approximation error bounds and fitting oracles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SUP_GRID_POINTS = 2001  # feasibility grid for constrained fits
MARKOV_GRID_POINTS = 4001


class BoundsError(ValueError):
    """Invalid input to a bound computation."""


class BoundNotApplicable(BoundsError):
    """The hypothesis of the bound does not hold for these parameters."""


@dataclass(frozen=True)
class PolySpec:
    """Polynomial in the monomial basis, ascending degree.

    The leading coefficient may be zero: `degree` is an upper bound on the
    true degree, matching membership in the degree-d polynomial space.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=np.float64))
        if c.ndim != 1 or c.size == 0:
            raise BoundsError("coefficients must be a non-empty 1-d vector")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        for c in self.coeffs[::-1]:  # Horner
            out = out * x + c
        return out

    def derivative(self) -> "PolySpec":
        if self.coeffs.size == 1:
            return PolySpec(np.zeros(1))
        k = np.arange(1, self.coeffs.size)
        return PolySpec(self.coeffs[1:] * k)


@dataclass(frozen=True)
class FilterTarget:
    """Target filter values at the eigenvalues, with a sup-norm claim.

    The optional jump descriptor marks a discontinuity of magnitude `h`
    between consecutive eigenvalues (index R and R+1).
    """

    values: np.ndarray
    sup_norm: float
    jump_index: int | None = None
    jump_magnitude: float | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size == 0:
            raise BoundsError("target values must be a non-empty 1-d vector")
        if np.max(np.abs(vals)) > self.sup_norm + 1e-12:
            raise BoundsError("target values exceed the claimed sup norm")
        if (self.jump_index is None) != (self.jump_magnitude is None):
            raise BoundsError("jump index and magnitude must be given together")
        if self.jump_index is not None:
            r = self.jump_index
            if not 0 <= r < vals.size - 1:
                raise BoundsError(f"jump index {r} out of range")
            actual = abs(vals[r + 1] - vals[r])
            if not np.isclose(actual, self.jump_magnitude, rtol=1e-9, atol=1e-12):
                raise BoundsError(
                    f"jump magnitude {self.jump_magnitude} != observed {actual}")
        object.__setattr__(self, "values", vals)


def step_target(lam: np.ndarray, jump_index: int, h: float) -> FilterTarget:
    """Symmetric step of height h across consecutive eigenvalues."""
    lam = np.asarray(lam, dtype=np.float64)
    vals = np.where(np.arange(lam.size) <= jump_index, -h / 2.0, h / 2.0)
    return FilterTarget(vals, sup_norm=max(h / 2.0, 0.0), jump_index=jump_index,
                        jump_magnitude=h)


def approximation_error(p: PolySpec, f: FilterTarget, lam: np.ndarray) -> float:
    """Sum of absolute deviations between p and the target at the eigenvalues."""
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape != f.values.shape:
        raise BoundsError("eigenvalues and target values must align")
    return float(np.abs(p(lam) - f.values).sum())


def epsilon_density(lam: np.ndarray) -> float:
    """Covering radius of the eigenvalues over [-1, 1].

    The smallest eps such that every point of [-1, 1] lies within eps of
    some eigenvalue: max of the end distances and half the largest gap.
    """
    lam = np.asarray(lam, dtype=np.float64)
    if lam.size == 0:
        raise BoundsError("empty spectrum")
    if np.any(np.diff(lam) < 0):
        raise BoundsError("eigenvalues must be sorted ascending")
    if lam[0] < -1.0 - 1e-12 or lam[-1] > 1.0 + 1e-12:
        raise BoundsError("eigenvalues must lie in [-1, 1]")
    inner = float(np.max(np.diff(lam)) / 2.0) if lam.size > 1 else 0.0
    return max(float(lam[0] + 1.0), float(1.0 - lam[-1]), inner)


def dense_lower_bound(p_sup: float, d: int, eps: float) -> float:
    """Error floor sup|p| * (1 - d^2 eps) - 1 for an eps-dense spectrum."""
    if p_sup < 0:
        raise BoundsError(f"sup norm must be >= 0, got {p_sup}")
    if d < 0 or eps < 0:
        raise BoundsError("degree and eps must be >= 0")
    if d * d * eps >= 1.0:
        raise BoundNotApplicable(f"d^2 * eps = {d * d * eps:.6g} >= 1")
    return p_sup * (1.0 - d * d * eps) - 1.0


def jump_lower_bound(h: float, gap: float, d: int) -> float:
    """Error floor h - gap * d^2 for a jump across a gap of that width."""
    if h <= 0:
        raise BoundsError(f"jump magnitude must be positive, got {h}")
    if gap < 0:
        raise BoundsError(f"gap must be >= 0, got {gap}")
    return h - gap * d * d


def _grid_sup(p: PolySpec, points: int = SUP_GRID_POINTS) -> float:
    grid = np.linspace(-1.0, 1.0, points)
    return float(np.max(np.abs(p(grid))))


def best_constrained_poly(lam: np.ndarray, f: FilterTarget, d: int, sup_bound: float,
                          iters: int = 400) -> tuple[PolySpec, float]:
    """Feasible near-minimizer of the absolute error under a sup constraint.

    Projected subgradient descent on the L1 objective, started from the
    unconstrained least-squares fit; feasibility (max |p| <= sup_bound on a
    2001-point grid of [-1, 1]) is restored by rescaling. Returns the best
    feasible polynomial found and its achieved error, an upper bound on
    the true minimum.
    """
    if d > 20:
        raise BoundsError(f"degree limited to 20 for the fitting oracle, got {d}")
    if d < 0:
        raise BoundsError(f"degree must be >= 0, got {d}")
    if sup_bound <= 0:
        raise BoundsError(f"sup bound must be positive, got {sup_bound}")
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape != f.values.shape:
        raise BoundsError("eigenvalues and target values must align")
    vand = np.vander(lam, N=d + 1, increasing=True)
    coeffs, *_ = np.linalg.lstsq(vand, f.values, rcond=None)

    def feasible(c: np.ndarray) -> np.ndarray:
        sup = _grid_sup(PolySpec(c))
        if sup > sup_bound and sup > 0.0:
            return c * (sup_bound / sup)
        return c

    coeffs = feasible(coeffs)
    best = coeffs.copy()
    best_err = float(np.abs(vand @ coeffs - f.values).sum())
    scale = max(1.0, float(np.abs(vand).sum(axis=0).max()))
    for it in range(1, iters + 1):
        resid = vand @ coeffs - f.values
        subgrad = vand.T @ np.sign(resid)
        step = sup_bound / (scale * np.sqrt(it))
        coeffs = feasible(coeffs - step * subgrad)
        err = float(np.abs(vand @ coeffs - f.values).sum())
        if err < best_err:
            best_err = err
            best = coeffs.copy()
    return PolySpec(best), best_err


def markov_check(p: PolySpec, slack: float = 1e-9) -> tuple[float, float, bool]:
    """Grid estimates of sup|p| and sup|p'| with the degree-squared test.

    Returns (sup |p|, sup |p'|, flag); the flag holds when
    sup |p'| <= d^2 sup |p| + slack on a 4001-point grid of [-1, 1].
    """
    if p.degree < 1:
        raise BoundsError("polynomial degree must be >= 1")
    grid = np.linspace(-1.0, 1.0, MARKOV_GRID_POINTS)
    sup_p = float(np.max(np.abs(p(grid))))
    sup_dp = float(np.max(np.abs(p.derivative()(grid))))
    ok = sup_dp <= p.degree ** 2 * sup_p + slack
    return sup_p, sup_dp, ok


def chebyshev_poly(d: int) -> PolySpec:
    """Chebyshev polynomial of the first kind in the monomial basis."""
    if d < 0:
        raise BoundsError("degree must be >= 0")
    prev = np.array([1.0])
    if d == 0:
        return PolySpec(prev)
    cur = np.array([0.0, 1.0])
    for _ in range(d - 1):
        nxt = np.zeros(cur.size + 1)
        nxt[1:] = 2.0 * cur
        nxt[: prev.size] -= prev
        prev, cur = cur, nxt
    return PolySpec(cur)
