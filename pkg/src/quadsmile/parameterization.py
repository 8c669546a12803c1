"""Smile parameterizations: map free parameters to local-variance functions.

Three model families produce the piecewise-quadratic local variance:

* ``LinearVolModel`` with ``multiply_by_x=False``: ``a(x)`` is the piecewise
  *linear* interpolation of per-node levels (normal/absolute units), constant
  beyond the outermost nodes,
* ``LinearVolModel`` with ``multiply_by_x=True``: the same linear
  interpolation multiplied by ``x`` (lognormal/proportional units), so each
  piece is quadratic with a root at zero,
* ``SplineVolModel``: a strictly positive quadratic B-spline on a knot
  vector derived from the strikes by one of five strategies.

All models place the forward on an interior breakpoint.  The third-derivative
smoothness condition for the interpolated *price* ties one parameter (the
level at the forward, or the spline coefficient whose basis function peaks at
the forward) to the solved time value at the forward:

    a(F) = 2 * V(F) * (a'(F-) - a'(F+))

For every family the left side and the derivative jump are affine in the tied
parameter, so for a fixed ``V(F)`` the condition is solved exactly from two
evaluations; iterating solve -> update converges in a few rounds
(:func:`solve_with_c3`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import (
    DenominatorNearZeroError,
    InvalidStrategyError,
    NonPositiveParameterError,
)
from .kernel import QuadraticPiece
from .pdde import LocalVarianceFunction, LVGSolution, solve_pdde

__all__ = [
    "KNOT_STRATEGIES",
    "LinearVolModel",
    "SplineVolModel",
    "C3Result",
    "make_linear_model",
    "make_spline_model",
    "make_spline_knots",
    "locate_forward_coefficient",
    "spline_to_pieces",
    "subsample_strikes",
    "solve_with_c3",
    "solve_without_c3",
]

KNOT_STRATEGIES = ("strikes", "mid-strikes", "mid-x", "mid-xx", "uniform")

# Matching floats produced by the same arithmetic: used to decide whether the
# forward coincides with a strike or a midpoint.
_MERGE_REL = 1e-12


def _same(x: float, y: float) -> bool:
    return abs(x - y) <= _MERGE_REL * max(abs(x), abs(y))


def subsample_strikes(
    strikes: np.ndarray,
    max_count: int | None,
    min_gap: float | None = None,
) -> np.ndarray:
    """Thin a strike grid to roughly ``max_count`` nodes, keeping both ends.

    Takes every ``round(n / max_count)``-th strike starting from the first
    and always includes the last one.  ``min_gap`` optionally drops kept
    strikes closer than that to their predecessor (the last strike always
    survives).
    """
    strikes = np.asarray(strikes, dtype=float)
    n = strikes.size
    if max_count is not None and max_count < 2:
        raise InvalidStrategyError("need at least two nodes after subsampling")
    if max_count is None or max_count >= n:
        picked = strikes.copy()
    else:
        step = max(1, int(round(n / max_count)))
        idx = sorted(set(range(0, n, step)) | {n - 1})
        picked = strikes[idx]
    if min_gap is not None and min_gap > 0.0:
        kept = [float(picked[0])]
        for k in picked[1:-1]:
            if float(k) - kept[-1] >= min_gap:
                kept.append(float(k))
        if float(picked[-1]) - kept[-1] < min_gap and len(kept) > 1:
            kept.pop()
        kept.append(float(picked[-1]))
        picked = np.array(kept)
    return picked


# ---------------------------------------------------------------------------
# Spline knot construction
# ---------------------------------------------------------------------------


def make_spline_knots(
    strikes: np.ndarray,
    forward: float,
    lower: float,
    upper: float,
    strategy: str,
) -> np.ndarray:
    """Full quadratic-spline knot vector for one placement strategy.

    The vector has triple knots at both boundaries and the forward always
    appears with multiplicity two, which lets the local-variance slope
    kink there.  Strategies:

    * ``strikes``: every strike is a knot,
    * ``mid-strikes``: midpoints of consecutive strikes are knots,
    * ``mid-x``: midpoints except the one in the forward's strike gap,
    * ``mid-xx``: ``mid-x`` plus one extrapolated midpoint beyond each end,
    * ``uniform``: an even grid over the strike range, shifted so that the
      nearest grid node lands exactly on the forward.
    """
    strikes = np.asarray(strikes, dtype=float)
    n = strikes.size
    if n < 2:
        raise InvalidStrategyError("need at least two strikes")
    if not np.all(np.diff(strikes) > 0.0):
        raise InvalidStrategyError("strikes must be strictly increasing")
    if not lower < strikes[0] or not strikes[-1] < upper:
        raise InvalidStrategyError(
            "strikes must lie strictly inside the model domain"
        )
    if not strikes[0] <= forward <= strikes[-1]:
        raise InvalidStrategyError(
            "knot strategies require the forward within the strike range"
        )

    if strategy == "strikes":
        base = [float(k) for k in strikes if not _same(float(k), forward)]
    elif strategy in ("mid-strikes", "mid-x", "mid-xx"):
        mids = [float(0.5 * (a + b)) for a, b in zip(strikes[:-1], strikes[1:])]
        if strategy == "mid-strikes":
            base = [m for m in mids if not _same(m, forward)]
        else:
            # Drop the midpoint of the strike gap containing the forward
            # (the doubled forward knot replaces it).
            gap = int(np.searchsorted(strikes, forward, side="right") - 1)
            gap = min(max(gap, 0), n - 2)
            base = [m for i, m in enumerate(mids) if i != gap]
            if strategy == "mid-xx":
                # Extrapolated outer midpoints; for very wide strike grids
                # they can escape the model domain and are then skipped.
                margin = 1e-9 * (upper - lower)
                outer_lo = float(0.5 * (3.0 * strikes[0] - strikes[1]))
                outer_hi = float(0.5 * (3.0 * strikes[-1] - strikes[-2]))
                if outer_lo > lower + margin:
                    base.insert(0, outer_lo)
                if outer_hi < upper - margin:
                    base.append(outer_hi)
    elif strategy == "uniform":
        h = float(strikes[-1] - strikes[0]) / n
        nearest = round((forward - float(strikes[0])) / h)
        shift = forward - (float(strikes[0]) + nearest * h)
        base = [float(strikes[0]) + i * h + shift for i in range(n + 1)]
        base = [b for b in base if not _same(b, forward)]
    else:
        raise InvalidStrategyError(
            f"unknown knot strategy {strategy!r}; expected one of {KNOT_STRATEGIES}"
        )

    interior = sorted(base + [forward, forward])
    if any(not lower < b < upper for b in interior):
        raise InvalidStrategyError(
            "knot strategy produced knots outside the model domain"
        )
    return np.array([lower] * 3 + interior + [upper] * 3)


def locate_forward_coefficient(knots: np.ndarray, forward: float) -> int:
    """Index of the spline coefficient whose basis function is 1 at the forward.

    Requires the forward to be a knot of multiplicity two; the quadratic
    basis function starting two knots earlier then peaks at exactly one.
    """
    matches = np.flatnonzero(knots == forward)
    if matches.size != 2:
        raise InvalidStrategyError(
            "the forward must appear exactly twice in the knot vector"
        )
    return int(matches[0]) - 1


def _tie_group_sizes(excess: int) -> tuple[int, int]:
    """End-tie group sizes consuming ``excess`` constraints.

    The first ``g_lo`` coefficients share one value and the last ``g_hi``
    share one value, removing ``(g_lo - 1) + (g_hi - 1)`` degrees of freedom.
    """
    if excess == 4:
        return 3, 3
    if excess == 3:
        return 3, 2
    if excess == 2:
        return 2, 2
    raise InvalidStrategyError(
        f"knot layout leaves {excess} surplus coefficients; expected 2, 3 or 4"
    )


# ---------------------------------------------------------------------------
# Spline evaluation: expansion into power-basis quadratic pieces
# ---------------------------------------------------------------------------


def _interval_basis_quadratics(t: np.ndarray, j: int) -> list[tuple]:
    """Power-basis coefficients of the three active quadratic B-splines.

    On a nonempty interval ``[t_j, t_{j+1})`` the active functions are
    ``B_{j-2}, B_{j-1}, B_j``; each is returned as ``(alpha, beta, gamma)``.
    The relevant knot differences are at least the interval width, so no
    denominator vanishes.  Computed in extended precision: the curvatures of
    the three functions nearly cancel for smooth coefficient vectors, and
    double-precision formation would leak that cancellation into the stored
    piece coefficients.
    """
    one = np.longdouble(1.0)
    t0, t1 = np.longdouble(t[j]), np.longdouble(t[j + 1])
    tm1 = np.longdouble(t[j - 1])
    t2 = np.longdouble(t[j + 2])
    w = t1 - t0
    d_left = (t1 - tm1) * w
    d_right = (t2 - t0) * w

    # B_{j-2} = (t1 - x)^2 / ((t1 - t_{j-1}) (t1 - t0))
    b_outer_left = (one / d_left, -2.0 * t1 / d_left, t1 * t1 / d_left)
    # B_j = (x - t0)^2 / ((t_{j+2} - t0) (t1 - t0))
    b_outer_right = (one / d_right, -2.0 * t0 / d_right, t0 * t0 / d_right)
    # B_{j-1} = (x - t_{j-1})(t1 - x)/d_left + (t_{j+2} - x)(x - t0)/d_right
    alpha = -one / d_left - one / d_right
    beta = (t1 + tm1) / d_left + (t2 + t0) / d_right
    gamma = -tm1 * t1 / d_left - t2 * t0 / d_right
    return [b_outer_left, (alpha, beta, gamma), b_outer_right]


def spline_to_pieces(
    t: np.ndarray, coefficients: np.ndarray
) -> tuple[np.ndarray, tuple[QuadraticPiece, ...]]:
    """Expand a quadratic B-spline into breakpoints and quadratic pieces.

    Args:
        t: Full knot vector (triple boundary knots, possibly repeated
            interior knots).
        coefficients: One coefficient per basis function
            (``len(t) - 3`` of them).

    Returns:
        ``(breakpoints, pieces)`` with one piece per consecutive pair of
        distinct breakpoints.
    """
    t = np.asarray(t, dtype=float)
    lam = np.asarray(coefficients, dtype=float)
    if lam.size != t.size - 3:
        raise InvalidStrategyError(
            f"{t.size - 3} coefficients required, got {lam.size}"
        )
    breaks = np.unique(t)
    pieces = []
    for b_lo, b_hi in zip(breaks[:-1], breaks[1:]):
        j = int(np.searchsorted(t, b_lo, side="right") - 1)
        assert t[j] == b_lo and t[j + 1] == b_hi
        alpha = beta = gamma = np.longdouble(0.0)
        for offset, (a_c, b_c, g_c) in enumerate(_interval_basis_quadratics(t, j)):
            lam_i = np.longdouble(lam[j - 2 + offset])
            alpha += lam_i * a_c
            beta += lam_i * b_c
            gamma += lam_i * g_c
        pieces.append(QuadraticPiece(float(alpha), float(beta), float(gamma)))
    return breaks, tuple(pieces)


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearVolModel:
    """Piecewise-linear level interpolation, optionally multiplied by ``x``.

    Attributes:
        nodes: Interpolation nodes (strikes after subsampling, with the
            forward inserted), strictly inside ``(lower, upper)``.
        forward: Forward price; always one of the nodes.
        lower, upper: Model domain boundaries.
        multiply_by_x: Interpret levels as proportional (lognormal-style)
            volatilities, multiplying the interpolation by ``x``.
        enforce_c3: Tie the level at the forward to the smoothness condition
            instead of treating it as a free parameter.
    """

    nodes: np.ndarray
    forward: float
    lower: float
    upper: float
    multiply_by_x: bool
    enforce_c3: bool = True
    forward_node: int = field(init=False)

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if not np.all(np.diff(nodes) > 0.0):
            raise InvalidStrategyError("nodes must be strictly increasing")
        if not self.lower < nodes[0] or not nodes[-1] < self.upper:
            raise InvalidStrategyError("nodes must lie inside the domain")
        if self.multiply_by_x and self.lower <= 0.0:
            raise InvalidStrategyError(
                "proportional levels require a positive lower boundary"
            )
        pos = np.flatnonzero(nodes == self.forward)
        if pos.size != 1:
            raise InvalidStrategyError("the forward must be exactly one node")
        object.__setattr__(self, "forward_node", int(pos[0]))

    @property
    def n_free(self) -> int:
        return self.nodes.size - (1 if self.enforce_c3 else 0)

    def parameter_positions(self) -> np.ndarray:
        """Representative price per free parameter (its interpolation node)."""
        if not self.enforce_c3:
            return self.nodes.copy()
        return np.delete(self.nodes, self.forward_node)

    def initial_params(self, vol_curve) -> np.ndarray:
        """Seed levels from a Black-vol curve evaluated at the nodes.

        A proportional (lognormal-style) smile has local level roughly
        ``vol * x`` in absolute units, so each node starts at the market
        vol there times the node price (or the vol itself when the model
        already multiplies by ``x``).  Starting wings at their own market
        level keeps deep-out-of-the-money prices on a sane scale, where a
        flat at-the-money start would make them vanish beyond recovery.
        """
        positions = self.parameter_positions()
        if self.multiply_by_x:
            return np.array([float(vol_curve(float(x))) for x in positions])
        return np.array(
            [float(vol_curve(float(x))) * float(x) for x in positions]
        )

    def seed_slot(self, vol_curve) -> None:
        """No reserved level without the smoothness tie.

        When the tie is off every node level is a free parameter, so the
        build needs no extra value; returns ``None`` for interface parity
        with the spline model.
        """
        return None

    def _levels(self, free: np.ndarray, slot: float | None) -> np.ndarray:
        free = np.asarray(free, dtype=float)
        if free.size != self.n_free:
            raise InvalidStrategyError(
                f"{self.n_free} parameters required, got {free.size}"
            )
        if not self.enforce_c3:
            if not np.all(free > 0.0):
                raise NonPositiveParameterError("node levels must be positive")
            return free.copy()
        if slot is None:
            raise InvalidStrategyError("this model requires the tied level")
        levels = np.empty(self.nodes.size)
        levels[: self.forward_node] = free[: self.forward_node]
        levels[self.forward_node] = slot
        levels[self.forward_node + 1 :] = free[self.forward_node :]
        if not np.all(levels > 0.0):
            raise NonPositiveParameterError("node levels must be positive")
        return levels

    def build(
        self, free: np.ndarray, slot: float | None = None
    ) -> LocalVarianceFunction:
        """Local-variance function for the given free parameters."""
        levels = self._levels(free, slot)
        knots = np.concatenate([[self.lower], self.nodes, [self.upper]])
        pieces = []
        for i in range(knots.size - 1):
            if i == 0:
                slope, level = 0.0, float(levels[0])
                x_ref = float(self.nodes[0])
            elif i == knots.size - 2:
                slope, level = 0.0, float(levels[-1])
                x_ref = float(self.nodes[-1])
            else:
                x0, x1 = float(self.nodes[i - 1]), float(self.nodes[i])
                slope = (float(levels[i]) - float(levels[i - 1])) / (x1 - x0)
                level, x_ref = float(levels[i - 1]), x0
            # linear level function: level + slope * (x - x_ref)
            b_lin = slope
            g_lin = level - slope * x_ref
            if self.multiply_by_x:
                pieces.append(QuadraticPiece(b_lin, g_lin, 0.0))
            else:
                pieces.append(QuadraticPiece(0.0, b_lin, g_lin))
        return LocalVarianceFunction(knots, tuple(pieces), self.forward_node + 1)

    def forward_value_and_jump(
        self, free: np.ndarray, slot: float
    ) -> tuple[float, float]:
        """``a(F)`` and the derivative jump ``a'(F-) - a'(F+)``."""
        levels = self._levels(free, slot)
        i = self.forward_node
        f = self.forward
        level_f = float(levels[i])
        slope_left = (
            (level_f - float(levels[i - 1])) / (f - float(self.nodes[i - 1]))
            if i > 0
            else 0.0
        )
        slope_right = (
            (float(levels[i + 1]) - level_f) / (float(self.nodes[i + 1]) - f)
            if i < self.nodes.size - 1
            else 0.0
        )
        if self.multiply_by_x:
            return level_f * f, f * (slope_left - slope_right)
        return level_f, slope_left - slope_right

    def default_slot(self, free: np.ndarray) -> float:
        """Interpolated level at the forward from its neighbour nodes."""
        free = np.asarray(free, dtype=float)
        i = self.forward_node
        if i == 0:
            return float(free[0])
        if i == self.nodes.size - 1:
            return float(free[-1])
        h_lo = self.forward - float(self.nodes[i - 1])
        h_hi = float(self.nodes[i + 1]) - self.forward
        lev_lo, lev_hi = float(free[i - 1]), float(free[i])
        return (lev_lo * h_hi + lev_hi * h_lo) / (h_lo + h_hi)


@dataclass(frozen=True)
class SplineVolModel:
    """Strictly positive quadratic B-spline local variance.

    The knot vector always carries the forward as a double knot, so one
    coefficient — the one whose value the spline takes exactly at the
    forward — is reserved in every layout.  With ``enforce_c3=True`` the
    smoothness fixed point supplies that coefficient; with ``enforce_c3=False``
    it is frozen at a caller-provided value (conventionally its seed from
    the initial vol curve), which reproduces the density artefact at the
    forward that the smoothness condition exists to remove.

    Attributes:
        knots: Full knot vector from :func:`make_spline_knots`.
        forward: Forward price (always an interior double knot).
        n_strikes: Number of strikes the layout was derived from; the free
            parameter count equals it.
        enforce_c3: Tie the coefficient at the forward to the smoothness
            condition instead of freezing it.
    """

    knots: np.ndarray
    forward: float
    n_strikes: int
    enforce_c3: bool = True
    slot_index: int = field(init=False)
    tie_lo: int = field(init=False)
    tie_hi: int = field(init=False)

    def __post_init__(self) -> None:
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        n_lambda = knots.size - 3
        excess = n_lambda - self.n_strikes - 1
        tie_lo, tie_hi = _tie_group_sizes(excess)
        object.__setattr__(self, "tie_lo", tie_lo)
        object.__setattr__(self, "tie_hi", tie_hi)
        object.__setattr__(
            self, "slot_index", locate_forward_coefficient(knots, self.forward)
        )

    @property
    def n_lambda(self) -> int:
        return self.knots.size - 3

    @property
    def n_free(self) -> int:
        return self.n_strikes

    @property
    def lower(self) -> float:
        return float(self.knots[0])

    @property
    def upper(self) -> float:
        return float(self.knots[-1])

    def _free_groups(self) -> list[list[int]]:
        """Coefficient indices controlled by each free parameter, in order."""
        middle = list(range(self.tie_lo, self.n_lambda - self.tie_hi))
        if self.slot_index in middle:
            middle.remove(self.slot_index)
        groups: list[list[int]] = [list(range(self.tie_lo))]
        groups.extend([i] for i in middle)
        groups.append(
            list(range(self.n_lambda - self.tie_hi, self.n_lambda))
        )
        return groups

    def parameter_positions(self) -> np.ndarray:
        """Representative price per free parameter.

        Each quadratic-spline coefficient acts around its Greville
        abscissa (the mean of the two interior knots of its support);
        tied groups are represented by their group mean.
        """
        t = self.knots
        greville = 0.5 * (t[1:-2] + t[2:-1])
        return np.array(
            [float(np.mean(greville[g])) for g in self._free_groups()]
        )

    def initial_params(self, vol_curve) -> np.ndarray:
        """Seed coefficients from a Black-vol curve: level ``vol * x``.

        The control polygon tracks the curve, so each coefficient starts
        at the absolute level a proportional smile would have at its own
        Greville position.  See ``LinearVolModel.initial_params``.
        """
        positions = self.parameter_positions()
        return np.array(
            [float(vol_curve(float(x))) * float(x) for x in positions]
        )

    def seed_slot(self, vol_curve) -> float:
        """Initial value of the coefficient at the forward.

        Follows the same ``vol * x`` rule as :meth:`initial_params`; the
        reserved coefficient's Greville position is exactly the forward
        because of the double knot.  Used directly (and kept frozen) when
        the smoothness condition is disabled.
        """
        return float(vol_curve(self.forward)) * self.forward

    def coefficients(self, free: np.ndarray, slot: float | None) -> np.ndarray:
        """Full coefficient vector from free parameters, ties and the slot."""
        free = np.asarray(free, dtype=float)
        if free.size != self.n_free:
            raise InvalidStrategyError(
                f"{self.n_free} parameters required, got {free.size}"
            )
        lam = np.empty(self.n_lambda)
        lam[: self.tie_lo] = free[0]
        lam[self.n_lambda - self.tie_hi :] = free[-1]
        middle = list(range(self.tie_lo, self.n_lambda - self.tie_hi))
        if slot is None:
            raise InvalidStrategyError(
                "this model requires the coefficient at the forward"
            )
        if self.slot_index not in middle:
            raise InvalidStrategyError(
                "the forward sits too close to the strike-grid boundary"
            )
        middle.remove(self.slot_index)
        lam[self.slot_index] = slot
        fill = free[1:-1]
        if len(middle) != fill.size:
            raise InvalidStrategyError(
                "tie layout is inconsistent with the parameter count"
            )
        lam[middle] = fill
        if not np.all(lam > 0.0):
            raise NonPositiveParameterError(
                "spline coefficients must be positive"
            )
        return lam

    def build(
        self, free: np.ndarray, slot: float | None = None
    ) -> LocalVarianceFunction:
        lam = self.coefficients(free, slot)
        breaks, pieces = spline_to_pieces(self.knots, lam)
        forward_index = int(np.flatnonzero(breaks == self.forward)[0])
        return LocalVarianceFunction(breaks, pieces, forward_index)

    def forward_value_and_jump(
        self, free: np.ndarray, slot: float
    ) -> tuple[float, float]:
        """``a(F) = lambda_c`` and the spline derivative jump at the forward."""
        lam = self.coefficients(free, slot)
        c = self.slot_index
        t = self.knots
        h_lo = self.forward - float(t[c])
        h_hi = float(t[c + 3]) - self.forward
        jump = 2.0 * (float(lam[c]) - float(lam[c - 1])) / h_lo - 2.0 * (
            float(lam[c + 1]) - float(lam[c])
        ) / h_hi
        return float(lam[c]), jump

    def default_slot(self, free: np.ndarray) -> float:
        lam = self.coefficients(free, 1.0)
        c = self.slot_index
        return 0.5 * (float(lam[c - 1]) + float(lam[c + 1]))


def make_linear_model(
    strikes: np.ndarray,
    forward: float,
    lower: float,
    upper: float,
    kind: Literal["bachelier", "black"],
    max_nodes: int | None = None,
    enforce_c3: bool = True,
    min_gap: float | None = None,
) -> LinearVolModel:
    """Linear interpolation model on (subsampled) strikes plus the forward.

    The smoothness tie fixes the level of the forward node, which exists
    only when the forward falls between strikes and has to be inserted.
    When the forward coincides with a quoted strike, that level is pinned
    by its own quote instead and every node stays free, so the model keeps
    one parameter per quote (the exact-interpolation count).
    """
    picked = subsample_strikes(
        np.asarray(strikes, dtype=float), max_nodes, min_gap=min_gap
    )
    others = [float(k) for k in picked if not _same(float(k), forward)]
    inserted = len(others) == picked.size
    nodes = np.array(sorted(others + [forward]))
    return LinearVolModel(
        nodes=nodes,
        forward=forward,
        lower=lower,
        upper=upper,
        multiply_by_x=(kind == "black"),
        enforce_c3=enforce_c3 and inserted,
    )


def make_spline_model(
    strikes: np.ndarray,
    forward: float,
    lower: float,
    upper: float,
    strategy: str = "strikes",
    max_nodes: int | None = None,
    enforce_c3: bool = True,
    min_gap: float | None = None,
) -> SplineVolModel:
    """Quadratic-spline model on a strategy-derived knot vector.

    The forward is a double knot in every layout, so the coefficient at
    the forward is always reserved; ``enforce_c3`` only decides whether
    the smoothness fixed point supplies it or it stays at its seed.
    """
    picked = subsample_strikes(
        np.asarray(strikes, dtype=float), max_nodes, min_gap=min_gap
    )
    knots = make_spline_knots(picked, forward, lower, upper, strategy)
    return SplineVolModel(
        knots=knots,
        forward=forward,
        n_strikes=picked.size,
        enforce_c3=enforce_c3,
    )


# ---------------------------------------------------------------------------
# Smoothness fixed point
# ---------------------------------------------------------------------------


@dataclass
class C3Result:
    """Outcome of the smoothness fixed point.

    Attributes:
        solution: Solved model at the final tied value.
        localvar: Its local-variance function.
        slot: Final tied parameter value.
        residual: ``|a(F) - 2 V(F) (a'(F-) - a'(F+))| / a(F)`` at the end.
        residual_history: The same residual after each fixed-point round.
        clamped: True when a non-positive tied value was clamped away from
            zero (the smoothness condition then holds only approximately).
    """

    solution: LVGSolution
    localvar: LocalVarianceFunction
    slot: float
    residual: float
    residual_history: list[float]
    clamped: bool


def _solve_slot(model, free: np.ndarray, theta: float, reference: float) -> float:
    """Tied value solving ``a(F) - 2 theta * jump(F) = 0`` (affine in it)."""
    r1 = _c3_gap(model, free, theta, reference)
    r2 = _c3_gap(model, free, theta, 2.0 * reference)
    a1, _ = model.forward_value_and_jump(free, reference)
    a2, _ = model.forward_value_and_jump(free, 2.0 * reference)
    # Normalizing by d(a_F)/d(slot) makes the condition-number check
    # dimensionless: it is |2 V(F) sum(1/h) - 1| in the linear families.
    slope_a = (a2 - a1) / reference
    if slope_a == 0.0 or abs(r2 - r1) <= 1e-12 * abs(slope_a * reference):
        raise DenominatorNearZeroError(
            "smoothness condition is degenerate in the tied parameter"
        )
    return reference - r1 * reference / (r2 - r1)


def _c3_gap(model, free: np.ndarray, theta: float, slot: float) -> float:
    a_f, jump = model.forward_value_and_jump(free, slot)
    return a_f - 2.0 * theta * jump


def _next_theta(pairs: list[tuple[float, float]]) -> float:
    """Input for the next fixed-point round from recent ``(in, out)`` pairs.

    The plain iteration ``theta -> g(theta)`` converges only linearly, and
    on smiles with a strong level/smoothness coupling the contraction can be
    slow.  Since each round yields one evaluation of ``g``, the root of
    ``h(t) = g(t) - t`` is instead estimated from the newest pairs — inverse
    quadratic interpolation through three, secant through two — falling back
    to the plain update whenever the history is short, degenerate, or the
    estimate is not a positive finite number.  No extra solves are spent.
    """
    plain = pairs[-1][1]
    candidate = None
    if len(pairs) >= 3:
        (t0, o0), (t1, o1), (t2, o2) = pairs[-3:]
        h0, h1, h2 = o0 - t0, o1 - t1, o2 - t2
        if h0 != h1 and h0 != h2 and h1 != h2:
            candidate = (
                t0 * h1 * h2 / ((h0 - h1) * (h0 - h2))
                + t1 * h0 * h2 / ((h1 - h0) * (h1 - h2))
                + t2 * h0 * h1 / ((h2 - h0) * (h2 - h1))
            )
    if candidate is None and len(pairs) >= 2:
        (t0, o0), (t1, o1) = pairs[-2:]
        h0, h1 = o0 - t0, o1 - t1
        if h1 != h0:
            candidate = t1 - h1 * (t1 - t0) / (h1 - h0)
    if candidate is not None and np.isfinite(candidate) and candidate > 0.0:
        return float(candidate)
    return plain


def solve_with_c3(
    model,
    free: np.ndarray,
    maturity: float,
    theta_init: float | None = None,
    iterations: int = 3,
    max_iterations: int = 10,
    tol: float = 1e-8,
) -> C3Result:
    """Solve the model with the smoothness-tied parameter fixed-pointed.

    Alternates solving the pricing problem (giving the time value at the
    forward) with the exact affine update of the tied parameter.  Runs
    ``iterations`` rounds, then keeps going (up to ``max_iterations``) while
    the relative smoothness residual exceeds ``tol``.  Each round's input
    time value is extrapolated from the recorded (input, output) history via
    :func:`_next_theta`, which collapses the residual superlinearly on
    smiles where the plain alternation contracts slowly; the structure of a
    round — tied-parameter update followed by a full re-solve — is unchanged
    and no additional solves are performed.

    Args:
        model: A :class:`LinearVolModel` or :class:`SplineVolModel` with
            ``enforce_c3=True``.
        free: Free parameter vector.
        maturity: Time to expiry.
        theta_init: Optional initial guess of the time value at the forward
            (e.g. the market out-of-the-money price there); used to seed the
            tied value before the first solve.
        iterations: Fixed-point rounds always performed.
        max_iterations: Hard cap on rounds when the residual stays large.
        tol: Relative residual below which extension rounds stop.

    Raises:
        DenominatorNearZeroError: If the affine condition degenerates.
    """
    if not model.enforce_c3:
        raise InvalidStrategyError("model was built without the smoothness tie")
    free = np.asarray(free, dtype=float)
    reference = model.default_slot(free)
    if not reference > 0.0:
        reference = float(np.mean(np.abs(free))) + 1e-12
    floor = 1e-8 * reference
    clamped = False

    seeded = theta_init is not None and theta_init > 0.0
    if seeded:
        slot = _solve_slot(model, free, float(theta_init), reference)
        if slot <= 0.0:
            slot, clamped = floor, True
    else:
        slot = reference

    localvar = model.build(free, slot)
    solution = solve_pdde(localvar, maturity)
    theta = float(solution.coef_even[localvar.forward_index])
    # (input, output) pairs of the round map theta -> time value at the
    # forward, consumed by ``_next_theta``.  The seeding solve is the first
    # pair; an unseeded start uses the default slot, which corresponds to no
    # particular input, so the history starts empty.
    pairs: list[tuple[float, float]] = [(float(theta_init), theta)] if seeded else []
    history: list[float] = []
    count = 0
    while True:
        count += 1
        theta_in = _next_theta(pairs) if pairs else theta
        try:
            slot = _solve_slot(model, free, theta_in, reference)
        except DenominatorNearZeroError:
            if theta_in == theta:
                raise
            theta_in = theta
            slot = _solve_slot(model, free, theta_in, reference)
        if slot <= 0.0:
            slot, clamped = floor, True
        localvar = model.build(free, slot)
        solution = solve_pdde(localvar, maturity)
        theta = float(solution.coef_even[localvar.forward_index])
        pairs.append((theta_in, theta))
        a_f, jump = model.forward_value_and_jump(free, slot)
        residual = abs(a_f - 2.0 * theta * jump) / abs(a_f)
        history.append(residual)
        if count >= max_iterations or (count >= iterations and residual <= tol):
            break

    return C3Result(
        solution=solution,
        localvar=localvar,
        slot=slot,
        residual=history[-1],
        residual_history=history,
        clamped=clamped,
    )


def solve_without_c3(
    model, free: np.ndarray, maturity: float, slot: float | None = None
) -> LVGSolution:
    """Plain solve for a model built with ``enforce_c3=False``.

    Spline models always reserve the coefficient at the forward, so they
    need its frozen value in ``slot`` (see ``SplineVolModel.seed_slot``);
    linear models take ``slot=None``.
    """
    if model.enforce_c3:
        raise InvalidStrategyError(
            "model carries a smoothness tie; use solve_with_c3"
        )
    localvar = model.build(np.asarray(free, dtype=float), slot)
    return solve_pdde(localvar, maturity)
