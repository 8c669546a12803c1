"""Per-piece closed-form building blocks for the quadratic local-variance model.

On each interval where the local-variance function ``a(x)`` is a single
quadratic ``alpha*x^2 + beta*x + gamma > 0``, the time-scaled second-order ODE

    V(x) = 0.5 * a(x)^2 * T * V''(x)

has a two-dimensional solution space spanned by

    chi(x) * C(omega * (q(x) - q(x_lo)))   and   chi(x) * S(omega * (q(x) - q(x_lo)))

where ``q`` is a monotone coordinate transform, ``chi`` a positive prefactor,
and ``(C, S)`` either the hyperbolic pair ``(cosh, sinh)`` or the
trigonometric pair ``(cos, sin)``, depending on the sign pattern of the
discriminant ``delta = beta^2 - 4*alpha*gamma`` and of ``delta*T + 8``.
This module classifies a piece into its evaluation branch and provides the
real-arithmetic ingredients; everything here is purely local to one piece.

Branch map (``T > 0`` throughout):

* ``alpha = beta = 0``           -> ``CONSTANT`` (hyperbolic, ``q = x``)
* ``alpha = 0, beta != 0``       -> ``LINEAR_ROOT`` (hyperbolic, log coordinate)
* ``delta > 0``                  -> ``REAL_ROOTS`` (hyperbolic, log-ratio coordinate)
* ``delta = 0``                  -> ``DOUBLE_ROOT`` (hyperbolic, reciprocal coordinate)
* ``delta < 0, delta*T + 8 > 0`` -> ``CONJUGATE_HYPERBOLIC`` (angle coordinate)
* ``delta < 0, delta*T + 8 = 0`` -> ``CONJUGATE_CRITICAL`` (basis ``{1, dq}``)
* ``delta < 0, delta*T + 8 < 0`` -> ``CONJUGATE_TRIG`` (angle coordinate)

Real roots always give hyperbolic evaluation because ``delta >= 0`` forces
``delta*T + 8 >= 8``; oscillatory behaviour only arises from conjugate roots
with a strongly negative discriminant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np

from .errors import InvalidLocalVarianceError, OutOfDomainError

__all__ = [
    "Branch",
    "QuadraticPiece",
    "PieceKernel",
    "classify_piece",
    "build_kernel",
    "eval_z",
    "eval_z_prime",
    "eval_chi",
    "eval_kappa",
    "basis",
    "chi_ratio",
    "validate_piece_positive",
]

ArrayLike = Union[float, np.ndarray]

# Relative thresholds for treating coefficients as exactly degenerate.
ALPHA_NEGLIGIBLE_REL = 1e-12
BETA_NEGLIGIBLE_REL = 1e-12
DOUBLE_ROOT_REL = 1e-10
CRITICAL_OMEGA_REL = 1e-12
ROOT_PROXIMITY_REL = 1e-13


class Branch(Enum):
    """Evaluation branch of a quadratic piece."""

    CONSTANT = "constant"
    LINEAR_ROOT = "linear_root"
    REAL_ROOTS = "real_roots"
    DOUBLE_ROOT = "double_root"
    CONJUGATE_HYPERBOLIC = "conjugate_hyperbolic"
    CONJUGATE_CRITICAL = "conjugate_critical"
    CONJUGATE_TRIG = "conjugate_trig"


@dataclass(frozen=True)
class QuadraticPiece:
    """Coefficients of one quadratic piece ``a(x) = alpha*x^2 + beta*x + gamma``."""

    alpha: float
    beta: float
    gamma: float

    def value(self, x: ArrayLike) -> ArrayLike:
        """Local-variance value ``a(x)``."""
        return (self.alpha * x + self.beta) * x + self.gamma

    def slope(self, x: ArrayLike) -> ArrayLike:
        """Derivative ``a'(x) = 2*alpha*x + beta``."""
        return 2.0 * self.alpha * x + self.beta

    def discriminant(self) -> float:
        return self.beta * self.beta - 4.0 * self.alpha * self.gamma


def _effective_coefficients(piece: QuadraticPiece) -> tuple[float, float, float]:
    """Coefficients with negligible leading terms snapped to exact zero."""
    alpha, beta, gamma = piece.alpha, piece.beta, piece.gamma
    if abs(alpha) < ALPHA_NEGLIGIBLE_REL * (abs(beta) + abs(gamma) + 1.0):
        alpha = 0.0
    if alpha == 0.0 and abs(beta) < BETA_NEGLIGIBLE_REL * (abs(gamma) + 1.0):
        beta = 0.0
    return alpha, beta, gamma


def classify_piece(piece: QuadraticPiece, maturity: float) -> Branch:
    """Classify a quadratic piece into its evaluation branch.

    Args:
        piece: Quadratic coefficients.
        maturity: Time to expiry ``T > 0``.

    Returns:
        The :class:`Branch` that governs the piece's closed-form basis.
    """
    if maturity <= 0.0:
        raise InvalidLocalVarianceError("maturity must be positive")
    alpha, beta, _ = _effective_coefficients(piece)
    if alpha == 0.0:
        return Branch.CONSTANT if beta == 0.0 else Branch.LINEAR_ROOT
    delta = piece.discriminant()
    scale = beta * beta + 4.0 * abs(piece.alpha * piece.gamma)
    if abs(delta) <= DOUBLE_ROOT_REL * scale:
        return Branch.DOUBLE_ROOT
    if delta > 0.0:
        return Branch.REAL_ROOTS
    arg = 1.0 + 8.0 / (delta * maturity)
    if abs(arg) < CRITICAL_OMEGA_REL:
        return Branch.CONJUGATE_CRITICAL
    return Branch.CONJUGATE_HYPERBOLIC if arg < 0.0 else Branch.CONJUGATE_TRIG


@dataclass
class PieceKernel:
    """Classified piece with cached quantities for evaluation and assembly.

    Attributes:
        piece: The quadratic coefficients (with degenerate terms snapped to 0).
        branch: Evaluation branch.
        maturity: Time to expiry ``T``.
        x_lo: Left end of the piece interval (inclusive).
        x_hi: Right end of the piece interval.
        omega: Frequency multiplying the coordinate increment (0 in the
            critical branch, where the basis is ``{1, dq}``).
        trig: True when the basis pair is ``(cos, sin)``.
        r1, r2: Real roots (``REAL_ROOTS``; ``r1`` alone for ``LINEAR_ROOT``
            and ``DOUBLE_ROOT``).
        center, half_width: Real and absolute imaginary parts ``u, v`` of the
            conjugate roots (conjugate branches only).
        q_lo: Coordinate value at ``x_lo``.
        a_lo: Local variance at ``x_lo``.
    """

    piece: QuadraticPiece
    branch: Branch
    maturity: float
    x_lo: float
    x_hi: float
    omega: float = 0.0
    trig: bool = False
    r1: float = math.nan
    r2: float = math.nan
    center: float = math.nan
    half_width: float = math.nan
    recip_scale: float = math.nan
    q_lo: float = field(default=math.nan)
    a_lo: float = field(default=math.nan)

    @property
    def basis_slope_at_zero(self) -> float:
        """Derivative of the odd basis function at zero increment: S'(0)."""
        return 1.0 if self.branch is Branch.CONJUGATE_CRITICAL else self.omega

    def span(self) -> float:
        """Coordinate increment across the whole piece, ``q(x_hi) - q(x_lo)``."""
        return float(eval_z(self, self.x_hi) - self.q_lo)


def build_kernel(
    piece: QuadraticPiece, x_lo: float, x_hi: float, maturity: float
) -> PieceKernel:
    """Classify and cache one piece on ``[x_lo, x_hi]``.

    Raises:
        InvalidLocalVarianceError: If the interval is degenerate or the
            maturity is not positive.
    """
    if not x_hi > x_lo:
        raise InvalidLocalVarianceError(
            f"piece interval [{x_lo}, {x_hi}] is degenerate"
        )
    branch = classify_piece(piece, maturity)
    alpha, beta, gamma = _effective_coefficients(piece)
    eff = QuadraticPiece(alpha, beta, gamma)
    kern = PieceKernel(
        piece=eff, branch=branch, maturity=maturity, x_lo=x_lo, x_hi=x_hi
    )

    if branch is Branch.CONSTANT:
        kern.omega = math.sqrt(2.0 / maturity) / gamma
    elif branch is Branch.LINEAR_ROOT:
        kern.r1 = -gamma / beta
        delta = beta * beta
        kern.omega = 0.5 * math.sqrt(1.0 + 8.0 / (delta * maturity))
    elif branch is Branch.DOUBLE_ROOT:
        kern.r1 = -beta / (2.0 * alpha)
        kern.omega = 1.0
        kern.recip_scale = math.sqrt(2.0 / maturity) / alpha
    elif branch is Branch.REAL_ROOTS:
        delta = eff.discriminant()
        sq = math.sqrt(delta)
        kern.r1 = (-beta + sq) / (2.0 * alpha)
        kern.r2 = (-beta - sq) / (2.0 * alpha)
        kern.omega = 0.5 * math.sqrt(1.0 + 8.0 / (delta * maturity))
    else:
        delta = eff.discriminant()
        kern.center = -beta / (2.0 * alpha)
        kern.half_width = math.sqrt(-delta) / (2.0 * abs(alpha))
        arg = 1.0 + 8.0 / (delta * maturity)
        if branch is Branch.CONJUGATE_CRITICAL:
            kern.omega = 0.0
        elif branch is Branch.CONJUGATE_HYPERBOLIC:
            kern.omega = 0.5 * math.sqrt(-arg)
        else:
            kern.omega = 0.5 * math.sqrt(arg)
            kern.trig = True

    kern.q_lo = float(eval_z(kern, x_lo))
    kern.a_lo = float(eff.value(x_lo))
    return kern


def _guard_roots(kern: PieceKernel, x: ArrayLike) -> None:
    """Raise when an evaluation point collides with a real root of ``a``."""
    roots = []
    if kern.branch in (Branch.LINEAR_ROOT, Branch.DOUBLE_ROOT):
        roots = [kern.r1]
    elif kern.branch is Branch.REAL_ROOTS:
        roots = [kern.r1, kern.r2]
    for r in roots:
        bad = np.abs(np.asarray(x) - r) < ROOT_PROXIMITY_REL * np.maximum(
            1.0, np.abs(np.asarray(x))
        )
        if np.any(bad):
            raise OutOfDomainError(
                f"evaluation point collides with a root of the local variance at {r}"
            )


def eval_z(kern: PieceKernel, x: ArrayLike) -> ArrayLike:
    """Coordinate transform ``q(x)``; its increments drive the basis argument.

    Real numbers in every branch: log-ratio for real roots, a smooth angle
    for conjugate roots, a reciprocal for a double root, ``log|x - root|``
    for the linear case and ``x`` itself for constant pieces.
    """
    b = kern.branch
    if b is Branch.CONSTANT:
        return np.asarray(x, dtype=float) + 0.0 if isinstance(x, np.ndarray) else float(x)
    _guard_roots(kern, x)
    if b is Branch.LINEAR_ROOT:
        return np.log(np.abs(np.asarray(x, dtype=float) - kern.r1))
    if b is Branch.DOUBLE_ROOT:
        return -kern.recip_scale / (np.asarray(x, dtype=float) - kern.r1)
    if b is Branch.REAL_ROOTS:
        xv = np.asarray(x, dtype=float)
        return np.log(np.abs(xv - kern.r1)) - np.log(np.abs(xv - kern.r2))
    xv = np.asarray(x, dtype=float)
    return 2.0 * np.arctan2(xv - kern.center, kern.half_width)


def eval_z_prime(kern: PieceKernel, x: ArrayLike) -> ArrayLike:
    """Derivative ``q'(x)`` of the coordinate transform."""
    b = kern.branch
    xv = np.asarray(x, dtype=float)
    if b is Branch.CONSTANT:
        return np.ones_like(xv)
    _guard_roots(kern, x)
    if b is Branch.LINEAR_ROOT:
        return 1.0 / (xv - kern.r1)
    if b is Branch.DOUBLE_ROOT:
        return kern.recip_scale / (xv - kern.r1) ** 2
    if b is Branch.REAL_ROOTS:
        return 1.0 / (xv - kern.r1) - 1.0 / (xv - kern.r2)
    v = kern.half_width
    return 2.0 * v / ((xv - kern.center) ** 2 + v * v)


def eval_chi(kern: PieceKernel, x: ArrayLike) -> ArrayLike:
    """Positive prefactor ``chi(x)``: ``sqrt(a(x)/|alpha|)`` and degenerations."""
    b = kern.branch
    xv = np.asarray(x, dtype=float)
    if b is Branch.CONSTANT:
        return np.ones_like(xv)
    if b is Branch.LINEAR_ROOT:
        return np.sqrt(np.abs(xv - kern.r1))
    return np.sqrt(kern.piece.value(xv) / abs(kern.piece.alpha))


def eval_kappa(kern: PieceKernel, x: ArrayLike) -> ArrayLike:
    """Logarithmic-derivative weight: ``chi'(x)/chi(x) = kappa(x) * q'(x)``."""
    b = kern.branch
    xv = np.asarray(x, dtype=float)
    if b is Branch.CONSTANT:
        return np.zeros_like(xv)
    if b is Branch.LINEAR_ROOT:
        return np.full_like(xv, 0.5)
    _guard_roots(kern, x)
    if b is Branch.DOUBLE_ROOT:
        return kern.piece.slope(xv) / (2.0 * math.sqrt(2.0 / kern.maturity))
    if b is Branch.REAL_ROOTS:
        zp = eval_z_prime(kern, xv)
        return (1.0 / (xv - kern.r1) + 1.0 / (xv - kern.r2)) / (2.0 * zp)
    delta = kern.piece.discriminant()
    return kern.piece.slope(xv) / (2.0 * math.sqrt(-delta))


def basis(kern: PieceKernel, dq: ArrayLike) -> tuple[ArrayLike, ArrayLike, ArrayLike, ArrayLike]:
    """Basis pair and derivatives at coordinate increment ``dq``.

    Returns:
        ``(C, S, dC, dS)`` where ``V = chi_ratio * (theta_even*C + theta_odd*S)``
        and ``dC, dS`` are derivatives with respect to ``dq``.
    """
    w = kern.omega
    if kern.branch is Branch.CONJUGATE_CRITICAL:
        dqv = np.asarray(dq, dtype=float)
        return np.ones_like(dqv), dqv, np.zeros_like(dqv), np.ones_like(dqv)
    arg = w * np.asarray(dq, dtype=float)
    if kern.trig:
        c, s = np.cos(arg), np.sin(arg)
        return c, s, -w * s, w * c
    # Extreme trial parameters can push omega * dq past the overflow point;
    # the resulting infinities are caught downstream (non-finite residuals
    # are rejected by the optimizer), so the warning is suppressed here.
    with np.errstate(over="ignore"):
        c, s = np.cosh(arg), np.sinh(arg)
        return c, s, w * s, w * c


def chi_ratio(kern: PieceKernel, x: ArrayLike) -> ArrayLike:
    """Normalized prefactor ``chi(x)/chi(x_lo) = sqrt(a(x)/a(x_lo))``."""
    return np.sqrt(kern.piece.value(np.asarray(x, dtype=float)) / kern.a_lo)


def validate_piece_positive(
    piece: QuadraticPiece, x_lo: float, x_hi: float
) -> None:
    """Check ``a(x) > 0`` on the closed interval ``[x_lo, x_hi]``.

    For a quadratic it suffices to check both endpoints and, when the vertex
    of an upward parabola lies inside, the vertex value.

    Raises:
        InvalidLocalVarianceError: If the piece is not strictly positive.
    """
    lo_val = piece.value(x_lo)
    hi_val = piece.value(x_hi)
    if not (lo_val > 0.0 and hi_val > 0.0):
        raise InvalidLocalVarianceError(
            f"local variance not positive at interval ends: a({x_lo})={lo_val}, "
            f"a({x_hi})={hi_val}"
        )
    if piece.alpha > 0.0:
        vertex = -piece.beta / (2.0 * piece.alpha)
        if x_lo < vertex < x_hi and not piece.value(vertex) > 0.0:
            raise InvalidLocalVarianceError(
                f"local variance not positive at interior vertex {vertex}"
            )
