"""Closed-form solution of the forward option-price equation on a piecewise-
quadratic local variance.

Given a local-variance function ``a(x)`` that is quadratic on each interval of
a knot grid ``L = x_0 < x_1 < ... < x_m < x_{m+1} = U`` with the forward
``F = x_s`` at an interior knot, the time-value function

    V(x) = OTM option price at strike x

satisfies ``V = 0.5 * a(x)^2 * T * V''`` away from the forward, vanishes at
both boundaries, and has the unit derivative jump ``V'(F-) - V'(F+) = 1``.
On each piece the solution is a known two-function basis (see
:mod:`quadsmile.kernel`); stitching value and derivative across knots yields a
tridiagonal linear system for the ``2*(m+1)`` basis coefficients.

The tridiagonal rows are assembled directly from the two interface equations
(value continuity and derivative continuity/jump) by eliminating one unknown
per row, so each knot contributes one row ending at the odd coefficient of the
right piece and one row ending at its even coefficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import (
    InvalidLocalVarianceError,
    OutOfDomainError,
    SingularSystemError,
)
from .kernel import (
    Branch,
    PieceKernel,
    QuadraticPiece,
    basis,
    build_kernel,
    chi_ratio,
    eval_kappa,
    eval_z,
    eval_z_prime,
    validate_piece_positive,
)

__all__ = [
    "LocalVarianceFunction",
    "TridiagonalSystem",
    "LVGSolution",
    "assemble_system",
    "solve_theta",
    "solve_pdde",
]

KNOT_CONTINUITY_REL = 1e-9


@dataclass(frozen=True)
class LocalVarianceFunction:
    """Piecewise-quadratic local-variance function on ``[lower, upper]``.

    Attributes:
        knots: Strictly increasing array ``x_0 = L, x_1, ..., x_{m+1} = U``.
        pieces: One :class:`QuadraticPiece` per interval ``[x_i, x_{i+1})``.
        forward_index: Interior knot index ``s`` with ``x_s`` equal to the
            forward price (``1 <= s <= m``).
    """

    knots: np.ndarray
    pieces: tuple[QuadraticPiece, ...]
    forward_index: int

    def __post_init__(self) -> None:
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        if knots.ndim != 1 or knots.size < 3:
            raise InvalidLocalVarianceError(
                "need at least three knots (two boundaries and the forward)"
            )
        if not np.all(np.diff(knots) > 0.0):
            raise InvalidLocalVarianceError("knots must be strictly increasing")
        if len(self.pieces) != knots.size - 1:
            raise InvalidLocalVarianceError(
                f"{knots.size - 1} pieces required, got {len(self.pieces)}"
            )
        s = self.forward_index
        if not 1 <= s <= knots.size - 2:
            raise InvalidLocalVarianceError(
                f"forward index {s} must be interior to the knot grid"
            )
        for i, piece in enumerate(self.pieces):
            validate_piece_positive(piece, float(knots[i]), float(knots[i + 1]))
        # Continuity of the local variance at interior knots.
        for i in range(1, knots.size - 1):
            left = self.pieces[i - 1].value(float(knots[i]))
            right = self.pieces[i].value(float(knots[i]))
            if abs(left - right) > KNOT_CONTINUITY_REL * max(abs(left), abs(right)):
                raise InvalidLocalVarianceError(
                    f"local variance jumps at knot {knots[i]}: {left} vs {right}"
                )

    @property
    def lower(self) -> float:
        return float(self.knots[0])

    @property
    def upper(self) -> float:
        return float(self.knots[-1])

    @property
    def forward(self) -> float:
        return float(self.knots[self.forward_index])

    @property
    def piece_count(self) -> int:
        return len(self.pieces)

    def piece_index(self, x: np.ndarray, side: str = "right") -> np.ndarray:
        """Index of the piece owning each point (half-open ``[x_i, x_{i+1})``).

        ``side="left"`` resolves points sitting exactly on a knot to the piece
        on the knot's left, which is how left limits are evaluated.
        """
        x = np.asarray(x, dtype=float)
        lo, hi = self.lower, self.upper
        tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        if np.any(x < lo - tol) or np.any(x > hi + tol):
            raise OutOfDomainError(
                f"evaluation points outside the model domain [{lo}, {hi}]"
            )
        side_arg = "right" if side == "right" else "left"
        idx = np.searchsorted(self.knots, x, side=side_arg) - 1
        return np.clip(idx, 0, self.piece_count - 1)

    def value(self, x: np.ndarray) -> np.ndarray:
        """Local variance ``a(x)``, vectorized."""
        x = np.asarray(x, dtype=float)
        idx = self.piece_index(x)
        out = np.empty_like(x)
        for i in np.unique(idx):
            mask = idx == i
            out[mask] = self.pieces[i].value(x[mask])
        return out

    def slope(self, x: np.ndarray, side: str = "right") -> np.ndarray:
        """Derivative ``a'(x)``, one-sided at knots via ``side``."""
        x = np.asarray(x, dtype=float)
        idx = self.piece_index(x, side=side)
        out = np.empty_like(x)
        for i in np.unique(idx):
            mask = idx == i
            out[mask] = self.pieces[i].slope(x[mask])
        return out


@dataclass
class TridiagonalSystem:
    """Tridiagonal system rows for the basis coefficients.

    Row ``2i+1`` couples ``(odd_i, even_i, odd_{i+1})`` and row ``2i+2``
    couples ``(even_i, odd_{i+1}, even_{i+1})``; rows 0 and ``2m+1`` pin the
    boundary values.  The right-hand side is zero except at the two rows that
    carry the unit derivative jump at the forward knot.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.size


def assemble_system(kernels: Sequence[PieceKernel], forward_index: int) -> TridiagonalSystem:
    """Assemble the stitched continuity/jump equations into tridiagonal form.

    Args:
        kernels: One classified kernel per piece, in knot order.
        forward_index: Index ``s`` of the forward knot (kernel ``s`` starts
            at the forward).

    Returns:
        The tridiagonal system whose solution orders the unknowns as
        ``odd_0, even_0, odd_1, even_1, ...``.
    """
    n_pieces = len(kernels)
    n = 2 * n_pieces
    sub = np.zeros(n)
    diag = np.zeros(n)
    sup = np.zeros(n)
    rhs = np.zeros(n)

    # Left boundary V(L) = 0: the even coefficient of piece 0 vanishes.
    diag[0] = 0.0
    sup[0] = 1.0

    for i in range(n_pieces - 1):
        left = kernels[i]
        right = kernels[i + 1]
        xk = left.x_hi
        dq = left.span()
        c, s_val, dc, ds = (float(v) for v in basis(left, dq))
        if not all(map(math.isfinite, (c, s_val, dc, ds))):
            raise InvalidLocalVarianceError(
                f"piece {i} is too stiff: basis overflow across [{left.x_lo}, {left.x_hi}]"
            )
        ratio = float(chi_ratio(left, xk))
        qp_l = float(eval_z_prime(left, xk))
        kap_l = float(eval_kappa(left, xk))
        qp_r = float(eval_z_prime(right, xk))
        kap_r = float(eval_kappa(right, xk))
        w0_r = right.basis_slope_at_zero
        w0_l = left.basis_slope_at_zero
        jump = 1.0 if i + 1 == forward_index else 0.0

        # Derivative equation with the right piece's even coefficient
        # eliminated through value continuity.
        row = 2 * i + 1
        sub[row] = ratio * (qp_l * (kap_l * s_val + ds) - kap_r * qp_r * s_val)
        diag[row] = ratio * (qp_l * (kap_l * c + dc) - kap_r * qp_r * c)
        sup[row] = -w0_r * qp_r
        rhs[row] = jump

        # Derivative equation with the left piece's odd coefficient
        # eliminated; S never vanishes across a nondegenerate piece (in the
        # trigonometric branch |omega * dq| < pi strictly).
        row = 2 * i + 2
        sub[row] = -ratio * qp_l * w0_l / s_val
        diag[row] = -w0_r * qp_r
        sup[row] = qp_l * (kap_l * s_val + ds) / s_val - kap_r * qp_r
        rhs[row] = jump

    # Right boundary V(U) = 0 for the last piece.
    last = kernels[-1]
    c, s_val, _, _ = (float(v) for v in basis(last, last.span()))
    if not (math.isfinite(c) and math.isfinite(s_val)):
        raise InvalidLocalVarianceError(
            "last piece is too stiff: basis overflow at the upper boundary"
        )
    sub[n - 1] = s_val
    diag[n - 1] = c

    return TridiagonalSystem(sub=sub, diag=diag, sup=sup, rhs=rhs)


def solve_theta(system: TridiagonalSystem) -> np.ndarray:
    """Solve the tridiagonal system with pivoting and a dense fallback.

    The banded solve (LAPACK ``dgtsv``) applies partial pivoting, which the
    zero top-left entry of this system requires.  The solution is accepted
    only if its row-wise residual is small relative to the row magnitudes;
    otherwise a dense partially-pivoted solve is attempted before giving up.

    Raises:
        SingularSystemError: If neither solver produces an acceptable residual.
    """
    n = system.size
    ab = np.zeros((3, n))
    ab[0, 1:] = system.sup[:-1]
    ab[1, :] = system.diag
    ab[2, :-1] = system.sub[1:]

    def residual_ok(theta: np.ndarray) -> bool:
        if not np.all(np.isfinite(theta)):
            return False
        prod = system.diag * theta
        prod[1:] += system.sub[1:] * theta[:-1]
        prod[:-1] += system.sup[:-1] * theta[1:]
        resid = prod - system.rhs
        scale = np.abs(system.diag * theta)
        scale[1:] += np.abs(system.sub[1:] * theta[:-1])
        scale[:-1] += np.abs(system.sup[:-1] * theta[1:])
        scale = max(float(np.max(scale)), float(np.max(np.abs(system.rhs))), 1e-300)
        return float(np.max(np.abs(resid))) <= 1e-8 * scale

    try:
        theta = scipy.linalg.solve_banded((1, 1), ab, system.rhs)
        if residual_ok(theta):
            return theta
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
        pass

    dense = np.zeros((n, n))
    idx = np.arange(n)
    dense[idx, idx] = system.diag
    dense[idx[1:], idx[:-1]] = system.sub[1:]
    dense[idx[:-1], idx[1:]] = system.sup[:-1]
    try:
        theta = np.linalg.solve(dense, system.rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"coefficient system is singular: {exc}") from exc
    if not residual_ok(theta):
        raise SingularSystemError(
            "coefficient system solve failed the residual check"
        )
    return theta


@dataclass
class LVGSolution:
    """Solved model: local variance, maturity, kernels, and coefficients.

    ``coef_even[i]`` equals the time value ``V`` at the left knot of piece
    ``i``; ``coef_odd[i]`` multiplies the odd basis function.

    Evaluation on hyperbolic pieces does not use the raw coefficient pair
    directly: reconstructing a decayed solution from ``cosh``/``sinh``
    anchored at one end cancels catastrophically once ``omega * span`` is
    large (the error grows like ``eps * cosh(omega * span)``).  Instead each
    piece is re-expressed through its two knot values of ``V`` in an
    exponential basis anchored at the *nearest* knot, which keeps every term
    a plain product; the knot values themselves are solved directly (and the
    boundary values are exactly zero), so deep tails stay accurate to full
    relative precision.
    """

    localvar: LocalVarianceFunction
    maturity: float
    kernels: tuple[PieceKernel, ...]
    coef_even: np.ndarray
    coef_odd: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.kernels)
        # V at every knot: the even coefficients, plus the exact zero at U.
        self._knot_values = np.append(self.coef_even, 0.0)
        self._exp_lo: list[tuple[float, float] | None] = [None] * n
        self._exp_hi: list[tuple[float, float] | None] = [None] * n
        self._spans = np.empty(n)
        self._ratio_hi = np.empty(n)
        for i, kern in enumerate(self.kernels):
            span = kern.span()
            self._spans[i] = span
            r_hi = float(chi_ratio(kern, kern.x_hi))
            self._ratio_hi[i] = r_hi
            if kern.trig or kern.branch is Branch.CONJUGATE_CRITICAL:
                continue
            w = kern.omega
            decay = math.exp(-w * span)
            two_sinh = math.exp(w * span) - decay if w * span < 700.0 else math.inf
            v_lo = float(self._knot_values[i])
            v_hi = float(self._knot_values[i + 1])
            # Left-anchored exponential pair (grow, decay) from knot values.
            grow_lo = (v_hi / r_hi - v_lo * decay) / two_sinh
            self._exp_lo[i] = (grow_lo, v_lo - grow_lo)
            # Right-anchored pair, used for points past the piece midpoint.
            grow_hi = (v_lo * r_hi - v_hi * decay) / two_sinh
            self._exp_hi[i] = (grow_hi, v_hi - grow_hi)

    @property
    def forward(self) -> float:
        return self.localvar.forward

    def _eval_theta(
        self, kern: PieceKernel, i: int, pts: np.ndarray, derivative: bool
    ) -> np.ndarray:
        dq = np.asarray(eval_z(kern, pts)) - kern.q_lo
        c, s_val, dc, ds = basis(kern, dq)
        ratio = chi_ratio(kern, pts)
        even, odd = self.coef_even[i], self.coef_odd[i]
        if derivative:
            qp = eval_z_prime(kern, pts)
            kap = eval_kappa(kern, pts)
            return ratio * qp * (
                even * (kap * c + dc) + odd * (kap * s_val + ds)
            )
        return ratio * (even * c + odd * s_val)

    def _eval_exponential(
        self, kern: PieceKernel, i: int, pts: np.ndarray, derivative: bool
    ) -> np.ndarray:
        w = kern.omega
        span = self._spans[i]
        dq = np.asarray(eval_z(kern, pts)) - kern.q_lo
        out = np.empty_like(dq)
        near_lo = dq <= 0.5 * span
        for use_lo in (True, False):
            mask = near_lo if use_lo else ~near_lo
            if not np.any(mask):
                continue
            arg = dq[mask] if use_lo else span - dq[mask]
            grow, fall = self._exp_lo[i] if use_lo else self._exp_hi[i]
            up = grow * np.exp(w * arg)
            down = fall * np.exp(-w * arg)
            ratio = np.asarray(chi_ratio(kern, pts[mask]), dtype=float)
            if not use_lo:
                ratio = ratio / self._ratio_hi[i]
            if derivative:
                qp = np.asarray(eval_z_prime(kern, pts[mask]))
                kap = np.asarray(eval_kappa(kern, pts[mask]))
                sign = 1.0 if use_lo else -1.0
                out[mask] = ratio * qp * (
                    kap * (up + down) + sign * w * (up - down)
                )
            else:
                out[mask] = ratio * (up + down)
        return out

    def _eval(self, x: np.ndarray, derivative: bool, side: str) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xv = np.atleast_1d(x)
        idx = self.localvar.piece_index(xv, side=side)
        out = np.empty_like(xv)
        for i in np.unique(idx):
            mask = idx == i
            kern = self.kernels[i]
            pts = xv[mask]
            if self._exp_lo[i] is None:
                out[mask] = self._eval_theta(kern, i, pts, derivative)
            else:
                out[mask] = self._eval_exponential(kern, i, pts, derivative)
        return out[0] if scalar else out

    def value(self, x: np.ndarray) -> np.ndarray:
        """Time value ``V(x)`` (OTM option price), vectorized."""
        return self._eval(x, derivative=False, side="right")

    def value_from_piece(self, piece_index: int, x: float) -> float:
        """Evaluate ``V`` through one specific piece's basis.

        Lets tests check value continuity across a knot by evaluating the
        same point through both neighbouring pieces.
        """
        kern = self.kernels[piece_index]
        dq = float(eval_z(kern, x)) - kern.q_lo
        c, s_val, _, _ = basis(kern, dq)
        ratio = float(chi_ratio(kern, x))
        return ratio * (
            self.coef_even[piece_index] * float(c)
            + self.coef_odd[piece_index] * float(s_val)
        )

    def derivative(self, x: np.ndarray, side: str = "right") -> np.ndarray:
        """One-sided derivative ``V'(x)``; ``side="left"`` takes left limits."""
        return self._eval(x, derivative=True, side=side)

    def price(self, x: np.ndarray, kind: str = "call") -> np.ndarray:
        """Undiscounted option price at strikes ``x``.

        ``kind`` is ``"call"``, ``"put"`` or ``"otm"``.
        """
        x = np.asarray(x, dtype=float)
        v = self.value(x)
        f = self.forward
        if kind == "call":
            return v + np.maximum(f - x, 0.0)
        if kind == "put":
            return v + np.maximum(x - f, 0.0)
        if kind == "otm":
            return v
        raise ValueError(f"unknown option kind: {kind!r}")

    def density(self, x: np.ndarray) -> np.ndarray:
        """Implied risk-neutral density ``g(x) = 2 V(x) / (a(x)^2 T)``."""
        x = np.asarray(x, dtype=float)
        v = self.value(x)
        a = self.localvar.value(x)
        return 2.0 * v / (a * a * self.maturity)

    def jump_size(self) -> float:
        """Derivative jump ``V'(F-) - V'(F+)`` across the forward (should be 1)."""
        f = self.forward
        left = float(self.derivative(np.asarray(f), side="left"))
        right = float(self.derivative(np.asarray(f), side="right"))
        return left - right

    def boundary_masses(self) -> tuple[float, float]:
        """Probability mass absorbed at the lower and upper boundaries.

        The lower mass is ``V'(L+)`` and the upper mass ``-V'(U-)``; together
        with the interior density they integrate to exactly one.
        """
        lo = float(self.derivative(np.asarray(self.localvar.lower), side="right"))
        hi = float(self.derivative(np.asarray(self.localvar.upper), side="left"))
        return lo, -hi


def solve_pdde(localvar: LocalVarianceFunction, maturity: float) -> LVGSolution:
    """Build kernels, assemble and solve the stitched system.

    Args:
        localvar: Piecewise-quadratic local variance with the forward at an
            interior knot.
        maturity: Time to expiry ``T > 0``.

    Returns:
        The solved model ready for price/derivative/density evaluation.
    """
    if maturity <= 0.0:
        raise InvalidLocalVarianceError("maturity must be positive")
    knots = localvar.knots
    kernels = tuple(
        build_kernel(piece, float(knots[i]), float(knots[i + 1]), maturity)
        for i, piece in enumerate(localvar.pieces)
    )
    system = assemble_system(kernels, localvar.forward_index)
    theta = solve_theta(system)
    return LVGSolution(
        localvar=localvar,
        maturity=maturity,
        kernels=kernels,
        coef_even=theta[1::2].copy(),
        coef_odd=theta[0::2].copy(),
    )
