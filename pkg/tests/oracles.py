"""Independent oracles used by the test suite.

Everything here re-derives expected values through a *different* route than
the package code:

* a complex-arithmetic basis for single pieces (principal logs and square
  roots, no case analysis beyond zero coefficients),
* a finite-difference boundary-value solver for the full stitched problem,
* a dense LU solve for tridiagonal systems,
* randomized generators for quadratic pieces and local-variance functions.
"""

from __future__ import annotations

import cmath
import math
from typing import Callable

import numpy as np
import scipy.linalg

from quadsmile.kernel import Branch, QuadraticPiece
from quadsmile.pdde import LocalVarianceFunction

ComplexFn = Callable[[float], complex]

# Relates the complex-arithmetic basis to the real-arithmetic one: the even
# function always agrees, while the odd function flips sign in the conjugate
# hyperbolic branch and becomes ``i`` times the real sine in the trig branch.
ODD_SIGN_MAP = {
    Branch.CONSTANT: 1.0 + 0.0j,
    Branch.LINEAR_ROOT: 1.0 + 0.0j,
    Branch.REAL_ROOTS: 1.0 + 0.0j,
    Branch.CONJUGATE_HYPERBOLIC: -1.0 + 0.0j,
    Branch.CONJUGATE_TRIG: 1.0j,
}


def complex_basis(
    piece: QuadraticPiece, maturity: float, x_lo: float
) -> tuple[ComplexFn, ComplexFn, ComplexFn, ComplexFn]:
    """Complex-arithmetic basis for one quadratic piece.

    Returns four callables ``(B_even, B_odd, dB_even, dB_odd)`` where the
    first two solve ``V = 0.5 a(x)^2 T V''`` and the last two are their exact
    complex derivatives in ``x``.  Uses principal branches throughout: the
    coordinate is the *difference* of logs of the two root factors, which is
    continuous across the parabola vertex (a log of the ratio is not).
    """
    alpha, beta, gamma = piece.alpha, piece.beta, piece.gamma
    if alpha != 0.0:
        delta = beta * beta - 4.0 * alpha * gamma
        sq = cmath.sqrt(complex(delta))
        r1 = (-beta + sq) / (2.0 * alpha)
        r2 = (-beta - sq) / (2.0 * alpha)
        omega = 0.5 * cmath.sqrt(1.0 + 8.0 / (delta * maturity))

        def z(x: float) -> complex:
            return cmath.log(x - r1) - cmath.log(x - r2)

        def z_prime(x: float) -> complex:
            return 1.0 / (x - r1) - 1.0 / (x - r2)

        def chi(x: float) -> complex:
            return cmath.sqrt((x - r1) * (x - r2))

        def chi_log_prime(x: float) -> complex:
            return 0.5 * (1.0 / (x - r1) + 1.0 / (x - r2))

    elif beta != 0.0:
        r1 = -gamma / beta
        delta = beta * beta
        omega = 0.5 * cmath.sqrt(1.0 + 8.0 / (delta * maturity))

        def z(x: float) -> complex:
            return cmath.log(complex(x - r1))

        def z_prime(x: float) -> complex:
            return 1.0 / complex(x - r1)

        def chi(x: float) -> complex:
            return cmath.sqrt(complex(x - r1))

        def chi_log_prime(x: float) -> complex:
            return 0.5 / complex(x - r1)

    else:
        omega = complex(math.sqrt(2.0 / maturity) / gamma)

        def z(x: float) -> complex:
            return complex(x)

        def z_prime(x: float) -> complex:
            return 1.0 + 0.0j

        def chi(x: float) -> complex:
            return 1.0 + 0.0j

        def chi_log_prime(x: float) -> complex:
            return 0.0j

    z_lo, chi_lo = z(x_lo), chi(x_lo)

    def b_even(x: float) -> complex:
        return chi(x) / chi_lo * cmath.cosh(omega * (z(x) - z_lo))

    def b_odd(x: float) -> complex:
        return chi(x) / chi_lo * cmath.sinh(omega * (z(x) - z_lo))

    def db_even(x: float) -> complex:
        arg = omega * (z(x) - z_lo)
        return chi(x) / chi_lo * (
            chi_log_prime(x) * cmath.cosh(arg)
            + omega * z_prime(x) * cmath.sinh(arg)
        )

    def db_odd(x: float) -> complex:
        arg = omega * (z(x) - z_lo)
        return chi(x) / chi_lo * (
            chi_log_prime(x) * cmath.sinh(arg)
            + omega * z_prime(x) * cmath.cosh(arg)
        )

    return b_even, b_odd, db_even, db_odd


def ode_residual_fd(
    fn: Callable[[float], float],
    piece: QuadraticPiece,
    maturity: float,
    x: float,
    h: float,
) -> float:
    """Relative residual of ``V = 0.5 a^2 T V''`` via central differences."""
    v = fn(x)
    second = (fn(x + h) - 2.0 * v + fn(x - h)) / (h * h)
    a = piece.value(x)
    resid = v - 0.5 * a * a * maturity * second
    return abs(resid) / max(1.0, abs(v))


def solve_bvp_fd(
    localvar: LocalVarianceFunction, maturity: float, points_per_unit: int = 4000
) -> tuple[np.ndarray, np.ndarray]:
    """Finite-difference solve of the boundary-value problem.

    Discretizes ``V - 0.5 a(x)^2 T V'' = 0.5 a(F)^2 T * delta(x - F)`` on a
    piecewise-uniform grid whose nodes include every knot (so the kink at the
    forward and the coefficient breaks sit exactly on nodes), with the point
    source lumped as ``2 / (h_minus + h_plus)`` at the forward node.  The
    scheme is second-order accurate on grid-aligned interfaces.

    Returns:
        ``(grid, values)`` arrays.
    """
    knots = localvar.knots
    total = float(knots[-1] - knots[0])
    nodes = [np.array([knots[0]])]
    for i in range(knots.size - 1):
        length = float(knots[i + 1] - knots[i])
        n_sub = max(8, int(round(points_per_unit * length / total)))
        seg = np.linspace(knots[i], knots[i + 1], n_sub + 1)[1:]
        nodes.append(seg)
    grid = np.concatenate(nodes)
    n = grid.size
    forward_node = int(np.argmin(np.abs(grid - localvar.forward)))
    assert abs(grid[forward_node] - localvar.forward) < 1e-12 * max(1.0, total)

    diag = np.ones(n)
    sub = np.zeros(n)
    sup = np.zeros(n)
    rhs = np.zeros(n)
    h_minus = grid[1:-1] - grid[:-2]
    h_plus = grid[2:] - grid[1:-1]
    a_vals = localvar.value(grid[1:-1])
    k = 0.5 * a_vals * a_vals * maturity
    c_left = 2.0 / (h_minus * (h_minus + h_plus))
    c_right = 2.0 / (h_plus * (h_minus + h_plus))
    sub[1:-1] = -k * c_left
    sup[1:-1] = -k * c_right
    diag[1:-1] = 1.0 + k * (c_left + c_right)
    a_f = float(localvar.value(np.asarray(localvar.forward)))
    j = forward_node
    rhs[j] = (
        0.5 * a_f * a_f * maturity * 2.0 / float(grid[j + 1] - grid[j - 1])
    )

    ab = np.zeros((3, n))
    ab[0, 1:] = sup[:-1]
    ab[1, :] = diag
    ab[2, :-1] = sub[1:]
    values = scipy.linalg.solve_banded((1, 1), ab, rhs)
    return grid, values


def dense_tridiag_solve(
    sub: np.ndarray, diag: np.ndarray, sup: np.ndarray, rhs: np.ndarray
) -> np.ndarray:
    """Dense LU solve of a tridiagonal system (independent check path)."""
    n = diag.size
    dense = np.zeros((n, n))
    idx = np.arange(n)
    dense[idx, idx] = diag
    dense[idx[1:], idx[:-1]] = sub[1:]
    dense[idx[:-1], idx[1:]] = sup[:-1]
    return np.linalg.solve(dense, rhs)


# ---------------------------------------------------------------------------
# Randomized generators
# ---------------------------------------------------------------------------


def random_piece(
    rng: np.random.Generator, branch_name: str
) -> tuple[QuadraticPiece, float, float, float]:
    """A random positive quadratic piece targeted at one evaluation branch.

    Returns ``(piece, x_lo, x_hi, maturity)``.  Pieces are kept away from
    their real roots and bounded in stiffness so hyperbolic factors do not
    overflow.
    """
    maturity = float(rng.uniform(0.05, 2.0))
    if branch_name == "constant":
        gamma = float(rng.uniform(0.05, 3.0))
        x_lo = float(rng.uniform(-2.0, 2.0))
        width = float(rng.uniform(0.05, 1.5)) * gamma * math.sqrt(maturity)
        return QuadraticPiece(0.0, 0.0, gamma), x_lo, x_lo + width, maturity

    if branch_name == "linear":
        beta = float(rng.uniform(0.2, 3.0)) * (1 if rng.random() < 0.5 else -1)
        root = float(rng.uniform(-2.0, 2.0))
        gamma = -beta * root
        gap = float(rng.uniform(0.05, 1.0))
        width = float(rng.uniform(0.1, 1.0))
        if beta > 0:
            x_lo = root + gap  # a > 0 to the right of the root
        else:
            x_lo = root - gap - width
        return QuadraticPiece(0.0, beta, gamma), x_lo, x_lo + width, maturity

    if branch_name == "real_roots":
        alpha = float(rng.uniform(0.2, 2.0)) * (1 if rng.random() < 0.5 else -1)
        r_lo = float(rng.uniform(-2.0, 0.0))
        r_hi = r_lo + float(rng.uniform(0.5, 3.0))
        # a = alpha (x - r_lo)(x - r_hi)
        beta = -alpha * (r_lo + r_hi)
        gamma = alpha * r_lo * r_hi
        if alpha > 0:
            if rng.random() < 0.5:
                x_lo = r_hi + float(rng.uniform(0.05, 1.0))
            else:
                x_lo = r_lo - float(rng.uniform(0.05, 1.0)) - 0.5
            width = float(rng.uniform(0.1, 0.4))
            if x_lo < r_lo:
                width = min(width, (r_lo - x_lo) * 0.8)
        else:
            inner = r_hi - r_lo
            x_lo = r_lo + inner * float(rng.uniform(0.1, 0.4))
            width = inner * float(rng.uniform(0.1, 0.5))
            width = min(width, r_hi - x_lo - inner * 0.05)
        return QuadraticPiece(alpha, beta, gamma), x_lo, x_lo + width, maturity

    # Conjugate branches: a = alpha ((x-u)^2 + v^2), delta = -4 alpha^2 v^2.
    alpha = float(rng.uniform(0.2, 2.0))
    u = float(rng.uniform(-1.0, 1.0))
    if branch_name == "conj_hyp":
        # need |delta| * T < 8
        v = math.sqrt(float(rng.uniform(0.05, 0.95)) * 8.0 / maturity) / (
            2.0 * alpha
        )
    elif branch_name == "conj_trig":
        v = math.sqrt(float(rng.uniform(1.1, 40.0)) * 8.0 / maturity) / (
            2.0 * alpha
        )
    else:
        raise ValueError(branch_name)
    beta = -2.0 * alpha * u
    gamma = alpha * (u * u + v * v)
    x_lo = u + float(rng.uniform(-2.0, 1.0)) * v
    width = float(rng.uniform(0.2, 2.0)) * v
    return QuadraticPiece(alpha, beta, gamma), x_lo, x_lo + width, maturity


BRANCH_NAMES = ("constant", "linear", "real_roots", "conj_hyp", "conj_trig")


def random_localvar(
    rng: np.random.Generator, max_interior: int = 8
) -> tuple[LocalVarianceFunction, float]:
    """A random valid local-variance function and maturity.

    Builds a continuous piecewise quadratic through random positive knot
    values with random curvatures, rejecting candidates that lose positivity
    or are stiff enough to overflow the hyperbolic basis.
    """
    for _ in range(200):
        maturity = float(rng.uniform(0.05, 1.5))
        m = int(rng.integers(1, max_interior + 1))
        lower = float(rng.uniform(0.2, 1.0))
        widths = rng.uniform(0.2, 1.5, size=m + 1)
        knots = lower + np.concatenate([[0.0], np.cumsum(widths)])
        span = float(knots[-1] - knots[0])
        s = int(rng.integers(1, m + 1))
        # Keep sum(width/a) * sqrt(2/T) moderate so cosh cannot overflow.
        base = span * math.sqrt(2.0 / maturity) / 12.0
        values = base * rng.uniform(0.4, 3.0, size=m + 2)
        pieces = []
        ok = True
        for i in range(m + 1):
            x0, x1 = float(knots[i]), float(knots[i + 1])
            v0, v1 = float(values[i]), float(values[i + 1])
            vmax = max(v0, v1)
            alpha = float(rng.uniform(-1.0, 1.0)) * 2.0 * vmax / (x1 - x0) ** 2
            # Match the endpoint values exactly.
            beta = (v1 - v0) / (x1 - x0) - alpha * (x0 + x1)
            gamma = v0 - (alpha * x0 + beta) * x0
            piece = QuadraticPiece(alpha, beta, gamma)
            lo_val = piece.value(x0)
            hi_val = piece.value(x1)
            if lo_val <= 0 or hi_val <= 0:
                ok = False
                break
            if alpha > 0:
                vertex = -beta / (2.0 * alpha)
                if x0 < vertex < x1 and piece.value(vertex) <= 1e-9 * vmax:
                    ok = False
                    break
            pieces.append(piece)
        if not ok:
            continue
        stiffness = math.sqrt(2.0 / maturity) * sum(
            float(knots[i + 1] - knots[i])
            / float(min(values[i], values[i + 1]))
            for i in range(m + 1)
        )
        if stiffness > 28.0:
            continue
        try:
            lv = LocalVarianceFunction(knots, tuple(pieces), s)
        except Exception:
            continue
        return lv, maturity
    raise RuntimeError("failed to generate a valid local-variance function")
