"""Undiscounted Black-76 prices, vegas, and a robust implied-volatility solver.

All prices are undiscounted (forward-measure) prices of European options on a
forward ``F``: the call is ``E[(X - K)^+]`` with ``E[X] = F``.  Discounting is
a caller concern; the calibration pipeline works entirely in undiscounted
out-of-the-money (OTM) prices.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfcinv

from .errors import ArbitrageViolationError, PriceOutOfBoundsError

__all__ = [
    "norm_cdf",
    "norm_pdf",
    "black_call",
    "black_put",
    "black_otm",
    "black_vega",
    "black_atm_otm",
    "implied_vol",
    "implied_vol_curve",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def norm_cdf(x: float) -> float:
    """Standard normal CDF, accurate into the far tails via ``erfc``."""
    return 0.5 * math.erfc(-x / _SQRT2)


def norm_pdf(x: float) -> float:
    """Standard normal density."""
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def _d1_d2(forward: float, strike: float, total_vol: float) -> tuple[float, float]:
    d1 = math.log(forward / strike) / total_vol + 0.5 * total_vol
    return d1, d1 - total_vol


def black_call(forward: float, strike: float, maturity: float, vol: float) -> float:
    """Undiscounted Black call price ``E[(X - K)^+]``.

    Args:
        forward: Forward price ``F > 0``.
        strike: Strike ``K > 0``.
        maturity: Time to expiry in years, ``T > 0``.
        vol: Black volatility, ``vol >= 0``.

    Returns:
        The call price; the intrinsic value ``max(F - K, 0)`` when ``vol`` is zero.
    """
    total = vol * math.sqrt(maturity)
    if total <= 0.0:
        return max(forward - strike, 0.0)
    d1, d2 = _d1_d2(forward, strike, total)
    return forward * norm_cdf(d1) - strike * norm_cdf(d2)


def black_put(forward: float, strike: float, maturity: float, vol: float) -> float:
    """Undiscounted Black put price ``E[(K - X)^+]``."""
    total = vol * math.sqrt(maturity)
    if total <= 0.0:
        return max(strike - forward, 0.0)
    d1, d2 = _d1_d2(forward, strike, total)
    return strike * norm_cdf(-d2) - forward * norm_cdf(-d1)


def black_otm(forward: float, strike: float, maturity: float, vol: float) -> float:
    """Price of the out-of-the-money option: put below the forward, call at or above."""
    if strike >= forward:
        return black_call(forward, strike, maturity, vol)
    return black_put(forward, strike, maturity, vol)


def black_vega(forward: float, strike: float, maturity: float, vol: float) -> float:
    """Black vega ``dPrice/dVol`` (same for call and put)."""
    total = vol * math.sqrt(maturity)
    if total <= 0.0:
        return 0.0
    d1, _ = _d1_d2(forward, strike, total)
    return forward * norm_pdf(d1) * math.sqrt(maturity)


def black_atm_otm(forward: float, maturity: float, vol: float) -> float:
    """Closed-form at-the-money OTM price ``F * (2 * Phi(vol * sqrt(T) / 2) - 1)``."""
    half = 0.5 * vol * math.sqrt(maturity)
    return forward * (2.0 * norm_cdf(half) - 1.0)


def _otm_hat(k_hat: float, total_vol: float) -> float:
    """OTM price divided by the forward, for strike ratio ``k_hat = K / F``."""
    d1 = -math.log(k_hat) / total_vol + 0.5 * total_vol
    d2 = d1 - total_vol
    if k_hat >= 1.0:
        return norm_cdf(d1) - k_hat * norm_cdf(d2)
    return k_hat * norm_cdf(-d2) - norm_cdf(-d1)


def _vega_hat(k_hat: float, total_vol: float) -> float:
    d1 = -math.log(k_hat) / total_vol + 0.5 * total_vol
    return norm_pdf(d1)


def implied_vol(
    price: float,
    forward: float,
    strike: float,
    maturity: float,
    kind: str = "otm",
) -> float:
    """Invert the Black formula for the volatility of an OTM, call, or put price.

    Uses a bracketed Newton iteration on the logarithm of the price, which is
    well scaled even for prices many orders of magnitude below the forward.

    Args:
        price: Undiscounted option price.
        forward: Forward price ``F > 0``.
        strike: Strike ``K > 0``.
        maturity: Time to expiry in years, ``T > 0``.
        kind: ``"otm"`` (default), ``"call"``, or ``"put"``; in-the-money call
            and put prices are reduced to the OTM problem via put-call parity.

    Returns:
        The Black volatility reproducing ``price``.

    Raises:
        ArbitrageViolationError: If the price is at or below intrinsic value
            (including a zero OTM price, which has no positive-vol solution).
        PriceOutOfBoundsError: If the price is at or above its model-free
            upper bound ``min(F, K)`` for the OTM option.
    """
    if forward <= 0.0 or strike <= 0.0:
        raise ValueError("forward and strike must be positive")
    if maturity <= 0.0:
        raise ValueError("maturity must be positive")

    otm_price = price
    if kind == "call" and strike < forward:
        otm_price = price - (forward - strike)
    elif kind == "put" and strike > forward:
        otm_price = price - (strike - forward)
    elif kind not in ("otm", "call", "put"):
        raise ValueError(f"unknown option kind: {kind!r}")

    k_hat = strike / forward
    p_hat = otm_price / forward
    upper = min(1.0, k_hat)
    if p_hat <= 0.0:
        raise ArbitrageViolationError(
            f"OTM price {otm_price!r} is at or below intrinsic value"
        )
    if p_hat >= upper:
        raise PriceOutOfBoundsError(
            f"OTM price {otm_price!r} breaches the upper bound {upper * forward!r}"
        )

    log_k = abs(math.log(k_hat))
    lo, hi = 1e-12, 40.0

    if log_k < 1e-12:
        # At the forward the inversion is closed-form:
        # p_hat = 2 * Phi(total / 2) - 1  =>  erfc(-total / (2 sqrt 2)) = 1 + p_hat.
        total = -2.0 * _SQRT2 * _erfc_inv(1.0 + p_hat)
        return total / math.sqrt(maturity)

    # Initial guess: at least the scale where the OTM price stops being
    # negligible, refined by Newton below.
    total = max(math.sqrt(2.0 * log_k) * 0.5, 1e-4)
    f0 = _otm_hat(k_hat, total) - p_hat
    if f0 > 0.0:
        hi = total
    else:
        lo = total

    for _ in range(100):
        value = _otm_hat(k_hat, total)
        if value > p_hat:
            hi = total
        elif value < p_hat:
            lo = total
        else:
            break
        vega = _vega_hat(k_hat, total)
        step_ok = value > 0.0 and vega > 0.0 and math.isfinite(vega)
        if step_ok:
            # Newton on log-price: d(log value)/d(total) = vega / value.
            step = -(math.log(value) - math.log(p_hat)) * value / vega
            new_total = total + step
            if not lo < new_total < hi:
                new_total = 0.5 * (lo + hi)
        else:
            new_total = 0.5 * (lo + hi)
        if abs(new_total - total) <= 4e-16 * total:
            total = new_total
            break
        total = new_total

    return total / math.sqrt(maturity)


def _erfc_inv(y: float) -> float:
    """Inverse of ``erfc`` on (0, 2); used by the exact at-the-money inversion."""
    return float(erfcinv(y))


def implied_vol_curve(
    prices: np.ndarray,
    forward: float,
    strikes: np.ndarray,
    maturity: float,
) -> np.ndarray:
    """Vectorized OTM implied vols; element-wise wrapper over :func:`implied_vol`."""
    prices = np.asarray(prices, dtype=float)
    strikes = np.asarray(strikes, dtype=float)
    out = np.empty_like(prices)
    for i, (p, k) in enumerate(zip(prices, strikes)):
        out[i] = implied_vol(float(p), forward, float(k), maturity)
    return out
