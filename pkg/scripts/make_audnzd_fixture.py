#!/usr/bin/env python3
"""Regenerate the AUD/NZD one-week fixture from its broker-style quotes.

FX smiles are quoted in deltas, not strikes: an at-the-money volatility,
risk reversals (RR) and butterflies (BF) at the 25- and 10-delta pillars.
This script converts those five quotes to (strike, vol) pairs under the
simple smile convention

    vol(25d put)  = atm + bf25 - rr25 / 2      vol(25d call) = atm + bf25 + rr25 / 2
    vol(10d put)  = atm + bf10 - rr10 / 2      vol(10d call) = atm + bf10 + rr10 / 2

with premium-excluded *forward* deltas, so a call with delta ``p`` struck at

    K = F * exp(sigma^2 T / 2 - sigma sqrt(T) Phi^{-1}(p))

(a put with delta ``-p`` uses ``+ sigma sqrt(T) Phi^{-1}(p)``), and the
at-the-money strike is the delta-neutral straddle ``K = F exp(sigma^2 T / 2)``.

The resulting five pairs are written to ``src/quadsmile/fixtures/audnzd_1w.csv``
with the conversion inputs documented in the header. Run from the repo root:

    python3 scripts/make_audnzd_fixture.py
"""

from __future__ import annotations

import math
from pathlib import Path

from scipy.stats import norm

SPOT = 1.0784
FORWARD = 1.07845
DISCOUNT = 0.999712587139
MATURITY = 7.0 / 365.0

ATM = 0.0514
RR25 = 0.0040
BF25 = 0.0025
RR10 = 0.0035
BF10 = 0.01175


def call_strike(vol: float, delta: float) -> float:
    root_t = math.sqrt(MATURITY)
    return FORWARD * math.exp(
        0.5 * vol * vol * MATURITY - vol * root_t * norm.ppf(delta)
    )


def put_strike(vol: float, delta: float) -> float:
    root_t = math.sqrt(MATURITY)
    return FORWARD * math.exp(
        0.5 * vol * vol * MATURITY + vol * root_t * norm.ppf(delta)
    )


def main() -> None:
    vol_10p = ATM + BF10 - RR10 / 2.0
    vol_25p = ATM + BF25 - RR25 / 2.0
    vol_25c = ATM + BF25 + RR25 / 2.0
    vol_10c = ATM + BF10 + RR10 / 2.0

    pairs = [
        (put_strike(vol_10p, 0.10), vol_10p),
        (put_strike(vol_25p, 0.25), vol_25p),
        (FORWARD * math.exp(0.5 * ATM * ATM * MATURITY), ATM),
        (call_strike(vol_25c, 0.25), vol_25c),
        (call_strike(vol_10c, 0.10), vol_10c),
    ]
    pairs.sort()

    lines = [
        "# name=audnzd_1w",
        f"# forward={FORWARD}",
        f"# maturity={MATURITY:.17g}",
        f"# discount={DISCOUNT}",
        f"# spot={SPOT}",
        "# note=strikes converted from forward-delta quotes"
        " (atm=5.14% rr25=0.40% bf25=0.25% rr10=0.35% bf10=1.175%,"
        " premium excluded, delta-neutral-straddle atm)",
        "strike,vol",
    ]
    for strike, vol in pairs:
        lines.append(f"{strike:.17g},{vol:.17g}")

    out = Path(__file__).resolve().parent.parent / "src" / "quadsmile"
    out = out / "fixtures" / "audnzd_1w.csv"
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {out}")
    for strike, vol in pairs:
        print(f"  K={strike:.6f}  vol={100 * vol:.2f}%")


if __name__ == "__main__":
    main()
