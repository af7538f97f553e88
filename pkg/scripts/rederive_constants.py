#!/usr/bin/env python3
"""Independent re-derivation of the a-priori run constants.

Recomputes the growth rate C, the field prefactor C_tilde, and the barrier
gain K from their defining formulas using exact rational arithmetic
(``fractions.Fraction``), completely independently of the simulation
package — this script deliberately imports nothing from it.  Output lines
match the ``ringkinetics bounds`` format token for token, so the two can be
compared numerically:

    t=1.0 transits=1 C=13.0 C_tilde=55.0 K=333.7692307692308

Derivation, with width L = r2 - r1, midpoint rm = (r1 + r2)/2, transit
count m = ceil(t/L), boundary-trace envelope E_b, initial tangential field
sup-norms E_0 and B_0, initial charge Q = ||f0||_L1, enclosed-charge
parameter lam, weighted charge W = ||r p0 f0||_L1, initial support radius
M0:

* each wall-to-wall wave transit multiplies the worst-case tangential
  amplification by a factor controlled by the boundary drive, giving the
  exponential rate  C = (1 + 4 r2 m E_b) / r1;
* the tangential pair obeys |E_theta|, |B| <= C_tilde e^{C t} with

      C_tilde = (r2/r1) (2 E_0 + B_0 + (4m + 2) E_b)
              + [ 2 r2^2 m ((Q + lam)^2 + E_0^2 + B_0^2) + 2 m W ] / (2 r1);

* the barrier cap must clear the canonical-momentum excursion, which costs

      K = (C_tilde/2)(r2 + rm) L + (2 r2 - r1)(2 C_tilde/C + M0)
        + r2 M0 + C_tilde rm / C.

All quantities are rational for rational inputs; floats are converted to
their exact binary rationals, so the only rounding is the final conversion
of each result back to a float.
"""

import argparse
import sys
from fractions import Fraction
from math import ceil


def transit_count(t: Fraction, width: Fraction) -> int:
    """ceil(t/width), with the same tiny nudge the package applies so that
    exact multiples of the width do not round up."""
    if t < 0:
        raise ValueError(f"time must be nonnegative; got {t}")
    ratio = t / width - Fraction(1, 10**12)
    return max(0, ceil(ratio))


def derive(r1, r2, e0, b0, eb, q, w, lam, m0, t):
    """Return (m, C, C_tilde, K) as exact Fractions."""
    width = r2 - r1
    rm = (r1 + r2) / 2
    m = transit_count(t, width)

    c = (1 + 4 * r2 * m * eb) / r1

    linear = (r2 / r1) * (2 * e0 + b0 + (4 * m + 2) * eb)
    quad = (2 * r2 * r2 * m * ((q + lam) ** 2 + e0 * e0 + b0 * b0) + 2 * m * w) / (2 * r1)
    c_tilde = linear + quad

    k = (
        Fraction(1, 2) * c_tilde * (r2 + rm) * width
        + (2 * r2 - r1) * (2 * c_tilde / c + m0)
        + r2 * m0
        + c_tilde * rm / c
    )
    return m, c, c_tilde, k


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--r1", type=float, default=1.0)
    parser.add_argument("--r2", type=float, default=3.0)
    parser.add_argument("--etheta0", type=float, default=1.0)
    parser.add_argument("--b0", type=float, default=1.0)
    parser.add_argument("--ebtheta", type=float, default=1.0)
    parser.add_argument("--f0l1", type=float, default=1.0)
    parser.add_argument("--rp0f0", type=float, default=1.0)
    parser.add_argument("--f0linf", type=float, default=1.0)
    parser.add_argument("--lam", type=float, default=0.0)
    parser.add_argument("--m0", type=float, default=1.0)
    parser.add_argument("--t", type=float, nargs="+", default=[1.0])
    args = parser.parse_args(argv)

    frac = Fraction  # exact binary value of each float
    for t in args.t:
        m, c, c_tilde, k = derive(
            frac(args.r1), frac(args.r2), frac(args.etheta0), frac(args.b0),
            frac(args.ebtheta), frac(args.f0l1), frac(args.rp0f0),
            frac(args.lam), frac(args.m0), frac(t),
        )
        print(
            f"t={t!r} transits={m} C={float(c)!r} "
            f"C_tilde={float(c_tilde)!r} K={float(k)!r}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
