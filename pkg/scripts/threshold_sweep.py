"""Three-way Schatten verdicts (criterion integral, exponent arithmetic, spectrum) across p*."""

import argparse

import numpy as np

from fockspec import fock, hankel, schatten
from fockspec.hankel import SymbolPoly
from fockspec.weights import WeightSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=float, default=4.0)
    ap.add_argument("--d", type=int, default=1)
    ap.add_argument("--N", type=int, default=2000)
    ap.add_argument("--points", type=int, default=17)
    args = ap.parse_args()
    w = WeightSpec.radial_power(args.m)
    g = SymbolPoly.monomial(args.d)
    p_star = schatten.critical_exponent(args.m, args.d)
    top = 3 * p_star if np.isfinite(p_star) else 12.0
    grid = np.round(np.linspace(2.0, top, args.points), 4)
    b = fock.OrthoBasis.build(w, args.N + 2 * args.d)
    spec = hankel.spectrum(b, g, args.N)
    rep = schatten.classify(w, g, grid, spec, strict=False)
    print(f"# m={args.m:g} d={args.d} p*={p_star:g} N={args.N}")
    print("p,criterion,exponent,spectral,near_threshold,criterion_ratio,spectral_ratio")
    for v in rep.verdicts:
        ev = v.exponent.value if v.exponent else ""
        print(f"{v.p:g},{v.criterion.value},{ev},{v.spectral.value},{v.in_band},"
              f"{v.criterion_ratio:.4f},{v.spectral_ratio:.4f}")


if __name__ == "__main__":
    main()
