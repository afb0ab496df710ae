"""Fitted singular-value decay exponents against (m - 2d) / (2m) for phi = |z|^m, g = z^d."""

import argparse

from fockspec import fock, hankel, schatten
from fockspec.hankel import SymbolPoly
from fockspec.weights import WeightSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=4000)
    ap.add_argument("--pairs", default="3:1,4:1,5:1,6:1,6:2,8:1,8:2,8:3")
    args = ap.parse_args()
    print("m,d,alpha_fit,stderr,alpha_pred,p_star")
    for item in args.pairs.split(","):
        m, d = (int(x) for x in item.split(":"))
        b = fock.OrthoBasis.build(WeightSpec.radial_power(m), args.N + 2 * d)
        spec = hankel.spectrum(b, SymbolPoly.monomial(d), args.N)
        fit = schatten.decay_fit(spec, (args.N // 10, args.N // 2))
        pred = max(0.0, (m - 2 * d) / (2 * m))
        print(f"{m},{d},{fit.alpha:.6f},{fit.stderr:.1e},{pred:.6f},{schatten.critical_exponent(m, d):g}")


if __name__ == "__main__":
    main()
