"""Octave ladders of the envelope mixed norms for B and its transpose, phi = |z|^m."""

import argparse

from fockspec import schatten
from fockspec.weights import WeightSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=float, default=4.0)
    ap.add_argument("--p", default="3,3.5,5,6")
    ap.add_argument("--eps", type=float, default=1.0)
    ap.add_argument("--octaves", type=int, default=10)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    w = WeightSpec.radial_power(args.m)
    ps = [float(x) for x in args.p.split(",")]
    res = schatten.envelope_mixed_norms(w, ps, args.eps, schatten.default_ladder(args.octaves), threads=args.threads)
    for r in res:
        ev = r.exponent_verdict.value if r.exponent_verdict else "-"
        print(f"# p={r.p:g} eps={r.eps:g} B={r.verdict_B.value} ({r.ratio_B:.3f}) "
              f"B*={r.verdict_Bstar.value} ({r.ratio_Bstar:.3f}) exponent={ev}")
        print(r.ladder_csv(), end="")


if __name__ == "__main__":
    main()
