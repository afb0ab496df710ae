"""Terms needed for a resolved kernel diagonal and the resulting K rho^2 e^(-2 phi) ratio."""

import argparse

import numpy as np

from fockspec import fock, geometry
from fockspec.weights import WeightSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=float, default=4.0)
    ap.add_argument("--radii", default="0,1,2,4,6,8")
    args = ap.parse_args()
    w = WeightSpec.radial_power(args.m)
    b = fock.OrthoBasis.build(w, 400)
    print("r,n_terms,trunc_err,ratio")
    for r in (float(x) for x in args.radii.split(",")):
        kv = fock.log_kernel_diag(b, r)
        ratio = np.exp(float(kv.log_abs) - 2 * float(b.phi(r))) * float(geometry.rho(w, r)) ** 2
        print(f"{r:g},{kv.n_terms},{float(kv.trunc_err):.1e},{ratio:.6f}")


if __name__ == "__main__":
    main()
