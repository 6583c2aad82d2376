"""Plain and preconditioned margin r_u(eps_x) on the two-variable QCQP example."""

import argparse
import csv
import sys

import numpy as np

from imftbounds.errors import BallNotInPolyhedron, EpsTooLarge
from imftbounds.qcqp import box_example, qcqp_margin


def margin_or_none(p, e, pre):
    try:
        return qcqp_margin(p, e, preconditioned=pre).r_u
    except (EpsTooLarge, BallNotInPolyhedron):
        return None


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=40)
    ap.add_argument("--eps-max", type=float, default=1.0)
    ap.add_argument("--out")
    a = ap.parse_args(argv)
    p = box_example()
    fh = open(a.out, "w", newline="") if a.out else sys.stdout
    w = csv.writer(fh, lineterminator="\r\n")
    w.writerow(["eps_x", "r_u_plain", "r_u_preconditioned"])
    for e in np.linspace(a.eps_max / a.points, a.eps_max, a.points):
        row = [float(e), margin_or_none(p, float(e), False), margin_or_none(p, float(e), True)]
        w.writerow(["" if v is None else repr(v) for v in row])
    if a.out:
        fh.close()


if __name__ == "__main__":
    main()
