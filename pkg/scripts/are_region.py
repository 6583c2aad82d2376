"""Robustness region of the double-integrator Riccati equation under each norm convention.

Prints the best (rho_A, rho_P) pair and re-solves the equation at sampled
perturbations to count violations.
"""

import argparse

from imftbounds.riccati import CONVENTIONS, are_robust_region, double_integrator, verify_region_point


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--draws", type=int, default=500)
    ap.add_argument("--frontier", type=int, default=0, help="also print this many frontier points")
    a = ap.parse_args(argv)
    p = double_integrator()
    for conv in CONVENTIONS:
        reg = are_robust_region(p, conv)
        c = reg.constants
        ra, rp = reg.best()
        fails, worst = verify_region_point(p, ra, rp, conv, draws=a.draws)
        print(f"{conv:10s} M_P={c.M_P:.4f} L_A={c.L_A:.4f} 1/M_P={reg.inv_M_P:.4f} 1/(2M_P)={reg.uniq_rhs:.4f} "
              f"best rho_A={ra:.6g} rho_P={rp:.6g} sampled max ||P-P0||={worst:.3g} violations={fails}")
        for fa, fp in reg.frontier(a.frontier) if a.frontier else []:
            print(f"    {fp:.6g} {fa:.6g}")


if __name__ == "__main__":
    main()
