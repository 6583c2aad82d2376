"""Linearization domain of the two-state example and a containment simulation."""

import argparse

import numpy as np

from imftbounds.fblin import example_problem, example_ratio, linearization_domain, simulate_containment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rho-u", type=float, default=0.5)
    ap.add_argument("--sequences", type=int, default=100)
    ap.add_argument("--steps", type=int, default=10000)
    a = ap.parse_args(argv)
    p = example_problem()
    print("rho_x  ratio(closed form)  eps_v")
    for rx in np.linspace(0.05, 0.4, 8):
        d = linearization_domain(p, float(rx), a.rho_u)
        print(f"{rx:5.3f}  {example_ratio(float(rx)):.6f}  {d.eps_v:.6g}")
    d = linearization_domain(p, 0.2, a.rho_u)
    rep = simulate_containment(p.A, p.B, d.rho_z, d.eps_v_invariance, d.notes["P_phi_prime"], a.sequences, a.steps)
    print(f"containment: rho_z={d.rho_z:.4g} eps_v={d.eps_v_invariance:.4g} exits from the P' ball={rep.left_P_prime} "
          f"max norm={rep.max_norm:.4g}")


if __name__ == "__main__":
    main()
