"""A short tour of the library: limit constants, parameters, profiles, and
the weighted error of the cluster ansatz at a few powers.

Run with ``python3 demos/quick_tour.py``; it takes well under a minute.
"""
import numpy as np

from bubblecluster.ansatz import error_norm_sweep
from bubblecluster.parameters import find_k0, limit_constants, solve_parameter_system
from bubblecluster.radial_profiles import C1_EXACT, solve_correction_profile
from bubblecluster.reduced_energy import minimize_phi, phi_k


def main():
    k, eta = 4, 2 / 3
    c = limit_constants(k)
    print(f"k={k}: a_k={c.a_k:.6f} b_k={c.b_k:.6f} r_k={c.r_k:.6f} t_k={c.t_k:.6f}")
    print(f"energy maximizer k0 = {find_k0():.8f}")

    for p in (20, 100, 1000):
        s = solve_parameter_system(k, p, eta)
        print(f"p={p:5d}: log alpha={s.log_alpha:9.3f} log beta={s.log_beta:8.3f} "
              f"rho={np.exp(s.log_rho):.4e} tau*p={s.tau * p:.5f}")

    V = solve_correction_profile(1)
    print(f"V log coefficient {V.log_coeff:.10f} vs 12(1 - log 2) = {C1_EXACT:.10f}")

    print(f"phi_4 minimized at {minimize_phi(k):.12f}, value {phi_k(k, eta):.6f}")

    sweep = error_norm_sweep(k, eta, [20, 40, 80], delta=0.1)
    for row in sweep["rows"]:
        print(f"p={row['p']:4g}: weighted error {row['norm']:.3e} (largest in {row['zone']})")
    print(f"log-log slope {sweep['slope']:.3f}")


if __name__ == "__main__":
    main()
