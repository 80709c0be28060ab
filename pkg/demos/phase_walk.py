"""Walk rho across the admissible range for one kappa and print what changes.

    python3 demos/phase_walk.py [kappa]
"""

import sys

import numpy as np

from slecone.sle import classify_phase, params


def main(kappa=3.0):
    print(f"kappa = {kappa}")
    print(f"{'rho':>8} {'phase':>20} {'delta':>8} {'theta_rho':>10} {'dim':>6}")
    for rho in np.round(np.linspace(-2 - kappa / 2 - 0.5, kappa / 2, 17), 3):
        info = classify_phase(kappa, rho)
        p = params(kappa, rho)
        theta = "" if p.theta_rho is None else f"{p.theta_rho:10.4f}"
        print(f"{rho:8.3f} {info.phase.value:>20} {p.delta:8.4f} {theta:>10} {info.dimension:6.3f}")
    # the light cone opens to angle pi exactly at rho = kappa/2 - 4
    print(f"\ntheta at rho = kappa/2 - 4: {params(kappa, kappa / 2 - 4).theta_rho:.6f} (pi = {np.pi:.6f})")


if __name__ == "__main__":
    main(float(sys.argv[1]) if len(sys.argv) > 1 else 3.0)
