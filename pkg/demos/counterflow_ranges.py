"""Same range, different order: SLE_3(-2.5) against SLE_{16/3}(-4/3).

A small version of acceptance criterion 9.  The two ensembles should
agree on every range summary while visiting their pockets in a different
order; SLE_3(-2.1) is the control that should disagree.

    python3 demos/counterflow_ranges.py [n_per_ensemble]
"""

import sys

import numpy as np

from slecone.analysis import pocket_visit_tau, range_equivalence_stat, range_summaries, visit_order_test
from slecone.rng import make_rng
from slecone.sle import sample_sle_trace

T, N = 9.0, 50_000


def ensemble(kappa, rho, side, tag, n):
    rows, taus = [], []
    for s in range(n):
        tr = sample_sle_trace(kappa, rho, T, T / N, make_rng(90, tag, s), side=side)
        rows.append(range_summaries(tr))
        taus.append(pocket_visit_tau(tr))
    return rows, np.array(taus)


def main(n=25):
    a, ta = ensemble(3.0, -2.5, "right", 0, n)
    b, tb = ensemble(16 / 3, -4 / 3, "left", 1, n)
    c, _ = ensemble(3.0, -2.1, "right", 2, n)
    for label, other in (("SLE_16/3(-4/3), left", b), ("SLE_3(-2.1)", c)):
        rep = range_equivalence_stat(a, other)
        print(f"SLE_3(-2.5) vs {label}: verdict {rep.verdict}")
        for k, p in rep.pvalues.items():
            print(f"    {k:>22}: KS {rep.statistics[k]:.3f}  p {p:.3g}")
    vo = visit_order_test(ta, tb)
    print(f"pocket visit tau: median {vo.median_a:+.2f} vs {vo.median_b:+.2f}, Mann-Whitney p {vo.pvalue:.2g}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 25)
