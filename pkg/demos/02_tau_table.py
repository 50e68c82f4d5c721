"""Exact tau_P = 1/f_P for an AR(0.6) covariance and unbalanced groups.

tau_P near zero means the standardized statistic is close to normal; tau_P
equal to one means it follows a standardized chi-square with one degree of
freedom. The grand-mean hypothesis has a rank-one projection, so its
tau_P is one in every cell.
"""

import splitplot as sp

dims = (5, 50, 200, 600)
groups = range(2, 13)

for hypothesis in ("interaction", "grand-mean"):
    print(f"\n{hypothesis}")
    print("d \\ a " + "".join(f"{a:>7}" for a in groups))
    for d in dims:
        sigma = sp.ar_covariance(d, 0.6).matrix
        row = []
        for a in groups:
            pair = sp.canonical_hypothesis(hypothesis, a, d)
            _, tau = sp.f_p_exact(pair.T_W, pair.T_S, sigma, sp.reference_sample_sizes(a))
            row.append(tau)
        print(f"{d:<6}" + "".join(f"{t:7.3f}" for t in row))
