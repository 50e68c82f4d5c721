"""Type-I error of the three tests as the number of groups grows.

psi_z uses the normal limit, psi_chi the standardized chi-square(1) limit
and phi_star the K_f approximation with estimated f. Under the grand-mean
hypothesis the normal limit is the wrong one, and psi_z over-rejects.

Set SPLITPLOT_WORKERS to use more processes. Counts do not depend on it.
"""

import sys

import splitplot as sp
from splitplot.plotting import line_plot_svg

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 300
d = 50
cov = sp.ar_covariance(d, 0.6)
group_counts = list(range(2, 9))

for hypothesis in ("interaction", "grand-mean"):
    rates = {name: [] for name in ("psi_z", "psi_chi", "phi_star")}
    for a in group_counts:
        cfg = sp.SimConfig(sp.reference_sample_sizes(a), d, cov, hypothesis, reps=reps, seed=10)
        res = sp.estimate_rejection_rate(cfg)
        for name in rates:
            rates[name].append(res.rate(name))
    print(f"\n{hypothesis}, {reps} replications per cell")
    print("a    " + "".join(f"{name:>10}" for name in rates))
    for k, a in enumerate(group_counts):
        print(f"{a:<5}" + "".join(f"{rates[name][k]:10.3f}" for name in rates))
    svg = line_plot_svg({k: (group_counts, v) for k, v in rates.items()},
                        xlabel="a (number of groups)", ylabel="rejection rate",
                        title=f"{hypothesis}, d={d}", hline=0.05)
    with open(f"type_one_error_{hypothesis}.svg", "w") as fh:
        fh.write(svg)
