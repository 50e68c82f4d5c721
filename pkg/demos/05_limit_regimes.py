"""Which limit law applies, and how far K_f is from it.

The null law of the standardized statistic is a weighted sum of centred
chi-square(1) variables with weights beta_s from the spectrum of T V T.
A dominant beta_1 gives the chi-square(1) limit, a flat spectrum gives the
normal limit, and anything in between is a genuine mixture.
"""

import numpy as np

import splitplot as sp

cases = [
    ("grand-mean", 3, 20, sp.ar_covariance(20, 0.6)),
    ("interaction", 2, 5, sp.ar_covariance(5, 0.6)),
    ("interaction", 4, 50, sp.ar_covariance(50, 0.6)),
    ("interaction", 3, 600, sp.CovarianceModel.identity(600)),
]

for hypothesis, a, d, cov in cases:
    n = sp.reference_sample_sizes(a)
    pair = sp.canonical_hypothesis(hypothesis, a, d)
    spec = sp.spectrum_tvt(pair.T_W, pair.T_S, cov.matrix, n)
    report = sp.classify_regime(spec.betas)
    f_p, _ = sp.f_p_exact(pair.T_W, pair.T_S, cov.matrix, n)
    rows = sp.approximation_error(spec.betas, f_p, (0.01, 0.05, 0.1), m_samples=50_000, seed=3)
    print(f"\n{hypothesis}, a={a}, d={d}, {cov.spec()}: beta1={report.beta1:.3f}, "
          f"r_eff={report.r_effective}, regime={report.tag}, f_P={f_p:.2f}")
    for row in rows:
        print(f"  alpha={row.alpha:.2f}  mixture={row.mixture_quantile:6.3f} "
              f"(se {row.mixture_se:.3f})  K_f={row.kf_quantile:6.3f}  gap={row.gap:+.3f}")

# A few large weights against many small ones.
for betas in ([0.8, 0.6], np.full(100, 0.1)):
    q, se = sp.mixture_quantile(betas, 0.05, 100_000, seed=1)
    print(f"\n95% quantile with {len(betas)} weights: {q:.3f} (se {se:.3f})")
