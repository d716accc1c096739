"""Two-way fixed-effects earnings decomposition on synthetic matches.

Screens the match records the way the estimation sample is built (age
window, earnings floor, two-jobs rule, owners), keeps the largest connected
worker-firm set, fits the sparse least-squares decomposition, and builds
worker quality and firm-level top / non-top quality.  Ends with log-rank
tail fits of the recovered quality distributions.
"""

import numpy as np

from matchprod import ModelParams
from matchprod.akm import (
    apply_sample_screens,
    estimate_akm,
    firm_quality,
    identify_top_workers,
    largest_connected_set,
    variance_decomposition,
    worker_quality,
)
from matchprod.paretotail import rank_regression
from matchprod.simulate import SimConfig, simulate_firm_panel, simulate_worker_panel

params = ModelParams(theta=0.417, alpha_l=0.777, alpha_k=0.079,
                     lambda_x=2.06, lambda_y=1.80, sigma=5.0, rho_x=0.45)
config = SimConfig(n_firms=300, years=10, params=params, seed=11,
                   mobility_rate=0.3, workers_per_firm_scale=2.0,
                   earnings_design_r2=0.75)

firms = simulate_firm_panel(config)
matches = simulate_worker_panel(firms, config)

screened, report = apply_sample_screens(matches)
print("screen report:", report)
connected, stats = largest_connected_set(screened)
print(f"largest connected set keeps {stats['share_kept']:.2%} of matches "
      f"({stats['n_components']} components)")

est = estimate_akm(connected)
print(f"\nsolver: {est.solver['iterations']} iterations, "
      f"normal-equation residual {est.solver['ne_rel_residual']:.1e}")
print(f"R2 = {est.r_squared:.3f}, adjusted R2 = {est.adj_r_squared:.3f} "
      f"(design 0.75)")

truth = connected.groupby("worker_id")["alpha_i"].first()
diff = est.alpha - truth.loc[est.alpha.index]
print(f"worker-effect recovery, sd of error: "
      f"{(diff - diff.mean()).std():.4f}")

table = variance_decomposition(est, connected)
print("\nvariance decomposition (all firms):")
row = table.iloc[0]
for key in ("var_lnw", "var_worker", "var_firm", "var_xb", "var_resid",
            "cov_worker_firm"):
    print(f"  {key:16s} {row[key]:8.4f}")

h = worker_quality(est, connected)
flags = identify_top_workers(connected)
quality, dropped = firm_quality(connected, h, flags)
print(f"\nfirm quality: {len(quality)} firm-years "
      f"({dropped} dropped for having no non-top workers)")
print(f"corr(top, non-top quality) = "
      f"{np.corrcoef(quality['ln_y'], quality['ln_x'])[0, 1]:.3f}")

for label, col in (("top", "ln_y"), ("non-top", "ln_x")):
    fit = rank_regression(np.exp(quality[col]))
    print(f"{label:8s} quality tail: lambda_hat = {fit.lambda_hat:.3f} "
          f"(se {fit.standard_error:.3f}, R2 {fit.r_squared:.3f})")
