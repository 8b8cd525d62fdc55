"""Replay the rank-agreement arithmetic on a published score table.

Six explainers are scored by several metrics. Each metric induces a ranking,
which is compared with the ranking induced by the ground-truth recovery
fraction using Kendall's tau and Spearman's rho.
"""

from cfeval.acceptance import ADULTS, EXPLAINER_ORDER, table_rows
from cfeval.report import rank_table, row_label

rankings, correlations = rank_table(table_rows(ADULTS))

print("ground-truth ranking:")
for name in EXPLAINER_ORDER:
    print(f"  {name:<20} {rankings['ground_truth'].rank_of(name):g}")

print("\nagreement with ground truth:")
for key, c in correlations.items():
    print(f"  {row_label(key):<20} tau={c['tau']:+.4f} rho={c['rho']:+.4f}")
