"""
Rank correlation of reference scores
====================================

Read the 21-project score table shipped with the tests, recompute each
score from its killed and covered counts, and correlate the two engines.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from exmut.analysis import compute_score, spearman_p_value, spearman_rho
from exmut.report import read_comparison_table

TABLE = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "score_table.csv"

rows, _ = read_comparison_table(TABLE)
for row in rows:
    ok = (compute_score(row.extreme_killed, row.extreme_covered) == row.extreme_score
          and compute_score(row.trad_killed, row.trad_covered) == row.trad_score)
    print(f"{row.project:24} {row.extreme_score:>6} {row.trad_score:>6}  {'ok' if ok else 'MISMATCH'}")

pairs = [(float(r.extreme_score), float(r.trad_score)) for r in rows]
rho = spearman_rho(pairs)
print(f"\nrho = {rho:.4f}, p = {spearman_p_value(rho, len(pairs)):.5f} over {len(pairs)} projects")

# extreme scores sit higher; the ranking is what agrees
diff = np.array([x - t for x, t in pairs])
print(f"extreme minus traditional: mean {diff.mean():.2f}, min {diff.min():.2f}, max {diff.max():.2f}")
