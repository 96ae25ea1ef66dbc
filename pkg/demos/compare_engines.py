"""
Extreme against traditional-lite
================================

Run both engines over each fixture project and tabulate created
mutants, wall time and score. The comparison only counts functions
that both engines mutated.
"""

from __future__ import annotations

from pathlib import Path

from exmut.analysis import intersect_reports
from exmut.cli import load_config
from exmut.executor import run_engine
from exmut.model import Engine
from exmut.report import ProjectRow, render_comparison_table, table_correlation

CORPUS = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "corpus"

rows = []
for root in sorted(p for p in CORPUS.iterdir() if (p / "exmut.toml").is_file()):
    cfg = load_config(["run", str(root)]).engine_config()
    extreme = run_engine(root, Engine.EXTREME, cfg)
    traditional = run_engine(root, Engine.TRADITIONAL_LITE, cfg)
    cmp = intersect_reports(extreme, traditional)
    rows.append(ProjectRow.from_reports(root.name, cmp, extreme, traditional))
    print(f"{root.name:10} extreme {extreme.mutants_created:3} mutants {extreme.total_wall_time_ms:6} ms"
          f"   traditional {traditional.mutants_created:3} mutants {traditional.total_wall_time_ms:6} ms")

print()
print(render_comparison_table(rows), end="")

rho, p = table_correlation(rows, exact=True)
print(f"\nspearman rho {rho}, exact p {p}" if rho is not None else "\ncorrelation undefined")
