"""
Extreme mutants of a small function
===================================

Discover the functions of the ``factorial`` fixture project and print
every mutant each engine would create, next to the mutated source.
"""

from __future__ import annotations

from pathlib import Path

from exmut.discovery import DiscoveryConfig, apply_structural_filters, scan_project
from exmut.mutator import ParsedSource, apply_mutant, generate_mutants
from exmut.operators import OperatorCatalog

ROOT = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "corpus" / "factorial"

# discovery gives one site per function, with byte spans for signature and body
cfg = DiscoveryConfig(project_root=ROOT)
sites, excluded = apply_structural_filters(scan_project(cfg), cfg)
for site in sites:
    print(f"{site.id:32} {site.category.name:18} line {site.line}")

site = next(s for s in sites if s.id == "mathfuncs.factorial")
parsed = ParsedSource.from_file(ROOT / site.file)
print("\noriginal:")
print(parsed.data[site.signature_span.start:site.body_span.end].decode())

# the whole body goes; one mutant per payload of the return category
for engine, catalog in (("extreme", OperatorCatalog.extreme()), ("traditional", OperatorCatalog.traditional())):
    mutants = generate_mutants(site, catalog, parsed)
    print(f"\n{engine}: {len(mutants)} mutants")
    for m in mutants:
        data = apply_mutant(parsed.data, m)
        end = len(data) - (len(parsed.data) - site.body_span.end)
        print(f"--- {m.op_id} ({m.mutant_id})")
        print(data[site.signature_span.start:end].decode())
