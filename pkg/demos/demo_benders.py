"""Size the HVDC links for one design with the Benders loop and watch the
bounds close.

Run: python3 demos/demo_benders.py [design]   (default: fnp; the nodal
design converges in a few minutes on a laptop)
"""

import sys

from oml import build_ptdf_set, derive_zoning, solve_bilevel, synthesize_case_study

design = sys.argv[1] if len(sys.argv) > 1 else "fnp"
sc = synthesize_case_study("medium")
zoning = derive_zoning(design, sc.network)
ptdfs = build_ptdf_set(sc.network, zoning, sc.gsk_capacity_at_node())

print(f"design {design}: investing in {len(sc.network.dc_candidates)} DC "
      f"candidates, gap tolerance {sc.benders.tolerance:g}\n")
print(f"{'it':>3} {'subproblem':>14} {'LB':>14} {'UB':>14} {'gap':>12}")
sol = solve_bilevel(sc, zoning, ptdfs,
                    log=lambda r: print(f"{r.iteration:3d} "
                                        f"{r.subproblem_value:14.1f} "
                                        f"{r.lower_bound:14.1f} "
                                        f"{r.upper_bound:14.1f} "
                                        f"{r.gap:12.1f}"))
print(f"\nconverged={sol.converged} after {len(sol.iterations)} iterations")
print("built capacities (MW):")
for h, f in sorted(sol.f_dc.items()):
    print(f"  {h:8} {f:8.1f}")
print(f"welfare {sol.objective:.1f}")
