"""Three ways to score goal reaching, and the river chain where they disagree.

The chain s1 -> s2 -> s3 -> g can be walked forward (three steps, sure) or
left by a jump straight to g (eps1 from s1, eps2 from s2) that otherwise
falls into the trap T.
"""
import numpy as np

from gclab.mdp import build_river_env
from gclab.values import ET, OW, Pe, solve_optimal, value_matrix

mdp = build_river_env(0.08, 0.2)
s1, s2 = mdp.state_index("s1"), mdp.state_index("s2")
forms = {"Pe(0.35)": Pe(0.35), "ET(2)": ET(2), "OW(2, 0.35)": OW(2, 0.35)}

print(f"{'formulation':12s} {'at s1':6s} {'at s2':6s} {'J*':>8s}")
sols = {}
for name, f in forms.items():
    sol = solve_optimal(mdp, f, "g")
    sols[name] = sol
    a1 = mdp.actions[s1][sol.first_action(s1)]
    a2 = mdp.actions[s2][sol.action(1 if isinstance(f, ET) else 0, s2)]
    print(f"{name:12s} {a1:6s} {a2:6s} {sol.value(s1):8.4f}")

# each optimizer scored under the other two
print("\ncross values from s1 (row: optimizer, column: scored under)")
print(" " * 12 + "".join(f"{n:>13s}" for n in forms))
for a, sol in sols.items():
    row = [value_matrix(mdp, f, sol.branch)[s1, mdp.state_index("g")] for f in forms.values()]
    print(f"{a:12s}" + "".join(f"{v:13.4f}" for v in row))

# the window of discounts where all three disagree: max(sqrt eps1, eps2) < gamma < eps1 / eps2
e1, e2 = 0.08, 0.2
lo, hi = max(np.sqrt(e1), e2), e1 / e2
print(f"\ndisagreement window for gamma: ({lo:.4f}, {hi:.4f})")
for gam in np.linspace(0.1, 0.6, 6):
    acts = [mdp.actions[s1][solve_optimal(mdp, f, "g").first_action(s1)]
            for f in (Pe(gam), OW(2, gam))]
    print(f"  gamma={gam:.2f}  Pe: {acts[0]}  OW: {acts[1]}")
