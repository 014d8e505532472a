"""Under first-visit scoring, the most goal-sensitive policy need not be optimal.

A seeded search over small random MDPs finds an instance where the policy
maximizing C loses performance, while every optimal policy has smaller C.
"""
from gclab.harness import SearchConfig, counterexample_search

res = counterexample_search("ow-control-vs-optimal", SearchConfig(time_budget=20), seed=0)
print(f"found after {res.trials} trials: K={res.K} gamma={res.gamma} start={res.mdp.states[res.start]}")
for k, v in sorted(res.certificate.items()):
    print(f"  {k:24s} {v}")
print()
print(res.to_text())
