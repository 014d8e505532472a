"""Goal-sensitivity C against goal-behavior mutual information.

For a random MDP we build consistent goal policies by sending each goal to
the random skill that reaches it best, then compare the MI of the goal with
the outcome against the brackets implied by C.
"""
import numpy as np

from gclab.control import goal_sensitivity, objective_controllability
from gclab.info import FirstVisitVector, goal_behavior_mi, phi_down, phi_up
from gclab.mdp import random_mdp
from gclab.misl import consistent_mapping
from gclab.policy import compose_downstream, uniform_random_policy
from gclab.values import ET, OW, Pe, SK, SGammaPlus, test_time_performance

rng = np.random.default_rng(7)
print(f"{'seed':>4s} {'form':12s} {'J':>7s} {'C':>7s} {'C*':>7s} {'low':>7s} {'MI':>7s} {'high':>7s}")
for seed in range(5):
    mdp = random_mdp(4, 2, 2, seed)
    N, s0 = mdp.n_states, 0
    for f in (Pe(0.5), ET(2), OW(2, 0.9)):
        H = 0 if isinstance(f, Pe) else f.K
        skills = uniform_random_policy(mdp, int(rng.integers(1 << 30)), 3, horizon=H)
        pol = compose_downstream(skills, consistent_mapping(mdp, f, skills), s0)
        J = test_time_performance(mdp, f, pol, s0)
        C = goal_sensitivity(mdp, f, pol, s0).c_value
        cstar = objective_controllability(mdp, f, s0).value
        if isinstance(f, OW):
            mi = goal_behavior_mi(mdp, pol, s0, None, FirstVisitVector(f.K, f.gamma))
            low, high = 2 * C * C, float("nan")
        else:
            spec = SGammaPlus(f.gamma) if isinstance(f, Pe) else SK(f.K)
            mi = goal_behavior_mi(mdp, pol, s0, None, spec)
            x = min(1 / N + C, 1.0)
            low, high = phi_down(N, x), phi_up(N, x)
        name = type(f).__name__ + "(" + ",".join(f"{v:g}" for v in vars(f).values()) + ")"
        print(f"{seed:4d} {name:12s} {J:7.4f} {C:7.4f} {cstar:7.4f} {low:7.4f} {mi:7.4f} {high:7.4f}")
