"""Tabular skill pretraining, then reuse of the skills for goal reaching.

Skills are chosen to maximize I(Z; S_K) under a uniform skill prior. A goal
is then served by the skill that reaches it best from the start state.
"""
from gclab.info import goal_behavior_mi
from gclab.mdp import deterministic_grid, random_mdp
from gclab.misl import MislConfig, consistent_mapping, misl_gap, optimize_misl_tabular
from gclab.policy import compose_downstream
from gclab.values import ET, SK, test_time_performance

for name, mdp in (("grid(2)", deterministic_grid(2)), ("random(4)", random_mdp(4, 2, 2, 3))):
    K, s0 = 2, 0
    for n_z in (2, 4):
        skills, obj = optimize_misl_tabular(mdp, SK(K), n_z, s0)
        _, climbed = optimize_misl_tabular(mdp, SK(K), n_z, s0, MislConfig("ascent", seed=1, iterations=200))
        fmap = consistent_mapping(mdp, ET(K), skills)
        down = compose_downstream(skills, fmap, s0)
        gap, bound = misl_gap(mdp, skills, fmap, s0, spec=SK(K))
        print(f"{name:9s} skills={n_z}  I(Z;S') exhaustive={obj:.4f} ascent={climbed:.4f}"
              f"  downstream I(G;S')={goal_behavior_mi(mdp, down, s0, None, SK(K)):.4f}"
              f"  J={test_time_performance(mdp, ET(K), down, s0):.4f}"
              f"  gap={gap:.4f} <= {bound.bound:.4f}")
