"""Open-loop channel capacity does not bound what a closed-loop goal policy conveys.

From s0 a coin sends the agent to x or y; there it can keep its cell or swap.
Every fixed action sequence leaves S_2 uniform, so the capacity from action
sequences to S_2 is zero. A goal policy that looks at S_1 before choosing
lands on x or y at will.
"""
import math

from gclab.control import klyubin_empowerment
from gclab.info import goal_behavior_mi
from gclab.mdp import loads_mdp
from gclab.values import ET, SK, optimal_policy

mdp = loads_mdp("""mdp v1
states: s0 x y
actions s0: go
actions x: keep swap
actions y: keep swap
t s0 go x 0.5
t s0 go y 0.5
t x keep x 1.0
t x swap y 1.0
t y keep y 1.0
t y swap x 1.0
""")
cap = klyubin_empowerment(mdp, "s0", 2, method="blahut-arimoto")
mi = goal_behavior_mi(mdp, optimal_policy(mdp, ET(2)), "s0", None, SK(2))
print(f"capacity of action sequences -> S_2: {cap.value:.6f} nats")
print(f"I(G; S_2) under the goal policy:     {mi:.6f} nats  (= (2/3) log 2 = {2 / 3 * math.log(2):.6f})")
