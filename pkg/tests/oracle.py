"""Brute-force reference values, written without the package's solvers.

Everything here works forward from the start distribution over explicit
deterministic action tables, so it shares no code path with the backward
inductions and linear solves under test.
"""

import itertools

import numpy as np


def action_tables(n_actions, horizon):
    """Every deterministic table ``choice[t][s]`` for t < horizon."""
    per_slot = [range(k) for k in n_actions] * horizon
    N = len(n_actions)
    for flat in itertools.product(*per_slot):
        yield np.asarray(flat, int).reshape(horizon, N)


def step(P, choice_t):
    """State-to-state matrix under one deterministic decision row."""
    N = P.shape[0]
    return P[np.arange(N), choice_t, :]


def et_values(P, choice, K):
    """P(S_K = g) from every start: (N, N)."""
    D = np.eye(P.shape[0])
    for t in range(K):
        D = D @ step(P, choice[min(t, len(choice) - 1)])
    return D


def ow_values(P, choice, K, gamma):
    """E[gamma^(T_g - 1); T_g <= K] with T_g the first visit at t >= 1."""
    N = P.shape[0]
    out = np.zeros((N, N))
    for g in range(N):
        alive = np.eye(N)  # mass that has not yet visited g, by start
        for t in range(1, K + 1):
            nxt = alive @ step(P, choice[min(t - 1, len(choice) - 1)])
            out[:, g] += gamma ** (t - 1) * nxt[:, g]
            nxt[:, g] = 0.0
            alive = nxt
    return out


def pe_values(P, row, gamma, T=400):
    """(1 - gamma) sum_{t>=1} gamma^(t-1) P(S_t = g) for a stationary row, by summation."""
    M = step(P, row)
    D = np.eye(P.shape[0])
    acc = np.zeros_like(D)
    w = 1.0 - gamma
    for _ in range(T):
        D = D @ M
        acc += w * D
        w *= gamma
    return acc


def best_over_tables(P, n_actions, formulation, K=None, gamma=None):
    """Pointwise max over deterministic tables: (start, goal)."""
    best = None
    if formulation == "pe":
        tables = action_tables(n_actions, 1)
    else:
        tables = action_tables(n_actions, K)
    for ch in tables:
        if formulation == "pe":
            V = pe_values(P, ch[0], gamma)
        elif formulation == "et":
            V = et_values(P, ch, K)
        else:
            V = ow_values(P, ch, K, gamma)
        best = V if best is None else np.maximum(best, V)
    return best


def mi_from_joint(joint):
    """I(X; Y) in nats for a 2-d array of probabilities."""
    joint = np.asarray(joint, float)
    px = joint.sum(1, keepdims=True)
    py = joint.sum(0, keepdims=True)
    nz = joint > 0
    return float((joint[nz] * np.log(joint[nz] / (px @ py)[nz])).sum())


def terminal_joint(P, branches, s0, K, weights):
    """Joint of (goal, S_K) when goal g runs the stationary or K-step table branches[g]."""
    N = P.shape[0]
    J = np.zeros((N, N))
    for g in range(N):
        D = np.zeros(N)
        D[s0] = 1.0
        for t in range(K):
            D = D @ step(P, branches[g][min(t, len(branches[g]) - 1)])
        J[g] = weights[g] * D
    return J
