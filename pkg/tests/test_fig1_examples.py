"""Desk-scale (k=100, T=10000, 10 runs) checks at the extremes of the edge probability."""
import math

from graph_bandits.sim import RunConfig, run_monte_carlo


def final_payoff(p, policy):
    config = RunConfig(T=10000, k=100, graph=f"er:{p}", policy=policy, adversary="fig1:0", seed=0, runs=10)
    agg = run_monte_carlo(config)
    return agg.final_payoff, agg.final_payoff_se


def test_empty_graph_elp_matches_exp3():
    (a, sa), (b, sb) = final_payoff(0.0, "elp"), final_payoff(0.0, "exp3")
    assert abs(a - b) <= 2 * math.hypot(sa, sb)


def test_dense_graph_elp_advantage_small_or_reversed():
    elp, ban = final_payoff(1.0, "elp")[0], final_payoff(1.0, "expban")[0]
    elp_mid, ban_mid = final_payoff(0.25, "elp")[0], final_payoff(0.25, "expban")[0]
    assert elp - ban < elp_mid - ban_mid
