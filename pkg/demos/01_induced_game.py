"""
The game two teammates play
===========================

A student either hands in a full-effort sheet (Cooperate) or a blank one
(Defect). Both teammates receive the same score, and each student's payoff
is that score minus their own grade. This script builds the resulting 2x2
game and checks its equilibrium structure.
"""

# %%
from pdpl import induced_game, is_prisoners_dilemma, pareto_efficient_profiles, pure_nash_equilibria

game = induced_game(effort_low=0.0, effort_high=2.0)
print(game.format_table())

# %%
# Defecting strictly dominates, so (Defect, Defect) is the only stable
# profile even though both students would prefer mutual cooperation.
print("prisoner's dilemma:", is_prisoners_dilemma(game))
print("pure Nash equilibria:", sorted(str(p) for p in pure_nash_equilibria(game)))
print("Pareto efficient:", sorted(str(p) for p in pareto_efficient_profiles(game)))

# %%
# The structure does not depend on the particular grade levels: any
# low < high effort pair induces a prisoner's dilemma.
for lo, hi in [(0.0, 1.0), (0.5, 1.5), (1.9, 2.0)]:
    print(lo, hi, is_prisoners_dilemma(induced_game(lo, hi)))
