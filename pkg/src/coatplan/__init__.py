"""Learned heuristics for grid planning domains.

Generates Sokoban / maze-with-teleports / floor-tile instances, solves them
optimally with a built-in oracle, trains a convolution-attention network to
predict cost-to-go (and optionally a policy) by imitation and curriculum
learning, and benchmarks the learned heuristic inside vanilla A*.
"""

__version__ = "0.1.0"
