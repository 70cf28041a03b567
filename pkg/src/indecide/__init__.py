"""indecide: selective classification with calibrated abstention.

Given scores or raw observations, compute abstention rules that hit a target
accuracy or type I / type II error level with the minimum mass of indecisions,
together with closed-form Gaussian-mixture oracles, exact discrete minimax
machinery, and a seeded simulation harness.
"""

__version__ = "0.1.0"
