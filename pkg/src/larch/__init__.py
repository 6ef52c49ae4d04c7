"""
Larch, the Lasso AutoRegression Consistency Harness.

This is a library for fitting sparse autoregressive models by weighted-l1
penalized least squares, checking the consistency theory behind them for
concrete instances, and reproducing Monte-Carlo lag-selection studies.
"""

__version__ = "0.1.0"
"The current version of the Larch library."

__all__ = [
    "boundaries",
    "cli",
    "design",
    "drivers",
    "experiments",
    "lasso",
    "persistent",
    "process",
    "selection",
    "theory",
]
