"""Dispatch-policy laboratory: look-ahead economic dispatch and ramp products.

Linear-programming formulations of multi-interval dispatch policies, a
rolling-window simulator with an operational security loss metric, and a
feasible-region equivalence tester for the enhanced ramp-product design.
"""

__version__ = "0.1.0"
