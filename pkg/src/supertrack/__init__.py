"""Supervisory tracking platform.

Simulates a crossover-model operator tracking a switching sum-of-sinusoids
target through an integrator plant, reconstructs the tracked reference from
the supervisor's viewpoint with and without command access, scores selection
accuracy and delay, applies repeated-measures statistics, and serves live
browser trials over a WebSocket protocol.
"""

__version__ = "0.1.0"
