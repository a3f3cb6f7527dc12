"""Profit-driven planning and daily scheduling for high-mix parallel-machine plants.

The planning layer (:mod:`mixplan.planner`) solves rolling-window MILPs for
daily production envelopes; the scheduling layer (:mod:`mixplan.scheduler`)
turns each envelope into machine-level allocations. :mod:`mixplan.metrics`
scores the result and :mod:`mixplan.cli` wires everything together.
"""

__version__ = "0.1.0"
