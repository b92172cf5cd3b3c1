"""Datacenter load-balancing simulator and stochastic-process toolkit.

Subpackages cover the per-connection entropy-caching state machine
(``arcane``), the batched and recycled balls-into-bins chains with their
analytic tail-bound checks (``ballsbins``, ``bounds``), EV-to-uplink hashing
and load-imbalance experiments (``hashing``, ``evs``), the packet-level
fat-tree fabric and transport (``fabric``, ``transport``, ``loadbalancers``,
``workloads``, ``engine``), and the experiment CLI (``cli``).
"""

__version__ = "0.1.0"
