"""Packet-level simulator of TCP over a blockage-prone mmWave hop.

The simulation core exists twice: as plain Python in :mod:`mmpep.core` and,
when built, as compiled extension modules in ``mmpep._ccore``. The names
re-exported here come from whichever backend :mod:`mmpep._backend` chose.
"""

from ._backend import BACKEND, core

Simulation = core.simulation.Simulation
SimParams = core.simulation.SimParams
InvariantAudit = core.simulation.InvariantAudit
ChannelSchedule = core.channel.ChannelSchedule
ProxyMode = core.proxy.ProxyMode
compute_gamma = core.sizing.compute_gamma
batch_size = core.sizing.batch_size
BatchSizingParams = core.sizing.BatchSizingParams

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "core", "Simulation", "SimParams", "InvariantAudit", "ChannelSchedule",
    "ProxyMode", "compute_gamma", "batch_size", "BatchSizingParams", "__version__",
]
