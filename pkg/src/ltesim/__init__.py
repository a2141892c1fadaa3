"""Downlink LTE/LTE-A system-level simulation in numpy.

Modules: ``geometry`` (layouts and user drops), ``propagation`` (pathloss,
shadowing, fading), ``linkmodel`` (link-to-system abstraction), ``mimo``
(SU/MU-MIMO transceivers and limited feedback), ``scheduling``, ``metrics``
and ``simrunner`` (experiments and CLI).
"""

__version__ = "0.1.0"
