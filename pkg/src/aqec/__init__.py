"""Simulation and analysis toolkit for autonomous quantum error correction.

Modules
-------
paulis        bit-packed Pauli algebra, stabilizer codes, syndromes
decoders      lookup / MWPM / majority recovery maps
trajectories  Poisson point-process Monte Carlo estimators
lindblad      exact master-equation integration and recovery construction
bounds        closed-form evaluators for the analytic error bounds
experiments   config-driven experiment runner (CLI: ``aqec``)
"""

__version__ = "0.1.0"
