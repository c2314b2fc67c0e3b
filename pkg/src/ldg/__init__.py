"""Landau-de Gennes Q-tensor solver and analyzer.

Modules: qtensor (pointwise algebra), domain (grids and boundary data),
energy (discrete functionals), minimize (descent drivers), hedgehog
(radial profile and second variations), topology (biaxiality surfaces,
liftings, degree), io, config and cli.
"""
__version__ = "0.1.0"
