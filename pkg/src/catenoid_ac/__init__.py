"""Allen-Cahn transition layers around critical catenoids in ellipsoids of revolution.

Modules: profile (1-D layer and corrections), catenoid (chart geometry and
Fermi coordinates), domain (containers and critical placement), jacobi
(Jacobi-Robin problems), approx (layered approximation and residuals), solver
(axisymmetric Newton solver) and cli.
"""

__version__ = "0.1.0"
