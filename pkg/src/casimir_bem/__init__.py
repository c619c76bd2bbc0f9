"""Casimir energies and forces between triangulated bodies.

Surface currents on each body are expanded in RWG functions. The interaction
matrix M(xi) at imaginary frequency gives the energy as an integral of
log det M / M_inf over xi and the force as an integral of Tr(M^-1 dM).

>>> from casimir_bem import PEC, Body, Geometry, generate_primitive
>>> s = generate_primitive("sphere", (1.0,), 1)
>>> g = Geometry((Body("a", s, PEC()), Body("b", s, PEC(), translation=(0, 0, 2.5))))
>>> round(g.min_gap, 6)
0.5
"""
from importlib.metadata import PackageNotFoundError, version

from .assembly import AssemblyOptions, Body, Geometry, assemble_dM, assemble_M, assemble_Minf
from .materials import PEC, VACUUM, Constant, Drude, LorentzSum, Oscillator, Tabulated
from .mesh import SurfaceMesh, build_rwg_basis, generate_primitive, load_mesh
from .quadrature import XiQuadrature, casimir_energy, casimir_force, energy_integrand
from .reference import PfaDescriptor, lifshitz_energy, lifshitz_pressure, pfa_force
from .spectral import log_det, log_det_ratio
from .sweeps import LandscapePlan, SweepPlan, run_rotation_landscape, run_separation_sweep

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # source checkout without install
    __version__ = "0.0.0"

__all__ = [
    "AssemblyOptions", "Body", "Geometry", "assemble_M", "assemble_Minf", "assemble_dM",
    "PEC", "VACUUM", "Constant", "Drude", "LorentzSum", "Oscillator", "Tabulated",
    "SurfaceMesh", "build_rwg_basis", "generate_primitive", "load_mesh",
    "XiQuadrature", "casimir_energy", "casimir_force", "energy_integrand",
    "PfaDescriptor", "lifshitz_energy", "lifshitz_pressure", "pfa_force",
    "log_det", "log_det_ratio",
    "LandscapePlan", "SweepPlan", "run_rotation_landscape", "run_separation_sweep",
    "__version__",
]
