"""Exception hierarchy.

Each family maps to one CLI exit category: configuration problems (2),
numerical failures (3) and resource caps (4).
"""


class CasimirError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CasimirError, ValueError):
    """Invalid input data: files, meshes, materials, geometry, config."""


class MeshParseError(ConfigError):
    pass


class MeshTopologyError(ConfigError):
    pass


class DegenerateTriangleError(ConfigError):
    pass


class MaterialError(ConfigError):
    pass


class GeometryError(ConfigError):
    pass


class NumericalError(CasimirError, ArithmeticError):
    """Singular factorizations, sign mismatches, NaNs in integrands."""


class SingularMatrixError(NumericalError):
    pass


class SignMismatchError(NumericalError):
    pass


class ResourceLimitError(CasimirError):
    """A configured size cap (triangles, matrix dimension) was exceeded."""
