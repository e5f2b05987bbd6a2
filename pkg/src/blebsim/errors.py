"""Exception hierarchy shared by all blebsim modules."""


class BlebsimError(Exception):
    """Base class for all errors raised by blebsim."""


# mesh
class MeshError(BlebsimError, ValueError):
    pass


class DegenerateTriangle(MeshError):
    pass


class NonManifoldEdge(MeshError):
    pass


class InconsistentOrientation(MeshError):
    pass


class ProjectorFailure(MeshError):
    pass


class ZeroNormal(MeshError):
    pass


class DomainError(BlebsimError, ValueError):
    pass


# assembly / forces
class NegativeCoefficient(BlebsimError, ValueError):
    pass


class BadMode(BlebsimError, ValueError):
    pass


class MissingEpsilon(BlebsimError, ValueError):
    pass


# solver
class NoConvergence(BlebsimError, RuntimeError):
    """Iterative solve did not reach its tolerance.

    Attributes
    ----------
    residual : float
        Final relative residual.
    iterations : int
        Iterations performed.
    stage : str
        Which solve failed (``"outer"``, ``"inner"``, ``"cg"``...).
    """

    def __init__(self, message, residual=float("nan"), iterations=0, stage="cg"):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.stage = stage


class ZeroDiagonal(BlebsimError, ValueError):
    pass


class SingularSystem(BlebsimError, RuntimeError):
    pass


class SolverFailure(BlebsimError, RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


# io / config
class ParseError(BlebsimError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedFace(ParseError):
    pass


class ConfigError(BlebsimError, ValueError):
    pass


class UnknownKey(ConfigError):
    pass


class BadValue(ConfigError):
    pass


class InvariantViolation(ConfigError):
    pass


class IoError(BlebsimError, OSError):
    """An output file could not be written."""
