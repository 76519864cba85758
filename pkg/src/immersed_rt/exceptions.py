class ImmersedRTError(Exception):
    """Base class for errors raised by this package."""


class AssumptionViolation(ImmersedRTError):
    """The interface cuts the mesh in a way the method does not admit.

    Raised when an edge closure is cut more than once, an element boundary more
    than twice, a vertex lies on the interface, an interface element has an
    obtuse angle, or the interface touches the domain boundary. Refining the
    mesh or perturbing the interface usually cures it.
    """


class TopologyError(AssumptionViolation):
    """Interface segments do not chain into closed loops."""


class NonPositiveCoefficient(ImmersedRTError):
    pass


class SingularSystem(ImmersedRTError):
    pass


class NonConvergence(ImmersedRTError):
    pass


class ConfigError(ImmersedRTError):
    pass
