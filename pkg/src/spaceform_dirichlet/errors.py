"""Exception hierarchy shared by the kernels, the discretization and the solver."""


class DomainError(ValueError):
    """An argument lies outside the admissible range of a model or chart."""


class HemisphereError(DomainError):
    """The domain is not contained in an open hemisphere."""


class UnsupportedModelError(DomainError):
    """The requested quantity is not defined for this space form."""


class ConeViolationError(ValueError):
    """Principal curvatures (or their proxy) left the positive cone.

    Kept separate from :class:`DomainError` so the Newton iteration can treat it
    as a rejected step instead of a hard failure.
    """

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class BoundaryStencilError(ValueError):
    """A finite-difference stencil was requested at a node that has none."""


class StaleInputError(ValueError):
    """A pointwise diagnostic was called on data that violates its premise."""


class PreconditionError(ValueError):
    """A solver entry condition does not hold."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class NonConvergenceError(RuntimeError):
    """Damped Newton could not reduce the residual; carries the last iterate."""

    def __init__(self, message, last_iterate=None, record=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.record = record


class ContinuationError(RuntimeError):
    """The homotopy step size fell below its minimum.

    ``field`` is the last accepted solution and ``report`` the partial report.
    """

    def __init__(self, message, field=None, report=None, t=None):
        super().__init__(message)
        self.field = field
        self.report = report
        self.t = t
