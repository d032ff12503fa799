"""Exception types shared across the toolkit."""


class DynTunnelError(Exception):
    """Base class for all toolkit errors."""


class NonFinite(DynTunnelError):
    """A wave function or phase-space point contains NaN/Inf."""


class GridTooNarrow(DynTunnelError):
    """Requested state does not fit on the grid (tail too large at the edges)."""


class GridMismatch(DynTunnelError):
    """Operands live on different spatial grids."""


class PhaseMismatch(DynTunnelError):
    """Operands are sampled at incompatible drive phases."""


class BoundaryLeak(DynTunnelError):
    """Propagated density reached the edge of the box."""


class NoConvergence(DynTunnelError):
    """Iterative search failed from every seed."""


class NotElliptic(DynTunnelError):
    """Located period-one orbit is not elliptic (|trace| >= 2)."""


class BasisTooSmall(DynTunnelError):
    """Truncated basis loses too much of a propagated state."""


class DegenerateUnresolved(DynTunnelError):
    """Coinciding eigenphases could not be separated by parity."""


class DoubletNotFound(DynTunnelError):
    """No even/odd Floquet pair with sufficient island support."""


class ContinuationStuck(DynTunnelError):
    """Nonlinear-state continuation could not converge at some U."""

    def __init__(self, message, last_good_u=None):
        super().__init__(message)
        self.last_good_u = last_good_u


class ToleranceFailure(DynTunnelError):
    """ODE step control could not meet the requested local error."""


class SeriesTooShort(DynTunnelError):
    """Time series too short for period extraction."""


class DegenerateDoublet(DynTunnelError):
    """Doublet splitting below resolution; critical nonlinearity undefined."""


class ConfigError(DynTunnelError):
    """Invalid configuration value; names the offending key."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
