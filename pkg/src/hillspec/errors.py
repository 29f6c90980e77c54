"""Exception types shared across the package."""


class HillspecError(Exception):
    """Base class for all package errors."""


class DomainError(HillspecError):
    """Input outside the supported parameter domain (e.g. V <= 1/2)."""


class IntegrationError(HillspecError):
    """Adaptive ODE integration failed; usually extreme |lambda| or |c|."""


class ConvergenceError(HillspecError):
    """An iterative eigenvalue scheme failed to converge."""


class CountMismatch(HillspecError):
    """Eigenvalue counts in a disk/rectangle disagree with the expected ones.

    Signals insufficient truncation or parameters outside the counting regime.
    """


class NoConvergence(HillspecError):
    """Newton refinement ran out of iterations (seed outside the basin)."""


class NearSingular(HillspecError):
    """|F'(lambda)| below threshold: the point sits at/near a double eigenvalue."""


class BandJump(HillspecError):
    """Band continuation step repeatedly rejected at some t."""


class NotFound(HillspecError):
    """Requested double point / critical point was not located."""


class Degenerate(HillspecError):
    """|F''| too small: multiplicity higher than 2 suspected."""


class RegimeError(HillspecError):
    """Operation used outside its asymptotic regime (eigenvalues left the axis)."""


class Unclassified(HillspecError):
    """A 2-periodic eigenvalue matched neither the Dirichlet nor Neumann spectrum."""


class NotBracketed(HillspecError):
    """Scan range exhausted without bracketing the requested transition."""


class NonIntegrable(HillspecError):
    """Epsilon-refinement of a band integral did not converge (ESS present)."""
