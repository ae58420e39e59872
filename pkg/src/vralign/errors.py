"""Exception types shared across the alignment engine.

Error names follow the module contracts: callers catch the specific class,
or ``WorkbenchError`` to handle anything raised by this package.
"""


class WorkbenchError(Exception):
    """Base class for all errors raised by vralign."""


# --- manifold averaging ---

class EmptyInput(WorkbenchError):
    """An averaging operation received an empty collection."""


class DispersedInput(WorkbenchError):
    """Rotations are too spread out for a unique mean (radius >= pi/2)."""


class NonConvergent(WorkbenchError):
    """Iterative mean estimation exceeded its step budget."""


# --- camera / mirror geometry ---

class NonPositiveDistance(WorkbenchError):
    """Mirror distance D must be strictly positive."""


class AtOpticalCenter(WorkbenchError):
    """Point projects with (near-)zero homogeneous scale."""


class NoHit(WorkbenchError):
    """A ray missed every triangle of the scene mesh."""


# --- triangulation / metrics ---

class DegenerateRays(WorkbenchError):
    """Ray bundle is (near-)parallel; the normal matrix is ill-conditioned."""


class LengthMismatch(WorkbenchError):
    """Paired sequences have different lengths."""


class IndexOutOfRange(WorkbenchError):
    """A landmark or joint index is outside the valid range."""


# --- robot model ---

class ZeroLink(WorkbenchError):
    """Joint has a null link vector and no downstream link to classify by."""


class SchemaError(WorkbenchError):
    """A structured document failed schema validation."""


# --- alignment session ---

class SessionFinalized(WorkbenchError):
    """Mutation attempted after the registration was finalized."""


class NotFinalized(WorkbenchError):
    """Operation requires a finalized registration."""


class NoTrials(WorkbenchError):
    """finalize called on a session with zero recorded trials."""


# --- simulation harness ---

class NoViews(WorkbenchError):
    """Alignment sampling needs at least one observer view."""


class IoFailure(WorkbenchError):
    """Report or document could not be written."""


# --- service ---

class BindFailure(WorkbenchError):
    """The service could not bind its address."""
