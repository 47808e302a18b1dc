"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, refused hypotheses with 3, numerical failures with 4.
"""


class ModspaceError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(ModspaceError):
    """Invalid configuration. Carries field-level diagnostics.

    ``diagnostics`` is a list of (field_path, message) pairs, e.g.
    ``[("grid.N", "must be a power of two >= 16")]``.
    """

    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [("", diagnostics)]
        self.diagnostics = list(diagnostics)
        lines = "; ".join(f"{path}: {msg}" if path else msg
                          for path, msg in self.diagnostics)
        super().__init__(lines)


class ParameterError(ModspaceError, ValueError):
    """An argument is outside the admissible range of an operation."""


class ContractViolation(ModspaceError, ValueError):
    """Two objects that must share a grid/side/shape do not."""


class DataError(ModspaceError, ValueError):
    """Non-finite or otherwise corrupt numerical data."""


class HypothesisError(ModspaceError):
    """A mathematical hypothesis required by an experiment fails.

    Refusals are loud: the caller gets a diagnostic explaining which
    hypothesis failed and how it was detected.
    """


class NumericalError(ModspaceError):
    """Numerical breakdown: conditioning, non-convergence, degeneracy."""


class ConditioningError(NumericalError):
    """Eigenvalue below the representable floor in a matrix power."""


class DegeneracyError(NumericalError):
    """A quantity that must be positive vanished (empty cell, zero norm)."""


class ResolutionError(ModspaceError, ValueError):
    """Grid too coarse for the requested cell structure.

    The message states the offending scale and suggests a larger N or a
    smaller frequency index.
    """


class SynthesisError(ModspaceError):
    """Corpus generation failed its post-synthesis validation."""


class TruncationError(ModspaceError, ValueError):
    """A field's spectrum is not safely inside the resolved band."""
