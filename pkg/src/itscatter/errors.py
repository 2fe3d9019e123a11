"""Exception hierarchy.

Every failure raised by the library carries a short machine-readable
``code`` so the CLI can record it in sweep summaries without parsing
messages.
"""


class ScatteringError(Exception):
    code = "error"

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def __str__(self):
        msg = super().__str__()
        if self.context:
            extra = ", ".join(f"{k}={v!r}" for k, v in self.context.items())
            return f"[{self.code}] {msg} ({extra})"
        return f"[{self.code}] {msg}"


class DomainError(ScatteringError, ValueError):
    code = "domain"


class ClassicallyForbidden(ScatteringError):
    code = "classically-forbidden"


class NoAsymptote(ScatteringError):
    code = "no-asymptote"


class CausticError(ScatteringError):
    code = "caustic"


class StiffError(ScatteringError):
    code = "stiff"


class TachyonicFrequency(ScatteringError):
    code = "tachyonic-frequency"


class BadAsymptote(ScatteringError):
    code = "bad-asymptote"


class IntegrationDrift(ScatteringError):
    code = "integration-drift"


class NonIntegrableDrive(ScatteringError):
    code = "non-integrable-drive"


class InconsistentConstants(ScatteringError):
    code = "inconsistent-constants"


class FocalPoint(ScatteringError):
    code = "focal-point"


class GridTooSmall(ScatteringError):
    code = "grid-too-small"


class NonunitaryStep(ScatteringError):
    code = "nonunitary-step"


class ConfigError(ScatteringError):
    code = "config"

    def __init__(self, message, line=None, **context):
        super().__init__(message, **context)
        self.line = line

    def __str__(self):
        base = super().__str__()
        return f"line {self.line}: {base}" if self.line is not None else base
