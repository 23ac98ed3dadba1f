"""Exception types shared across the package."""


class AdaptsimError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(AdaptsimError):
    """A trial specification violates one or more invariants.

    Carries a list of ``(code, message)`` pairs so callers can react to
    individual violations; ``str()`` renders all of them.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = [f"[{code}] {msg}" for code, msg in self.violations]
        super().__init__("invalid trial specification:\n  " + "\n  ".join(lines))

    @property
    def codes(self):
        return [code for code, _ in self.violations]


class ConfigError(AdaptsimError):
    """A design config file failed schema validation."""


class StoreError(AdaptsimError):
    """A stored batch could not be read, or does not match the request."""


class EngineError(AdaptsimError):
    """The trial engine reached a state the specification forbids."""


class CalibrationError(AdaptsimError):
    """Calibration machinery was used outside its supported envelope."""
