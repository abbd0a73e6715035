"""Exception hierarchy shared by every lorenz_lab module."""


class LorenzLabError(Exception):
    """Base class; carries a short machine-readable ``kind`` for the CLI."""

    kind = "error"

    def to_dict(self):
        return {"error": self.kind, "message": str(self)}


class DomainError(LorenzLabError, ValueError):
    kind = "domain_error"


class ConfigurationError(LorenzLabError, ValueError):
    kind = "configuration_error"


class DivergenceError(LorenzLabError, ArithmeticError):
    kind = "divergence"

    def __init__(self, t, norm):
        super().__init__(f"state norm {norm:.3g} exceeded the divergence guard at t={t:.17g}")
        self.t = t
        self.norm = norm

    def to_dict(self):
        d = super().to_dict()
        d["blowup_time"] = self.t
        return d


class InsufficientDataError(LorenzLabError, ValueError):
    kind = "insufficient_data"


class DegenerateError(LorenzLabError, ArithmeticError):
    kind = "degenerate"


class ConsistencyError(LorenzLabError, ValueError):
    kind = "consistency_error"


class RootTrackingError(LorenzLabError, ArithmeticError):
    kind = "root_tracking"


class ResonanceError(LorenzLabError, ArithmeticError):
    kind = "resonance"


class ContradictionError(LorenzLabError, ArithmeticError):
    kind = "contradiction"


class BracketError(LorenzLabError, ValueError):
    kind = "bracket_error"
