"""Exceptions raised while evaluating the stability oracle."""


class OracleError(RuntimeError):
    """Base class; ``z`` carries the operating target that failed, when known."""

    def __init__(self, message, z=None, residual=None):
        super().__init__(message)
        self.z = dict(z) if z is not None else None
        self.residual = residual

    def __str__(self):
        msg = super().__str__()
        if self.residual is not None:
            msg += f" (residual {self.residual:.3e})"
        if self.z:
            msg += " at " + ", ".join(f"{k}={v:.6g}" for k, v in self.z.items())
        return msg


class PowerFlowDiverged(OracleError):
    pass


class SingularJacobian(OracleError):
    pass


class InfeasibleTarget(OracleError):
    pass


class OverdeterminedTarget(OracleError):
    pass


class CalibrationError(OracleError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = dict(residuals or {})

    def __str__(self):
        parts = ", ".join(f"{k}: {v:+.3e}" for k, v in self.residuals.items())
        return f"{super().__str__()} [{parts}]" if parts else super().__str__()


class AlgebraicSingularity(OracleError):
    pass


class EigensolveFailed(OracleError):
    pass
