"""
Error types for xtproc
Every error carries a stable machine-readable code used by the CLI
"""


class XtprocError(Exception):
    """Base error with a stable code"""

    code = 'XTPROC_ERROR'

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def to_dict(self):
        return {'error': self.code, 'message': self.message}


class DomainError(XtprocError):
    """Argument outside the mathematical domain of an operation"""
    code = 'DOMAIN_ERROR'


class DimensionMismatch(XtprocError):
    code = 'DIMENSION_MISMATCH'


class DegenerateCorrelation(XtprocError):
    """Off-diagonal correlation of magnitude >= 1 between distinct sites"""
    code = 'DEGENERATE_CORRELATION'


class NotPositiveDefinite(XtprocError):
    code = 'NOT_POSITIVE_DEFINITE'


class InfiniteMoment(XtprocError):
    """m_alpha = E[(X+)^alpha] does not exist for the requested spectral law"""
    code = 'INFINITE_MOMENT'


class ConfigError(XtprocError):
    """Invalid or incomplete run configuration (usage error)"""
    code = 'CONFIG_ERROR'


# Flag codes: reported on results and logged, never raised
TRUNCATION_BUDGET_EXCEEDED = 'TRUNCATION_BUDGET_EXCEEDED'
QMC_BUDGET_EXCEEDED = 'QMC_BUDGET_EXCEEDED'
