"""
Exception hierarchy for the oracle protocol library.

Verification results (VRF proofs, priority claims, attestations) are plain
booleans; exceptions are reserved for caller bugs and ledger rejections.
"""


class OracleError(Exception):
    """Base class for all oracle protocol errors."""


class ContractViolation(OracleError, ValueError):
    """A precondition of an operation was violated by the caller."""


class MalformedKeyError(ContractViolation):
    """Key material does not have the expected shape."""


class ContractRejected(OracleError):
    """
    A simulated on-chain contract refused a call.

    The ledger state is unchanged when this is raised. ``code`` is a stable
    machine-readable reason used by tests and logs.
    """

    def __init__(self, code: str, message: str = ''):
        self.code = code
        super().__init__(message or code)


class ConsensusAborted(OracleError):
    """The temporary consensus network could not reach a quorum."""


class ScheduleOverflow(OracleError):
    """The simulator schedule ran past its configured horizon."""
