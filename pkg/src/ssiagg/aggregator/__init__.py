"""The aggregator client: Controller, Connector, Arbitrator, Processor and Mediator roles."""

from .arbitrator import (
    APPROVAL_FAIL,
    AUTH_FAIL,
    NONCE_MISMATCH,
    Evidence,
    Mode,
    Verdict,
    approved_offchain,
    approved_onchain,
    arbitrate,
    authenticate,
)
from .protocol import (
    AggregationRequest,
    AllSourcesRejected,
    EndorsementRecord,
    EndorsementRejected,
    InvalidRequest,
    ProtocolError,
    ProtocolRun,
    RunResult,
    SourceState,
    Status,
    UnresolvableDid,
    VerificationFailure,
    endorse_data,
    run_offchain,
    run_onchain,
    run_protocol,
)
from .transform import FieldMapping, TransformSpec, UnknownFieldInPsi, process_transform

__all__ = [
    "APPROVAL_FAIL",
    "AUTH_FAIL",
    "NONCE_MISMATCH",
    "AggregationRequest",
    "AllSourcesRejected",
    "EndorsementRecord",
    "EndorsementRejected",
    "Evidence",
    "FieldMapping",
    "InvalidRequest",
    "Mode",
    "ProtocolError",
    "ProtocolRun",
    "RunResult",
    "SourceState",
    "Status",
    "TransformSpec",
    "UnknownFieldInPsi",
    "UnresolvableDid",
    "Verdict",
    "VerificationFailure",
    "approved_offchain",
    "approved_onchain",
    "arbitrate",
    "authenticate",
    "endorse_data",
    "process_transform",
    "run_offchain",
    "run_onchain",
    "run_protocol",
]
