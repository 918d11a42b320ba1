"""Data persistence: specifications and adapters, decentralized and self-hosted storage."""

from .adapter import (
    DataSpecification,
    Envelope,
    InvalidSpecification,
    SchemaViolation,
    apply_adapter,
    make_envelope,
    validate,
)
from .backends import (
    DirectoryNode,
    LocationUnreachable,
    ObjectNotFound,
    SelfHostedStore,
    StagingSpace,
    StagingUnreachable,
    StorageError,
    StorageInfo,
    StorageNode,
    content_address,
)
from .chain import WrongTransactionKind, parse_locations, record_locations
from .decentralized import CorruptPartition, DecentralizedStore
from .mapping import (
    POLICIES,
    InsufficientLocations,
    LocationEntry,
    LocationSet,
    LocationTable,
    RoundRobinPolicy,
    UploadFailure,
    WeightedScorePolicy,
    assign_and_upload,
    fetch,
)
from .partition import (
    InvalidScatterDegree,
    MissingPartition,
    PartitionSet,
    assemble,
    chunk_sizes,
    partition,
    partition_count,
)

__all__ = [
    "CorruptPartition",
    "DataSpecification",
    "DecentralizedStore",
    "DirectoryNode",
    "Envelope",
    "InsufficientLocations",
    "InvalidScatterDegree",
    "InvalidSpecification",
    "LocationEntry",
    "LocationSet",
    "LocationTable",
    "LocationUnreachable",
    "MissingPartition",
    "ObjectNotFound",
    "POLICIES",
    "PartitionSet",
    "RoundRobinPolicy",
    "SchemaViolation",
    "SelfHostedStore",
    "StagingSpace",
    "StagingUnreachable",
    "StorageError",
    "StorageInfo",
    "StorageNode",
    "UploadFailure",
    "WeightedScorePolicy",
    "WrongTransactionKind",
    "apply_adapter",
    "assemble",
    "assign_and_upload",
    "chunk_sizes",
    "content_address",
    "fetch",
    "make_envelope",
    "parse_locations",
    "partition",
    "partition_count",
    "record_locations",
    "validate",
]
