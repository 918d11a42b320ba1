"""Chain layer: location sets recorded as, and parsed from, ledger transactions."""

from __future__ import annotations

from collections.abc import Callable

from .. import canonical
from ..crypto import CryptoProvider, SymmetricKey
from ..ledger import FinalizationResult, Ledger, LedgerRejection, Transaction, TxKind
from .mapping import LocationSet


class WrongTransactionKind(ValueError):
    pass


def record_locations(
    ledger: Ledger,
    locations: LocationSet,
    encrypt_with: SymmetricKey | None = None,
    provider: CryptoProvider | None = None,
    submitter: str = "",
    submit: Callable[[Transaction], FinalizationResult] | None = None,
) -> Transaction:
    """Finalize a location transaction carrying ``locations``, optionally encrypted.

    ``submit`` replaces ``ledger.submit`` when the caller routes ledger writes
    through its own client.
    """
    body = canonical.dumps(list(locations.locations))
    if encrypt_with is not None:
        if provider is None:
            raise ValueError("encrypting a location set needs a crypto provider")
        props = {"locations": provider.encrypt(body, encrypt_with).to_bytes(), "encrypted": True}
    else:
        props = {"locations": list(locations.locations), "encrypted": False}
    result = (submit or ledger.submit)(Transaction(TxKind.LOCATION, props, submitter=submitter))
    if not result.finalized:
        raise LedgerRejection(f"location set accepted by {result.accepted_nodes} nodes", result)
    return result.transaction


def parse_locations(
    tx: Transaction,
    key: SymmetricKey | None = None,
    provider: CryptoProvider | None = None,
) -> LocationSet:
    if tx.kind is not TxKind.LOCATION:
        raise WrongTransactionKind(f"expected a location transaction, got {tx.kind.value}")
    if tx["encrypted"]:
        if key is None or provider is None:
            raise ValueError("encrypted location set needs a key and a provider")
        return LocationSet(tuple(canonical.loads(provider.decrypt(tx["locations"], key))))
    return LocationSet(tuple(tx["locations"]))
