"""
Commit-reveal data collection with t-of-n partial signatures.

Nodes broadcast sealed envelopes: the value is encrypted under a per-submission
temporary key and the envelope carries a partial signature over the event id.
Once t distinct submitters have valid partial signatures, a group signature is
formed and only then do submitters reveal their temporary keys.

Broadcast messages have a canonical byte encoding (fields in declaration order,
big-endian integers, length-prefixed byte strings) so audit logs can be replayed.
"""
import hashlib
import hmac
import logging
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Protocol

from apps.oracle.exceptions import ContractViolation
from apps.oracle.services.crypto_vrf import keypair_from_secret, sign, verify_signature
from apps.oracle.services.filtering import TimedResult
from apps.oracle.services.selection import (
    EventAnchor,
    RingPriority,
    as_bytes,
    assign_data_source,
    verify_ring_priority,
)

logger = logging.getLogger(__name__)

TAG_LENGTH = 32


class KeyDirectory(Protocol):
    """Public lookups the registration contract offers to every participant."""

    def public_key_of(self, node_id: str) -> Optional[bytes]:
        ...

    def source_key_of(self, source_id: str) -> Optional[bytes]:
        ...


def _frame(data: bytes) -> bytes:
    return struct.pack('>I', len(data)) + data


def _digest(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        h.update(part)
    return h.digest()


@dataclass(frozen=True)
class SourceAttestation:
    source_id: str
    value: float
    issued_at: float
    signature: bytes = field(repr=False)

    def signed_bytes(self) -> bytes:
        return attestation_message(self.source_id, self.value, self.issued_at)


def attestation_message(source_id: str, value: float, issued_at: float) -> bytes:
    return _frame(as_bytes(source_id)) + struct.pack('>dd', value, issued_at)


def attest(source_sk: bytes, source_id: str, value: float, issued_at: float) -> SourceAttestation:
    """Signed statement by a data source that it served ``value`` at ``issued_at``."""
    message = attestation_message(source_id, value, issued_at)
    return SourceAttestation(
        source_id=source_id,
        value=value,
        issued_at=issued_at,
        signature=sign(source_sk, message),
    )


def verify_attestation(attestation: SourceAttestation, directory: KeyDirectory) -> bool:
    source_pk = directory.source_key_of(attestation.source_id)
    if source_pk is None:
        return False
    return verify_signature(source_pk, attestation.signed_bytes(), attestation.signature)


@dataclass(frozen=True)
class FeedbackEnvelope:
    event_id: bytes
    submitter: str
    temp_public_key: bytes
    ciphertext: bytes = field(repr=False)
    partial_signature: bytes = field(repr=False)
    source_proof: SourceAttestation
    timestamp: float
    priority_claim: RingPriority

    def to_bytes(self) -> bytes:
        return b''.join([
            _frame(self.event_id),
            _frame(as_bytes(self.submitter)),
            _frame(self.temp_public_key),
            _frame(self.ciphertext),
            _frame(self.partial_signature),
            _frame(self.source_proof.signed_bytes()),
            _frame(self.source_proof.signature),
            struct.pack('>d', self.timestamp),
            _frame(self.priority_claim.proof.to_bytes()),
            struct.pack('>QQI', self.priority_claim.winning_position,
                        self.priority_claim.distance, len(self.priority_claim.positions)),
        ])


@dataclass(frozen=True)
class GroupSignature:
    event_id: bytes
    contributing_nodes: tuple
    signature: bytes = field(repr=False)


def _keystream(sk_temp: bytes, event_id: bytes) -> bytes:
    return _digest(sk_temp, event_id)[:8]


def encrypt_value(sk_temp: bytes, event_id: bytes, value: float) -> bytes:
    plain = struct.pack('>d', value)
    cipher = bytes(a ^ b for a, b in zip(plain, _keystream(sk_temp, event_id)))
    return cipher + _digest(sk_temp, plain)


def decrypt_value(sk_temp: bytes, event_id: bytes, ciphertext: bytes) -> Optional[float]:
    """Return the sealed value, or None when the integrity tag does not match."""
    if len(ciphertext) != 8 + TAG_LENGTH:
        return None
    plain = bytes(a ^ b for a, b in zip(ciphertext[:8], _keystream(sk_temp, event_id)))
    if not hmac.compare_digest(ciphertext[8:], _digest(sk_temp, plain)):
        return None
    return struct.unpack('>d', plain)[0]


def build_envelope(sk_temp: bytes, event_id: bytes, submitter: str, ciphertext: bytes,
                   attestation: SourceAttestation, timestamp: float,
                   priority_claim: RingPriority) -> FeedbackEnvelope:
    """Assemble an envelope around an arbitrary ciphertext; no honesty checks."""
    temp = keypair_from_secret(sk_temp)
    return FeedbackEnvelope(
        event_id=event_id,
        submitter=submitter,
        temp_public_key=temp.public_key,
        ciphertext=ciphertext,
        partial_signature=sign(sk_temp, event_id),
        source_proof=attestation,
        timestamp=timestamp,
        priority_claim=priority_claim,
    )


def seal_feedback(sk_temp: bytes, event_id, value: float, timestamp: float,
                  attestation: SourceAttestation, priority_claim: RingPriority, *,
                  directory: KeyDirectory, anchor: EventAnchor,
                  reputation: Optional[float] = None) -> FeedbackEnvelope:
    event_id = as_bytes(event_id)
    submitter = priority_claim.node_id
    if not verify_attestation(attestation, directory) or attestation.value != value:
        raise ContractViolation(f"attestation for {submitter} does not verify")
    node_pk = directory.public_key_of(submitter)
    if node_pk is None or not verify_ring_priority(node_pk, anchor, priority_claim, reputation):
        raise ContractViolation(f"priority claim for {submitter} does not verify")
    ciphertext = encrypt_value(sk_temp, event_id, value)
    return build_envelope(sk_temp, event_id, submitter, ciphertext, attestation,
                          timestamp, priority_claim)


def verify_partial_signature(envelope: FeedbackEnvelope) -> bool:
    return verify_signature(envelope.temp_public_key, envelope.event_id, envelope.partial_signature)


def _single_event(envelopes: Iterable[FeedbackEnvelope]) -> List[FeedbackEnvelope]:
    envelopes = list(envelopes)
    if len({e.event_id for e in envelopes}) > 1:
        raise ContractViolation("envelopes belong to different events")
    return envelopes


def try_form_group_signature(envelopes: Iterable[FeedbackEnvelope], t: int) -> Optional[GroupSignature]:
    """
    Form the group signature over the first t distinct submitters in priority order.

    Returns None ("not yet") while fewer than t distinct submitters hold valid
    partial signatures. Submitters that sent more than one envelope are ignored.
    """
    envelopes = _single_event(envelopes)
    counts = Counter(e.submitter for e in envelopes)
    duplicated = {s for s, n in counts.items() if n > 1}
    valid = [
        e for e in envelopes
        if e.submitter not in duplicated and verify_partial_signature(e)
    ]
    if len(valid) < t:
        return None
    ranked = sorted(valid, key=lambda e: e.priority_claim.rank_key)[:t]
    signature = _digest(*(e.partial_signature for e in ranked))
    return GroupSignature(
        event_id=ranked[0].event_id,
        contributing_nodes=tuple(e.submitter for e in ranked),
        signature=signature,
    )


def verify_group_signature(group_sig: GroupSignature, envelopes: Iterable[FeedbackEnvelope]) -> bool:
    by_submitter = {e.submitter: e for e in envelopes}
    parts = []
    for node_id in group_sig.contributing_nodes:
        envelope = by_submitter.get(node_id)
        if envelope is None or not verify_partial_signature(envelope):
            return False
        parts.append(envelope.partial_signature)
    return len(set(group_sig.contributing_nodes)) == len(parts) and hmac.compare_digest(
        _digest(*parts), group_sig.signature)


@dataclass
class RevealOutcome:
    results: List[TimedResult]
    flagged: Dict[str, str]


class InformationFlowAudit:
    """
    Records every plaintext read and every group-signature formation.

    A read of an event's plaintext before that event's group signature exists
    is a violation.
    """

    def __init__(self):
        self.formed: Dict[bytes, float] = {}
        self.reads: List[tuple] = []

    def group_signature_formed(self, event_id: bytes, at: float):
        self.formed.setdefault(event_id, at)

    def plaintext_read(self, event_id: bytes, observer: str, at: float):
        self.reads.append((event_id, observer, at))

    def violations(self) -> List[tuple]:
        return [
            read for read in self.reads
            if read[0] not in self.formed or read[2] < self.formed[read[0]]
        ]


def reveal_and_decrypt(envelopes: Iterable[FeedbackEnvelope], group_sig: Optional[GroupSignature],
                       revealed_keys: Mapping[str, bytes], *, directory: KeyDirectory,
                       source_count: int, audit: Optional[InformationFlowAudit] = None,
                       observer: str = 'aggregator', at: float = 0.0) -> RevealOutcome:
    """
    Open every envelope whose temporary key was revealed.

    Envelopes that fail a check are excluded and their submitter is flagged
    with a reason: ``withheld``, ``key_mismatch``, ``malformed``,
    ``bad_attestation`` or ``wrong_source``.
    """
    envelopes = _single_event(envelopes)
    if group_sig is None:
        raise ContractViolation("temporary keys may only be revealed after a group signature exists")

    results: List[TimedResult] = []
    flagged: Dict[str, str] = {}
    for envelope in envelopes:
        node_id = envelope.submitter
        sk_temp = revealed_keys.get(node_id)
        if sk_temp is None:
            flagged[node_id] = 'withheld'
            continue
        if keypair_from_secret(sk_temp).public_key != envelope.temp_public_key:
            flagged[node_id] = 'key_mismatch'
            continue
        if audit is not None:
            audit.plaintext_read(envelope.event_id, observer, at)
        value = decrypt_value(sk_temp, envelope.event_id, envelope.ciphertext)
        if value is None:
            flagged[node_id] = 'malformed'
            continue
        attestation = envelope.source_proof
        if not verify_attestation(attestation, directory) or attestation.value != value:
            flagged[node_id] = 'bad_attestation'
            continue
        if source_count and attestation.source_id != source_id_for(envelope.priority_claim, source_count):
            flagged[node_id] = 'wrong_source'
            continue
        results.append(TimedResult(
            node_id=node_id,
            value=value,
            timestamp=envelope.timestamp,
            priority=envelope.priority_claim,
            attestation=attestation,
        ))

    for node_id, reason in flagged.items():
        logger.debug(f"Envelope from {node_id} excluded at reveal: {reason}")
    return RevealOutcome(results=results, flagged=flagged)


def source_id_for(claim: RingPriority, source_count: int) -> str:
    """Data sources are named ``source-<index>``; the index is the claim's assignment."""
    return f"source-{assign_data_source(claim, source_count)}"


class CollectionState:
    """
    Per-task accumulator of broadcast envelopes.

    Envelopes keep arriving after the group signature forms and are accepted
    until aggregation begins (``close``); afterwards they are rejected.
    """

    def __init__(self, event_id, t: int, audit: Optional[InformationFlowAudit] = None):
        self.event_id = as_bytes(event_id)
        self.t = t
        self.envelopes: Dict[str, FeedbackEnvelope] = {}
        self.group_signature: Optional[GroupSignature] = None
        self.closed = False
        self.audit = audit

    def submit(self, envelope: FeedbackEnvelope, at: float) -> bool:
        if self.closed or envelope.event_id != self.event_id:
            return False
        if envelope.submitter in self.envelopes or not verify_partial_signature(envelope):
            return False
        self.envelopes[envelope.submitter] = envelope
        if self.group_signature is None:
            self.group_signature = try_form_group_signature(self.envelopes.values(), self.t)
            if self.group_signature is not None and self.audit is not None:
                self.audit.group_signature_formed(self.event_id, at)
        return True

    def close(self):
        self.closed = True

    def observed_ciphertexts(self) -> List[FeedbackEnvelope]:
        return list(self.envelopes.values())
