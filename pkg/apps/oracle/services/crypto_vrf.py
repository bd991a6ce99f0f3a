"""
Verifiable randomness primitives.

The VRF is a keyed-hash construction: the value is the first 8 bytes of
H(sk || input) read big-endian and the proof is H(sk || input || "proof").
Public verifiability is stood in for by a key registry that maps each public
key back to its secret key, so ``vrf_verify`` only ever sees the public key.
A simulation runs inside ``key_scope()``, which gives it a registry of its own
that is dropped when the run ends; outside any scope keys go to a module-level
registry. Callers depend on the function signatures alone, which keeps the
construction swappable for an elliptic-curve VRF.
"""
import hashlib
import hmac
import threading
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Iterator, Optional

from apps.oracle.exceptions import ContractViolation, MalformedKeyError

KEY_LENGTH = 32
PROOF_LENGTH = 32
RING_BITS = 64
RING_SIZE = 1 << RING_BITS
RING_MASK = RING_SIZE - 1

_SECRET_DOMAIN = b'oraclenet/secret-key'
_PUBLIC_DOMAIN = b'oraclenet/public-key'
_PROOF_SUFFIX = b'proof'


@dataclass
class KeyRegistry:
    keys: dict = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add(self, pk: bytes, sk: bytes):
        with self.lock:
            self.keys[pk] = sk

    def lookup(self, pk: bytes) -> Optional[bytes]:
        with self.lock:
            return self.keys.get(pk)

    def __len__(self) -> int:
        return len(self.keys)


_GLOBAL_REGISTRY = KeyRegistry()
_active_registry: ContextVar[Optional[KeyRegistry]] = ContextVar('oraclenet_key_registry', default=None)


def current_registry() -> KeyRegistry:
    registry = _active_registry.get()
    return _GLOBAL_REGISTRY if registry is None else registry


@contextmanager
def key_scope() -> Iterator[KeyRegistry]:
    """Register keys in a fresh registry until the block exits."""
    registry = KeyRegistry()
    token = _active_registry.set(registry)
    try:
        yield registry
    finally:
        _active_registry.reset(token)


def _digest(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        h.update(part)
    return h.digest()


@dataclass(frozen=True)
class KeyPair:
    secret_key: bytes
    public_key: bytes

    def to_record(self) -> dict:
        """Lowercase hex form used in scenario snapshots."""
        return {
            'secret_key': self.secret_key.hex(),
            'public_key': self.public_key.hex(),
        }


@dataclass(frozen=True)
class VrfOutput:
    value: int
    proof: bytes

    def to_bytes(self) -> bytes:
        """8-byte big-endian value followed by the proof."""
        return self.value.to_bytes(8, 'big') + self.proof

    @classmethod
    def from_bytes(cls, data: bytes) -> 'VrfOutput':
        if len(data) != 8 + PROOF_LENGTH:
            raise ContractViolation(f"VRF output must be {8 + PROOF_LENGTH} bytes, got {len(data)}")
        return cls(value=int.from_bytes(data[:8], 'big'), proof=bytes(data[8:]))


def _check_secret_key(sk) -> bytes:
    if not isinstance(sk, (bytes, bytearray)) or len(sk) != KEY_LENGTH:
        raise MalformedKeyError(f"secret key must be {KEY_LENGTH} bytes")
    return bytes(sk)


def keypair_from_secret(sk: bytes) -> KeyPair:
    """
    Derive the public key for ``sk`` and record the pair in the key registry.

    The public key is a pure function of the secret key.
    """
    sk = _check_secret_key(sk)
    pk = _digest(_PUBLIC_DOMAIN, sk)
    current_registry().add(pk, sk)
    return KeyPair(secret_key=sk, public_key=pk)


def vrf_setup(rng_seed: int) -> KeyPair:
    """Deterministically generate a keypair from a 64-bit seed."""
    seed_bytes = (int(rng_seed) & RING_MASK).to_bytes(8, 'big')
    return keypair_from_secret(_digest(_SECRET_DOMAIN, seed_bytes))


def vrf_generate(sk: bytes, message: bytes) -> VrfOutput:
    sk = _check_secret_key(sk)
    message = bytes(message)
    value = int.from_bytes(_digest(sk, message)[:8], 'big')
    proof = _digest(sk, message, _PROOF_SUFFIX)
    return VrfOutput(value=value, proof=proof)


def vrf_verify(pk: bytes, message: bytes, output: VrfOutput) -> bool:
    """Accept exactly the outputs ``vrf_generate`` produces under the secret key behind ``pk``."""
    sk = current_registry().lookup(bytes(pk))
    if sk is None or not isinstance(output, VrfOutput):
        return False
    expected = vrf_generate(sk, message)
    if output.value != expected.value:
        return False
    return hmac.compare_digest(bytes(output.proof), expected.proof)


def hash_to_ring(data: bytes) -> int:
    """The shared hash H mapped onto the 2^64 ring."""
    return int.from_bytes(_digest(bytes(data))[:8], 'big')


def sign(sk: bytes, message: bytes) -> bytes:
    """Deterministic verifiable signature: the serialized VRF output over ``message``."""
    return vrf_generate(sk, message).to_bytes()


def verify_signature(pk: bytes, message: bytes, signature: bytes) -> bool:
    try:
        output = VrfOutput.from_bytes(signature)
    except ContractViolation:
        return False
    return vrf_verify(pk, message, output)
