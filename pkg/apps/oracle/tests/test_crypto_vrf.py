"""
Tests for the keyed-hash VRF and the shared ring hash.
"""
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from apps.oracle.exceptions import ContractViolation, MalformedKeyError
from apps.oracle.services.crypto_vrf import (
    RING_SIZE,
    VrfOutput,
    current_registry,
    hash_to_ring,
    key_scope,
    keypair_from_secret,
    sign,
    verify_signature,
    vrf_generate,
    vrf_setup,
    vrf_verify,
)


class TestKeySetup:
    """Deterministic key generation."""

    def test_same_seed_same_keys(self):
        assert vrf_setup(42) == vrf_setup(42)

    def test_distinct_seeds_distinct_keys(self):
        keys = {vrf_setup(seed).public_key for seed in range(200)}
        assert len(keys) == 200

    def test_public_key_is_function_of_secret(self):
        pair = vrf_setup(7)
        assert keypair_from_secret(pair.secret_key).public_key == pair.public_key

    def test_short_secret_key_rejected(self):
        with pytest.raises(MalformedKeyError):
            vrf_generate(b'short', b'message')

    def test_record_is_lowercase_hex(self):
        record = vrf_setup(3).to_record()
        assert record['public_key'] == record['public_key'].lower()
        assert len(bytes.fromhex(record['secret_key'])) == 32


class TestVrf:
    """Generate and verify."""

    def test_output_verifies_under_public_key(self):
        pair = vrf_setup(1)
        output = vrf_generate(pair.secret_key, b'event')
        assert vrf_verify(pair.public_key, b'event', output)

    def test_generation_is_deterministic(self):
        pair = vrf_setup(1)
        assert vrf_generate(pair.secret_key, b'x') == vrf_generate(pair.secret_key, b'x')

    def test_value_within_ring(self):
        pair = vrf_setup(2)
        assert 0 <= vrf_generate(pair.secret_key, b'x').value < RING_SIZE

    def test_other_message_rejected(self):
        pair = vrf_setup(1)
        output = vrf_generate(pair.secret_key, b'event')
        assert not vrf_verify(pair.public_key, b'other', output)

    def test_other_public_key_rejected(self):
        output = vrf_generate(vrf_setup(1).secret_key, b'event')
        assert not vrf_verify(vrf_setup(2).public_key, b'event', output)

    def test_unknown_public_key_rejected(self):
        output = vrf_generate(vrf_setup(1).secret_key, b'event')
        assert not vrf_verify(b'\x01' * 32, b'event', output)

    def test_tampered_value_rejected(self):
        pair = vrf_setup(1)
        output = vrf_generate(pair.secret_key, b'event')
        tampered = replace(output, value=(output.value + 1) % RING_SIZE)
        assert not vrf_verify(pair.public_key, b'event', tampered)

    def test_every_single_byte_proof_flip_rejected(self):
        pair = vrf_setup(1)
        output = vrf_generate(pair.secret_key, b'event')
        for i in range(len(output.proof)):
            proof = bytearray(output.proof)
            proof[i] ^= 0x01
            assert not vrf_verify(pair.public_key, b'event', replace(output, proof=bytes(proof)))

    def test_output_bytes_length_checked(self):
        with pytest.raises(ContractViolation):
            VrfOutput.from_bytes(b'\x00' * 10)


class TestSignatures:
    """Signatures are serialized VRF outputs."""

    def test_signature_verifies(self):
        pair = vrf_setup(9)
        assert verify_signature(pair.public_key, b'msg', sign(pair.secret_key, b'msg'))

    def test_malformed_signature_is_rejected_not_raised(self):
        pair = vrf_setup(9)
        assert verify_signature(pair.public_key, b'msg', b'garbage') is False


class TestHashToRing:
    """The shared ring hash."""

    def test_empty_input_golden_value(self):
        assert hash_to_ring(b'') == 16406829232824261652

    def test_within_ring(self):
        assert all(0 <= hash_to_ring(bytes([i])) < RING_SIZE for i in range(256))


def _top_byte_counts(values) -> np.ndarray:
    return np.bincount([v >> (64 - 8) for v in values], minlength=256)


@pytest.mark.slow
class TestUniformity:
    """Ring values spread evenly over 256 buckets."""

    SAMPLES = 100_000

    def test_hash_to_ring_is_uniform(self):
        counts = _top_byte_counts(hash_to_ring(i.to_bytes(8, 'big')) for i in range(self.SAMPLES))
        assert stats.chisquare(counts).pvalue >= 0.001

    def test_vrf_values_are_uniform(self):
        sk = vrf_setup(11).secret_key
        counts = _top_byte_counts(vrf_generate(sk, i.to_bytes(8, 'big')).value for i in range(self.SAMPLES))
        assert stats.chisquare(counts).pvalue >= 0.001

    def test_vrf_values_are_uniform_across_keys(self):
        message = b'task-00000'
        counts = _top_byte_counts(vrf_generate(vrf_setup(seed).secret_key, message).value
                                  for seed in range(self.SAMPLES))
        assert stats.chisquare(counts).pvalue >= 0.001


class TestAvalanche:
    """One flipped input bit flips about half of the output bits."""

    def _flip_matrix(self, fn) -> np.ndarray:
        rng = np.random.default_rng(5)
        rows = []
        for _ in range(64):
            message = rng.bytes(16)
            base = fn(message)
            for bit in range(len(message) * 8):
                flipped = bytearray(message)
                flipped[bit // 8] ^= 1 << (bit % 8)
                diff = base ^ fn(bytes(flipped))
                rows.append([(diff >> k) & 1 for k in range(64)])
        return np.asarray(rows)

    @pytest.mark.parametrize('name', ['hash_to_ring', 'vrf_generate'])
    def test_half_the_bits_flip(self, name):
        sk = vrf_setup(12).secret_key
        fn = hash_to_ring if name == 'hash_to_ring' else (lambda m: vrf_generate(sk, m).value)
        flips = self._flip_matrix(fn)
        assert abs(flips.sum(axis=1).mean() - 32) < 0.5
        per_bit = flips.mean(axis=0)
        assert per_bit.min() > 0.45
        assert per_bit.max() < 0.55


class TestKeyScope:
    """Scoped key registries."""

    def test_keys_registered_in_scope_are_dropped_on_exit(self):
        with key_scope() as registry:
            pair = keypair_from_secret(b'\x07' * 32)
            output = vrf_generate(pair.secret_key, b'event')
            assert len(registry) == 1
            assert vrf_verify(pair.public_key, b'event', output)
        assert not vrf_verify(pair.public_key, b'event', output)

    def test_scope_leaves_module_registry_alone(self):
        before = len(current_registry())
        with key_scope():
            for seed in range(50):
                vrf_setup(10_000 + seed)
        assert len(current_registry()) == before

    def test_scopes_nest(self):
        with key_scope() as outer:
            keypair_from_secret(b'\x01' * 32)
            with key_scope() as inner:
                keypair_from_secret(b'\x02' * 32)
                assert current_registry() is inner
            assert current_registry() is outer
            assert len(outer) == 1
