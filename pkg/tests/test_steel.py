from __future__ import annotations

import random

import pytest

from glassvault.driver import random_fe_trace, run_fe_trace
from glassvault.encoding import decode_int
from glassvault.errors import (
    EncryptFailed,
    NotSetUp,
    PolicyUnsatisfied,
    SetupAborted,
)
from glassvault.functions import agg_wrap, byte_sum_function, f0_function, list_function
from glassvault.ideal import DdFesr
from glassvault.randomness import StreamFactory
from glassvault.steel import CIPHERTEXT_OVERHEAD, KeyShare, SteelStack

from conftest import make_stack


# --- setup ----------------------------------------------------------------------------


def test_kme_installed_exactly_once_across_setups():
    stack = make_stack()
    stack.setup_party("a1", "A")
    first = stack._kme
    stack.setup_party("a2", "A")
    stack.setup_party("b1", "B")
    assert stack._kme is first
    assert stack._kme[2] == 1  # first enclave id of the run


def test_tampered_bootstrap_quote_aborts_setup():
    stack = make_stack()

    original = stack._authority_setup_reply

    def tampering_authority(requester):
        mpk, sigma, eid = original(requester)
        return mpk, sigma[:-1] + bytes([sigma[-1] ^ 1]), eid

    stack._authority_setup_reply = tampering_authority
    with pytest.raises(SetupAborted):
        stack.setup_party("a1", "A")


def test_decryptor_setup_ends_with_working_leakage_path():
    stack = make_stack()
    stack.setup_party("a1", "A")
    stack.setup_party("b1", "B")
    handle = stack.encrypt("a1", b"hello world", 3)
    assert decode_int(stack.decrypt("b1", f0_function(), handle)) == 11


# --- key shares -----------------------------------------------------------------------------


def test_honest_share_counts_toward_policy():
    stack = make_stack()
    stack.setup_party("a1", "A")
    stack.setup_party("b1", "B")
    fn = byte_sum_function()
    assert stack.keysharegen("a1", fn, "b1") is True
    handle = stack.encrypt("a1", bytes([2, 3]), 1)
    assert decode_int(stack.decrypt("b1", fn, handle)) == 5


def test_share_for_another_decryptor_does_not_count():
    stack = make_stack()
    stack.setup_party("a1", "A")
    stack.setup_party("b1", "B")
    stack.setup_party("b2", "B")
    fn = byte_sum_function()
    stack.keysharegen("a1", fn, "b1")
    share_for_b1 = stack.contexts["b1"].shares[fn.descriptor][0]
    # smuggle b1's share into b2's table: the signed statement pins b1's pid
    stack.contexts["b2"].shares[fn.descriptor] = [share_for_b1]
    handle = stack.encrypt("a1", b"x", 1)
    with pytest.raises(PolicyUnsatisfied):
        stack.decrypt("b2", fn, handle)


def test_share_for_one_function_does_not_authorize_another():
    stack = make_stack()
    stack.setup_party("a1", "A")
    stack.setup_party("b1", "B")
    fn1 = byte_sum_function()
    fn2 = agg_wrap(list_function("integer-sum"), 2)
    stack.keysharegen("a1", fn1, "b1")
    original = stack.contexts["b1"].shares[fn1.descriptor][0]
    crosswired = KeyShare(
        function_descriptor=fn2.descriptor,
        sigma=original.sigma,
        signer_vk=original.signer_vk,
        cert=original.cert,
    )
    stack.contexts["b1"].shares[fn2.descriptor] = [crosswired]
    handle = stack.encrypt("a1", b"1", 1)
    with pytest.raises(PolicyUnsatisfied):
        stack.decrypt("b1", fn2, handle)


def test_duplicate_share_sends_are_idempotent():
    stack = make_stack()
    stack.setup_party("a1", "A")
    stack.setup_party("b1", "B")
    fn = byte_sum_function()
    stack.keysharegen("a1", fn, "b1")
    stack.keysharegen("a1", fn, "b1")
    assert stack.share_count("b1", fn) == 1


def test_keysharegen_requires_proper_roles():
    stack = make_stack()
    stack.setup_party("a1", "A")
    stack.setup_party("a2", "A")
    stack.setup_party("b1", "B")
    fn = byte_sum_function()
    assert stack.keysharegen("ghost", fn, "b1") is False
    assert stack.keysharegen("a1", fn, "a2") is False
    assert stack.keysharegen("b1", fn, "b1") is False


# --- encryption -------------------------------------------------------------------------------


def test_stored_ciphertext_message_is_wellformed_and_decryptable():
    stack = make_stack()
    stack.setup_party("a1", "A")
    stack.setup_party("b1", "B")
    fn = byte_sum_function()
    stack.keysharegen("a1", fn, "b1")
    handle = stack.encrypt("a1", bytes([1, 1, 1]), 1)
    payload = stack.repository.read(handle)
    assert payload.ciphertext and payload.proof
    assert decode_int(stack.decrypt("b1", fn, handle)) == 3  # proof verified in-enclave


def test_embedded_policy_enforced_at_decryption():
    stack = make_stack()
    stack.setup_party("a1", "A")
    stack.setup_party("b1", "B")
    fn = byte_sum_function()
    stack.keysharegen("a1", fn, "b1")
    handle = stack.encrypt("a1", b"x", 2)
    with pytest.raises(PolicyUnsatisfied):
        stack.decrypt("b1", fn, handle)


def test_equal_length_messages_give_equal_length_ciphertexts():
    stack = make_stack()
    stack.setup_party("a1", "A")
    h1 = stack.encrypt("a1", b"aaaaaaaaaa", 0)
    h2 = stack.encrypt("a1", b"zzzzzzzzzz", 5)
    ct1 = stack.repository.read(h1).ciphertext
    ct2 = stack.repository.read(h2).ciphertext
    assert len(ct1) == len(ct2)
    assert len(ct1) == 10 + CIPHERTEXT_OVERHEAD


def test_encrypt_requires_setup_and_bounds():
    stack = make_stack()
    with pytest.raises(NotSetUp):
        stack.encrypt("nobody", b"m", 0)
    stack.setup_party("a1", "A")
    with pytest.raises(EncryptFailed):
        stack.encrypt("a1", b"m", -1)


# --- decryption --------------------------------------------------------------------------------


def test_decrypt_matches_ideal_oracle_for_single_share():
    seed = 77
    stack = SteelStack("s", StreamFactory(seed))
    oracle = DdFesr(StreamFactory(seed))
    fn = byte_sum_function()
    oracle.register_function(fn)
    stack.setup_party("a1", "A")
    oracle.setup("a1", "A")
    stack.setup_party("b1", "B")
    oracle.setup("b1", "B")
    stack.keysharegen("a1", fn, "b1")
    oracle.keysharegen("a1", fn, "b1")
    message = bytes([5, 6, 7])
    h_steel = stack.encrypt("a1", message, 1)
    h_ideal = oracle.encrypt("a1", message, 1)
    assert h_steel == h_ideal
    assert stack.decrypt("b1", fn, h_steel) == oracle.decrypt("b1", fn, h_ideal)


def test_two_input_aggregator_pends_then_results():
    stack = make_stack()
    stack.setup_party("a1", "A")
    stack.setup_party("b1", "B")
    fn = agg_wrap(list_function("integer-sum"), 2)
    stack.keysharegen("a1", fn, "b1")
    h1 = stack.encrypt("a1", b"20", 1)
    h2 = stack.encrypt("a1", b"22", 1)
    assert stack.decrypt("b1", fn, h1) == b""
    assert decode_int(stack.decrypt("b1", fn, h2)) == 42


def test_share_count_presented_to_enclave_is_distinct_signers():
    stack = make_stack()
    for i in range(3):
        stack.setup_party(f"a{i}", "A")
    stack.setup_party("b1", "B")
    fn = byte_sum_function()
    for i in range(3):
        stack.keysharegen(f"a{i}", fn, "b1")
        stack.keysharegen(f"a{i}", fn, "b1")  # duplicates never raise the count
    assert stack.share_count("b1", fn) == 3
    handle = stack.encrypt("a0", b"\x01", 3)
    assert decode_int(stack.decrypt("b1", fn, handle)) == 1


# --- observable equivalence smoke (full sweep in the acceptance suite) --------------------------


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_random_traces_match_the_ideal_oracle(seed):
    trace = random_fe_trace(seed)
    report = run_fe_trace(trace, seed=500 + seed)
    assert report["equal"], report["divergence"]


def test_master_secret_absent_from_all_wire_traffic():
    stack = make_stack(3)
    stack.setup_party("a1", "A")
    stack.setup_party("b1", "B")
    fn = byte_sum_function()
    stack.keysharegen("a1", fn, "b1")
    handle = stack.encrypt("a1", random.Random(0).randbytes(100), 1)
    stack.decrypt("b1", fn, handle)
    msk = stack._master_secret()
    blobs = stack.observable_bytes()
    assert blobs, "expected wire traffic"
    assert all(msk not in blob for blob in blobs)


def test_only_duplicate_signer_shares_abort_at_decryption():
    from glassvault.attestation import Abort
    from glassvault.errors import EnclaveAbort

    stack = make_stack(13)
    stack.setup_party("a1", "A")
    stack.setup_party("b1", "B")
    fn = byte_sum_function()
    stack.keysharegen("a1", fn, "b1")
    share = stack.contexts["b1"].shares[fn.descriptor][0]
    # adversarial decryptor stuffs its own table with the same signer twice
    stack.contexts["b1"].shares[fn.descriptor] = [share, share]
    handle = stack.encrypt("a1", b"x", 2)
    with pytest.raises(EnclaveAbort) as exc:
        stack.decrypt("b1", fn, handle)
    assert exc.value.cause == Abort.DUPLICATE_SIGNER


def test_strict_share_mode_aborts_instead_of_dropping():
    from glassvault.attestation import Abort
    from glassvault.errors import EnclaveAbort

    stack = make_stack(21, strict_shares=True)
    stack.setup_party("a1", "A")
    stack.setup_party("b1", "B")
    fn = byte_sum_function()
    stack.keysharegen("a1", fn, "b1")
    good = stack.contexts["b1"].shares[fn.descriptor][0]
    broken = KeyShare(
        function_descriptor=good.function_descriptor,
        sigma=bytes(64),
        signer_vk=good.signer_vk,
        cert=good.cert,
    )
    stack.contexts["b1"].shares[fn.descriptor] = [good, broken]
    handle = stack.encrypt("a1", b"x", 1)
    with pytest.raises(EnclaveAbort) as exc:
        stack.decrypt("b1", fn, handle)
    assert exc.value.cause == Abort.BAD_SHARE_SIGNATURE
