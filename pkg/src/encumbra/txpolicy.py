"""Transaction encumbrance: deposit-attributed spending over one key.

A wallet under this policy exposes its single chain account to many
sub-policies at once.  Each sub-policy owns what it can prove it
deposited: a deposit is claimed (committed host-side) before broadcast,
then credited once an inclusion proof lands.  Spending is gated three
ways at signature time — the request nonce must equal the recognized
nonce, the worst-case cost must fit the sub-balance, and a sub-policy
that has not yet lived through a nonce advance must have committed the
exact request digest host-side before it may sign.

Inclusion proofs drive the only state the chain can confirm: proving an
outgoing transaction advances the recognized nonce, deducts the cost
from the sub-policy the transaction is attributed to (its committed
request, else the last holder of unlimited signing for the
destination), pays the submitting player a fixed reimbursement out of
the signer's host-fee balance, and implicitly invalidates every other
outstanding signature at the old nonce.  Sub-balances survive grant
expiry; a withheld transaction broadcast after expiry is still charged
to its signer's leftover balance.

Host-side writes carry a simulated gas meter so the cost report can
show what a deployment would have paid; the numbers are products of
this gas model, not measurements.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

from . import crypto
from .assets import AssetKind
from .errors import (
    AlreadyClaimed,
    BadProof,
    NotEnabled,
    StaleNonce,
    UnknownDeposit,
)
from .messages import ChainTx, signing_digest
from .policy.tree import LedgerHook, PolicyTree
from .simchain import InclusionProof, SimChain
from .state import StateTriple

# Host-side operation names, in cost-report order.
OP_DEPLOY_POLICY = "deploy policy"
OP_ADD_POLICY = "add policy to wallet"
OP_ADD_SUB_POLICY = "add sub-policy"
OP_DEPOSIT_COMMITMENT = "deposit commitment"
OP_PROVE_DEPOSIT = "prove deposit inclusion"
OP_TX_COMMITMENT = "transaction commitment"
OP_PROVE_TX = "prove transaction inclusion"

HOST_OPS = (
    OP_DEPLOY_POLICY,
    OP_ADD_POLICY,
    OP_ADD_SUB_POLICY,
    OP_DEPOSIT_COMMITMENT,
    OP_PROVE_DEPOSIT,
    OP_TX_COMMITMENT,
    OP_PROVE_TX,
)

_BASE_TX = 21_000
_STORE_WORD = 20_000
_PER_SIBLING = 5_000
_ACCOUNTING = 15_000


def simulated_gas(op: str, words: int = 0, siblings: int = 0) -> int:
    """Deterministic host gas model.

    Proof verification always prices above the matching commitment:
    a proof re-does the commitment's storage and adds per-sibling
    hashing plus accounting updates.
    """
    if op == OP_DEPLOY_POLICY:
        return _BASE_TX + 150 * _STORE_WORD + words * _STORE_WORD
    if op == OP_ADD_POLICY:
        return _BASE_TX + 4 * _STORE_WORD + words * _STORE_WORD
    if op == OP_ADD_SUB_POLICY:
        return _BASE_TX + 2 * _STORE_WORD + words * _STORE_WORD
    if op == OP_DEPOSIT_COMMITMENT:
        return _BASE_TX + 2 * _STORE_WORD
    if op == OP_PROVE_DEPOSIT:
        return _BASE_TX + 2 * _STORE_WORD + _ACCOUNTING + _PER_SIBLING * (siblings + 1)
    if op == OP_TX_COMMITMENT:
        return _BASE_TX + 2 * _STORE_WORD
    if op == OP_PROVE_TX:
        return (
            _BASE_TX
            + 3 * _STORE_WORD
            + 2 * _ACCOUNTING
            + _PER_SIBLING * (siblings + 1)
        )
    raise KeyError(op)


@dataclass(frozen=True)
class NonOwnershipStatement:
    """Exportable attestation that a deposit was never claimed."""

    wallet_address: bytes
    target_digest: bytes
    ledger_digest: bytes
    signature: crypto.Signature

    def payload(self) -> bytes:
        return crypto.digest(
            b"non-ownership-v1"
            + self.wallet_address
            + self.target_digest
            + self.ledger_digest
        )


class TxLedger(LedgerHook):
    """Per-wallet accounting attached to the wallet's delegation tree."""

    def __init__(
        self,
        wallet_id: str,
        wallet_address: bytes,
        chain: SimChain,
        tree: Union[PolicyTree, Callable[[], PolicyTree]],
        commit_required: bool = True,
        reimburse_wei: int = 50_000 * 100 * 10**9,
    ):
        self.wallet_id = wallet_id
        self.wallet_address = wallet_address
        self.chain = chain
        # Policy updates swap the live tree for a validated clone, so the
        # ledger must resolve the current tree per call, not hold one.
        if callable(tree):
            self._tree_provider = tree
        else:
            self._tree_provider = lambda: tree
        self.commit_required = commit_required
        self.reimburse_wei = reimburse_wei

        self.recognized_nonce = 0
        self.ether_sub: Dict[str, int] = {}
        self.host_fee_sub: Dict[str, int] = {}
        self.player_host_credit: Dict[str, int] = {}
        self.claims: Dict[bytes, str] = {}
        self.proven_deposits: Dict[bytes, int] = {}
        self.committed_requests: Dict[bytes, str] = {}
        self.last_unlimited: Dict[bytes, str] = {}
        self.unlimited: Dict[Tuple[str, bytes], bool] = {}
        self.total_proven = 0
        self.total_deducted = 0
        self.unattributed: List[bytes] = []
        self.gas_log: List[Tuple[str, int]] = []

        self.tree.ledger = self
        self.meter(OP_ADD_POLICY, words=3)

    @property
    def tree(self) -> PolicyTree:
        return self._tree_provider()

    # ------------------------------------------------------------------
    # gas metering

    def meter(self, op: str, words: int = 0, siblings: int = 0) -> int:
        gas = simulated_gas(op, words=words, siblings=siblings)
        self.gas_log.append((op, gas))
        return gas

    def gas_summary(self) -> Dict[str, Tuple[int, int]]:
        """op -> (count, total gas)."""
        out: Dict[str, Tuple[int, int]] = {}
        for op, gas in self.gas_log:
            count, total = out.get(op, (0, 0))
            out[op] = (count + 1, total + gas)
        return out

    # ------------------------------------------------------------------
    # grant lifecycle

    def register_grant(self, node_id: str, dest: bytes) -> None:
        """A destination grant was spawned; holder starts limited."""
        self.unlimited[(node_id, dest)] = False
        self.meter(OP_ADD_SUB_POLICY, words=3)

    def _active_dest_holders(self, t: int) -> Dict[bytes, str]:
        holders: Dict[bytes, str] = {}
        for node in self.tree.nodes.values():
            if not node.active_at(t):
                continue
            for grant in node.grants:
                if (
                    grant.asset.kind is AssetKind.DESTINATION_ADDRESS
                    and grant.active_at(t)
                ):
                    holders[grant.asset.address] = node.node_id
        return holders

    # ------------------------------------------------------------------
    # signing gate (LedgerHook)

    def approves_chain_tx(self, node_id: str, tx: ChainTx, st: StateTriple) -> bool:
        if tx.chain_id != self.chain.chain_id:
            return False
        if tx.nonce != self.recognized_nonce:
            return False
        if tx.value + tx.fee_cap > self.ether_sub.get(node_id, 0):
            return False
        if self.commit_required and not self.unlimited.get((node_id, tx.to), False):
            digest = signing_digest(tx)
            if self.committed_requests.get(digest) != node_id:
                return False
        return True

    # ------------------------------------------------------------------
    # deposits

    def claim_deposit(self, node_id: str, tx_digest: bytes) -> None:
        """Record intent to own a deposit.  Must precede its inclusion:
        a claim raced in after the transaction is visible on chain is
        exactly the front-run the ordering rule exists to stop."""
        self.tree.node(node_id)
        holder = self.claims.get(tx_digest)
        if holder is not None:
            if holder == node_id:
                return  # idempotent
            raise AlreadyClaimed(tx_digest.hex())
        if self.chain.includes(tx_digest):
            raise AlreadyClaimed("deposit already on chain; claim too late")
        self.claims[tx_digest] = node_id
        self.meter(OP_DEPOSIT_COMMITMENT)

    def prove_deposit(self, node_id: str, proof: InclusionProof) -> int:
        """Credit a claimed deposit.  Returns wei credited (0 on replay)."""
        signed = self.chain.check_proof(proof)
        if signed.tx.to != self.wallet_address:
            raise BadProof("transaction does not pay the encumbered address")
        holder = self.claims.get(proof.tx_digest)
        if holder is None:
            raise UnknownDeposit(proof.tx_digest.hex())
        if holder != node_id:
            raise AlreadyClaimed(proof.tx_digest.hex())
        self.meter(OP_PROVE_DEPOSIT, siblings=len(proof.path.siblings))
        if proof.tx_digest in self.proven_deposits:
            return 0
        self.proven_deposits[proof.tx_digest] = signed.tx.value
        self.ether_sub[node_id] = self.ether_sub.get(node_id, 0) + signed.tx.value
        self.total_proven += signed.tx.value
        return signed.tx.value

    # ------------------------------------------------------------------
    # outgoing transactions

    def commit_request(self, node_id: str, tx_digest: bytes) -> None:
        self.tree.node(node_id)
        holder = self.committed_requests.get(tx_digest)
        if holder is not None and holder != node_id:
            raise AlreadyClaimed(tx_digest.hex())
        if holder is None:
            self.committed_requests[tx_digest] = node_id
            self.meter(OP_TX_COMMITMENT)

    def fund_host_fees(self, node_id: str, amount: int) -> None:
        self.tree.node(node_id)
        self.host_fee_sub[node_id] = self.host_fee_sub.get(node_id, 0) + amount

    def prove_tx_inclusion(self, submitter: str, proof: InclusionProof) -> Optional[str]:
        """Recognize an outgoing transaction; returns the charged node.

        Atomic: every effect below happens, or (on any raise) none do.
        """
        signed = self.chain.check_proof(proof)
        tx = signed.tx
        if signed.sender != self.wallet_address:
            raise BadProof("not a transaction from the encumbered address")
        if tx.nonce != self.recognized_nonce:
            raise StaleNonce(f"proof nonce {tx.nonce} vs {self.recognized_nonce}")
        node_id = self.committed_requests.get(proof.tx_digest)
        if node_id is None:
            node_id = self.last_unlimited.get(tx.to)
        # compute first, then apply: no partial state on failure
        cost = tx.value + tx.fee_cap
        holders = self._active_dest_holders(self.chain.time)

        self.recognized_nonce += 1
        if node_id is not None:
            self.ether_sub[node_id] = self.ether_sub.get(node_id, 0) - cost
            self.total_deducted += cost
            available = self.host_fee_sub.get(node_id, 0)
            paid = min(self.reimburse_wei, max(available, 0))
            self.host_fee_sub[node_id] = available - paid
            self.player_host_credit[submitter] = (
                self.player_host_credit.get(submitter, 0) + paid
            )
        else:
            self.unattributed.append(proof.tx_digest)
        for dest, holder in holders.items():
            self.unlimited[(holder, dest)] = True
            self.last_unlimited[dest] = holder
        self.meter(OP_PROVE_TX, siblings=len(proof.path.siblings))
        return node_id

    # ------------------------------------------------------------------
    # provenance

    def ledger_digest(self) -> bytes:
        parts = [
            self.wallet_address,
            self.recognized_nonce.to_bytes(8, "big"),
        ]
        for digest in sorted(self.claims):
            parts.append(digest)
            parts.append(self.claims[digest].encode())
            parts.append(b"\x00")
        for digest in sorted(self.proven_deposits):
            parts.append(digest)
            parts.append(self.proven_deposits[digest].to_bytes(16, "big"))
        return crypto.digest(b"ledger-v1" + b"".join(parts))

    def snapshot(self) -> dict:
        return {
            "wallet": self.wallet_id,
            "recognized_nonce": self.recognized_nonce,
            "ether_sub": {k: v for k, v in sorted(self.ether_sub.items())},
            "host_fee_sub": {k: v for k, v in sorted(self.host_fee_sub.items())},
            "player_host_credit": {
                k: v for k, v in sorted(self.player_host_credit.items())
            },
            "claims": {d.hex(): n for d, n in sorted(self.claims.items())},
            "proven": {d.hex(): v for d, v in sorted(self.proven_deposits.items())},
            "total_proven": self.total_proven,
            "total_deducted": self.total_deducted,
        }


def prove_non_ownership(
    ledger: TxLedger, wallet_key_sign, target_digest: bytes, enabled: bool
) -> NonOwnershipStatement:
    """Attest that a deposit visible on chain was never claimed here.

    ``wallet_key_sign`` is the wallet manager's attestation signer so
    ledger code never touches the private key.
    """
    if not enabled:
        raise NotEnabled("non-ownership proofs disabled at wallet creation")
    signed = ledger.chain.tx(target_digest)  # UnknownTx if absent
    if signed.tx.to != ledger.wallet_address:
        raise UnknownDeposit("transaction does not pay this wallet")
    if target_digest in ledger.claims:
        raise AlreadyClaimed(target_digest.hex())
    ledger_digest = ledger.ledger_digest()
    payload = crypto.digest(
        b"non-ownership-v1" + ledger.wallet_address + target_digest + ledger_digest
    )
    signature = wallet_key_sign(payload)
    return NonOwnershipStatement(
        wallet_address=ledger.wallet_address,
        target_digest=target_digest,
        ledger_digest=ledger_digest,
        signature=signature,
    )


def verify_non_ownership(
    statement: NonOwnershipStatement,
    wallet_public_key: bytes,
    ledger_snapshot_digest: bytes,
) -> bool:
    """Check a non-ownership statement against a ledger snapshot.

    A tampered snapshot changes its digest and fails the binding check
    even when the signature itself is valid.
    """
    if statement.signature.public_key != wallet_public_key:
        return False
    if statement.ledger_digest != ledger_snapshot_digest:
        return False
    return crypto.verify(statement.signature, statement.payload())
