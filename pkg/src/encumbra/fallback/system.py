"""Fallback orchestration: escrow, replication policy, key release.

Wallet state (keys and policy summaries) is continuously escrowed as
encrypted replicas across independent storage repositories.  Updates
that create wallets or reduce privileges replicate synchronously — the
originating operation fails if no repository acknowledges — while
privilege increases batch on a timer, so a crash between flushes can
only lose permissiveness, never grant it.

Release needs three independent facts: the trigger fired (read from
the reliable chain's finalized state), a threshold of committee shares
reconstructs the escrow key (checked against the known public key
before use), and at least one repository serves an intact replica.
The latest decryptable version wins; release happens at most once.
"""

from __future__ import annotations

import json
from typing import Dict, List, Optional, Sequence, Tuple

from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey

from .. import crypto
from ..crypto import SigningKey
from ..errors import (
    AlreadyTriggered,
    InsufficientShares,
    NotChallenged,
    NotYetConfirmed,
)
from ..manager import (
    NEW_WALLET,
    PRIVILEGE_DECREASE,
    PRIVILEGE_INCREASE,
    WalletManager,
)
from ..simchain import SimChain
from . import secretshare
from .escrow import (
    EncryptedBlob,
    StorageRepo,
    decrypt_state,
    encrypt_state,
    escrow_keypair,
    replicate_best_effort,
    replicate_blocking,
)
from .trigger import TriggerContract


class FallbackSystem:
    def __init__(
        self,
        manager: WalletManager,
        seed: bytes,
        committee: int = 5,
        threshold: int = 3,
        repos: int = 3,
        batch_interval: int = 3600,
        repo_reachable: bool = True,
    ):
        self.manager = manager
        self._seed = seed
        self.threshold = threshold
        self.committee = committee
        secret, public = escrow_keypair(seed)
        self.escrow_public = public
        self.shares: List[secretshare.Share] = secretshare.split(
            secret, threshold, committee, seed
        )
        self.repos: List[StorageRepo] = [
            StorageRepo(f"repo-{i}", reachable=repo_reachable) for i in range(repos)
        ]
        self.batch_interval = batch_interval
        self.version = 0
        self.pending_increases: List[str] = []
        self.last_flush = 0
        self.executed = False
        manager.on_policy_change = self.on_policy_change

    # ------------------------------------------------------------------
    # replication

    def _payload(self) -> bytes:
        wallets = []
        for wallet in self.manager.wallets():
            wallets.append(
                {
                    "id": wallet.wallet_id,
                    "access_manager": wallet.access_manager,
                    "seed": wallet.key.seed_bytes().hex(),
                    "public_key": wallet.public_key.hex(),
                    "policy_version": wallet.policy_version,
                    "policy": wallet.policy.snapshot(),
                }
            )
        blob = {"version": self.version, "wallets": wallets}
        return json.dumps(blob, sort_keys=True, separators=(",", ":")).encode()

    def _encrypt_current(self) -> EncryptedBlob:
        self.version += 1
        return encrypt_state(
            self.escrow_public, self._payload(), self.version, self._seed
        )

    def on_policy_change(self, wallet_id: str, change_class: str) -> None:
        if change_class in (NEW_WALLET, PRIVILEGE_DECREASE):
            # Blocking: the calling operation fails if nobody stores it.
            replicate_blocking(self.repos, self._encrypt_current())
        elif change_class == PRIVILEGE_INCREASE:
            self.pending_increases.append(wallet_id)
        else:
            raise ValueError(change_class)

    def maybe_flush(self, now: int) -> bool:
        if not self.pending_increases:
            return False
        if now - self.last_flush < self.batch_interval:
            return False
        return self.flush(now)

    def flush(self, now: int) -> bool:
        """Best-effort batched replication of queued privilege increases."""
        if not self.pending_increases:
            self.last_flush = now
            return False
        acks = replicate_best_effort(self.repos, self._encrypt_current())
        if acks > 0:
            self.pending_increases.clear()
            self.last_flush = now
            return True
        return False

    def crash_pending(self) -> int:
        """Simulate a crash before the next flush: queued privilege
        increases are lost.  Returns how many were dropped."""
        dropped = len(self.pending_increases)
        self.pending_increases.clear()
        return dropped

    # ------------------------------------------------------------------
    # release

    def execute(
        self,
        shares: Sequence[secretshare.Share],
        trigger: TriggerContract,
        reliable_chain: SimChain,
        repos: Optional[Sequence[StorageRepo]] = None,
    ) -> Dict[str, List[Tuple[str, bytes]]]:
        """Release escrowed keys to their access managers.

        Returns {access manager: [(wallet id, key seed), ...]}.
        """
        if self.executed:
            raise AlreadyTriggered("fallback already executed")
        if trigger.triggered_at is None:
            raise NotChallenged("trigger has not fired")
        finalized_height = reliable_chain.confirmed_height("finalized")
        finalized_time = reliable_chain.header(finalized_height).timestamp
        if finalized_time < trigger.triggered_at:
            raise NotYetConfirmed(
                f"finalized time {finalized_time} precedes trigger {trigger.triggered_at}"
            )
        if len(shares) < self.threshold:
            raise InsufficientShares(
                f"{len(shares)} shares, threshold {self.threshold}"
            )
        secret = secretshare.reconstruct(shares)
        _, derived_public = _public_of(secret)
        if derived_public != self.escrow_public:
            raise InsufficientShares("reconstructed key fails known-plaintext check")

        candidates: List[EncryptedBlob] = []
        for repo in repos if repos is not None else self.repos:
            latest = repo.latest()
            if latest is not None:
                candidates.append(latest)
        candidates.sort(key=lambda blob: blob.version, reverse=True)
        payload = None
        for blob in candidates:
            try:
                payload = decrypt_state(secret, blob)
                break
            except InsufficientShares:
                continue
        if payload is None:
            raise InsufficientShares("no replica could be opened")

        parsed = json.loads(payload.decode())
        released: Dict[str, List[Tuple[str, bytes]]] = {}
        for wallet in parsed["wallets"]:
            released.setdefault(wallet["access_manager"], []).append(
                (wallet["id"], bytes.fromhex(wallet["seed"]))
            )
        self.executed = True
        self.last_payload = parsed
        return released


def _public_of(secret: bytes) -> Tuple[bytes, bytes]:
    private = X25519PrivateKey.from_private_bytes(secret)
    return secret, private.public_key().public_bytes_raw()


def verify_released_key(seed: bytes, expected_public: bytes) -> bool:
    """A released wallet key is good iff it signs under the original pk."""
    key = SigningKey(seed)
    if key.public_key != expected_public:
        return False
    sample = crypto.digest(b"release-check")
    return crypto.verify(key.sign(sample), sample)
