"""Wallet lifecycle: key custody, gated signing, policy transitions.

The manager is the only holder of wallet private keys.  Every
signature leaves through ``lw_sign``, which consults the wallet's
policy against the state triple and, on approval, appends the log
entry *before* producing the signature — the log can over-approximate
what escaped, never under-approximate.

Policy objects are registry-compiled (approve-all, approve-none, or a
delegation tree); updates are gated by the wallet's update rule.  Tree
transitions go through the structural update predicate; registry swaps
are only admitted under the permissive rule used in tests.

Refusals are uniform: a caller learns that the policy said no, and
nothing else.

All mutating entry points serialize on one lock, so interleaved calls
from many threads behave as some sequential order of whole commands.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import crypto
from .assets import AssetId
from .errors import (
    AuthFailure,
    PolicyRefusal,
    UnknownPlayer,
    UnknownPolicy,
    UnknownWallet,
    UpdateRefused,
)
from .messages import SignableMessage, encode_message, signing_digest
from .policy.registry import (
    AllowAllPolicy,
    DenyAllPolicy,
    TreeWalletPolicy,
    WalletPolicy,
)
from .policy.tree import (
    Controller,
    Grant,
    INFINITE_EXPIRY,
    PlayerController,
    PolicyTree,
)
from .policy import update as tree_update
from .state import GENESIS_ORACLE, LogEntry, OracleState, StateTriple

NEW_WALLET = "new-wallet"
PRIVILEGE_INCREASE = "privilege-increase"
PRIVILEGE_DECREASE = "privilege-decrease"


@dataclass
class Wallet:
    wallet_id: str
    key: crypto.SigningKey
    access_manager: str
    policy: WalletPolicy
    update_rule: str
    intst: List[LogEntry] = field(default_factory=list)
    policy_version: int = 0
    non_ownership_proofs: bool = True

    @property
    def address(self) -> bytes:
        return self.key.address

    @property
    def public_key(self) -> bytes:
        return self.key.public_key


@dataclass(frozen=True)
class Command:
    """Authenticated command envelope for the serialized queue."""

    call: str
    player: str
    wallet: str
    args_digest: bytes
    counter: int
    signature: crypto.Signature

    def payload(self) -> bytes:
        return crypto.digest(
            self.call.encode()
            + b"\x00"
            + self.wallet.encode()
            + b"\x00"
            + self.args_digest
            + self.counter.to_bytes(8, "big")
        )


class CommandAuthenticator:
    """Per-player signature and replay-counter verification."""

    def __init__(self):
        self._players: Dict[str, bytes] = {}
        self._counters: Dict[str, int] = {}

    def register(self, player: str, auth_public_key: bytes) -> None:
        self._players[player] = auth_public_key
        self._counters.setdefault(player, 0)

    def known(self, player: str) -> bool:
        return player in self._players

    def verify(self, command: Command) -> None:
        key = self._players.get(command.player)
        if key is None:
            raise AuthFailure(f"unknown player {command.player}")
        if command.signature.public_key != key:
            raise AuthFailure("wrong auth key")
        if command.counter != self._counters[command.player]:
            raise AuthFailure("replay counter mismatch")
        if not crypto.verify(command.signature, command.payload()):
            raise AuthFailure("bad command signature")
        self._counters[command.player] += 1


def _canonical_messages_digest(messages: Sequence[SignableMessage]) -> bytes:
    blob = b"".join(encode_message(m) for m in messages)
    return crypto.digest(len(messages).to_bytes(4, "big") + blob)


class WalletManager:
    def __init__(
        self,
        seed: bytes,
        ost_provider: Optional[Callable[[str], OracleState]] = None,
        lock: Optional[threading.RLock] = None,
    ):
        self._seed = seed
        self._lock = lock or threading.RLock()
        self._wallets: Dict[str, Wallet] = {}
        self._wallet_order: List[str] = []
        self.auth = CommandAuthenticator()
        self._ost_provider = ost_provider or (lambda wallet_id: GENESIS_ORACLE)
        # Observer for the recovery subsystem; receives
        # (wallet_id, change_class) after each committed change.
        self.on_policy_change: Optional[Callable[[str, str], None]] = None

    # ------------------------------------------------------------------
    # registration

    def register_player(self, name: str) -> bytes:
        with self._lock:
            key = crypto.derive_signing_key(self._seed, "player-auth", name)
            self.auth.register(name, key.public_key)
            return key.public_key

    def player_auth_key(self, name: str) -> crypto.SigningKey:
        """Deterministic per-player auth key; the player-side half."""
        return crypto.derive_signing_key(self._seed, "player-auth", name)

    def set_ost_provider(self, provider: Callable[[str], OracleState]) -> None:
        self._ost_provider = provider

    # ------------------------------------------------------------------
    # wallet surface

    def lw_gen(
        self,
        access_manager: str,
        wallet_id: str,
        policy_kind: str = "deny",
        update_rule: str = "any",
        native_capacity: Optional[int] = None,
        non_ownership_proofs: bool = True,
    ) -> Wallet:
        with self._lock:
            if not self.auth.known(access_manager):
                raise UnknownPlayer(access_manager)
            if wallet_id in self._wallets:
                raise UpdateRefused(f"wallet id {wallet_id} already exists")
            if update_rule not in ("frozen", "any", "tree"):
                raise UnknownPolicy(update_rule)
            # Key material depends only on the wallet's creation index,
            # so equal seeds mint equal wallets regardless of what other
            # commands ran in between.
            key = crypto.derive_signing_key(
                self._seed, "wallet-key", len(self._wallet_order)
            )
            policy = self._build_policy(policy_kind, access_manager, native_capacity)
            wallet = Wallet(
                wallet_id=wallet_id,
                key=key,
                access_manager=access_manager,
                policy=policy,
                update_rule=update_rule,
                non_ownership_proofs=non_ownership_proofs,
            )
            self._wallets[wallet_id] = wallet
            self._wallet_order.append(wallet_id)

            def undo():
                del self._wallets[wallet_id]
                self._wallet_order.remove(wallet_id)

            self._notify(wallet_id, NEW_WALLET, undo)
            return wallet

    def _build_policy(
        self, kind: str, access_manager: str, native_capacity: Optional[int]
    ) -> WalletPolicy:
        if kind == "allow":
            return AllowAllPolicy()
        if kind == "deny":
            return DenyAllPolicy()
        if kind == "tree":
            tree = PolicyTree(
                root_controller=access_manager,
                root_expiry=INFINITE_EXPIRY,
                native_capacity=native_capacity,
            )
            return TreeWalletPolicy(tree)
        raise UnknownPolicy(kind)

    def wallet(self, wallet_id: str) -> Wallet:
        found = self._wallets.get(wallet_id)
        if found is None:
            raise UnknownWallet(wallet_id)
        return found

    def wallets(self) -> List[Wallet]:
        return [self._wallets[w] for w in self._wallet_order]

    def tree_of(self, wallet_id: str) -> PolicyTree:
        policy = self.wallet(wallet_id).policy
        if not isinstance(policy, TreeWalletPolicy):
            raise UnknownPolicy("wallet has no delegation tree")
        return policy.tree

    def _state_triple(self, wallet: Wallet, extst: bytes) -> StateTriple:
        ost = self._ost_provider(wallet.wallet_id)
        return StateTriple(intst=tuple(wallet.intst), ost=ost, extst=extst)

    # ------------------------------------------------------------------
    # signing

    def lw_sign(
        self, player: str, wallet_id: str, message: SignableMessage, extst: bytes = b""
    ) -> crypto.Signature:
        with self._lock:
            wallet = self.wallet(wallet_id)
            if not self.auth.known(player):
                raise UnknownPlayer(player)
            st = self._state_triple(wallet, extst)
            approved, node_id = wallet.policy.approves(
                player, message, st, st.ost.chain_time
            )
            if not approved:
                raise PolicyRefusal()
            # Log first: a crash after this line loses a signature, never
            # the record that one may exist.
            wallet.intst.append(
                LogEntry(player=player, message=message, ost=st.ost, node_id=node_id)
            )
            return wallet.key.sign(signing_digest(message))

    def replay_signatures(self, wallet_id: str) -> List[Tuple[bytes, crypto.Signature]]:
        """Diagnostic: re-derive every signature the log says was issued."""
        with self._lock:
            wallet = self.wallet(wallet_id)
            return [
                (signing_digest(e.message), wallet.key.sign(signing_digest(e.message)))
                for e in wallet.intst
            ]

    # ------------------------------------------------------------------
    # policy transitions

    def lw_update(self, player: str, wallet_id: str, new_policy_kind: str) -> None:
        """Registry-swap update, gated by the wallet's update rule."""
        with self._lock:
            wallet = self.wallet(wallet_id)
            if not self.auth.known(player):
                raise UnknownPlayer(player)
            if new_policy_kind not in ("allow", "deny"):
                raise UnknownPolicy(new_policy_kind)
            if wallet.update_rule != "any":
                raise UpdateRefused()
            if player != wallet.access_manager:
                raise UpdateRefused()
            old_policy = wallet.policy
            wallet.policy = self._build_policy(
                new_policy_kind, wallet.access_manager, None
            )
            wallet.policy_version += 1
            increased = old_policy.kind == "deny-all" and new_policy_kind == "allow"

            def undo():
                wallet.policy = old_policy
                wallet.policy_version -= 1

            self._notify(
                wallet_id,
                PRIVILEGE_INCREASE if increased else PRIVILEGE_DECREASE,
                undo,
            )

    def spawn_node(
        self,
        actor: str,
        wallet_id: str,
        parent_id: str,
        node_id: str,
        controller: Controller,
        expiry: int,
        grants: Sequence[Grant],
    ) -> None:
        with self._lock:
            wallet = self.wallet(wallet_id)
            policy = wallet.policy
            if not isinstance(policy, TreeWalletPolicy):
                raise UpdateRefused()
            st = self._state_triple(wallet, b"")
            new_tree = tree_update.spawn(
                policy.tree,
                actor,
                parent_id,
                node_id,
                controller,
                expiry,
                grants,
                st,
                st.ost.chain_time,
            )
            old_tree = policy.tree
            policy.tree = new_tree
            wallet.policy_version += 1

            def undo():
                policy.tree = old_tree
                wallet.policy_version -= 1

            self._notify(wallet_id, PRIVILEGE_INCREASE, undo)

    def add_node_grants(
        self, actor: str, wallet_id: str, node_id: str, grants: Sequence[Grant]
    ) -> None:
        with self._lock:
            wallet = self.wallet(wallet_id)
            policy = wallet.policy
            if not isinstance(policy, TreeWalletPolicy):
                raise UpdateRefused()
            st = self._state_triple(wallet, b"")
            old_tree = policy.tree
            policy.tree = tree_update.add_grants(
                policy.tree, actor, node_id, grants, st, st.ost.chain_time
            )
            wallet.policy_version += 1

            def undo():
                policy.tree = old_tree
                wallet.policy_version -= 1

            self._notify(wallet_id, PRIVILEGE_INCREASE, undo)

    def seal_asset(self, actor: str, wallet_id: str, node_id: str, asset: AssetId) -> None:
        with self._lock:
            wallet = self.wallet(wallet_id)
            tree = self.tree_of(wallet_id)
            node = tree.node(node_id)
            allowed = actor == wallet.access_manager or (
                isinstance(node.controller, PlayerController)
                and node.controller.player == actor
            )
            if not allowed:
                raise UpdateRefused()
            previous = tree.manual_seals.get(asset.encode())
            tree.seal(node_id, asset)
            wallet.policy_version += 1

            def undo():
                if previous is None:
                    tree.unseal(asset)
                else:
                    tree.manual_seals[asset.encode()] = previous
                wallet.policy_version -= 1

            self._notify(wallet_id, PRIVILEGE_DECREASE, undo)

    def unseal_asset(self, actor: str, wallet_id: str, asset: AssetId) -> None:
        with self._lock:
            wallet = self.wallet(wallet_id)
            if actor != wallet.access_manager:
                raise UpdateRefused()
            tree = self.tree_of(wallet_id)
            previous = tree.manual_seals.get(asset.encode())
            tree.unseal(asset)
            wallet.policy_version += 1

            def undo():
                if previous is not None:
                    tree.manual_seals[asset.encode()] = previous
                wallet.policy_version -= 1

            self._notify(wallet_id, PRIVILEGE_INCREASE, undo)

    def _notify(
        self,
        wallet_id: str,
        change_class: str,
        undo: Optional[Callable[[], None]] = None,
    ) -> None:
        """Tell the recovery subsystem about a committed change.

        Changes that must replicate synchronously can fail here; the
        caller's ``undo`` closure then reverts the local mutation so the
        operation fails as a whole rather than diverging from escrow.
        """
        if self.on_policy_change is None:
            return
        try:
            self.on_policy_change(wallet_id, change_class)
        except Exception:
            if undo is not None:
                undo()
            raise

    # ------------------------------------------------------------------
    # attestations

    def lw_verify(
        self,
        wallet_id: str,
        subject: str,
        messages: Sequence[SignableMessage],
        predicate: Tuple,
    ) -> Tuple[bool, crypto.Signature]:
        """Evaluate a validity predicate and attest to the result.

        Side-effect free: nothing is logged and no counter moves.  The
        attestation binds (subject, message set, predicate, verdict) and
        is deterministic, so re-asking yields the identical signature.
        """
        with self._lock:
            wallet = self.wallet(wallet_id)
            st = self._state_triple(wallet, b"")
            result = self._eval_predicate(wallet, subject, messages, predicate, st)
            name = predicate[0]
            args_blob = ",".join(str(a) for a in predicate[1:])
            payload = crypto.digest(
                b"attest-v1"
                + wallet.wallet_id.encode()
                + b"\x00"
                + subject.encode()
                + b"\x00"
                + _canonical_messages_digest(messages)
                + name.encode()
                + b"\x00"
                + args_blob.encode()
                + (b"\x01" if result else b"\x00")
            )
            return result, wallet.key.sign(payload)

    def _eval_predicate(
        self,
        wallet: Wallet,
        subject: str,
        messages: Sequence[SignableMessage],
        predicate: Tuple,
        st: StateTriple,
    ) -> bool:
        name = predicate[0]
        t = st.ost.chain_time
        if name == "approves-all":
            return all(
                wallet.policy.approves(subject, m, st, t)[0] for m in messages
            )
        if name == "approves-none":
            return not any(
                wallet.policy.approves(subject, m, st, t)[0] for m in messages
            )
        if name == "log-contains-all":
            logged = {encode_message(e.message) for e in wallet.intst}
            return all(encode_message(m) in logged for m in messages)
        if name == "log-contains-none":
            logged = {encode_message(e.message) for e in wallet.intst}
            return not any(encode_message(m) in logged for m in messages)
        if name == "nonce-at-least":
            return st.ost.recognized_nonce >= int(predicate[1])
        if name == "log-extends":
            # (digest_hex, length): current log extends the snapshot.
            want, length = bytes.fromhex(predicate[1]), int(predicate[2])
            if length > len(wallet.intst):
                return False
            return self.log_prefix_digest(wallet.wallet_id, length) == want
        raise UnknownPolicy(f"predicate {name}")

    def log_prefix_digest(self, wallet_id: str, length: Optional[int] = None) -> bytes:
        with self._lock:
            wallet = self.wallet(wallet_id)
            entries = wallet.intst if length is None else wallet.intst[:length]
            running = b"\x00" * 32
            for entry in entries:
                running = crypto.digest(running + entry.encode())
            return running
