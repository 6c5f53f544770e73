"""Top-level composition: one platform instance plus its simulated world.

The engine owns the clock.  ``advance`` moves both chains forward in
lockstep, flushes batched escrow replication, and (while the sentinel
is marked up) answers any open liveness challenge at the moment it
would otherwise lapse.  Everything else is a thin, deterministic
facade over the subsystems: wallet manager, per-wallet transaction
ledgers, the governance market, and the recovery fallback.

Determinism contract: two engines built from equal configs that
execute equal call sequences produce byte-identical signatures, block
hashes, and report numbers.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Tuple

from . import crypto
from .config import Config, ORACLE_MODES
from .darkdao import DarkDao
from .errors import StepFailure, UnknownAccount, UnknownWallet
from .fallback.system import FallbackSystem, verify_released_key
from .fallback.trigger import TriggerContract, TriggerState, ping_message
from .manager import Wallet, WalletManager
from .messages import ChainTx, PersonalSign, SignableMessage, signing_digest
from .policy.tree import Grant, PlayerController, ProgramController
from .assets import AssetKind
from .simchain import InclusionProof, SignedTx, SimChain
from .state import OracleState
from .txpolicy import TxLedger

SENTINEL_WALLET = "sentinel"
SENTINEL_OPERATOR = "sentinel-op"

DEFAULT_GAS_LIMIT = 21_000
GWEI = 10**9


def dao_domain(name: str) -> bytes:
    return crypto.digest(b"dao-domain-v1" + name.encode())


def proposal_id_of(name: str) -> bytes:
    return crypto.digest(b"proposal-v1" + name.encode())


class Engine:
    def __init__(self, config: Optional[Config] = None):
        self.config = config or Config()
        cfg = self.config
        seed_int = int(cfg["engine.seed"])
        self.seed = crypto.digest(b"engine-seed-v1" + seed_int.to_bytes(8, "big"))

        models = {mode: cfg.delay_model(mode) for mode in ORACLE_MODES}
        self.chain = SimChain(
            seed=self.seed,
            chain_id=cfg["chain.chain_id"],
            block_interval=cfg["chain.block_interval_s"],
            proof_mode=cfg["oracle.mode"],
            delay_models=models,
            label="target",
        )
        self.reliable = SimChain(
            seed=self.seed,
            chain_id=cfg["reliable_chain.chain_id"],
            block_interval=cfg["reliable_chain.block_interval_s"],
            proof_mode=cfg["oracle.mode"],
            delay_models=models,
            label="reliable",
        )

        self.manager = WalletManager(self.seed, ost_provider=self._oracle_state)
        self.ledgers: Dict[str, TxLedger] = {}
        self.fallback = FallbackSystem(
            self.manager,
            self.seed,
            committee=cfg["fallback.committee"],
            threshold=cfg["fallback.threshold"],
            repos=cfg["fallback.repos"],
            batch_interval=cfg["fallback.batch_interval_s"],
            repo_reachable=cfg["fallback.repo_reachable"],
        )

        self.manager.register_player(SENTINEL_OPERATOR)
        sentinel = self.manager.lw_gen(
            access_manager=SENTINEL_OPERATOR,
            wallet_id=SENTINEL_WALLET,
            policy_kind="allow",
            update_rule="frozen",
        )
        self.trigger = TriggerContract(
            sentinel_public_key=sentinel.public_key,
            window=cfg["fallback.window_s"],
            min_deposit=cfg["fallback.min_deposit_wei"],
            bounty=cfg["fallback.bounty_wei"],
        )
        self.sentinel_up = True

        self.dao = DarkDao(self.manager, self.chain)
        self._account_keys: Dict[str, crypto.SigningKey] = {}

    # ------------------------------------------------------------------
    # oracle and clock

    def _oracle_state(self, wallet_id: str) -> OracleState:
        ledger = self.ledgers.get(wallet_id)
        if ledger is not None:
            nonce = ledger.recognized_nonce
        else:
            try:
                nonce = self.chain.nonce(self.manager.wallet(wallet_id).address)
            except UnknownWallet:
                nonce = 0
        return OracleState(
            chain_time=self.chain.time,
            block_hashes=self.chain.recent_block_hashes(),
            recognized_nonce=nonce,
        )

    @property
    def time(self) -> int:
        return self.chain.time

    def advance(self, seconds: int) -> None:
        """Advance the whole world.  The sentinel, while up, answers an
        open challenge just before its deadline would pass."""
        remaining = seconds
        while remaining > 0:
            step = remaining
            if self.sentinel_up and self.trigger.state is TriggerState.CHALLENGED:
                deadline = (
                    self.trigger.challenge_record.opened_at + self.trigger.window
                )
                if self.time < deadline - 1:
                    step = min(step, deadline - 1 - self.time)
                    self._step(step)
                    remaining -= step
                    if self.time == deadline - 1:
                        self.respond_challenge(SENTINEL_OPERATOR)
                    continue
                if self.time == deadline - 1:
                    self.respond_challenge(SENTINEL_OPERATOR)
            self._step(step)
            remaining -= step
        self.fallback.maybe_flush(self.time)

    def _step(self, seconds: int) -> None:
        self.chain.advance(seconds)
        self.reliable.advance(seconds)

    # ------------------------------------------------------------------
    # players, wallets, accounts

    def register_player(self, name: str) -> bytes:
        return self.manager.register_player(name)

    def create_wallet(
        self,
        wallet_id: str,
        access_manager: str,
        policy_kind: str = "tree",
        update_rule: str = "tree",
        native_capacity: Optional[int] = None,
        fund_wei: int = 0,
        with_ledger: bool = False,
    ) -> Wallet:
        wallet = self.manager.lw_gen(
            access_manager=access_manager,
            wallet_id=wallet_id,
            policy_kind=policy_kind,
            update_rule=update_rule,
            native_capacity=native_capacity,
            non_ownership_proofs=self.config["txpolicy.non_ownership_proofs"],
        )
        if fund_wei:
            self.chain.fund(wallet.address, fund_wei)
        if with_ledger:
            self.attach_ledger(wallet_id)
        return wallet

    def attach_ledger(self, wallet_id: str) -> TxLedger:
        wallet = self.manager.wallet(wallet_id)
        self.manager.tree_of(wallet_id)  # must be a tree-policy wallet
        reimburse = (
            self.config["host.reimburse_gas"]
            * self.config["host.gas_price_gwei"]
            * GWEI
        )
        ledger = TxLedger(
            wallet_id=wallet_id,
            wallet_address=wallet.address,
            chain=self.chain,
            tree=lambda: self.manager.tree_of(wallet_id),
            commit_required=self.config["txpolicy.commit_required"],
            reimburse_wei=reimburse,
        )
        self.ledgers[wallet_id] = ledger
        return ledger

    def ledger_of(self, wallet_id: str) -> TxLedger:
        ledger = self.ledgers.get(wallet_id)
        if ledger is None:
            raise UnknownWallet(f"{wallet_id} has no transaction ledger")
        return ledger

    def external_account(self, name: str, fund_wei: int = 0) -> bytes:
        key = self._account_keys.get(name)
        if key is None:
            key = crypto.derive_signing_key(self.seed, "account", name)
            self._account_keys[name] = key
        if fund_wei:
            self.chain.fund(key.address, fund_wei)
        return key.address

    def account_address(self, name: str) -> bytes:
        key = self._account_keys.get(name)
        if key is None:
            raise UnknownAccount(name)
        return key.address

    def resolve_address(self, name: str) -> bytes:
        """Wallet id, account name, or 40-hex-digit literal."""
        if name in self._account_keys:
            return self._account_keys[name].address
        try:
            return self.manager.wallet(name).address
        except UnknownWallet:
            pass
        try:
            raw = bytes.fromhex(name)
        except ValueError:
            raise UnknownAccount(name) from None
        if len(raw) != 20:
            raise UnknownAccount(name)
        return raw

    # ------------------------------------------------------------------
    # transactions

    def build_tx(
        self,
        to: bytes,
        value: int,
        nonce: int,
        gas_limit: int = DEFAULT_GAS_LIMIT,
        fee_gwei: Optional[int] = None,
        data: bytes = b"",
    ) -> ChainTx:
        fee = self.config["host.gas_price_gwei"] if fee_gwei is None else fee_gwei
        return ChainTx(
            chain_id=self.chain.chain_id,
            nonce=nonce,
            max_fee_per_gas=fee * GWEI,
            gas_limit=gas_limit,
            to=to,
            value=value,
            data=data,
        )

    def wallet_tx(
        self,
        wallet_id: str,
        to: bytes,
        value: int,
        nonce: Optional[int] = None,
        gas_limit: int = DEFAULT_GAS_LIMIT,
        fee_gwei: Optional[int] = None,
    ) -> ChainTx:
        if nonce is None:
            nonce = self._oracle_state(wallet_id).recognized_nonce
        return self.build_tx(to, value, nonce, gas_limit, fee_gwei)

    def sign_with_wallet(
        self, player: str, wallet_id: str, message: SignableMessage, extst: bytes = b""
    ) -> crypto.Signature:
        return self.manager.lw_sign(player, wallet_id, message, extst)

    def signed_wallet_tx(
        self, player: str, wallet_id: str, tx: ChainTx, extst: bytes = b""
    ) -> SignedTx:
        signature = self.manager.lw_sign(player, wallet_id, tx, extst)
        return SignedTx(tx=tx, signature=signature)

    def account_tx(
        self,
        name: str,
        to: bytes,
        value: int,
        gas_limit: int = DEFAULT_GAS_LIMIT,
        fee_gwei: Optional[int] = None,
    ) -> SignedTx:
        key = self._account_keys.get(name)
        if key is None:
            raise UnknownAccount(name)
        tx = self.build_tx(
            to, value, nonce=self.chain.nonce(key.address), gas_limit=gas_limit,
            fee_gwei=fee_gwei,
        )
        return SignedTx(tx=tx, signature=key.sign(signing_digest(tx)))

    def submit(self, signed: SignedTx) -> bytes:
        return self.chain.submit(signed)

    def prove(self, tx_digest: bytes) -> InclusionProof:
        return self.chain.prove_inclusion(tx_digest)

    # ------------------------------------------------------------------
    # policy-tree helpers

    def spawn_node(
        self,
        actor: str,
        wallet_id: str,
        parent_id: str,
        node_id: str,
        controller_player: Optional[str],
        expiry: int,
        grants: Sequence[Grant],
        program_name: Optional[str] = None,
    ) -> None:
        if program_name is not None:
            controller = ProgramController(program_name)
        else:
            controller = PlayerController(controller_player)
        self.manager.spawn_node(
            actor, wallet_id, parent_id, node_id, controller, expiry, grants
        )
        self._register_dest_grants(wallet_id, node_id, grants)

    def add_grants(
        self, actor: str, wallet_id: str, node_id: str, grants: Sequence[Grant]
    ) -> None:
        self.manager.add_node_grants(actor, wallet_id, node_id, grants)
        self._register_dest_grants(wallet_id, node_id, grants)

    def _register_dest_grants(
        self, wallet_id: str, node_id: str, grants: Sequence[Grant]
    ) -> None:
        ledger = self.ledgers.get(wallet_id)
        if ledger is None:
            return
        for grant in grants:
            if grant.asset.kind is AssetKind.DESTINATION_ADDRESS:
                ledger.register_grant(node_id, grant.asset.address)

    # ------------------------------------------------------------------
    # liveness and recovery

    def set_sentinel(self, up: bool) -> None:
        self.sentinel_up = up

    def open_challenge(self, challenger: str, deposit: int) -> None:
        self.trigger.challenge(challenger, deposit, self.time)

    def respond_challenge(self, responder: str) -> None:
        """Produce a fresh sentinel ping and defeat the open challenge."""
        ping = ping_message(self.time)
        signature = self.manager.lw_sign(SENTINEL_OPERATOR, SENTINEL_WALLET, ping)
        self.trigger.respond(responder, ping, signature, self.time)

    def fire_trigger(self) -> None:
        self.trigger.fire(self.time)

    def recover(self, share_count: Optional[int] = None) -> Dict[str, List[Tuple[str, bytes]]]:
        """Run the fallback release with the first ``share_count`` shares."""
        count = self.fallback.threshold if share_count is None else share_count
        shares = self.fallback.shares[:count]
        released = self.fallback.execute(shares, self.trigger, self.reliable)
        for pairs in released.values():
            for wallet_id, seed in pairs:
                wallet = self.manager.wallet(wallet_id)
                if not verify_released_key(seed, wallet.public_key):
                    raise StepFailure(f"released key for {wallet_id} does not verify")
        return released

    # ------------------------------------------------------------------
    # invariants

    def conservation_gap(self) -> int:
        """minted - circulating on the target chain; zero when conserved."""
        return self.chain.minted - self.chain.total_circulating()
