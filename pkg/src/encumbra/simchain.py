"""Deterministic account-model chain with a confirmation oracle.

Blocks arrive on a fixed interval; a block's transactions are the
pending submissions whose nonce and balance line up at inclusion time,
in submission order.  Fees are charged at the full cap (max fee per
gas times gas limit) and accumulate in a fee sink, so value is
conserved to the wei: minted == circulating + fees.  There are no
reorgs; a transaction is included at most once, and a nonce is consumed
exactly once.

The confirmation oracle maps each height to three confirmation times
(latest / justified / finalized) drawn deterministically from the run
seed through per-mode Gaussian delay models, clamped to be monotone
across modes.  Inclusion proofs are only issued for blocks at or below
the confirmed height of the chain's configured proof mode.
"""

from __future__ import annotations

import bisect
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import crypto
from .crypto import Drbg
from .config import ORACLE_MODES
from .errors import (
    BadProof,
    InvalidSignature,
    NotYetConfirmed,
    UnknownTx,
)
from .merkle import MerklePath, merkle_path, merkle_root, verify_path
from .messages import ChainTx, signing_digest

FEE_SINK = b"\xfe" * 20


@dataclass(frozen=True)
class SignedTx:
    tx: ChainTx
    signature: crypto.Signature

    @property
    def sender(self) -> bytes:
        return crypto.address_of(self.signature.public_key)

    @property
    def digest(self) -> bytes:
        return signing_digest(self.tx)


@dataclass(frozen=True)
class Block:
    height: int
    timestamp: int
    parent_hash: bytes
    tx_root: bytes
    txs: Tuple[SignedTx, ...]

    @property
    def block_hash(self) -> bytes:
        return crypto.digest(
            b"block-v1"
            + self.height.to_bytes(8, "big")
            + self.parent_hash
            + self.tx_root
            + self.timestamp.to_bytes(8, "big")
        )


@dataclass(frozen=True)
class InclusionProof:
    tx_digest: bytes
    block_height: int
    path: MerklePath


class SimChain:
    def __init__(
        self,
        seed: bytes,
        chain_id: int = 1,
        block_interval: int = 12,
        proof_mode: str = "finalized",
        delay_models: Optional[Dict[str, Tuple[float, float]]] = None,
        label: str = "target",
    ):
        self.chain_id = chain_id
        self.block_interval = block_interval
        self.proof_mode = proof_mode
        self.label = label
        self._seed = seed
        self.delay_models = delay_models or {
            "latest": (49.0, 7.4),
            "justified": (648.7, 125.2),
            "finalized": (1036.9, 113.8),
        }
        self.time = 0
        genesis = Block(0, 0, b"\x00" * 32, merkle_root([]), ())
        self.blocks: List[Block] = [genesis]
        self.pending: List[SignedTx] = []
        self.balances: Dict[bytes, int] = {}
        self.nonces: Dict[bytes, int] = {}
        self.minted = 0
        self._tx_index: Dict[bytes, Tuple[int, int]] = {}
        self._balance_history: Dict[bytes, List[Tuple[int, int]]] = {}
        # Raw per-block confirmation times keep the configured delay
        # distribution measurable; the running max alongside them gives
        # the oracle its prefix property (a confirmed height confirms
        # everything below it) without distorting the marginals.
        self._confirm_times: Dict[str, List[int]] = {m: [0] for m in ORACLE_MODES}
        self._prefix_times: Dict[str, List[int]] = {m: [0] for m in ORACLE_MODES}

    # ------------------------------------------------------------------
    # funding and queries

    def fund(self, address: bytes, amount: int) -> None:
        """Mint simulation funds to an address (setup convenience)."""
        self.balances[address] = self.balances.get(address, 0) + amount
        self.minted += amount
        self._record_balance(address)

    def balance(self, address: bytes) -> int:
        return self.balances.get(address, 0)

    def nonce(self, address: bytes) -> int:
        return self.nonces.get(address, 0)

    def balance_at(self, address: bytes, height: int) -> int:
        """Balance as of the end of ``height`` (0 before first touch)."""
        history = self._balance_history.get(address)
        if not history:
            return 0
        heights = [h for h, _ in history]
        idx = bisect.bisect_right(heights, height) - 1
        return history[idx][1] if idx >= 0 else 0

    def _record_balance(self, address: bytes) -> None:
        height = self.blocks[-1].height
        history = self._balance_history.setdefault(address, [])
        value = self.balances.get(address, 0)
        if history and history[-1][0] == height:
            history[-1] = (height, value)
        else:
            history.append((height, value))

    def header(self, height: int) -> Block:
        if not 0 <= height < len(self.blocks):
            raise UnknownTx(f"no block at height {height}")
        return self.blocks[height]

    def tip(self) -> Block:
        return self.blocks[-1]

    def recent_block_hashes(self, count: int = 8) -> Tuple[bytes, ...]:
        return tuple(b.block_hash for b in self.blocks[-count:])

    def tx(self, tx_digest: bytes) -> SignedTx:
        location = self._tx_index.get(tx_digest)
        if location is None:
            raise UnknownTx(tx_digest.hex())
        height, index = location
        return self.blocks[height].txs[index]

    def tx_location(self, tx_digest: bytes) -> Tuple[int, int]:
        location = self._tx_index.get(tx_digest)
        if location is None:
            raise UnknownTx(tx_digest.hex())
        return location

    def includes(self, tx_digest: bytes) -> bool:
        return tx_digest in self._tx_index

    # ------------------------------------------------------------------
    # submission and block production

    def submit(self, signed: SignedTx) -> bytes:
        if signed.tx.chain_id != self.chain_id:
            raise InvalidSignature("wrong chain id")
        if not crypto.verify(signed.signature, signing_digest(signed.tx)):
            raise InvalidSignature("bad tx signature")
        self.pending.append(signed)
        return signed.digest

    def advance(self, seconds: int) -> List[Block]:
        """Move time forward, producing every block that comes due."""
        if seconds < 0:
            raise ValueError("time moves forward")
        self.time += seconds
        produced = []
        while (self.blocks[-1].height + 1) * self.block_interval <= self.time:
            produced.append(self._produce_block())
        return produced

    def _produce_block(self) -> Block:
        height = self.blocks[-1].height + 1
        included: List[SignedTx] = []
        survivors: List[SignedTx] = []
        changed = True
        pool = list(self.pending)
        while changed:
            changed = False
            survivors = []
            for signed in pool:
                sender = signed.sender
                expected = self.nonces.get(sender, 0)
                cost = signed.tx.value + signed.tx.fee_cap
                if signed.tx.nonce < expected:
                    continue  # permanently stale
                if signed.tx.nonce > expected:
                    survivors.append(signed)
                    continue
                if self.balances.get(sender, 0) < cost:
                    continue  # dropped: cannot pay at inclusion time
                self.balances[sender] = self.balances.get(sender, 0) - cost
                self.balances[signed.tx.to] = (
                    self.balances.get(signed.tx.to, 0) + signed.tx.value
                )
                self.balances[FEE_SINK] = (
                    self.balances.get(FEE_SINK, 0) + signed.tx.fee_cap
                )
                self.nonces[sender] = expected + 1
                included.append(signed)
                changed = True
            pool = survivors
        self.pending = survivors
        block = Block(
            height=height,
            timestamp=height * self.block_interval,
            parent_hash=self.blocks[-1].block_hash,
            tx_root=merkle_root([s.digest for s in included]),
            txs=tuple(included),
        )
        self.blocks.append(block)
        for index, signed in enumerate(included):
            self._tx_index[signed.digest] = (height, index)
            self._record_balance(signed.sender)
            self._record_balance(signed.tx.to)
        if included:
            self._record_balance(FEE_SINK)
        self._extend_confirmations(block)
        return block

    # ------------------------------------------------------------------
    # confirmation oracle

    def _mode_delays(self, height: int) -> Dict[str, int]:
        delays = {}
        previous = 0
        for mode in ORACLE_MODES:
            mean, stddev = self.delay_models[mode]
            raw = sample_delay(self._seed, self.label, mode, height, mean, stddev)
            value = max(1, round(raw))
            value = max(value, previous)  # latest <= justified <= finalized
            delays[mode] = value
            previous = value
        return delays

    def _extend_confirmations(self, block: Block) -> None:
        delays = self._mode_delays(block.height)
        for mode in ORACLE_MODES:
            confirm_at = block.timestamp + delays[mode]
            self._confirm_times[mode].append(confirm_at)
            prefix = self._prefix_times[mode]
            prefix.append(max(confirm_at, prefix[-1]))

    def confirmed_height(self, mode: str, at_time: Optional[int] = None) -> int:
        """Highest height whose whole prefix is confirmed for the mode."""
        now = self.time if at_time is None else at_time
        return bisect.bisect_right(self._prefix_times[mode], now) - 1

    def confirm_time(self, mode: str, height: int) -> int:
        """When this block itself confirmed (not its whole prefix)."""
        return self._confirm_times[mode][height]

    # ------------------------------------------------------------------
    # proofs

    def prove_inclusion(self, tx_digest: bytes, mode: Optional[str] = None) -> InclusionProof:
        location = self._tx_index.get(tx_digest)
        if location is None:
            raise UnknownTx(tx_digest.hex())
        height, index = location
        gate = mode or self.proof_mode
        if height > self.confirmed_height(gate):
            raise NotYetConfirmed(
                f"height {height} above confirmed {self.confirmed_height(gate)}"
            )
        block = self.blocks[height]
        path = merkle_path([s.digest for s in block.txs], index)
        return InclusionProof(tx_digest=tx_digest, block_height=height, path=path)

    def verify_proof(self, proof: InclusionProof) -> bool:
        if not 0 <= proof.block_height < len(self.blocks):
            return False
        root = self.blocks[proof.block_height].tx_root
        return verify_path(proof.tx_digest, proof.path, root)

    def check_proof(self, proof: InclusionProof) -> SignedTx:
        """Verify and return the proven transaction; raise on failure."""
        if not self.verify_proof(proof):
            raise BadProof("inclusion proof does not verify")
        height, index = self._tx_index[proof.tx_digest]
        if height != proof.block_height:
            raise BadProof("proof cites the wrong block")
        return self.blocks[height].txs[index]

    # ------------------------------------------------------------------
    # invariant helpers

    def total_circulating(self) -> int:
        return sum(self.balances.values())

    def snapshot_digest(self) -> bytes:
        parts = [self.tip().block_hash, self.time.to_bytes(8, "big")]
        for address in sorted(self.balances):
            parts.append(address)
            parts.append(self.balances[address].to_bytes(16, "big"))
            parts.append(self.nonces.get(address, 0).to_bytes(8, "big"))
        return crypto.digest(b"chain-snap-v1" + b"".join(parts))


def sample_delay(
    seed: bytes, label: str, mode: str, height: int, mean: float, stddev: float
) -> float:
    """One deterministic draw from the mode's delay model."""
    raw = Drbg(seed, "oracle-delay", label, mode, height).bytes(8)
    rng = random.Random(int.from_bytes(raw, "big"))
    return rng.gauss(mean, stddev)
