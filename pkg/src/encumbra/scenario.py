"""Line-oriented scenario language driving one engine deterministically.

A scenario file is a sequence of commands, one per line.  ``#`` starts
a comment, blank lines are skipped.  ``config`` lines are only legal
before the first command and overlay the run configuration.  A ``?``
prefix marks a step that must fail: the refusal code is recorded and
the run continues; if the step unexpectedly succeeds the run aborts.

Values accept underscores and the suffixes ``eth``, ``gwei``, ``wei``.
Times accept ``+N`` (relative to the current engine clock at execution
time) and ``inf``.  ``as=<name>`` binds a produced transaction to a
symbol that later steps reference.  The full grammar lives in
docs/scenario.md.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from .assets import NATIVE, capability, destination, personal_payload_key
from .config import Config
from .engine import Engine, dao_domain, proposal_id_of
from .errors import EngineError, ParseError, StepFailure
from .fallback.trigger import TriggerState
from .messages import ChainTx, PersonalSign, signing_digest
from .policy.tree import Grant, INFINITE_EXPIRY
from .simchain import SignedTx


@dataclass(frozen=True)
class Request:
    """An unsigned transaction bound to a symbol before signing."""

    tx: "ChainTx"

    @property
    def digest(self) -> bytes:
        return signing_digest(self.tx)


@dataclass(frozen=True)
class Step:
    lineno: int
    tolerant: bool
    command: str
    positional: Tuple[str, ...]
    kwargs: Dict[str, str]


@dataclass
class Scenario:
    name: str
    config_overrides: Dict[str, str] = field(default_factory=dict)
    steps: List[Step] = field(default_factory=list)


def _split_tokens(line: str, lineno: int) -> List[Tuple[int, str]]:
    """Tokens with their 1-based starting column."""
    out = []
    col = 0
    for raw in line.split(" "):
        if raw:
            out.append((col + 1, raw))
        col += len(raw) + 1
    _ = lineno
    return out


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    scenario = Scenario(name=name)
    seen_command = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        tokens = _split_tokens(line, lineno)
        col0, head = tokens[0]
        tolerant = False
        if head == "?":
            tolerant = True
            tokens = tokens[1:]
            if not tokens:
                raise ParseError(lineno, col0, "bare '?' with no command")
            col0, head = tokens[0]
        if head == "config":
            if seen_command:
                raise ParseError(lineno, col0, "config after first command")
            for col, token in tokens[1:]:
                if "=" not in token:
                    raise ParseError(lineno, col, f"expected key=value, got {token!r}")
                key, value = token.split("=", 1)
                scenario.config_overrides[key] = value
            continue
        if head not in COMMANDS:
            raise ParseError(lineno, col0, f"unknown command {head!r}")
        seen_command = True
        positional: List[str] = []
        kwargs: Dict[str, str] = {}
        for col, token in tokens[1:]:
            if "=" in token:
                key, value = token.split("=", 1)
                if not key:
                    raise ParseError(lineno, col, "empty key")
                if key in kwargs:
                    raise ParseError(lineno, col, f"duplicate key {key!r}")
                kwargs[key] = value
            else:
                if kwargs:
                    raise ParseError(
                        lineno, col, "positional argument after key=value"
                    )
                positional.append(token)
        scenario.steps.append(
            Step(lineno, tolerant, head, tuple(positional), kwargs)
        )
    return scenario


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    name = path.rsplit("/", 1)[-1]
    if name.endswith(".scn"):
        name = name[: -len(".scn")]
    return parse_scenario(text, name=name)


# ----------------------------------------------------------------------
# value parsing

_SUFFIX = {"eth": 10**18, "gwei": 10**9, "wei": 1}


def parse_amount(text: str) -> int:
    lowered = text.lower().replace("_", "")
    for suffix, scale in _SUFFIX.items():
        if lowered.endswith(suffix):
            body = lowered[: -len(suffix)]
            if "." not in body:
                return int(body) * scale
            # exact decimal arithmetic; floats drift at wei resolution
            whole, frac = body.split(".", 1)
            if not frac.isdigit() or (whole and not whole.isdigit()):
                raise StepFailure(f"bad amount {text!r}")
            if scale < 10 ** len(frac):
                raise StepFailure(f"amount {text!r} finer than 1 {suffix}")
            return int(whole or "0") * scale + int(frac) * (scale // 10 ** len(frac))
    return int(lowered)


class ScenarioRunner:
    """Executes a parsed scenario against a fresh engine."""

    def __init__(self, scenario: Scenario, config: Optional[Config] = None):
        self.scenario = scenario
        merged = config or Config()
        if scenario.config_overrides:
            merged.apply(dict(scenario.config_overrides))
        self.engine = Engine(merged)
        # symbol -> SignedTx or unsigned Request
        self.symbols: Dict[str, object] = {}
        self.proposals: Dict[str, bytes] = {}
        self.transcript: List[str] = []

    # -- helpers --------------------------------------------------------

    def parse_time(self, text: str) -> int:
        if text == "inf":
            return INFINITE_EXPIRY
        if text.startswith("+"):
            return self.engine.time + parse_amount(text[1:])
        return parse_amount(text)

    def _symbol(self, name: str) -> SignedTx:
        found = self.symbols.get(name)
        if found is None:
            raise StepFailure(f"unknown tx symbol {name!r}")
        return found

    def _bind(self, kwargs: Dict[str, str], signed: SignedTx) -> str:
        symbol = kwargs.get("as")
        if symbol is not None:
            if symbol in self.symbols:
                raise StepFailure(f"tx symbol {symbol!r} already bound")
            self.symbols[symbol] = signed
        return signed.digest.hex()[:12]

    def _grants_from(self, kwargs: Dict[str, str]) -> List[Grant]:
        start = self.parse_time(kwargs.get("start", "0"))
        until = self.parse_time(kwargs.get("until", kwargs.get("expiry", "inf")))
        grants: List[Grant] = []
        if "native" in kwargs:
            grants.append(Grant(NATIVE, parse_amount(kwargs["native"]), start, until))
        if "dest" in kwargs:
            address = self.engine.resolve_address(kwargs["dest"])
            grants.append(Grant(destination(address), 1, start, until))
        if "cap" in kwargs:
            key = self._capability_key(kwargs["cap"])
            platform = (
                self._capability_key(kwargs["platform"])
                if "platform" in kwargs
                else None
            )
            grants.append(
                Grant(capability(key), 1, start, until, platform=platform)
            )
        return grants

    def _capability_key(self, text: str) -> bytes:
        if text.startswith("dao:"):
            return dao_domain(text[len("dao:") :])
        if text.startswith("proposal:"):
            return proposal_id_of(text[len("proposal:") :])
        if text.startswith("personal:"):
            return personal_payload_key(text[len("personal:") :].encode())
        return bytes.fromhex(text)

    # -- execution ------------------------------------------------------

    def run(self, echo: bool = False) -> List[str]:
        import sys

        def emit(line: str) -> None:
            self.transcript.append(line)
            if echo:
                print(line, file=sys.stderr)

        for step in self.scenario.steps:
            handler = COMMANDS[step.command]
            try:
                summary = handler(self, step.positional, step.kwargs)
            except EngineError as error:
                if not step.tolerant:
                    raise StepFailure(
                        f"line {step.lineno}: {step.command} failed with "
                        f"{error.code}: {error}"
                    ) from error
                emit(f"refused L{step.lineno} {step.command} {error.code}")
                continue
            if step.tolerant:
                raise StepFailure(
                    f"line {step.lineno}: {step.command} succeeded but was "
                    "expected to fail"
                )
            emit(f"ok L{step.lineno} {step.command} {summary}")
        return self.transcript


def run_file(path: str, config: Optional[Config] = None) -> ScenarioRunner:
    runner = ScenarioRunner(load_scenario(path), config)
    runner.run()
    return runner


# ----------------------------------------------------------------------
# command handlers: (runner, positional, kwargs) -> transcript summary

def _cmd_player(r: ScenarioRunner, pos, kw) -> str:
    (name,) = pos
    key = r.engine.register_player(name)
    return f"{name} {key.hex()[:8]}"


def _cmd_wallet(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    wallet = r.engine.create_wallet(
        wallet_id,
        access_manager=kw["am"],
        policy_kind=kw.get("policy", "tree"),
        update_rule=kw.get("update", "tree"),
        native_capacity=(
            parse_amount(kw["capacity"]) if "capacity" in kw else None
        ),
        fund_wei=parse_amount(kw.get("fund", "0")),
        with_ledger=kw.get("ledger", "off") == "on",
    )
    return f"{wallet_id} addr={wallet.address.hex()[:12]}"


def _cmd_account(r: ScenarioRunner, pos, kw) -> str:
    (name,) = pos
    address = r.engine.external_account(name, parse_amount(kw.get("fund", "0")))
    return f"{name} addr={address.hex()[:12]}"


def _cmd_fund(r: ScenarioRunner, pos, kw) -> str:
    (target, amount) = pos
    address = r.engine.resolve_address(target)
    r.engine.chain.fund(address, parse_amount(amount))
    return f"{target} +{amount}"


def _cmd_advance(r: ScenarioRunner, pos, kw) -> str:
    (seconds,) = pos
    r.engine.advance(parse_amount(seconds))
    return f"t={r.engine.time} height={r.engine.chain.tip().height}"


def _cmd_spawn(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    grants = r._grants_from(kw)
    r.engine.spawn_node(
        actor=kw["actor"],
        wallet_id=wallet_id,
        parent_id=kw.get("parent", "root"),
        node_id=kw["node"],
        controller_player=kw.get("controller"),
        expiry=r.parse_time(kw.get("expiry", "inf")),
        grants=grants,
        program_name=kw.get("program"),
    )
    return f"{wallet_id}/{kw['node']} grants={len(grants)}"


def _cmd_grant(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    grants = r._grants_from(kw)
    r.engine.add_grants(kw["actor"], wallet_id, kw["node"], grants)
    return f"{wallet_id}/{kw['node']} +{len(grants)}"


def _cmd_seal(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    asset = destination(r.engine.resolve_address(kw["dest"]))
    r.engine.manager.seal_asset(kw["actor"], wallet_id, kw["node"], asset)
    return f"{wallet_id} {asset.label()}"


def _cmd_unseal(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    asset = destination(r.engine.resolve_address(kw["dest"]))
    r.engine.manager.unseal_asset(kw["actor"], wallet_id, asset)
    return f"{wallet_id} {asset.label()}"


def _cmd_update(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    r.engine.manager.lw_update(kw["player"], wallet_id, kw["policy"])
    return f"{wallet_id} -> {kw['policy']}"


def _build_request(r: ScenarioRunner, wallet_id: str, kw) -> "ChainTx":
    return r.engine.wallet_tx(
        wallet_id,
        to=r.engine.resolve_address(kw["to"]),
        value=parse_amount(kw["value"]),
        nonce=int(kw["nonce"]) if "nonce" in kw else None,
        gas_limit=int(kw.get("gas", "21000")),
        fee_gwei=int(kw["fee"]) if "fee" in kw else None,
    )


def _cmd_build(r: ScenarioRunner, pos, kw) -> str:
    """Prepare an unsigned request so its digest can be committed."""
    (wallet_id,) = pos
    tx = _build_request(r, wallet_id, kw)
    symbol = kw.get("as")
    if symbol is None:
        raise StepFailure("build requires as=<symbol>")
    if symbol in r.symbols:
        raise StepFailure(f"tx symbol {symbol!r} already bound")
    r.symbols[symbol] = Request(tx)
    return f"{wallet_id} nonce={tx.nonce} {signing_digest(tx).hex()[:12]}"


def _cmd_sign(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    if "tx" in kw:
        tx = r._symbol(kw["tx"]).tx
    else:
        tx = _build_request(r, wallet_id, kw)
    signed = r.engine.signed_wallet_tx(kw["player"], wallet_id, tx)
    return f"{wallet_id} nonce={tx.nonce} {r._bind(kw, signed)}"


def _cmd_sign_personal(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    message = PersonalSign(kw["payload"].encode())
    signature = r.engine.sign_with_wallet(kw["player"], wallet_id, message)
    return f"{wallet_id} {signature.to_hex()[:12]}"


def _cmd_submit(r: ScenarioRunner, pos, kw) -> str:
    (symbol,) = pos
    signed = r._symbol(symbol)
    if isinstance(signed, Request):
        raise StepFailure(f"{symbol!r} is an unsigned request")
    digest = r.engine.submit(signed)
    return f"{symbol} {digest.hex()[:12]}"


def _cmd_xfer(r: ScenarioRunner, pos, kw) -> str:
    (account,) = pos
    signed = r.engine.account_tx(
        account,
        to=r.engine.resolve_address(kw["to"]),
        value=parse_amount(kw["value"]),
    )
    summary = r._bind(kw, signed)
    if kw.get("submit", "on") == "on":
        r.engine.submit(signed)
    return f"{account} {summary}"


def _cmd_claim(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    signed = r._symbol(kw["tx"])
    r.engine.ledger_of(wallet_id).claim_deposit(kw["node"], signed.digest)
    return f"{wallet_id}/{kw['node']} {kw['tx']}"


def _cmd_prove_deposit(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    signed = r._symbol(kw["tx"])
    proof = r.engine.prove(signed.digest)
    credited = r.engine.ledger_of(wallet_id).prove_deposit(kw["node"], proof)
    return f"{wallet_id}/{kw['node']} +{credited}"


def _cmd_commit(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    signed = r._symbol(kw["tx"])
    r.engine.ledger_of(wallet_id).commit_request(kw["node"], signed.digest)
    return f"{wallet_id}/{kw['node']} {kw['tx']}"


def _cmd_host_fees(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    amount = parse_amount(kw["amount"])
    r.engine.ledger_of(wallet_id).fund_host_fees(kw["node"], amount)
    return f"{wallet_id}/{kw['node']} +{amount}"


def _cmd_prove_tx(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    signed = r._symbol(kw["tx"])
    proof = r.engine.prove(signed.digest)
    node = r.engine.ledger_of(wallet_id).prove_tx_inclusion(kw["submitter"], proof)
    return f"{wallet_id} -> {node or 'unattributed'}"


def _cmd_proposal(r: ScenarioRunner, pos, kw) -> str:
    (name,) = pos
    pid = proposal_id_of(name)
    snapshot = kw.get("snapshot", "tip")
    height = (
        r.engine.chain.tip().height if snapshot == "tip" else int(snapshot)
    )
    r.engine.dao.add_proposal(
        pid, dao_domain(kw["dao"]), height, r.parse_time(kw["close"])
    )
    r.proposals[name] = pid
    return f"{name} snapshot={height}"


def _cmd_enroll(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    enrollment = r.engine.dao.enroll(wallet_id, dao_domain(kw["dao"]))
    return f"{wallet_id}/{enrollment.node_id}"


def _cmd_vote(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    pid = r.proposals[kw["proposal"]]
    r.engine.dao.cast_vote(kw["player"], wallet_id, pid, int(kw["choice"]))
    return f"{wallet_id} choice={kw['choice']}"


def _cmd_offer(r: ScenarioRunner, pos, kw) -> str:
    (name,) = pos
    r.engine.dao.post_offer(
        name,
        briber=kw["briber"],
        proposal_id=r.proposals[kw["proposal"]],
        choice=int(kw["choice"]),
        price_per_token=parse_amount(kw["price"]),
        escrow=parse_amount(kw["escrow"]),
    )
    return name


def _cmd_accept(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    payment = r.engine.dao.accept_bribe(
        kw["owner"], wallet_id, kw["offer"], r.engine.time
    )
    return f"{wallet_id} reserved={payment}"


def _cmd_buy_vote(r: ScenarioRunner, pos, kw) -> str:
    (offer_id,) = pos
    r.engine.dao.cast_bought_vote(kw["player"], kw["wallet"], offer_id)
    return f"{offer_id} via {kw['wallet']}"


def _cmd_claim_payment(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    paid = r.engine.dao.claim_payment(wallet_id, kw["offer"], r.engine.time)
    return f"{wallet_id} +{paid}"


def _cmd_tally(r: ScenarioRunner, pos, kw) -> str:
    (name,) = pos
    tally = r.engine.dao.tally(r.proposals[name])
    inner = " ".join(f"{c}:{w}" for c, w in sorted(tally.items()))
    return f"{name} {{{inner}}}"


def _cmd_sentinel(r: ScenarioRunner, pos, kw) -> str:
    (mode,) = pos
    if mode not in ("up", "down"):
        raise StepFailure(f"sentinel mode {mode!r}")
    r.engine.set_sentinel(mode == "up")
    return mode


def _cmd_challenge(r: ScenarioRunner, pos, kw) -> str:
    r.engine.open_challenge(kw["challenger"], parse_amount(kw["deposit"]))
    return f"by {kw['challenger']} t={r.engine.time}"


def _cmd_respond(r: ScenarioRunner, pos, kw) -> str:
    r.engine.respond_challenge(kw.get("responder", "sentinel-op"))
    return f"t={r.engine.time}"


def _cmd_fire(r: ScenarioRunner, pos, kw) -> str:
    r.engine.fire_trigger()
    return f"t={r.engine.time}"


def _cmd_recover(r: ScenarioRunner, pos, kw) -> str:
    count = int(kw["shares"]) if "shares" in kw else None
    released = r.engine.recover(count)
    total = sum(len(v) for v in released.values())
    return f"wallets={total} managers={len(released)}"


def _cmd_assert_balance(r: ScenarioRunner, pos, kw) -> str:
    (target,) = pos
    balance = r.engine.chain.balance(r.engine.resolve_address(target))
    if "eq" in kw and balance != parse_amount(kw["eq"]):
        raise StepFailure(f"{target} balance {balance} != {kw['eq']}")
    if "min" in kw and balance < parse_amount(kw["min"]):
        raise StepFailure(f"{target} balance {balance} < {kw['min']}")
    if "max" in kw and balance > parse_amount(kw["max"]):
        raise StepFailure(f"{target} balance {balance} > {kw['max']}")
    return f"{target}={balance}"


def _cmd_assert_nonce(r: ScenarioRunner, pos, kw) -> str:
    (wallet_id,) = pos
    nonce = r.engine.ledger_of(wallet_id).recognized_nonce
    if nonce != int(kw["eq"]):
        raise StepFailure(f"{wallet_id} nonce {nonce} != {kw['eq']}")
    return f"{wallet_id}={nonce}"


def _cmd_assert_trigger(r: ScenarioRunner, pos, kw) -> str:
    (state,) = pos
    actual = r.engine.trigger.state
    if actual is not TriggerState(state):
        raise StepFailure(f"trigger {actual.value} != {state}")
    return state


COMMANDS: Dict[str, Callable[[ScenarioRunner, Tuple[str, ...], Dict[str, str]], str]] = {
    "player": _cmd_player,
    "wallet": _cmd_wallet,
    "account": _cmd_account,
    "fund": _cmd_fund,
    "advance": _cmd_advance,
    "spawn": _cmd_spawn,
    "grant": _cmd_grant,
    "seal": _cmd_seal,
    "unseal": _cmd_unseal,
    "update": _cmd_update,
    "build": _cmd_build,
    "sign": _cmd_sign,
    "sign-personal": _cmd_sign_personal,
    "submit": _cmd_submit,
    "xfer": _cmd_xfer,
    "claim": _cmd_claim,
    "prove-deposit": _cmd_prove_deposit,
    "commit": _cmd_commit,
    "host-fees": _cmd_host_fees,
    "prove-tx": _cmd_prove_tx,
    "proposal": _cmd_proposal,
    "enroll": _cmd_enroll,
    "vote": _cmd_vote,
    "offer": _cmd_offer,
    "accept": _cmd_accept,
    "buy-vote": _cmd_buy_vote,
    "claim-payment": _cmd_claim_payment,
    "tally": _cmd_tally,
    "sentinel": _cmd_sentinel,
    "challenge": _cmd_challenge,
    "respond": _cmd_respond,
    "fire": _cmd_fire,
    "recover": _cmd_recover,
    "assert-balance": _cmd_assert_balance,
    "assert-nonce": _cmd_assert_nonce,
    "assert-trigger": _cmd_assert_trigger,
}
