"""Access-control smart contracts as deterministic state machines.

Contract families, all reachable through :class:`ContractEngine`:

* registration of devices and users (digest identities)
* SCPI  attribute information (only group points are stored on-chain)
* SCPA  policy administration (formula -> threshold tree -> share matrix)
* SCPD  decision by share reconstruction and policy-id comparison
* SCPM  penalty records with an exponential lockout schedule
* SCPE  enforcement tying the above together
* SCED  outsourced encryption / decryption settled by result consensus

Every state change is emitted as a transaction to the attached
:class:`~abeacs.chain.ledger.Ledger`. Plaintext attribute labels, formula
text and the label -> exponent table stay off-chain.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from . import abe
from .abe import AttributeHash, PrivateKey, PublicKey, WrappedPayload
from .chain.consensus import Miner, consensus_round
from .chain.ledger import Ledger
from .chain.tx import NodeKey, Transaction, record, sign_tx
from .encoding import b64, length_prefixed, sha256
from .errors import (
    AccessDeniedError,
    ChainError,
    ConsensusError,
    DecryptionError,
    KeyInvalidatedError,
    NotFoundError,
    PolicyCompositionError,
)
from .pairing import G1Element, GroupParams
from .policy import (
    PolicyMatrix,
    ThresholdTree,
    assign_shares,
    build_tree,
    formula_leaves,
    parse_policy,
    policy_id,
    recover_root_secret,
    store_policy,
)

PERMANENT = "PERMANENT"
MAX_TIMED_LOCKOUT = 10  # violations beyond this are banned for good

GRANTED = "resource granted"
DENIED_PENALIZED = "denied+penalized"
DENIED_LOCKED = "denied+locked"
DENIED = "denied"

ROLES = ("terminal", "edge", "user", "manager")
BEHAVIORS = ("honest", "forge_decrypt", "skip_work")

# reasons a False verdict does not count as a violation by the subject
_NO_FAULT = {"unknown_subject", "unknown_object", "no_policy", "object_busy"}

Signer = Callable[[Dict[str, Any], int], Transaction]


def lockout_until(t: int, tick: int) -> Union[int, str]:
    """N_Time for the ``t``-th standing violation recorded at ``tick``."""
    return tick + 2**t if t <= MAX_TIMED_LOCKOUT else PERMANENT


@dataclass
class IdentityRecord:
    id: str
    vk: str
    role: str


@dataclass
class PolicyRecord:
    object_id: str
    subject_id: str
    matrix: PolicyMatrix  # leaf links are attribute points
    policy_id: bytes


@dataclass
class AccessDecision:
    verdict: bool
    subject: str
    object: str
    tick: int
    reason: str


@dataclass
class Enforcement:
    outcome: str
    reason: str
    decision: Optional[AccessDecision] = None
    penalty: Optional[Tuple[Union[int, str], int]] = None  # (N_Time, t)


@dataclass
class DataRecord:
    owner: str
    wrapped: WrappedPayload
    version: int = 0


@dataclass
class EdgeWorker:
    """An edge node's view while serving outsourced decryption."""

    node_id: str
    rng: random.Random
    behavior: str = "honest"
    strategy: str = "hybrid"

    def decrypt(self, pk: PublicKey, sk: PrivateKey, wp: WrappedPayload) -> Tuple[Optional[bytes], bytes]:
        """Return ``(plaintext or None, session key bytes)``."""
        if self.behavior == "forge_decrypt":
            # colluding forgers agree on one fabricated answer
            return b"forged", b"forged-key"
        if self.behavior == "skip_work":
            return self.rng.randbytes(wp.length), self.rng.randbytes(16)
        try:
            payload, key = abe.unwrap_with_key(pk, sk, wp)
        except DecryptionError:
            return None, b""
        return payload, key.encode()


def result_commit(reference: str, payload: Optional[bytes], key: bytes) -> str:
    if payload is None:
        return "undecryptable"
    return sha256(b"sced-result", length_prefixed(reference.encode()), length_prefixed(key), payload).hex()


class ContractEngine:
    """Registries plus contract methods.

    ``ledger=None`` runs the contracts as a pure state machine without
    emitting transactions, which keeps exhaustive decision sweeps cheap.
    """

    def __init__(
        self,
        params: GroupParams,
        rng: random.Random,
        ledger: Optional[Ledger] = None,
        manager_key: Optional[NodeKey] = None,
    ):
        self.params = params
        self.rng = rng
        self.ledger = ledger
        self.H = AttributeHash(params, random.Random(rng.getrandbits(64)))
        self.pk, self._mk = abe.setup(params, rng, self.H)

        self.D_HashID: Dict[str, IdentityRecord] = {}
        self.U_HashID: Dict[str, IdentityRecord] = {}
        self.A_HashID: Dict[str, List[G1Element]] = {}
        self.P_HashID: Dict[bytes, PolicyRecord] = {}
        self.policies: Dict[str, bytes] = {}  # object id -> policy id
        self.I_rec: Dict[str, int] = {}
        self.PM: Dict[str, Union[int, str]] = {}
        self.universe: Set[str] = set()
        self.data: Dict[str, DataRecord] = {}
        self.edges: Dict[str, EdgeWorker] = {}

        self._labels: Dict[str, Set[str]] = {}  # off-chain side table
        self._signers: Dict[str, Signer] = {}
        self._sessions: Dict[str, str] = {}  # object -> subject
        self._keys: Dict[str, PrivateKey] = {}
        self._invalidated: Set[str] = set()
        self._counter = 0
        # the owner's own copy of its data, used when it re-encrypts
        self._owner_copies: Dict[str, bytes] = {}

        key = manager_key or NodeKey.from_rng(rng)
        self.manager_id = self._register(("manager",), key, "manager")

    # ------------------------------------------------------------ plumbing

    def emit(self, actor: str, payload: Dict[str, Any], tick: int) -> Optional[Transaction]:
        """Sign as ``actor`` and submit; None when detached or rejected."""
        if self.ledger is None:
            return None
        tx = self._signers[actor](payload, tick)
        return tx if self.ledger.submit(tx) else None

    def set_signer(self, node_id: str, signer: Signer) -> None:
        """Replace how ``node_id`` signs (fault injection hooks in here)."""
        self._signers[node_id] = signer

    def _fresh(self) -> bytes:
        return self.rng.getrandbits(128).to_bytes(16, "big")

    def _register(self, dims: Sequence[str], key: NodeKey, role: str, tick: int = 0) -> str:
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        parts = [length_prefixed(str(d).encode()) for d in dims]
        node_id = sha256(*parts, self._fresh()).hex()
        rec = IdentityRecord(node_id, key.vk, role)
        (self.U_HashID if role == "user" else self.D_HashID)[node_id] = rec
        self._signers[node_id] = lambda payload, t, _k=key, _id=node_id: sign_tx(_k, _id, payload, t)
        self.emit(
            node_id,
            {"contract": "REG", "method": f"register_{'user' if role == 'user' else 'device'}", "id": node_id, "vk": key.vk, "role": role},
            tick,
        )
        return node_id

    def register_device(self, raw: Tuple[Any, Any, Any, Any], key: NodeKey, role: str = "terminal", tick: int = 0) -> str:
        """D_ID = SHA-256(id || COM port || MAC || IP port || rv)."""
        if len(raw) != 4:
            raise ValueError("raw device identity is (id, com, mac, ip)")
        dims = ["" if d is None else str(d) for d in raw]
        if not any(dims):
            raise ValueError("at least one device dimension must be present")
        if role not in ("terminal", "edge"):
            raise ValueError("devices are terminals or edges")
        node_id = self._register(dims, key, role, tick)
        if role == "edge":
            self.edges[node_id] = EdgeWorker(node_id, random.Random(self.rng.getrandbits(64)))
            if self.ledger is not None:
                self.ledger.miners.append(Miner(bytes.fromhex(node_id), random.Random(self.rng.getrandbits(64))))
        return node_id

    def register_user(self, raw_id: str, key: NodeKey, tick: int = 0) -> str:
        """U_ID = SHA-256(user id || rv)."""
        if not raw_id:
            raise ValueError("user id must be non-empty")
        return self._register((raw_id,), key, "user", tick)

    def is_registered(self, node_id: str) -> bool:
        return node_id in self.D_HashID or node_id in self.U_HashID

    def _require(self, node_id: str) -> None:
        if not self.is_registered(node_id):
            raise NotFoundError(f"unregistered id {node_id}")

    def _encode_point(self, pt: G1Element) -> str:
        return b64(pt.encode())

    # ---------------------------------------------------------------- SCPI

    def scpi_add_att(self, node_id: str, labels: Iterable[str], tick: int = 0) -> List[G1Element]:
        self._require(node_id)
        labels = sorted(set(labels))
        if not labels or not all(labels):
            raise ValueError("attribute labels must be non-empty")
        self.universe.update(labels)
        mine = self._labels.setdefault(node_id, set())
        mine.update(labels)
        points = [self.H.point(l) for l in sorted(mine)]
        self.A_HashID[node_id] = points
        self.emit(
            self.manager_id,
            {"contract": "SCPI", "method": "add_att", "id": node_id, "points": sorted(self._encode_point(p) for p in points)},
            tick,
        )
        return list(points)

    def scpi_del_att(self, node_id: str, tick: int = 0) -> None:
        if node_id not in self.A_HashID:
            raise NotFoundError(f"no attributes for {node_id}")
        del self.A_HashID[node_id]
        self._labels.pop(node_id, None)
        self.emit(self.manager_id, {"contract": "SCPI", "method": "del_att", "id": node_id}, tick)

    def scpi_get_att(self, node_id: str) -> List[G1Element]:
        if node_id not in self.A_HashID:
            raise NotFoundError(f"no attributes for {node_id}")
        return list(self.A_HashID[node_id])

    # ---------------------------------------------------------------- SCPA

    def scpa_convert_policy(self, formula_text: str, secret: Optional[int] = None) -> Tuple[ThresholdTree, PolicyMatrix, int]:
        """Formula -> threshold tree over attribute points -> share matrix."""
        formula = parse_policy(formula_text)
        tree = build_tree(formula).map_leaves(self.H.point)
        _, matrix, phi = assign_shares(tree, self.rng, self.params.field, secret=secret)
        return tree, matrix, phi.value

    def scpa_store_policy(self, subject: str, obj: str, matrix: PolicyMatrix, phi: int, tick: int = 0) -> bytes:
        rec = PolicyRecord(obj, subject, matrix, policy_id(matrix, phi))
        pid, _ = store_policy(matrix, phi, self.P_HashID, rec)
        self.policies[obj] = pid
        self.emit(
            self.manager_id,
            {
                "contract": "SCPA",
                "method": "add_policy",
                "subject": subject,
                "object": obj,
                "policy_id": pid.hex(),
                "matrix": matrix.to_json(self._encode_point),
            },
            tick,
        )
        return pid

    def scpa_add_policy(self, subject: str, obj: str, formula_text: str, tick: int = 0) -> bytes:
        """Validate, compile and bind a policy to ``obj``; returns the policy id."""
        self._require(subject)
        self._require(obj)
        leaves = set(formula_leaves(parse_policy(formula_text)))
        missing = sorted(leaves - self.universe)
        if missing:
            raise PolicyCompositionError(f"{len(missing)} policy attribute(s) never registered through SCPI")
        _, matrix, phi = self.scpa_convert_policy(formula_text)
        return self.scpa_store_policy(subject, obj, matrix, phi, tick)

    def policy_for(self, obj: str) -> PolicyRecord:
        pid = self.policies.get(obj)
        if pid is None:
            raise NotFoundError(f"no policy bound to {obj}")
        return self.P_HashID[pid]

    # ---------------------------------------------------------------- SCPD

    def _judge(self, subject: str, obj: str, tick: int) -> AccessDecision:
        if not self.is_registered(subject):
            return AccessDecision(False, subject, obj, tick, "unknown_subject")
        if not self.is_registered(obj):
            return AccessDecision(False, subject, obj, tick, "unknown_object")
        pid = self.policies.get(obj)
        if pid is None:
            return AccessDecision(False, subject, obj, tick, "no_policy")
        points = self.A_HashID.get(subject, []) + self.A_HashID.get(obj, [])
        if not points:
            return AccessDecision(False, subject, obj, tick, "no_attributes")
        rec = self.P_HashID[pid]
        s = recover_root_secret(rec.matrix, points)
        if s is None:
            return AccessDecision(False, subject, obj, tick, "unsatisfied")
        if policy_id(rec.matrix, s) != pid:
            return AccessDecision(False, subject, obj, tick, "policy_id_mismatch")
        return AccessDecision(True, subject, obj, tick, "satisfied")

    def _record_decision(self, d: AccessDecision) -> None:
        self.emit(
            self.manager_id,
            {
                "contract": "SCPD",
                "method": "judge_policy",
                "subject": d.subject,
                "object": d.object,
                "verdict": d.verdict,
                "reason": d.reason,
                "tick": d.tick,
            },
            d.tick,
        )

    def scpd_judge_policy(self, subject: str, obj: str, tick: int = 0) -> AccessDecision:
        decision = self._judge(subject, obj, tick)
        self._record_decision(decision)
        return decision

    # ---------------------------------------------------------------- SCPM

    def _write_penalty(self, subject: str, tick: int) -> Tuple[Union[int, str], int]:
        t = self.I_rec[subject]
        n_time = self.PM[subject] = lockout_until(t, tick)
        self.emit(
            self.manager_id,
            {"contract": "SCPM", "method": "penalize", "subject": subject, "t": t, "n_time": n_time, "tick": tick},
            tick,
        )
        return n_time, t

    def scpm_penalize(self, subject: str, tick: int) -> Tuple[Union[int, str], int]:
        """Record one more violation; returns ``(N_Time, t)``."""
        self.I_rec[subject] = self.I_rec.get(subject, 0) + 1
        return self._write_penalty(subject, tick)

    def is_locked(self, subject: str, tick: int) -> bool:
        n_time = self.PM.get(subject)
        return n_time is not None and (n_time == PERMANENT or tick < n_time)

    # ---------------------------------------------------------------- SCPE

    def scpe_enforce(self, subject: str, obj: str, tick: int) -> Enforcement:
        if not self.is_registered(subject) or not self.is_registered(obj):
            d = AccessDecision(False, subject, obj, tick, "unknown_subject" if not self.is_registered(subject) else "unknown_object")
            self._record_decision(d)
            return Enforcement(DENIED, d.reason, d)
        holder = self._sessions.get(obj)
        if holder is not None and holder != subject:
            d = AccessDecision(False, subject, obj, tick, "object_busy")
            self._record_decision(d)
            return Enforcement(DENIED, d.reason, d)

        if subject in self.PM:
            if self.is_locked(subject, tick):
                self.I_rec[subject] += 1
                d = AccessDecision(False, subject, obj, tick, "locked")
                self._record_decision(d)
                return Enforcement(DENIED_LOCKED, "locked", d, self._write_penalty(subject, tick))
            # lockout served: forgive one violation, then judge normally
            t = self.I_rec[subject] - 1
            if t <= 0:
                self.I_rec.pop(subject, None)
                self.PM.pop(subject, None)
            else:
                self.I_rec[subject] = t

        d = self.scpd_judge_policy(subject, obj, tick)
        if d.verdict:
            self._sessions[obj] = subject
            return Enforcement(GRANTED, d.reason, d)
        if d.reason in _NO_FAULT:
            return Enforcement(DENIED, d.reason, d)
        return Enforcement(DENIED_PENALIZED, d.reason, d, self.scpm_penalize(subject, tick))

    def scpe_release(self, subject: str, obj: str) -> None:
        if self._sessions.get(obj) == subject:
            del self._sessions[obj]

    def session_holder(self, obj: str) -> Optional[str]:
        return self._sessions.get(obj)

    # ---------------------------------------------------------------- SCED

    def _owner_exponent(self, owner: str):
        return self.H.exponent(f"owner:{owner}")

    def _fresh_matrix(self, owner: str, formula_text: Optional[str]) -> PolicyMatrix:
        # Ciphertexts never reuse the judging matrix's shares: that matrix is
        # public, and its root row reveals the root secret.
        if formula_text is not None:
            tree = build_tree(parse_policy(formula_text)).map_leaves(self.H.point)
        else:
            tree = self.policy_for(owner).matrix.to_tree().skeleton()
        return assign_shares(tree, self.rng, self.params.field)[1]

    def sced_encrypt(
        self,
        owner: str,
        payload: bytes,
        tick: int = 0,
        formula_text: Optional[str] = None,
        via: Optional[str] = None,
    ) -> str:
        """Wrap ``payload`` under the owner's policy; returns the data reference.

        ``via`` names the edge that performs the work and signs the record.
        """
        self._require(owner)
        matrix = self._fresh_matrix(owner, formula_text)
        wp = abe.wrap(self.pk, payload, matrix, self._owner_exponent(owner), self.rng)
        self._counter += 1
        ref = sha256(owner.encode(), self._counter.to_bytes(8, "big"), wp.digest).hex()
        payload_json = {"contract": "SCED", "method": "encrypt", "reference": ref, "owner": owner, "ciphertext": wp.to_json()}
        if self.ledger is not None and self.emit(via or owner, payload_json, tick) is None:
            raise ChainError("rejected", self.ledger.rejected[-1][1])
        self.data[ref] = DataRecord(owner, wp)
        self._owner_copies[ref] = payload
        return ref

    def sced_issue_key(self, subject: str, obj: str) -> str:
        """Generate a single-use decryption key for ``subject`` on ``obj``'s data."""
        points = self.A_HashID.get(subject, []) + self.A_HashID.get(obj, [])
        sk = abe.keygen(self.pk, self._mk, points, self._owner_exponent(obj), self.rng)
        handle = self._fresh().hex()
        self._keys[handle] = sk
        return handle

    def sced_decrypt(self, subject: str, reference: str, tick: int = 0, key_handle: Optional[str] = None) -> bytes:
        """Outsourced decryption settled by a consensus round among edges."""
        rec = self.data.get(reference)
        if rec is None:
            raise NotFoundError(f"unknown data reference {reference}")
        if self._sessions.get(rec.owner) != subject:
            raise AccessDeniedError("no granted access session for this object")
        if key_handle is None:
            key_handle = self.sced_issue_key(subject, rec.owner)
        if key_handle in self._invalidated:
            raise KeyInvalidatedError("decryption key was already used")
        sk = self._keys.get(key_handle)
        if sk is None:
            raise NotFoundError("unknown key handle")
        if not self.edges:
            raise ConsensusError("no edge nodes available", {})

        edges = [self.edges[e] for e in sorted(self.edges)]
        outputs: Dict[str, Optional[bytes]] = {}
        messages: Dict[bytes, List[Transaction]] = {}
        for edge in edges:
            payload, key = edge.decrypt(self.pk, sk, rec.wrapped)
            outputs[edge.node_id] = payload
            result_tx = record(
                {
                    "contract": "SCED",
                    "method": "decrypt_result",
                    "reference": reference,
                    "commit": result_commit(reference, payload, key),
                },
                tick,
            )
            messages[bytes.fromhex(edge.node_id)] = [result_tx]
        if self.ledger is not None:
            result = self.ledger.seal(tick, messages)
        else:
            miners = [Miner(bytes.fromhex(e.node_id), e.rng, e.strategy) for e in edges]
            result = consensus_round(miners, [messages[m.node_id] for m in miners], bytes(32), 0, tick)
        accepted = outputs[result.block.creator.hex()]

        self._invalidated.add(key_handle)
        del self._keys[key_handle]
        if accepted is None:
            raise DecryptionError("consensus: attributes do not satisfy the policy")
        self._reencrypt(reference, tick)
        return accepted

    def _reencrypt(self, reference: str, tick: int) -> None:
        rec = self.data[reference]
        payload = self._owner_copies[reference]
        matrix = self._fresh_matrix(rec.owner, None)
        rec.wrapped = abe.wrap(self.pk, payload, matrix, self._owner_exponent(rec.owner), self.rng)
        rec.version += 1
        self.emit(
            self.manager_id,
            {
                "contract": "SCED",
                "method": "reencrypt",
                "reference": reference,
                "version": rec.version,
                "ciphertext": rec.wrapped.to_json(),
            },
            tick,
        )

    def set_behavior(self, edge_id: str, behavior: str) -> None:
        if edge_id not in self.edges:
            raise NotFoundError(f"{edge_id} is not an edge node")
        if behavior not in BEHAVIORS:
            raise ValueError(f"unknown behavior {behavior!r}")
        self.edges[edge_id].behavior = behavior
