"""Join and leave orchestration: generation via QKA, distribution via rekeying.

A join attaches the new user at the join point and regenerates every key on
her path with one two-party session (server + joiner) per key, so the joiner
takes part in creating everything she will hold and learns nothing older.  A
leave prunes the user and regenerates every surviving path key with one
multi-party session per key: the server plus one agent per child subgroup
(for the deepest key these agents are exactly the remaining siblings).  The
regenerated keys then travel to everyone else encrypted under keys the
leaver never held.

Events are strictly serialized; one membership change mutates the tree at a
time.  The sessions inside one event touch disjoint keys and could run
concurrently with separate RNG streams; here they run in order for
reproducibility.  An aborted session rolls the tree, versions, and every
user view back to the pre-event snapshot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .counters import ResourceCounters
from .keytree import GroupKey, KeyTree, KeyTreeError, random_bits
from .qka import ChannelModel, QkaTranscript, make_config, run_session
from .rekey import (
    MissingKeyError,
    RekeyMessage,
    SimCipherText,
    UserView,
    build_join_messages,
    build_leave_messages,
    decrypt_key,
    encrypt_key,
)

SERVER_ID = "s"


class ProtocolAbort(Exception):
    """A session aborted; the event was rolled back."""

    def __init__(self, cause: str):
        super().__init__(f"event aborted: {cause}")
        self.cause = cause


class ConsistencyError(Exception):
    """A member's view disagrees with the server tree."""

    def __init__(self, report: dict):
        super().__init__(json.dumps(report, sort_keys=True, default=str))
        self.report = report


@dataclass
class ProtocolConfig:
    key_len: int = 1
    xi: float = 0.0
    error_threshold: float = 0.0
    agent_selection: str = "random"  # or "first" (lowest user id)
    track_history: bool = False
    record_tree_snapshots: bool = False
    verify_after: bool = False

    def __post_init__(self) -> None:
        if self.agent_selection not in ("random", "first"):
            raise ValueError(f"unknown agent selection {self.agent_selection!r}")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError("decoy proportion must lie in [0, 1]")


@dataclass(frozen=True)
class GroupEvent:
    kind: str  # "join" or "leave"
    user: str
    timestamp: int  # integer event step

    def to_dict(self) -> dict:
        return {"kind": self.kind, "user": self.user, "timestamp": self.timestamp}


@dataclass
class EventTrace:
    """Everything one membership event produced."""

    event: GroupEvent
    updated_keys: list[str]  # root first
    sessions: list[tuple[str, QkaTranscript]]  # (key id, transcript) per updated key
    messages: list[RekeyMessage]
    counters: ResourceCounters
    tree_stats: dict
    session_sizes: list[int] = field(default_factory=list)
    tree_before: Optional[dict] = None
    tree_after: Optional[dict] = None
    new_material: dict[str, GroupKey] = field(default_factory=dict)

    def to_dict(self, reveal_keys: bool = False) -> dict:
        d = {
            "event": self.event.to_dict(),
            "updated_keys": self.updated_keys,
            "sessions": [
                {"key_id": kid, **t.to_dict()} for kid, t in self.sessions
            ],
            "rekey_messages": [m.to_dict() for m in self.messages],
            "counters": self.counters.as_dict(),
            "tree_stats": self.tree_stats,
        }
        if self.tree_before is not None:
            d["tree_before"] = self.tree_before
        if self.tree_after is not None:
            d["tree_after"] = self.tree_after
        if reveal_keys:
            d["updated_key_material"] = {
                kid: {"version": k.version, "bits": k.bits}
                for kid, k in self.new_material.items()
            }
        return d


class GroupProtocol:
    """Server-side driver holding the tree, every member's view, and totals."""

    def __init__(
        self,
        tree: KeyTree,
        config: ProtocolConfig,
        rng: np.random.Generator,
        channel: Optional[ChannelModel] = None,
    ):
        if tree.key_len != config.key_len:
            raise ValueError("tree and protocol key lengths disagree")
        self.tree = tree
        self.config = config
        self.rng = rng
        self.channel = channel
        self.counters = ResourceCounters()
        self.step = 0
        self.views: dict[str, UserView] = {}
        self.archives: dict[str, set[tuple[str, int, str]]] = {}
        self.joined_at: dict[str, int] = {}
        self.departed: dict[str, int] = {}
        self.probes: list[tuple[int, SimCipherText]] = []
        for uid in tree.users():
            view = UserView(uid, (tree.key(k) for k in tree.keyset(uid)))
            self.views[uid] = view
            self.joined_at[uid] = 0
            if config.track_history:
                self.archives[uid] = {
                    (k.key_id, k.version, k.bits) for k in view.keys.values()
                }

    # ------------------------------------------------------------------ #

    def _install(self, uid: str, key: GroupKey) -> None:
        self.views[uid].install(key)
        if self.config.track_history:
            self.archives.setdefault(uid, set()).add(
                (key.key_id, key.version, key.bits)
            )

    def _choose_agent(self, members: list[str]) -> str:
        if self.config.agent_selection == "first":
            return members[0]
        return members[int(self.rng.integers(len(members)))]

    def _snapshot(self) -> Optional[tuple[KeyTree, dict[str, dict[str, GroupKey]]]]:
        # Sessions can only abort through an adversarial channel (an honest
        # channel's decoy checks are error-free by construction), so the
        # rollback snapshot is taken only when one is installed.
        if self.channel is None:
            return None
        return self.tree.clone(), {u: v.snapshot() for u, v in self.views.items()}

    def _rollback(
        self, snap: Optional[tuple[KeyTree, dict[str, dict[str, GroupKey]]]]
    ) -> None:
        if snap is None:
            raise RuntimeError("no snapshot to roll back to")
        tree, views = snap
        self.tree = tree
        self.views = {
            u: UserView(u, keys.values()) for u, keys in views.items()
        }

    def _deliver(self, message: RekeyMessage) -> None:
        """Install one message's keys into every addressed view.

        Decryption is deterministic and every recipient of a message holds
        the identical wrapping key, so each item is unwrapped once against
        the first recipient's copy and installed everywhere, after checking
        that every other recipient holds exactly the same wrapping key.
        Semantically equivalent to each recipient running
        UserView.apply_rekey herself, which remains the per-user reference.
        """
        if not message.recipients:
            return
        first = self.views[message.recipients[0]]
        opened: list[tuple[str, GroupKey, GroupKey]] = []
        for item in message.items:
            held = first.keys.get(item.enc_key_id)
            if held is None or held.version != item.enc_version:
                raise MissingKeyError(
                    f"{first.user_id} lacks {item.enc_key_id} v{item.enc_version}"
                )
            opened.append((item.enc_key_id, held, decrypt_key(held, item)))
        track = self.config.track_history
        for uid in message.recipients:
            view = self.views[uid]
            for enc_id, wrap_key, new_key in opened:
                if view.keys.get(enc_id) != wrap_key:
                    raise MissingKeyError(
                        f"{uid} lacks {enc_id} v{wrap_key.version}"
                    )
                view.install(new_key)
                if track:
                    self.archives[uid].add(
                        (new_key.key_id, new_key.version, new_key.bits)
                    )

    def _run_key_session(
        self, participant_ids: list[str], counters: ResourceCounters
    ) -> QkaTranscript:
        cfg = make_config(
            participant_ids,
            n=self.config.key_len,
            xi=self.config.xi,
            error_threshold=self.config.error_threshold,
        )
        t = run_session(cfg, channel=self.channel, rng=self.rng)
        counters.merge(t.counters)
        return t

    def _record_probe(self) -> None:
        if not self.config.track_history:
            return
        root_key = self.tree.key(self.tree.root)  # type: ignore[arg-type]
        probe = GroupKey("probe", self.step, random_bits(self.tree.key_len, self.rng))
        self.probes.append(
            (self.step, encrypt_key(root_key, probe, self.rng.bytes(8)))
        )

    # ------------------------------------------------------------------ #

    def join(self, user_id: str) -> EventTrace:
        """Run the full join protocol for one new user."""
        if self.tree.has_user(user_id):
            raise KeyTreeError(f"user {user_id!r} already in the group")
        self.step += 1
        snap = self._snapshot()
        tree_before = (
            self.tree.to_dict() if self.config.record_tree_snapshots else None
        )
        old_material = {
            kid: self.tree.nodes[kid].key
            for kid in self.tree.key_nodes()
            if self.tree.nodes[kid].key is not None
        }
        counters = ResourceCounters()
        path = self.tree.insert_user(user_id, self.rng)  # deepest first
        path_root_first = list(reversed(path))

        sessions: list[tuple[str, QkaTranscript]] = []
        try:
            for key_id in path_root_first:
                t = self._run_key_session([SERVER_ID, user_id], counters)
                if t.aborted:
                    raise ProtocolAbort(t.abort_cause or "unknown")
                self.tree.set_key(key_id, t.extracted_key)
                sessions.append((key_id, t))
        except ProtocolAbort:
            self._rollback(snap)
            self.step -= 1
            raise

        messages = build_join_messages(
            self.tree, path_root_first, old_material, user_id, self.rng, counters
        )
        for msg in messages:
            self._deliver(msg)

        # the joiner holds her registration key plus everything she agreed on
        self.views[user_id] = UserView(user_id)
        self.joined_at[user_id] = self.step
        if self.config.track_history:
            self.archives.setdefault(user_id, set())
        self._install(user_id, self.tree.key(self.tree.individual_key(user_id)))
        for key_id in path_root_first:
            self._install(user_id, self.tree.key(key_id))

        self.counters.merge(counters)
        trace = EventTrace(
            event=GroupEvent("join", user_id, self.step),
            updated_keys=path_root_first,
            sessions=sessions,
            messages=messages,
            counters=counters,
            tree_stats=self.tree.stats(),
            session_sizes=[2] * len(path_root_first),
            tree_before=tree_before,
            tree_after=self.tree.to_dict() if self.config.record_tree_snapshots else None,
            new_material={kid: self.tree.key(kid) for kid in path_root_first},
        )
        self._record_probe()
        if self.config.verify_after:
            self.verify_consistency(raise_on_mismatch=True)
        return trace

    def leave(self, user_id: str) -> EventTrace:
        """Run the full leave protocol for one departing member."""
        if not self.tree.has_user(user_id):
            raise KeyTreeError(f"user {user_id!r} not in the group")
        if self.tree.group_size() < 2:
            raise KeyTreeError("cannot remove the last member of a group")
        self.step += 1
        snap = self._snapshot()
        tree_before = (
            self.tree.to_dict() if self.config.record_tree_snapshots else None
        )
        pre_nodes = set(self.tree.key_nodes())
        counters = ResourceCounters()
        updated = self.tree.remove_user(user_id)  # deepest first
        path_root_first = list(reversed(updated))

        sessions: list[tuple[str, QkaTranscript]] = []
        session_users: dict[str, list[str]] = {}
        try:
            for key_id in path_root_first:
                children = self.tree.child_keys(key_id)
                if children:
                    agents = [
                        self._choose_agent(self.tree.userset(c)) for c in children
                    ]
                else:
                    # a pruned subgroup merged into an individual key
                    agents = self.tree.userset(key_id)
                t = self._run_key_session([SERVER_ID, *agents], counters)
                if t.aborted:
                    raise ProtocolAbort(t.abort_cause or "unknown")
                self.tree.set_key(key_id, t.extracted_key)
                sessions.append((key_id, t))
                session_users[key_id] = agents
        except ProtocolAbort:
            self._rollback(snap)
            self.step -= 1
            raise

        messages = build_leave_messages(
            self.tree,
            [(kid, session_users[kid]) for kid in updated],
            self.rng,
            counters,
        )

        # session participants learn their keys from the agreement itself
        for key_id in path_root_first:
            for uid in session_users[key_id]:
                self._install(uid, self.tree.key(key_id))
        for msg in messages:
            self._deliver(msg)

        # drop entries for nodes that vanished in the structural update
        gone = pre_nodes - set(self.tree.key_nodes())
        if gone:
            for uid in self.tree.userset(updated[0]):
                for nid in gone:
                    self.views[uid].drop(nid)

        self.views.pop(user_id, None)
        self.departed[user_id] = self.step

        self.counters.merge(counters)
        trace = EventTrace(
            event=GroupEvent("leave", user_id, self.step),
            updated_keys=path_root_first,
            sessions=sessions,
            messages=messages,
            counters=counters,
            tree_stats=self.tree.stats(),
            session_sizes=[1 + len(session_users[k]) for k in path_root_first],
            tree_before=tree_before,
            tree_after=self.tree.to_dict() if self.config.record_tree_snapshots else None,
            new_material={kid: self.tree.key(kid) for kid in path_root_first},
        )
        self._record_probe()
        if self.config.verify_after:
            self.verify_consistency(raise_on_mismatch=True)
        return trace

    # ------------------------------------------------------------------ #

    def verify_consistency(
        self, raise_on_mismatch: bool = False, check_secrecy: bool = False
    ) -> dict:
        """Compare every member's view with its keyset projection.

        With ``check_secrecy`` (requires history tracking), also assert that
        no departed user's archived key opens a probe encrypted under the
        current root key, and that no member's archive opens a probe recorded
        before she joined.
        """
        mismatches: dict[str, dict] = {}
        for uid in self.tree.users():
            projection = {k: self.tree.key(k) for k in self.tree.keyset(uid)}
            held = self.views[uid].keys
            if held != projection:
                mismatches[uid] = {
                    "missing": sorted(set(projection) - set(held)),
                    "stale": sorted(
                        k
                        for k in held
                        if k in projection and held[k] != projection[k]
                    ),
                    "extra": sorted(set(held) - set(projection)),
                }
        secrecy_failures: list[str] = []
        if check_secrecy:
            if not self.config.track_history:
                raise ValueError("secrecy checks need track_history=True")
            from .rekey import AuthenticationError, decrypt_key

            root_key = self.tree.key(self.tree.root)  # type: ignore[arg-type]
            probe = encrypt_key(
                root_key, GroupKey("probe", self.step, "0" * self.tree.key_len),
                self.rng.bytes(8),
            )
            for uid in self.departed:
                for kid, ver, bits in self.archives.get(uid, ()):
                    try:
                        decrypt_key(GroupKey(kid, ver, bits), probe)
                        secrecy_failures.append(f"departed {uid} opened a probe")
                    except AuthenticationError:
                        pass
            for uid, joined in self.joined_at.items():
                if uid not in self.views:
                    continue
                for when, ct in self.probes:
                    if when >= joined:
                        continue
                    for kid, ver, bits in self.archives.get(uid, ()):
                        try:
                            decrypt_key(GroupKey(kid, ver, bits), ct)
                            secrecy_failures.append(
                                f"{uid} opened a pre-join probe from step {when}"
                            )
                        except AuthenticationError:
                            pass
        report = {
            "consistent": not mismatches and not secrecy_failures,
            "mismatches": mismatches,
            "secrecy_failures": secrecy_failures,
        }
        if raise_on_mismatch and not report["consistent"]:
            raise ConsistencyError(report)
        return report
