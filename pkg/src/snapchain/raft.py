"""Raft consensus state machine.

Each node is a deterministic function of the (message | tick) events it
consumes: no wall clock, no I/O, randomness only from the node's own seeded
generator (election timeouts). The surrounding simulation or transport owns
delivery; nodes just return the messages they want sent.

Log indices are 1-based as in the Raft literature; index 0 is the empty
prefix. Entries before the commit index are never truncated.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

FOLLOWER = "follower"
CANDIDATE = "candidate"
LEADER = "leader"

DEFAULT_ELECTION_TIMEOUT = (150, 300)
DEFAULT_HEARTBEAT_INTERVAL = 50
MAX_ENTRIES_PER_APPEND = 64


@dataclass(frozen=True)
class LogEntry:
    term: int
    payload: bytes


@dataclass(frozen=True)
class RequestVote:
    term: int
    candidate: str
    last_log_index: int
    last_log_term: int


@dataclass(frozen=True)
class VoteReply:
    term: int
    granted: bool


@dataclass(frozen=True)
class AppendEntries:
    term: int
    leader: str
    prev_index: int
    prev_term: int
    entries: tuple[LogEntry, ...]
    leader_commit: int


@dataclass(frozen=True)
class AppendReply:
    term: int
    success: bool
    match_index: int  # on success: highest replicated index; on failure: a backoff hint


@dataclass
class RaftNode:
    node_id: str
    peers: tuple[str, ...]  # other node ids
    rng: random.Random
    election_timeout: tuple[int, int] = DEFAULT_ELECTION_TIMEOUT
    heartbeat_interval: int = DEFAULT_HEARTBEAT_INTERVAL

    term: int = 0
    voted_for: str | None = None
    log: list[LogEntry] = field(default_factory=list)
    commit_index: int = 0
    role: str = FOLLOWER
    leader_id: str | None = None

    _election_deadline: int = 0
    _votes: set = field(default_factory=set)
    _next_index: dict = field(default_factory=dict)
    _match_index: dict = field(default_factory=dict)
    _last_heartbeat: int = 0

    def __post_init__(self):
        self._election_deadline = self.rng.randint(*self.election_timeout)

    # Log helpers (1-based indices)

    def last_index(self) -> int:
        return len(self.log)

    def term_at(self, index: int) -> int:
        if index == 0:
            return 0
        return self.log[index - 1].term

    def _log_up_to_date(self, last_log_index: int, last_log_term: int) -> bool:
        my_term = self.term_at(self.last_index())
        if last_log_term != my_term:
            return last_log_term > my_term
        return last_log_index >= self.last_index()

    def _reset_election_timer(self, now: int) -> None:
        self._election_deadline = now + self.rng.randint(*self.election_timeout)

    def _become_follower(self, term: int, now: int) -> None:
        if term > self.term:
            self.term = term
            self.voted_for = None
        self.role = FOLLOWER
        self._votes = set()
        self._reset_election_timer(now)

    def _become_leader(self, now: int) -> list[tuple[str, object]]:
        self.role = LEADER
        self.leader_id = self.node_id
        self._next_index = {p: self.last_index() + 1 for p in self.peers}
        self._match_index = {p: 0 for p in self.peers}
        self._last_heartbeat = now
        # Barrier entry in the new term so inherited entries can commit.
        self.log.append(LogEntry(self.term, b"N"))
        return self._broadcast_appends()

    def _append_for(self, peer: str) -> AppendEntries:
        next_index = self._next_index[peer]
        prev_index = next_index - 1
        entries = tuple(self.log[prev_index : prev_index + MAX_ENTRIES_PER_APPEND])
        return AppendEntries(
            term=self.term,
            leader=self.node_id,
            prev_index=prev_index,
            prev_term=self.term_at(prev_index),
            entries=entries,
            leader_commit=self.commit_index,
        )

    def _broadcast_appends(self) -> list[tuple[str, object]]:
        return [(p, self._append_for(p)) for p in self.peers]

    def _advance_commit(self) -> None:
        if self.role != LEADER:
            return
        matches = sorted([*self._match_index.values(), self.last_index()])
        majority = len(matches) // 2 + 1
        majority_index = matches[len(matches) - majority]
        if (majority_index > self.commit_index
                and self.term_at(majority_index) == self.term):
            self.commit_index = majority_index

    # Event handlers

    def submit(self, payload: bytes) -> bool:
        """Append a client payload if leader; the caller redirects otherwise."""
        if self.role != LEADER:
            return False
        self.log.append(LogEntry(self.term, payload))
        return True

    def handle(self, src: str, msg, now: int) -> list[tuple[str, object]]:
        if isinstance(msg, RequestVote):
            return self.handle_request_vote(src, msg, now)
        if isinstance(msg, VoteReply):
            return self.handle_vote_reply(src, msg, now)
        if isinstance(msg, AppendEntries):
            return self.handle_append_entries(src, msg, now)
        if isinstance(msg, AppendReply):
            return self.handle_append_reply(src, msg, now)
        raise TypeError(f"unknown message type {type(msg).__name__}")

    def handle_request_vote(self, src: str, msg: RequestVote, now: int) -> list:
        if msg.term > self.term:
            self._become_follower(msg.term, now)
        grant = (
            msg.term == self.term
            and self.voted_for in (None, msg.candidate)
            and self._log_up_to_date(msg.last_log_index, msg.last_log_term)
        )
        if grant:
            self.voted_for = msg.candidate
            self._reset_election_timer(now)
        return [(src, VoteReply(term=self.term, granted=grant))]

    def handle_vote_reply(self, src: str, msg: VoteReply, now: int) -> list:
        if msg.term > self.term:
            self._become_follower(msg.term, now)
            return []
        if self.role != CANDIDATE or msg.term < self.term or not msg.granted:
            return []
        self._votes.add(src)
        if len(self._votes) + 1 > (len(self.peers) + 1) // 2:
            return self._become_leader(now)
        return []

    def handle_append_entries(self, src: str, msg: AppendEntries, now: int) -> list:
        if msg.term < self.term:
            return [(src, AppendReply(term=self.term, success=False, match_index=0))]
        self._become_follower(msg.term, now)
        self.leader_id = msg.leader
        if msg.prev_index > self.last_index() or self.term_at(msg.prev_index) != msg.prev_term:
            # Log mismatch: hint the leader where our log ends so it backs off fast.
            hint = min(msg.prev_index, self.last_index())
            return [(src, AppendReply(term=self.term, success=False, match_index=hint))]
        index = msg.prev_index
        for entry in msg.entries:
            index += 1
            if index <= self.last_index():
                if self.log[index - 1].term != entry.term:
                    assert index > self.commit_index, "refusing to truncate committed entries"
                    del self.log[index - 1 :]
                    self.log.append(entry)
            else:
                self.log.append(entry)
        if msg.leader_commit > self.commit_index:
            self.commit_index = min(msg.leader_commit, index)
        return [(src, AppendReply(term=self.term, success=True, match_index=index))]

    def handle_append_reply(self, src: str, msg: AppendReply, now: int) -> list:
        if msg.term > self.term:
            self._become_follower(msg.term, now)
            return []
        if self.role != LEADER or msg.term < self.term:
            return []
        if msg.success:
            self._match_index[src] = max(self._match_index[src], msg.match_index)
            self._next_index[src] = self._match_index[src] + 1
            self._advance_commit()
            if self._next_index[src] <= self.last_index():
                return [(src, self._append_for(src))]
            return []
        self._next_index[src] = max(1, min(self._next_index[src] - 1, msg.match_index + 1))
        return [(src, self._append_for(src))]

    def tick(self, now: int) -> list[tuple[str, object]]:
        if self.role == LEADER:
            if now - self._last_heartbeat >= self.heartbeat_interval:
                self._last_heartbeat = now
                return self._broadcast_appends()
            return []
        if now >= self._election_deadline:
            return self._start_election(now)
        return []

    def _start_election(self, now: int) -> list[tuple[str, object]]:
        self.term += 1
        self.role = CANDIDATE
        self.voted_for = self.node_id
        self.leader_id = None
        self._votes = set()
        self._reset_election_timer(now)
        if not self.peers:  # single-node cluster
            return self._become_leader(now)
        msg = RequestVote(
            term=self.term,
            candidate=self.node_id,
            last_log_index=self.last_index(),
            last_log_term=self.term_at(self.last_index()),
        )
        return [(p, msg) for p in self.peers]

    def note_new_entries(self, now: int) -> list[tuple[str, object]]:
        """Eager replication after submit; keeps commit latency off the heartbeat."""
        if self.role != LEADER:
            return []
        self._last_heartbeat = now
        return self._broadcast_appends()

    def crash_recover(self, now: int) -> None:
        """Reset volatile state after a simulated crash; log and term persist."""
        self.role = FOLLOWER
        self.leader_id = None
        self._votes = set()
        self._next_index = {}
        self._match_index = {}
        self._reset_election_timer(now)
