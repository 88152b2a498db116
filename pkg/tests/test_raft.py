import random
from collections import defaultdict

from snapchain.raft import (
    AppendEntries,
    CANDIDATE,
    LEADER,
    LogEntry,
    RaftNode,
    RequestVote,
    VoteReply,
)
from snapchain.simnet import SimNet, SimNetConfig, Simulation


def make_node(node_id="n0", peers=("n1", "n2"), seed=1):
    return RaftNode(node_id=node_id, peers=tuple(peers), rng=random.Random(seed))


# Vote handling

def test_vote_granted_and_term_adopted():
    voter = make_node()
    voter.term = 1
    out = voter.handle_request_vote(
        "n1", RequestVote(term=2, candidate="n1", last_log_index=0, last_log_term=0), now=0)
    assert voter.term == 2
    assert out == [("n1", VoteReply(term=2, granted=True))]
    assert voter.voted_for == "n1"


def test_vote_denied_when_candidate_log_behind():
    voter = make_node()
    voter.term = 1
    voter.log = [LogEntry(1, b"a"), LogEntry(1, b"b")]
    out = voter.handle_request_vote(
        "n1", RequestVote(term=1, candidate="n1", last_log_index=1, last_log_term=1), now=0)
    assert out[0][1].granted is False


def test_vote_denied_when_already_voted_this_term():
    voter = make_node()
    voter.handle_request_vote(
        "n1", RequestVote(term=3, candidate="n1", last_log_index=0, last_log_term=0), now=0)
    out = voter.handle_request_vote(
        "n2", RequestVote(term=3, candidate="n2", last_log_index=0, last_log_term=0), now=0)
    assert out[0][1].granted is False
    assert voter.voted_for == "n1"


def test_stale_term_vote_rejected():
    voter = make_node()
    voter.term = 5
    out = voter.handle_request_vote(
        "n1", RequestVote(term=4, candidate="n1", last_log_index=9, last_log_term=4), now=0)
    assert out[0][1].granted is False
    assert out[0][1].term == 5


# Append handling

def test_heartbeat_resets_election_timer_and_succeeds():
    node = make_node()
    node._election_deadline = 10
    out = node.handle_append_entries(
        "n1", AppendEntries(term=1, leader="n1", prev_index=0, prev_term=0,
                            entries=(), leader_commit=0), now=9)
    reply = out[0][1]
    assert reply.success is True
    assert node._election_deadline > 10
    assert node.leader_id == "n1"


def test_append_rejected_on_prev_mismatch():
    node = make_node()
    node.term = 1
    node.log = [LogEntry(1, b"a")]
    out = node.handle_append_entries(
        "n1", AppendEntries(term=1, leader="n1", prev_index=5, prev_term=1,
                            entries=(), leader_commit=0), now=0)
    reply = out[0][1]
    assert reply.success is False
    assert reply.match_index == 1  # backoff hint: our log length


def test_conflicting_suffix_replaced_committed_prefix_kept():
    node = make_node()
    node.term = 3
    node.log = [LogEntry(1, b"a"), LogEntry(1, b"b"), LogEntry(2, b"x"), LogEntry(2, b"y")]
    node.commit_index = 2
    entries = (LogEntry(3, b"c"), LogEntry(3, b"d"))
    out = node.handle_append_entries(
        "n1", AppendEntries(term=3, leader="n1", prev_index=2, prev_term=1,
                            entries=entries, leader_commit=2), now=0)
    assert out[0][1].success is True
    assert [e.payload for e in node.log] == [b"a", b"b", b"c", b"d"]
    assert node.commit_index == 2


def test_append_is_idempotent_for_existing_entries():
    node = make_node()
    node.term = 1
    node.log = [LogEntry(1, b"a"), LogEntry(1, b"b")]
    out = node.handle_append_entries(
        "n1", AppendEntries(term=1, leader="n1", prev_index=0, prev_term=0,
                            entries=(LogEntry(1, b"a"),), leader_commit=1), now=0)
    assert out[0][1].success is True
    assert len(node.log) == 2
    assert node.commit_index == 1


# Tick behavior

def test_follower_becomes_candidate_after_timeout():
    node = make_node()
    deadline = node._election_deadline
    out = node.tick(deadline)
    assert node.role == CANDIDATE
    assert node.term == 1
    assert {dst for dst, _ in out} == {"n1", "n2"}
    assert all(isinstance(m, RequestVote) for _, m in out)


def test_candidate_with_majority_becomes_leader():
    node = make_node(peers=("n1", "n2", "n3", "n4"))
    node.tick(node._election_deadline)
    out = node.handle_vote_reply("n1", VoteReply(term=1, granted=True), now=0)
    assert node.role == CANDIDATE
    out = node.handle_vote_reply("n2", VoteReply(term=1, granted=True), now=0)
    assert node.role == LEADER
    # immediate heartbeats to every peer
    assert {dst for dst, _ in out} == {"n1", "n2", "n3", "n4"}
    assert all(isinstance(m, AppendEntries) for _, m in out)


def test_leader_sends_heartbeats_on_interval():
    node = make_node(peers=("n1",))
    node.tick(node._election_deadline)
    node.handle_vote_reply("n1", VoteReply(term=1, granted=True), now=0)
    assert node.tick(10) == []  # too soon
    out = node.tick(node.heartbeat_interval)
    assert len(out) == 1 and isinstance(out[0][1], AppendEntries)


def test_submit_only_on_leader():
    node = make_node()
    assert node.submit(b"payload") is False
    node.tick(node._election_deadline)
    node.handle_vote_reply("n1", VoteReply(term=1, granted=True), now=0)
    assert node.submit(b"payload") is True


# Whole-cluster simulations

class RaftHarness:
    """N raft nodes on the simulated network, with safety checks."""

    def __init__(self, n=5, seed=0, drop_rate=0.0):
        cfg = SimNetConfig(seed=seed, drop_rate=drop_rate)
        self.net = SimNet(cfg)
        self.sim = Simulation(self.net)
        ids = tuple(f"n{i}" for i in range(n))
        self.nodes = {}
        for i, nid in enumerate(ids):
            node = RaftNode(node_id=nid, peers=tuple(p for p in ids if p != nid),
                            rng=random.Random(seed * 7919 + i))
            self.nodes[nid] = node
            self.sim.add_node(nid, _NodeShim(node, self))
        self.leaders_by_term: dict[int, set] = defaultdict(set)
        self.max_committed: tuple[int, int] | None = None  # (index, term) high water

    def observe(self, node: RaftNode) -> None:
        if node.role == LEADER:
            self.leaders_by_term[node.term].add(node.node_id)

    def leader(self):
        alive = [n for n in self.nodes.values()
                 if n.role == LEADER and not self.net.crashed(n.node_id, self.sim.now)]
        return max(alive, key=lambda n: n.term) if alive else None

    def assert_election_safety(self):
        for term, leaders in self.leaders_by_term.items():
            assert len(leaders) <= 1, f"two leaders in term {term}: {leaders}"

    def assert_log_matching(self):
        nodes = list(self.nodes.values())
        for i in range(len(nodes)):
            for j in range(i + 1, len(nodes)):
                a, b = nodes[i].log, nodes[j].log
                for idx in range(min(len(a), len(b)) - 1, -1, -1):
                    if a[idx].term == b[idx].term:
                        assert a[: idx + 1] == b[: idx + 1], (
                            f"logs diverge below matching ({nodes[i].node_id},"
                            f" {nodes[j].node_id}) at {idx}")
                        break

    def committed_prefix(self):
        index = min(n.commit_index for n in self.nodes.values())
        some = next(iter(self.nodes.values()))
        return some.log[:index]


class _NodeShim:
    def __init__(self, node, harness):
        self.node = node
        self.harness = harness

    def handle(self, src, msg, now):
        out = self.node.handle(src, msg, now)
        self.harness.observe(self.node)
        return out

    def tick(self, now):
        out = self.node.tick(now)
        self.harness.observe(self.node)
        return out

    def on_recover(self, now):
        self.node.crash_recover(now)


def test_five_node_cluster_elects_within_bound():
    for seed in range(20):
        h = RaftHarness(n=5, seed=seed)
        assert h.sim.run_until(lambda: h.leader() is not None, 3000)
        h.assert_election_safety()


def test_leader_crash_reelects_within_ten_timeouts():
    # 10 x the 300-tick max election timeout
    bound = 3000
    elected = []
    for seed in range(100):
        h = RaftHarness(n=5, seed=seed)
        assert h.sim.run_until(lambda: h.leader() is not None, 5000)
        first = h.leader()
        crash_at = h.sim.now
        h.net.add_crash(crash_at, crash_at + 10**9, first.node_id)
        start = h.sim.now
        assert h.sim.run_until(
            lambda: h.leader() is not None and h.leader().node_id != first.node_id,
            bound,
        ), f"seed {seed}: no new leader within {bound} ticks"
        elected.append(h.sim.now - start)
        h.assert_election_safety()
    assert max(elected) <= bound


def test_committed_entries_survive_leader_changes():
    for seed in range(25):
        h = RaftHarness(n=5, seed=seed, drop_rate=0.05)
        assert h.sim.run_until(lambda: h.leader() is not None, 5000)
        submitted = []
        for round_no in range(5):
            leader = h.leader()
            if leader is not None:
                payload = f"{seed}:{round_no}".encode()
                leader.submit(payload)
                submitted.append(payload)
            h.sim.run(200)
        # settle, then verify every majority-committed payload is on every node
        h.sim.run_until(
            lambda: h.leader() is not None
            and min(n.commit_index for n in h.nodes.values()) > 0, 4000)
        h.assert_election_safety()
        h.assert_log_matching()
        prefix = h.committed_prefix()
        committed_payloads = {e.payload for e in prefix}
        for node in h.nodes.values():
            log_payloads = {e.payload for e in node.log}
            assert committed_payloads <= log_payloads


def test_log_matching_under_partitions():
    for seed in range(15):
        h = RaftHarness(n=5, seed=seed)
        assert h.sim.run_until(lambda: h.leader() is not None, 5000)
        leader_id = h.leader().node_id
        others = [nid for nid in h.nodes if nid != leader_id]
        # isolate the leader with one follower; majority elects a new leader
        h.net.add_partition(h.sim.now, h.sim.now + 1200, {leader_id, others[0]})
        old_leader = h.nodes[leader_id]
        for i in range(3):
            old_leader.submit(f"doomed-{i}".encode())  # cannot commit: minority
        h.sim.run(1400)
        new_leader = h.leader()
        if new_leader is not None:
            new_leader.submit(b"survives")
        h.sim.run(1500)
        h.assert_election_safety()
        h.assert_log_matching()
        if new_leader is not None:
            # after heal the minority leader adopts the majority's log
            assert b"survives" in {e.payload for e in h.nodes[leader_id].log}
