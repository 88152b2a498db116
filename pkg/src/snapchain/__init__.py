"""Photo trading platform on a miniature permissioned ledger.

Participants register with a membership service, photographers publish priced
photos into a metadata channel, customers buy them with platform coins, and
every mutation rides the execute/order/validate pipeline: endorser peers
simulate proposals, a Raft ordering service cuts totally-ordered blocks, and
committing peers validate read/write-set versions before applying writes.
Subscribers follow photo categories with cursor-based pulls straight off the
chain.
"""

from .identity import AccessMode, Identity, Keypair, MembershipRegistry, Role
from .ledger import (
    Block,
    ChannelLedger,
    FLAG_ACCESS,
    FLAG_MVCC,
    FLAG_POLICY,
    FLAG_VALID,
    ReadWriteSet,
    Transaction,
)
from .network import ClientHandle, Network, NetworkConfig
from .ordering import BlockCutConfig
from .simnet import SimNetConfig

__all__ = [
    "AccessMode",
    "Block",
    "BlockCutConfig",
    "ChannelLedger",
    "ClientHandle",
    "FLAG_ACCESS",
    "FLAG_MVCC",
    "FLAG_POLICY",
    "FLAG_VALID",
    "Identity",
    "Keypair",
    "MembershipRegistry",
    "Network",
    "NetworkConfig",
    "ReadWriteSet",
    "Role",
    "SimNetConfig",
    "Transaction",
]
