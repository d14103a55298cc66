import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pufkeys import bits as B  # noqa: E402
from pufkeys.protocols.pool import Provenance  # noqa: E402
from pufkeys.sim.topology import TopologyConfig, TopologyMode, build_topology  # noqa: E402

DATA = Path(__file__).parent / "data"

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def star(users=("alice", "bob", "charlie"), db_size=32, seed=1, **kw):
    return build_topology(TopologyConfig(TopologyMode.STAR, tuple(users), db_size, **kw), seed)


def mesh(users=("alice", "bob", "charlie"), db_size=32, seed=1, **kw):
    return build_topology(TopologyConfig(TopologyMode.FULL_MESH, tuple(users), db_size, **kw), seed)


def share_bits(a, b, bits, label="test"):
    """Give two actors the same pool material without running a protocol."""
    a.pool(b.actor_id).deposit(bits, Provenance.PUF_DERIVED, label)
    b.pool(a.actor_id).deposit(bits.copy(), Provenance.PUF_DERIVED, label)


def random_shared(a, b, n, seed=0):
    share_bits(a, b, B.random_bits(np.random.default_rng(seed), n))


def entity_auth_nonces(net, cfg, seed, verifier="kdc", prover="alice"):
    """One key lifetime of pooled entity authentication; returns the nonces issued.

    Runs on the direct runner with a fresh l-use key, so it is cheap enough
    to repeat thousands of times on one network.
    """
    from pufkeys import api
    from pufkeys.mac import key_material_bits
    from pufkeys.protocols.parties import AuthVerifier
    from pufkeys.protocols.session import OutcomeKind

    policy = cfg.entity
    v, p = net.actors[verifier], net.actors[prover]
    for actor in (v, p):
        actor.pools.clear()
        actor.auth_states.clear()
    random_shared(v, p, key_material_bits(policy.w, policy.l), seed)
    ctx = api.DirectContext(net.actors, cfg, seed)
    nonces = []
    for _ in range(policy.l):
        parties = api.run_direct(ctx, AuthVerifier(ctx, v, prover, ctx.new_session_id()))
        assert parties[verifier].outcome.kind is OutcomeKind.AUTHENTICATED
        nonces.append(B.to_bytes(parties[verifier].s))
    return nonces


def colliding_pairs(values) -> int:
    from collections import Counter

    return sum(c * (c - 1) // 2 for c in Counter(values).values())
