"""Per-replica random streams.

Replica ``r`` of stream ``s`` under base seed ``b`` always draws from
``Philox(SeedSequence(b, spawn_key=(s, r)))``. Philox is counter based and
SeedSequence spawn keys give statistically independent streams, so a
replica's draws depend only on (b, s, r) and never on how replicas are
distributed over workers.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .mpmap import Interval, MapParams

STREAM_ORIGINAL = 0
STREAM_INDUCED = 1
STREAM_ORBIT = 2
STREAM_EMPIRICAL = 3
STREAM_HITTING = 4

DEFAULT_BURN_IN = 10_000


def replica_generator(base_seed: int, replica: int, stream: int = STREAM_ORIGINAL) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(stream), int(replica)))
    return np.random.Generator(np.random.Philox(ss))


def stationary_starts(params: MapParams, base_seed: int, replicas, stream: int = STREAM_ORIGINAL,
                      burn_in: int = DEFAULT_BURN_IN):
    """One approximately mu-distributed point per replica index.

    Each replica draws a uniform start from its own stream and is pushed
    forward `burn_in` steps. Starts whose orbit lands exactly on 0 are
    redrawn from the same stream. Returns (points, restarts).
    """
    replicas = np.atleast_1d(np.asarray(replicas, dtype=np.int64))
    gens = [replica_generator(base_seed, r, stream) for r in replicas]
    x0 = np.array([g.random() for g in gens])
    pts, bad = _kernels.burn_in_batch(x0, params.alpha, int(burn_in))
    restarts = 0
    while bad.any():
        idx = np.flatnonzero(bad)
        restarts += len(idx)
        retry = np.array([gens[i].random() for i in idx])
        p2, b2 = _kernels.burn_in_batch(retry, params.alpha, int(burn_in))
        pts[idx] = p2
        bad[:] = False
        bad[idx] = b2
    return pts, restarts


def conditional_starts(params: MapParams, base_seed: int, replicas, target: Interval,
                       stream: int = STREAM_INDUCED, burn_in: int = DEFAULT_BURN_IN,
                       max_tries: int = 256):
    """mu_Y-distributed points by rejection: a burnt-in stationary draw is
    kept only if it lands in `target`; otherwise a fresh draw is made."""
    replicas = np.atleast_1d(np.asarray(replicas, dtype=np.int64))
    out = np.empty(len(replicas))
    tries = 0
    for i, r in enumerate(replicas):
        g = replica_generator(base_seed, r, stream)
        for _ in range(max_tries):
            tries += 1
            x, hit0 = _kernels.iterate(g.random(), params.alpha, int(burn_in))
            if not hit0 and target.lo <= x < target.hi:
                out[i] = x
                break
        else:
            raise RuntimeError(f"replica {r}: no start landed in {target} after {max_tries} draws")
    return out, tries
