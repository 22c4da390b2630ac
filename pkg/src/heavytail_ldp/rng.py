"""Counter-based random streams and order-stable replication runners.

Every Monte Carlo estimator in the package draws its randomness from
Philox streams keyed by ``(seed, tag, block index)``.  Replications are
grouped in fixed-size blocks, so block ``b`` always receives the same
stream no matter which worker executes it, and results are concatenated
in block order.  Numeric output is therefore independent of the worker
count.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Callable, Sequence

import numpy as np

DEFAULT_BLOCK = 4096

_ledgers: list[list] = []


@contextmanager
def record_streams():
    """Collect ``{"tag", "seed", "total", "blocks"}`` for every :func:`run_blocks` call inside the block."""
    ledger: list = []
    _ledgers.append(ledger)
    try:
        yield ledger
    finally:
        _ledgers.remove(ledger)


def tag_id(tag: str) -> int:
    """Stable 63-bit integer for a stream tag (independent of PYTHONHASHSEED)."""
    digest = hashlib.blake2b(tag.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def stream(seed: int, tag: str = "", index: int = 0) -> np.random.Generator:
    """Generator for replication block ``index`` of stream family ``tag``."""
    ss = np.random.SeedSequence([int(seed), tag_id(tag), int(index)])
    return np.random.Generator(np.random.Philox(ss))


def single_stream(seed: int, tag: str) -> np.random.Generator:
    """One unblocked stream, noted in any active ledger."""
    for ledger in _ledgers:
        ledger.append({"tag": tag, "seed": int(seed), "total": 1, "blocks": 1})
    return stream(seed, tag, 0)


def block_sizes(total: int, block: int = DEFAULT_BLOCK) -> list[int]:
    if total <= 0:
        return []
    full, rest = divmod(int(total), int(block))
    return [block] * full + ([rest] if rest else [])


def run_blocks(
    fn: Callable[[np.random.Generator, int], object],
    seed: int,
    tag: str,
    total: int,
    *,
    block: int = DEFAULT_BLOCK,
    workers: int = 1,
) -> list:
    """Run ``fn(gen, count)`` over replication blocks; results in block order.

    ``fn`` must only use the generator it is handed.  Kernels release the GIL,
    so a thread pool gives real parallelism without pickling.
    """
    sizes = block_sizes(total, block)
    for ledger in _ledgers:
        ledger.append({"tag": tag, "seed": int(seed), "total": int(total), "blocks": len(sizes)})
    jobs = [(stream(seed, tag, i), m) for i, m in enumerate(sizes)]
    if workers <= 1 or len(jobs) <= 1:
        return [fn(g, m) for g, m in jobs]
    with ThreadPoolExecutor(max_workers=int(workers)) as pool:
        futures = [pool.submit(fn, g, m) for g, m in jobs]
        return [f.result() for f in futures]


def concat_blocks(results: Sequence, axis: int = 0):
    """Concatenate per-block arrays (or tuples of arrays) in block order."""
    if not results:
        raise ValueError("no blocks to concatenate")
    first = results[0]
    if isinstance(first, tuple):
        return tuple(np.concatenate([r[i] for r in results], axis=axis) for i in range(len(first)))
    return np.concatenate(list(results), axis=axis)
