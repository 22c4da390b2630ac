import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from heavytail_ldp.rng import (block_sizes, concat_blocks, record_streams, run_blocks, single_stream,
                               stream, tag_id)


def _normals(g, m):
    return g.standard_normal(m)


@given(st.integers(0, 10**6), st.integers(1, 5000))
def test_block_sizes_partition(total, block):
    sizes = block_sizes(total, block)
    assert sum(sizes) == total
    assert all(0 < s <= block for s in sizes)


def test_tag_id_is_stable():
    # fixed across interpreter runs, unlike the builtin string hash
    assert tag_id("cycles") == tag_id("cycles")
    assert tag_id("cycles") != tag_id("cycles2")
    assert 0 <= tag_id("x") < 2**63


def test_streams_are_distinct():
    a = stream(1, "t", 0).random(4)
    b = stream(1, "t", 1).random(4)
    c = stream(2, "t", 0).random(4)
    d = stream(1, "u", 0).random(4)
    assert len({tuple(x) for x in (a, b, c, d)}) == 4
    np.testing.assert_array_equal(a, stream(1, "t", 0).random(4))


def test_worker_count_does_not_change_results():
    one = concat_blocks(run_blocks(_normals, 3, "w", 20_000, block=1000, workers=1))
    many = concat_blocks(run_blocks(_normals, 3, "w", 20_000, block=1000, workers=5))
    np.testing.assert_array_equal(one, many)
    assert one.size == 20_000


def test_concat_tuples():
    out = concat_blocks(run_blocks(lambda g, m: (np.zeros(m), np.ones(m)), 0, "t", 10, block=4))
    assert out[0].shape == (10,) and out[1].sum() == 10


def test_ledger_records_calls():
    with record_streams() as ledger:
        run_blocks(_normals, 7, "first", 9000, block=4096)
        single_stream(7, "second")
    assert ledger == [{"tag": "first", "seed": 7, "total": 9000, "blocks": 3},
                      {"tag": "second", "seed": 7, "total": 1, "blocks": 1}]
    run_blocks(_normals, 7, "outside", 10)
    assert len(ledger) == 2
