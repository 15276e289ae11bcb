import numpy as np
import numpy.testing as npt
import pytest
from scipy import stats

from acoustic_rte import _kernels
from acoustic_rte.rng import ParticleStreams, child_stream_id

BACKENDS = _kernels.available_backends()

# published Philox-4x32-10 known-answer vectors
KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


def test_compiled_backend_built():
    assert "cython" in BACKENDS
    assert _kernels.backend() == "cython"


@pytest.mark.parametrize("name", BACKENDS)
@pytest.mark.parametrize("ctr, key, expected", KAT)
def test_philox_known_answers(name, ctr, key, expected):
    with _kernels.using_backend(name):
        out = _kernels.philox4x32(np.array([ctr], np.uint32), np.array([key], np.uint32))
    npt.assert_array_equal(np.asarray(out).ravel(), expected)


def test_backends_bit_identical():
    rng = np.random.default_rng(0)
    ids = rng.integers(0, 2 ** 63, 5000, dtype=np.uint64)
    blocks = rng.integers(0, 2 ** 40, 5000, dtype=np.uint64)
    idx = rng.integers(0, 97, 20000)
    w = rng.random(20000)
    results = {}
    for name in BACKENDS:
        with _kernels.using_backend(name):
            results[name] = (_kernels.uniform_pairs(2 ** 64 - 1, ids, blocks.copy()),
                             _kernels.accumulate(idx, w, 97))
    ref = results[BACKENDS[0]]
    for name in BACKENDS[1:]:
        npt.assert_array_equal(results[name][0], ref[0])
        npt.assert_array_equal(results[name][1], ref[1])


def test_using_backend_restores():
    before = _kernels.backend()
    with _kernels.using_backend("python"):
        assert _kernels.backend() == "python"
    assert _kernels.backend() == before
    with pytest.raises(ValueError):
        _kernels.set_backend("fortran")


def test_uniforms_open_interval_and_uniform():
    s = ParticleStreams(123)
    ids = np.arange(100_000, dtype=np.uint64)
    blocks = np.zeros_like(ids)
    u = s.pairs(ids, blocks)
    assert np.all((u > 0.0) & (u < 1.0))
    npt.assert_array_equal(blocks, 1)
    assert stats.kstest(u[:, 0], "uniform").pvalue > 0.01
    assert stats.kstest(u[:, 1], "uniform").pvalue > 0.01
    assert abs(np.corrcoef(u[:, 0], u[:, 1])[0, 1]) < 0.02


def test_streams_independent_of_grouping():
    s = ParticleStreams(5)
    ids = np.arange(10, dtype=np.uint64)
    blocks = np.zeros_like(ids)
    whole = [s.pairs(ids, blocks) for _ in range(3)]
    for i in range(10):
        b = np.zeros(1, np.uint64)
        for j in range(3):
            npt.assert_array_equal(s.pairs(ids[i:i + 1], b)[0], whole[j][i])


def test_pairs_at_advances_subset_only():
    s = ParticleStreams(5)
    ids = np.arange(6, dtype=np.uint64)
    blocks = np.zeros_like(ids)
    s.pairs_at(ids, blocks, np.array([1, 4]))
    npt.assert_array_equal(blocks, [0, 1, 0, 0, 1, 0])


def test_seed_range_and_child_ids():
    with pytest.raises(ValueError):
        ParticleStreams(-1)
    with pytest.raises(ValueError):
        ParticleStreams(2 ** 64)
    parent = np.arange(1000, dtype=np.uint64)
    kids = np.concatenate([child_stream_id(parent, j) for j in range(1, 4)])
    assert len(np.unique(kids)) == kids.size
    assert not np.isin(kids, parent).any()


def test_accumulate_matches_bincount():
    idx = np.array([0, 2, 2, 5])
    w = np.array([1.0, 0.5, 0.25, 2.0])
    for name in BACKENDS:
        with _kernels.using_backend(name):
            npt.assert_array_equal(_kernels.accumulate(idx, w, 6), np.bincount(idx, w, minlength=6))
