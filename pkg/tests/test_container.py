import io
import struct
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

import qcarray as q
from qcarray.container import ContainerFormatError, MAGIC, open_container
from qcarray.pipeline import compress_to, encode_array, synopsis_array

from conftest import random_values, smooth_field


@pytest.fixture
def sample(rng):
    x = random_values(rng, (70, 45), "int16", 300)
    return x, q.compress_array(x, (16, 16), 2)


def test_round_trip_schema_and_bounds(sample):
    x, blob = sample
    h = open_container(blob)
    assert h.schema.logical_dims == (70, 45)
    assert h.schema.chunk_dims == (16, 16)
    assert h.schema.value_type == "int16"
    assert h.bounds.root == (int(x.min()), int(x.max()))
    schema, tb, nbits, chunks = encode_array(x, (16, 16), 2)
    assert h.schema == schema and h.tree_bytes == tb and h.tree_bits == nbits
    assert [h.read_chunk(c).data for c in range(schema.num_chunks)] == [c.data for c in chunks]


def test_accounting(sample):
    _, blob = sample
    h = open_container(blob)
    assert h.header_size + sum(e.length for e in h.directory) == len(blob)


def test_open_reads_header_only(rng):
    sizes = []
    for shape in ((64, 64), (256, 256)):
        blob = q.compress_array(random_values(rng, shape, "uint8"), (64, 64), 3)
        h = open_container(blob)
        assert h.bytes_read == h.header_size and h.chunks_read == 0
        sizes.append(h.header_size)
    assert sizes[0] < sizes[1] < len(blob) // 10


def test_all_zero_array():
    x = np.zeros((10, 10), np.uint8)
    h = open_container(q.compress_array(x, (8, 8), 1))
    assert h.bounds.root == (0, 0)
    assert not q.decompress_array(h).any()


def test_sources_path_file_bytes(tmp_path, sample):
    x, blob = sample
    path = tmp_path / "a.scow"
    n = compress_to(path, x, chunk_dims=(16, 16), level=2)
    assert n == len(blob) and path.read_bytes() == blob
    assert (q.decompress_array(str(path)) == x).all()
    assert (q.decompress_array(io.BytesIO(blob)) == x).all()
    with open(path, "rb") as fh:
        assert (q.decompress_array(fh) == x).all()


def test_concurrent_chunk_reads(tmp_path, sample):
    x, blob = sample
    path = tmp_path / "a.scow"
    path.write_bytes(blob)
    with open_container(path) as h:
        ids = list(range(h.schema.num_chunks)) * 8
        with ThreadPoolExecutor(6) as pool:
            got = list(pool.map(lambda c: h.read_chunk(c).data, ids))
        assert got == [h.read_chunk(c).data for c in ids]
        assert h.chunks_read == 2 * len(ids)


def test_bad_magic_version_truncation(sample):
    _, blob = sample
    with pytest.raises(ContainerFormatError, match="magic"):
        open_container(b"XXXX" + blob[4:])
    with pytest.raises(ContainerFormatError, match="version"):
        open_container(blob[:4] + b"\x02" + blob[5:])
    with pytest.raises(ContainerFormatError):
        open_container(blob[:20])
    with pytest.raises(ContainerFormatError):
        open_container(blob[:-1])
    with pytest.raises(ContainerFormatError):
        open_container(blob + b"\x00")
    with pytest.raises(ContainerFormatError):
        open_container(blob[:9] + b"\x01" + blob[10:])   # padding beyond one chunk


def test_chunk_checksum(sample):
    _, blob = sample
    h = open_container(blob)
    e = h.directory[3]
    bad = bytearray(blob)
    bad[e.offset + e.length // 2] ^= 0x10
    h = open_container(bytes(bad))
    with pytest.raises(ContainerFormatError, match="checksum"):
        h.read_chunk(3)
    with pytest.raises(IndexError):
        h.read_chunk(len(h.directory))


def test_header_layout(sample):
    _, blob = sample
    magic, version, vtype, m, level, flags = struct.unpack_from("<4sBBBBB", blob)
    assert (magic, version, vtype, m, level, flags) == (MAGIC, 1, 3, 2, 2, 1)
    assert struct.unpack_from("<6Q", blob, 9) == (70, 45, 80, 48, 16, 16)


def test_synopsis_constant_and_tiled(rng):
    h = open_container(q.compress_array(np.full((48, 32), 7, np.uint8), (16, 16), 2))
    assert (h.synopsis() == 7).all()
    x = smooth_field(128)
    blob = q.compress_array(x, (32, 32), 3)
    h = open_container(blob)
    assert (h.synopsis() == synopsis_array(x, h.schema)).all()


@pytest.mark.parametrize("br", [False, True])
def test_synopsis_reads_prefix_only(rng, br):
    x = random_values(rng, (128, 128), "uint8", 60)
    h = open_container(q.compress_array(x, (64, 64), 3, bit_reduction=br))
    for c in range(h.schema.num_chunks):
        h.reset_counters()
        h.read_synopsis(c)
        assert h.bytes_read < h.directory[c].length // 4
        assert h.chunks_read == 0


def test_deterministic(rng):
    x = random_values(rng, (100, 60), "int32", 10_000)
    assert q.compress_array(x, (32, 32), 3) == q.compress_array(x, (32, 32), 3, threads=4)
