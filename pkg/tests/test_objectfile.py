import hashlib
import struct

import numpy as np
import pytest
from conftest import random_container

from virtobj import objectfile as of


@pytest.fixture
def container(rng):
    return random_container(rng, with_colors=True)


def test_roundtrip_structural(tmp_path, container):
    n = of.save(container, tmp_path / "a.objf")
    assert n == (tmp_path / "a.objf").stat().st_size
    back = of.load(tmp_path / "a.objf")
    assert of.structurally_equal(container, back)


def test_roundtrip_bitwise(tmp_path, container):
    of.save(container, tmp_path / "a.objf")
    blob = (tmp_path / "a.objf").read_bytes()
    assert of.to_bytes(of.from_bytes(blob)) == blob


def test_header_layout(container):
    blob = of.to_bytes(container)
    magic, version, length = struct.unpack("<4sIQ", blob[:16])
    assert magic == b"OBJF" and version == 1
    assert length == len(blob) - 16 - 8
    payload = blob[16:16 + length]
    (digest,) = struct.unpack("<Q", blob[-8:])
    assert digest == int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def test_bad_magic(container):
    blob = bytearray(of.to_bytes(container))
    blob[:4] = b"XXXX"
    with pytest.raises(of.BadMagicError):
        of.from_bytes(bytes(blob))


def test_bad_version(container):
    blob = bytearray(of.to_bytes(container))
    blob[4:8] = struct.pack("<I", 999)
    with pytest.raises(of.UnsupportedVersionError):
        of.from_bytes(bytes(blob))


def test_flipped_byte(container, rng):
    blob = of.to_bytes(container)
    for pos in rng.integers(16, len(blob) - 8, 10):
        bad = bytearray(blob)
        bad[pos] ^= 0x01
        with pytest.raises(of.ChecksumError):
            of.from_bytes(bytes(bad))


def test_truncated(container):
    blob = of.to_bytes(container)
    with pytest.raises(of.TruncatedFileError):
        of.from_bytes(blob[:-3])
    with pytest.raises(of.TruncatedFileError):
        of.from_bytes(blob[:10])


def test_errors_are_distinct():
    kinds = {of.BadMagicError, of.UnsupportedVersionError, of.ChecksumError, of.InconsistentContainerError}
    assert len(kinds) == 4
    assert all(issubclass(k, of.ObjectFileError) for k in kinds)


def test_inconsistent_rejected_on_save(container, tmp_path):
    import dataclasses

    from virtobj.geometry import SurfaceToHexMap

    smap = container.surface_map
    broken = SurfaceToHexMap(smap.indices[:-1], smap.weights[:-1])
    bad = dataclasses.replace(container, modal=dataclasses.replace(container.modal, surface_map=broken))
    with pytest.raises(of.InconsistentContainerError):
        of.save(bad, tmp_path / "x.objf")


def test_loaded_is_synthesis_ready(container, tmp_path):
    from virtobj.modal import synthesize_impact

    of.save(container, tmp_path / "a.objf")
    back = of.load(tmp_path / "a.objf")
    sig = synthesize_impact(back.modal, 0, (0, 0, 1), duration=0.05)
    ref = synthesize_impact(container.modal, 0, (0, 0, 1), duration=0.05)
    np.testing.assert_array_equal(sig.samples, ref.samples)


def test_unknown_section_skipped(container):
    blob = of.to_bytes(container)
    _, _, length = struct.unpack("<4sIQ", blob[:16])
    payload = blob[16:16 + length] + b"XTRA" + struct.pack("<Q", 3) + b"abc"
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    patched = struct.pack("<4sIQ", b"OBJF", 1, len(payload)) + payload + digest
    assert of.structurally_equal(of.from_bytes(patched), container)


def test_storage_report_fields(container):
    rep = of.storage_report(container)
    assert rep["container_bytes"] == len(of.to_bytes(container))
    assert rep["audio_dump_bytes"] == container.hex_mesh.n_nodes * 3 * 132300 * 4
