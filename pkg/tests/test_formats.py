"""Pinned format vectors: canonical encodings must stay byte-stable.

Regenerate tests/data/format_vectors.json with scripts/regen_golden.py after
an intentional format change.
"""

import json
from pathlib import Path
from random import Random

from dcp import he, zkp

VECTORS = json.loads((Path(__file__).parent / "data" / "format_vectors.json").read_text())


def test_group_constants_pinned():
    params = he.test_params()
    assert hex(params.p) == VECTORS["p"]
    assert hex(params.q) == VECTORS["q"]
    assert hex(params.g) == VECTORS["g"]
    assert hex(params.h) == VECTORS["h"]
    assert params.element_bytes == VECTORS["element_bytes"]
    assert params.scalar_bytes == VECTORS["scalar_bytes"]


def test_keygen_vector():
    params = he.test_params()
    kp = he.keygen(params, Random(int(VECTORS["keygen_seed"], 16)))
    assert hex(kp.x) == VECTORS["secret_x"]
    assert hex(kp.y) == VECTORS["public_y"]


def test_encryption_vector():
    params = he.test_params()
    rng = Random(int(VECTORS["keygen_seed"], 16))
    kp = he.keygen(params, rng)
    ct = he.encrypt(kp.public_key, 5, rng)
    assert ct.to_bytes().hex() == VECTORS["enc_5_hex"]
    assert he.decrypt(kp, ct) == 5


def test_frame_and_challenge_vectors():
    from dcp import wire

    assert wire.encode(wire.ConnectRequest()).hex() == VECTORS["connect_request_frame"]
    params = he.test_params()
    got = zkp.derive_challenge(params, "dcp/v1", b"")
    assert hex(got) == VECTORS["challenge_dcp_v1_empty"]
