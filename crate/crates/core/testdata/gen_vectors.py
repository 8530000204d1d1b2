#!/usr/bin/env python3
"""Regenerates vectors.json from independent implementations.

Uses only the Python stdlib and the `cryptography` package, so the frozen
bytes do not depend on the Rust code they check.
"""
import hashlib
import hmac
import json
import struct

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms
from cryptography.hazmat.primitives.ciphers.aead import AESSIV
from cryptography.hazmat.primitives import serialization


def chacha_stream(seed: bytes, n: int) -> bytes:
    enc = Cipher(algorithms.ChaCha20(seed, b"\x00" * 16), mode=None).encryptor()
    return enc.update(b"\x00" * n)


def h(key, *parts):
    return hmac.new(key, b"".join(parts), hashlib.sha256).digest()


def prf(idx, key, data):
    return h(key, bytes([idx]), data)[: len(key)]


def keyed_hash(key, msg):
    return h(key, b"\x00", msg)[: len(key)]


def expand(key, label, n):
    out, ctr = b"", 1
    while len(out) < n:
        out += h(key, b"ssebc-expand|", label, bytes([ctr]))
        ctr += 1
    return out[:n]


def det_encrypt(key, pt):
    return AESSIV(expand(key, b"siv", 64)).encrypt(pt, None)


def pk_of(seed):
    sk = Ed25519PrivateKey.from_private_bytes(seed)
    return sk, sk.public_key().public_bytes(
        serialization.Encoding.Raw, serialization.PublicFormat.Raw
    )


def u32(x):
    return struct.pack("<I", x)


def u64(x):
    return struct.pack("<Q", x)


def blob(b):
    return u32(len(b)) + b


def sample_body(pk):
    body = b"\x01" + u32(1) + blob(b"\x11" * 32) + u32(0)
    body += u32(1) + u64(50) + b"\x01" + pk + b"\x01" + blob(b"hello")
    body += b"\x01" + u64(7)
    return body


def bundle(bits, seed):
    n = bits // 8
    stream = chacha_stream(seed, 2 * n)
    k1, k2 = stream[:n], stream[n:]
    words = ["w", "", "alpha"]
    entry = {
        "bits": bits,
        "seed": seed.hex(),
        "k1": k1.hex(),
        "k2": k2.hex(),
        "keywords": [],
        "chain_key_p256": prf(2, k2, b"\x00" * 32).hex(),
    }
    for w in words:
        wb = w.encode()
        t, l, k = prf(1, k2, wb), prf(2, k2, wb), prf(3, k2, wb)
        entry["keywords"].append(
            {
                "keyword": w,
                "t": t.hex(),
                "l": l.hex(),
                "k": k.hex(),
                "h_empty": keyed_hash(k, b"").hex(),
                "h_hello": keyed_hash(k, b"hello").hex(),
                "det_list": det_encrypt(l, b"\x00" * 64).hex(),
            }
        )
    return entry


def main():
    seed_a = bytes(range(32))
    seed_b = bytes(range(1, 33))
    sk, pk = pk_of(b"\x01" * 32)
    body = sample_body(pk)
    vectors = {
        "version": 1,
        "bundles": [bundle(256, seed_a), bundle(256, seed_b), bundle(128, seed_a)],
        "signature": {
            "seed": (b"\x01" * 32).hex(),
            "public": pk.hex(),
            "message": "6d657373616765",
            "signature": sk.sign(b"message").hex(),
        },
        "sample_tx": {
            "signer_seed": (b"\x01" * 32).hex(),
            "body": body.hex(),
            "txid_p256": hashlib.sha256(body).hexdigest(),
            "txid_p128": hashlib.sha256(body).hexdigest()[:32],
        },
    }
    with open(__file__.replace("gen_vectors.py", "vectors.json"), "w") as f:
        json.dump(vectors, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
