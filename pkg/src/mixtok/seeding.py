import hashlib


def derive_seed(master: int, *parts) -> int:
    """Stable 63-bit seed for one (stage, item) under a master seed.

    Each stage hashes its own name, so adding a stage never shifts another stage's seeds.
    """
    h = hashlib.blake2b(repr((int(master),) + tuple(parts)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little") >> 1
