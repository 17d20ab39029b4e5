"""
Seed derivation for reproducible runs.

Every random stream in a scenario is a `random.Random` seeded from the
scenario seed and a label, so adding a participant or an adversary never
shifts the draws of another component.
"""
import hashlib
import random


def derive_seed(seed, *labels):
    material = ':'.join([str(seed)] + [str(label) for label in labels]).encode('utf-8')
    return int.from_bytes(hashlib.sha256(material).digest()[:8], 'big')


def derive_bytes(seed, *labels, size=32):
    material = ':'.join([str(seed)] + [str(label) for label in labels]).encode('utf-8')
    out = b''
    counter = 0
    while len(out) < size:
        out += hashlib.sha256(material + counter.to_bytes(4, 'big')).digest()
        counter += 1
    return out[:size]


def rng_for(seed, *labels):
    return random.Random(derive_seed(seed, *labels))
