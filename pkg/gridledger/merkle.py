"""
Merkle commitment over a period's DL transactions.

Leaves are digests of the transactions' canonical encodings, a parent is
``digest(left || right)``, and the last node of an odd level is paired with
itself.
"""
from dataclasses import dataclass

from . import codec
from .codec import Tag
from .crypto import DIGEST_SIZE, Digest, digest
from .enums import Side
from .exceptions import CryptoError, EmptyTreeError, InvalidFieldError


def leaf_digest(tx):
    return digest(codec.encode(tx))


def node_digest(left, right):
    return digest(bytes(left) + bytes(right))


@codec.record(Tag.MERKLE_PROOF)
@dataclass(frozen=True)
class MerkleProof:
    leaf_index: int
    siblings: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'siblings', tuple((Digest(d), Side(s)) for d, s in self.siblings))

    def write_fields(self, writer, preimage=False):
        writer.u32(self.leaf_index)
        writer.u32(len(self.siblings))
        for sibling, side in self.siblings:
            writer.u8(side)
            writer.digest(sibling)

    @classmethod
    def read_fields(cls, reader):
        leaf_index = reader.u32()
        count = reader.u32()
        if count * (1 + DIGEST_SIZE) > reader.remaining:
            raise InvalidFieldError('{} siblings do not fit in {} bytes'.format(count, reader.remaining))
        siblings = []
        for _ in range(count):
            side = reader.u8()
            siblings.append((reader.digest(), side))
        return cls(leaf_index=leaf_index, siblings=tuple(siblings))


class MerkleTree:
    def __init__(self, levels):
        self.levels = levels

    @classmethod
    def build(cls, leaves):
        level = tuple(Digest(leaf) for leaf in leaves)
        if not level:
            raise EmptyTreeError('a Merkle tree needs at least one leaf')
        levels = [level]
        while len(level) > 1:
            level = tuple(
                node_digest(level[i], level[i + 1] if i + 1 < len(level) else level[i])
                for i in range(0, len(level), 2)
            )
            levels.append(level)
        return cls(tuple(levels))

    @property
    def leaves(self):
        return self.levels[0]

    @property
    def root(self):
        return self.levels[-1][0]

    def __len__(self):
        return len(self.leaves)

    def prove(self, index):
        if not 0 <= index < len(self.leaves):
            raise IndexError('leaf index {} out of range for {} leaves'.format(index, len(self.leaves)))
        siblings = []
        position = index
        for level in self.levels[:-1]:
            if position % 2:
                siblings.append((level[position - 1], Side.LEFT))
            else:
                partner = position + 1 if position + 1 < len(level) else position
                siblings.append((level[partner], Side.RIGHT))
            position //= 2
        return MerkleProof(leaf_index=index, siblings=tuple(siblings))


def build(leaves):
    return MerkleTree.build(leaves)


def prove(tree, index):
    return tree.prove(index)


def verify_proof(root, leaf, proof, leaf_count=None):
    """
    Replay `proof` from `leaf` and compare with `root`.

    Sibling sides must agree with the bits of `proof.leaf_index`. With
    `leaf_count` given, the index must also be inside the tree, which rules
    out proofs that point at a duplicated padding node.
    """
    if leaf_count is not None and not 0 <= proof.leaf_index < leaf_count:
        return False
    try:
        node = Digest(leaf)
        root = Digest(root)
    except CryptoError:
        return False
    position = proof.leaf_index
    for sibling, side in proof.siblings:
        expected = Side.LEFT if position % 2 else Side.RIGHT
        if side != expected:
            return False
        node = node_digest(sibling, node) if side == Side.LEFT else node_digest(node, sibling)
        position //= 2
    return position == 0 and node == root
