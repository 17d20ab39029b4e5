"""
Per-report cost of hash-authenticated DL transactions against a baseline
that carries a public key and a signature instead of the secret digest.

Each sample covers one report end to end: build, encode, decode and verify.
"""
import logging
import statistics
import time
from dataclasses import dataclass

from . import codec
from .codec import Reader, Writer
from .crypto import PUBLIC_KEY_SIZE, SIGNATURE_SIZE, keygen, sign, verify
from .disco import Disco, LoadControlPolicy
from .enums import DlFlag
from .scenario import node_credentials
from .seeding import derive_bytes
from .transactions import DATA_SIZE, data_bytes, make_dl

logger = logging.getLogger(__name__)

HASH_PATH = 'hash'
SIGNATURE_PATH = 'signature'


@dataclass(frozen=True)
class SignedReport:
    """The baseline: ``PK || Data || DLFlag || Signature``."""

    public_key: bytes
    data: int
    dl_flag: DlFlag
    signature: bytes

    def encode(self):
        writer = Writer()
        writer.var(self.public_key)
        writer.var(self.data.to_bytes(DATA_SIZE, 'big'))
        writer.u8(self.dl_flag)
        writer.var(self.signature)
        return writer.getvalue()

    @classmethod
    def decode(cls, raw):
        reader = Reader(raw)
        report = cls(
            public_key=reader.var(sizes=(PUBLIC_KEY_SIZE,)),
            data=int.from_bytes(reader.var(sizes=(DATA_SIZE,)), 'big'),
            dl_flag=DlFlag(reader.u8()),
            signature=reader.var(sizes=(SIGNATURE_SIZE,)),
        )
        reader.done()
        return report


@dataclass(frozen=True)
class BenchRow:
    path: str
    samples: int
    median_ns: int
    p95_ns: int


@dataclass(frozen=True)
class BenchTable:
    rows: tuple = ()

    @property
    def ratio(self):
        """Signature-path median over hash-path median; None without both."""
        medians = {row.path: row.median_ns for row in self.rows}
        if not medians.get(HASH_PATH) or SIGNATURE_PATH not in medians:
            return None
        return medians[SIGNATURE_PATH] / medians[HASH_PATH]


def percentile(timings, fraction):
    ordered = sorted(timings)
    return ordered[min(len(ordered) - 1, int(fraction * len(ordered)))]


def _row(path, timings):
    return BenchRow(
        path=path,
        samples=len(timings),
        median_ns=int(statistics.median(timings)),
        p95_ns=percentile(timings, 0.95),
    )


def _hash_path(seed, samples, warmup):
    keypair = keygen(derive_bytes(seed, 'bench', 'disco'))
    disco = Disco(keypair, LoadControlPolicy(capacity_threshold=1))
    node = keygen(derive_bytes(seed, 'bench', 'node'))
    credentials = node_credentials(seed, 'bench-node')
    disco.register(credentials, node.public)

    timings = []
    for index in range(warmup + samples):
        start = time.perf_counter_ns()
        tx = make_dl(credentials, index, DlFlag.LOAD)
        verdict = disco.verify_dl_bytes(codec.encode(tx))
        elapsed = time.perf_counter_ns() - start
        credentials = credentials.advance()
        if not verdict:
            raise AssertionError('hash path rejected report {}: {}'.format(index, verdict.reason))
        if index >= warmup:
            timings.append(elapsed)
        # keeps memory flat across samples
        disco.pending_dl.clear()
    return timings


def _signature_path(seed, samples, warmup):
    keypair = keygen(derive_bytes(seed, 'bench', 'signer'))
    timings = []
    for index in range(warmup + samples):
        start = time.perf_counter_ns()
        payload = data_bytes(index, DlFlag.LOAD)
        report = SignedReport(keypair.public, index, DlFlag.LOAD, sign(keypair, payload))
        decoded = SignedReport.decode(report.encode())
        valid = verify(decoded.public_key, data_bytes(decoded.data, decoded.dl_flag), decoded.signature)
        elapsed = time.perf_counter_ns() - start
        if not valid:
            raise AssertionError('signature path rejected report {}'.format(index))
        if index >= warmup:
            timings.append(elapsed)
    return timings


def bench(samples, warmup=0, seed=0):
    """Time both paths over `samples` reports each; no samples gives an empty table."""
    if samples <= 0:
        return BenchTable()
    logger.info('benchmarking %d reports per path (%d warm-up)', samples, warmup)
    return BenchTable(rows=(
        _row(HASH_PATH, _hash_path(seed, samples, warmup)),
        _row(SIGNATURE_PATH, _signature_path(seed, samples, warmup)),
    ))


def table_lines(table):
    if not table.rows:
        return ['no samples']
    lines = ['{:<10} {:>8} {:>12} {:>12}'.format('path', 'samples', 'median ns', 'p95 ns')]
    lines.extend(
        '{:<10} {:>8} {:>12} {:>12}'.format(row.path, row.samples, row.median_ns, row.p95_ns)
        for row in table.rows
    )
    if table.ratio is not None:
        lines.append('signature/hash median ratio: {:.2f}'.format(table.ratio))
    return lines

