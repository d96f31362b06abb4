# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- simulation reports
# :Created:   lun 19 ott 2026 14:12:20 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

"""Per request rows and aggregates of a run, emitted as JSON or CSV.

The CSV file has one row per request with the columns listed in
:data:`CSV_FIELDS`; times are in simulated nanoseconds.
"""

import csv
from dataclasses import dataclass, field
import io
import json

from .interconnect import LedgerSnapshot, TxnKind
from .metrics import CpuCycleProxy, geomean


CSV_FIELDS = (
    'run', 'request_id', 'config', 'strategy', 'start_ns', 'end_ns',
    'elapsed_ns', 'host_ns', 'device_ns', 'link_ns', 'moves',
    'request_bytes', 'response_bytes', 'dma_reads', 'dma_writes',
    'mmio_writes', 'link_bytes', 'cpu_ns', 'bytes_copied_by_cpu',
    'bytes_copied_by_memcpy_engine', 'encode_ops_on_cpu',
)


@dataclass
class RequestRow:
    """Measurements of one request."""

    request_id: int
    config: str
    strategy: str
    start_ns: float = 0.0
    end_ns: float = 0.0
    host_ns: float = 0.0
    device_ns: float = 0.0
    link_ns: float = 0.0
    moves: int = 0
    request_bytes: int = 0
    response_bytes: int = 0
    cpu_ns: float = 0.0
    run: str = ''
    ledger: LedgerSnapshot = field(default_factory=LedgerSnapshot.empty)
    cpu: CpuCycleProxy = field(default_factory=CpuCycleProxy)

    @property
    def elapsed_ns(self):
        return self.end_ns - self.start_ns

    def add_timing(self, timing):
        self.host_ns += timing.host_ns
        self.device_ns += timing.device_ns
        self.link_ns += timing.link_ns

    def as_dict(self):
        return {
            'run': self.run,
            'request_id': self.request_id,
            'config': self.config,
            'strategy': self.strategy,
            'start_ns': self.start_ns,
            'end_ns': self.end_ns,
            'elapsed_ns': self.elapsed_ns,
            'host_ns': self.host_ns,
            'device_ns': self.device_ns,
            'link_ns': self.link_ns,
            'moves': self.moves,
            'request_bytes': self.request_bytes,
            'response_bytes': self.response_bytes,
            'cpu_ns': self.cpu_ns,
            'ledger': self.ledger.as_dict(),
            'cpu': self.cpu.as_dict(),
        }

    def csv_row(self):
        row = self.as_dict()
        row.update(self.cpu.as_dict())
        row['dma_reads'] = self.ledger[TxnKind.DMA_READ].count
        row['dma_writes'] = self.ledger[TxnKind.DMA_WRITE].count
        row['mmio_writes'] = self.ledger[TxnKind.MMIO_WRITE].count
        row['link_bytes'] = self.ledger.link_bytes
        return {k: row[k] for k in CSV_FIELDS}


class SimReport:
    """The outcome of a run or of a scenario.

    :param str name: the run or scenario name
    :param rows: the :class:`RequestRow` instances
    :param ledger: the final :class:`~.interconnect.LedgerSnapshot`
    :param dict alloc: allocation statistics
    :param dict extra: scenario specific data
    """

    def __init__(self, name, rows=(), ledger=None, alloc=None, extra=None):
        self.name = name
        self.rows = list(rows)
        self.ledger = ledger if ledger is not None else LedgerSnapshot.empty()
        self.alloc = alloc or {}
        self.extra = extra or {}
        self.criterion = None
        self.passed = None

    def __repr__(self):
        return '<{cname} {name}, {n} rows>'.format(
            cname=type(self).__name__, name=self.name, n=len(self.rows))

    def __len__(self):
        return len(self.rows)

    def set_verdict(self, criterion, passed):
        self.criterion = criterion
        self.passed = bool(passed)

    def verdict(self):
        "The pass/fail line."
        return '{state} {name}: {criterion}'.format(
            state='PASS' if self.passed else 'FAIL', name=self.name,
            criterion=self.criterion)

    def merge(self, other, run=None):
        """Append the rows of `other`, tagging them with `run`, and sum the
        ledgers."""
        for row in other.rows:
            if run is not None:
                row.run = run
            self.rows.append(row)
        self.ledger = self.ledger + other.ledger

    def aggregates(self):
        "Figures recomputed from the rows."
        elapsed = [r.elapsed_ns for r in self.rows]
        count = len(elapsed)
        span = (max(r.end_ns for r in self.rows) -
                min(r.start_ns for r in self.rows)) if count else 0.0
        link = LedgerSnapshot.empty()
        for r in self.rows:
            link = link + r.ledger
        return {
            'requests': count,
            'total_elapsed_ns': sum(elapsed),
            'mean_elapsed_ns': sum(elapsed) / count if count else 0.0,
            'geomean_elapsed_ns': geomean(e for e in elapsed if e > 0),
            'throughput_rps': count / span * 1e9 if span else 0.0,
            'moves': sum(r.moves for r in self.rows),
            'link_bytes': link.link_bytes,
            'link_events': link.events,
        }

    def as_dict(self):
        return {
            'name': self.name,
            'rows': [r.as_dict() for r in self.rows],
            'aggregates': self.aggregates(),
            'ledger': self.ledger.as_dict(),
            'alloc': self.alloc,
            'extra': self.extra,
            'criterion': self.criterion,
            'passed': self.passed,
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def to_csv(self):
        out = io.StringIO()
        writer = csv.DictWriter(out, fieldnames=CSV_FIELDS,
                                lineterminator='\n')
        writer.writeheader()
        for r in self.rows:
            writer.writerow(r.csv_row())
        return out.getvalue()

    def write_json(self, path):
        with open(path, 'w', encoding='utf-8') as f:
            f.write(self.to_json())
            f.write('\n')

    def write_csv(self, path):
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(self.to_csv())
