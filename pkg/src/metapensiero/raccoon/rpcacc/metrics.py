# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- timing and cpu cycle accounting
# :Created:   sab 17 ott 2026 15:40:17 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

from dataclasses import asdict, dataclass, fields
import math


@dataclass
class Timing:
    """Simulated nanoseconds split by where they are spent."""

    host_ns: float = 0.0
    device_ns: float = 0.0
    link_ns: float = 0.0

    def __add__(self, other):
        return Timing(self.host_ns + other.host_ns,
                      self.device_ns + other.device_ns,
                      self.link_ns + other.link_ns)

    @property
    def total(self):
        return self.host_ns + self.device_ns + self.link_ns

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class HostConfig:
    """Costs of the work done by the host CPU."""

    copy_bytes_per_ns: float = 16.0
    field_visit_ns: float = 2.0
    encode_field_ns: float = 25.0
    encode_ns_per_byte: float = 0.25
    auth_ns: float = 500.0
    compress_ns_per_byte: float = 1.0
    crypt_ns_per_byte: float = 0.5


@dataclass(frozen=True)
class AccelConfig:
    """Clock and datapath width of the accelerator."""

    clock_mhz: float = 250.0
    bytes_per_cycle: int = 64

    @property
    def cycle_ns(self):
        return 1000.0 / self.clock_mhz

    def cycles_for(self, nbytes):
        "Cycles needed to stream `nbytes` through the datapath."
        return math.ceil(nbytes / self.bytes_per_cycle)

    def ns_for(self, cycles):
        return cycles * self.cycle_ns


@dataclass
class CpuCycleProxy:
    """Counters standing in for the CPU cycles spent serializing.

    Bytes copied by the memcpy engine cost nothing to the CPU.
    """

    bytes_copied_by_cpu: int = 0
    bytes_copied_by_memcpy_engine: int = 0
    encode_ops_on_cpu: int = 0
    encoded_bytes_on_cpu: int = 0
    fields_visited: int = 0
    largest_cpu_copy: int = 0

    def copy(self, nbytes, threshold, offload=True):
        """Account a copy of `nbytes`, given to the memcpy engine when
        `offload` is on and the copy isn't smaller than `threshold`."""
        if offload and nbytes >= threshold:
            self.bytes_copied_by_memcpy_engine += nbytes
        else:
            self.bytes_copied_by_cpu += nbytes
            self.largest_cpu_copy = max(self.largest_cpu_copy, nbytes)

    def encode(self, nbytes):
        self.encode_ops_on_cpu += 1
        self.encoded_bytes_on_cpu += nbytes

    def cpu_ns(self, host):
        "Nanoseconds of CPU time under the `host` costs."
        return (self.fields_visited * host.field_visit_ns +
                self.bytes_copied_by_cpu / host.copy_bytes_per_ns +
                self.encode_ops_on_cpu * host.encode_field_ns +
                self.encoded_bytes_on_cpu * host.encode_ns_per_byte)

    def __add__(self, other):
        values = {f.name: getattr(self, f.name) + getattr(other, f.name)
                  for f in fields(self)}
        values['largest_cpu_copy'] = max(self.largest_cpu_copy,
                                         other.largest_cpu_copy)
        return CpuCycleProxy(**values)

    def as_dict(self):
        return asdict(self)


def geomean(values):
    "Geometric mean of positive `values`, ``0.0`` when empty."
    values = [v for v in values]
    if not values:
        return 0.0
    return math.exp(sum(math.log(v) for v in values) / len(values))
