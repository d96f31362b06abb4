# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- simulation context
# :Created:   mar 16 feb 2016 18:10:22 CET
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2016, 2017, 2018, 2026 Alberto Berti
#

import configparser
import logging


logger = logging.getLogger(__name__)

undefined = object()

MiB = 1 << 20

# key: (type, default); a None default means "taken from elsewhere", like
# the link profile for the link parameters
DEFAULTS = {
    'link.profile': (str, 'pcie'),
    'link.latency_ns': (float, None),
    'link.bandwidth_gbps': (float, None),
    'link.max_txn_payload': (int, 4096),
    'link.per_txn_overhead_ns': (float, 0.0),
    'link.mmio_write_ns': (float, None),
    'memory.chunk_size': (int, 4096),
    'memory.host_pool_bytes': (int, 64 * MiB),
    'memory.accel_pool_bytes': (int, 64 * MiB),
    'memory.tlb_entries': (int, 16384),
    'memory.tlb_miss_penalty_ns': (float, None),
    'deserializer.lanes': (int, 4),
    'deserializer.temp_capacity': (int, 4096),
    'deserializer.max_depth': (int, 64),
    'deserializer.dispatch_record_bytes': (int, 64),
    'deserializer.mode': (str, 'one-shot'),
    'serializer.strategy': (str, 'memory-affinity'),
    'serializer.memcpy_threshold': (int, 512),
    'serializer.memcpy_offload': (bool, True),
    'serializer.encoding_offload': (bool, True),
    'host.copy_bytes_per_ns': (float, 16.0),
    'host.field_visit_ns': (float, 2.0),
    'host.encode_field_ns': (float, 25.0),
    'host.encode_ns_per_byte': (float, 0.25),
    'host.auth_ns': (float, 500.0),
    'host.compress_ns_per_byte': (float, 1.0),
    'host.crypt_ns_per_byte': (float, 0.5),
    'accel.clock_mhz': (float, 250.0),
    'accel.bytes_per_cycle': (int, 64),
    'cu.count': (int, 1),
    'cu.kernel': (str, 'identity'),
    'cu.kernel_throughput_bytes_per_ns': (float, 8.0),
    'cu.reprogram_us': (float, 100.0),
    'cu.ring_entries': (int, 64),
    'runtime.auto_update': (bool, True),
    'pipeline.inflight': (int, 1),
}


class ConfigError(Exception):
    """Error raised for unknown configuration keys or bad values."""


def coerce(key, value):
    """Convert `value` to the type of the configuration `key`.

    :raises ConfigError: if the key is unknown or the value doesn't convert
    """
    try:
        type_, _ = DEFAULTS[key]
    except KeyError:
        raise ConfigError("Unknown configuration key {key!r}".format(
            key=key)) from None
    if value is None:
        return None
    if type_ is bool:
        if isinstance(value, str):
            try:
                return configparser.ConfigParser.BOOLEAN_STATES[value.lower()]
            except KeyError:
                raise ConfigError("Invalid boolean {value!r} for {key}".format(
                    value=value, key=key)) from None
        return bool(value)
    try:
        return type_(value)
    except (TypeError, ValueError):
        raise ConfigError("Invalid value {value!r} for {key}".format(
            value=value, key=key)) from None


class SimContext:
    """
    The configuration of a simulation, keys being dotted names like
    ``link.latency_ns``.

    A context created directly holds the defaults; :meth:`new` derives a
    context overriding some keys and inheriting the others.
    """

    CONFIG_KEYS = sorted(DEFAULTS)

    def __init__(self, values=None):
        self._parent_context = None
        for key, (_, default) in DEFAULTS.items():
            self.__dict__[key] = default
        if values:
            self.update(values)

    def __contains__(self, item):
        return getattr(self, item, undefined) is not undefined

    def __getattr__(self, name):
        ctx = self._parent_context
        while ctx:
            value = ctx.__dict__.get(name, undefined)
            if value is not undefined:
                break
            ctx = ctx._parent_context
        else:
            raise AttributeError(
                ("This {self_cname} has no attribute {name!r}").format(
                    name=name, self_cname=type(self).__name__))
        return value

    def __getitem__(self, item):
        try:
            return getattr(self, item)
        except AttributeError:
            raise KeyError("Invalid key {item!r}".format(item=item))

    def __iter__(self):
        return iter(self.keys())

    def __eq__(self, other):
        if not isinstance(other, SimContext):
            return NotImplemented
        return dict(self.items()) == dict(other.items())

    __hash__ = None

    def get(self, name, default=None):
        return getattr(self, name, default)

    def keys(self):
        keys = set(self.__dict__) - {'_parent_context'}
        if self._parent_context:
            keys.update(self._parent_context.keys())
        return sorted(keys)

    def items(self):
        for k in self.keys():
            yield (k, getattr(self, k))

    def section(self, prefix):
        """The keys starting with ``prefix.``, as a dict keyed by the rest
        of the name."""
        head = prefix + '.'
        return {k[len(head):]: v for k, v in self.items()
                if k.startswith(head)}

    def new(self, values=None, **kwargs):
        """Poor man's prototype inheritation.

        This returns a new instance of :class:`SimContext` with data
        *chained* to this one. Non passed in values will be inherited
        from the instance where this method is called. Dotted keys can be
        passed in the `values` mapping.
        """
        nc = self.__new__(type(self))
        nc._parent_context = self
        if values:
            nc.update(values)
        nc.update(kwargs)
        return nc

    def chain(self, other):
        if not self._parent_context:
            self._parent_context = other
        else:
            raise ValueError("Already chained")

    def set(self, name, value):
        assert isinstance(name, str)
        self.__dict__[name] = coerce(name, value)

    def update(self, other):
        for k, v in dict(other).items():
            self.set(k, v)

    def as_dict(self):
        return dict(self.items())


def load_config(path, base=None):
    """Read an INI configuration file: each section is a key prefix, each
    option the rest of the key, e.g. ``latency_ns`` in ``[link]``.

    :param path: the file name
    :param base: the context to derive from, a new default one if missing
    :returns: a new :class:`SimContext`
    :raises ConfigError: on unknown keys, bad values or unreadable files
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding='utf-8') as f:
            parser.read_file(f)
    except (OSError, configparser.Error) as e:
        raise ConfigError("Cannot read configuration {path}: {e}".format(
            path=path, e=e)) from e
    values = {}
    for section in parser.sections():
        for option, value in parser.items(section):
            values['{section}.{option}'.format(section=section,
                                               option=option)] = value
    logger.debug("Loaded %d configuration keys from %s", len(values), path)
    return (base or SimContext()).new(values)
