# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- proto3 schema compiler
# :Created:   sab 17 ott 2026 11:30:08 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

"""Compiler of the proto3 dialect understood by the accelerator.

The dialect is plain proto3 (messages, nested messages, scalar, message
and repeated fields, ``optional``) plus the field option ``Acc``, spelled
either ``[Acc]`` or ``[acc = true]``, which asks for the field to be
deserialized into accelerator memory.
"""

from collections import namedtuple
from dataclasses import dataclass, field
import logging
import re

from .schema import (FieldDescriptor, MessageSchema, SchemaTable, MAX_CLASSES,
                     MAX_FIELDS, REPEATED, SINGULAR)
from .wire import MAX_FIELD_NUMBER, SCALAR_KINDS


logger = logging.getLogger(__name__)


class CompileError(Exception):
    """Base of the errors raised by the compiler. When known, the position
    in the source is available as `line` and `col`."""

    def __init__(self, message, line=None, col=None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def __str__(self):
        if self.line is None:
            return self.message
        return '{msg} (line {line}, column {col})'.format(
            msg=self.message, line=self.line, col=self.col)


class ProtoSyntaxError(CompileError):
    """The source doesn't follow the grammar."""


class DuplicateFieldNumber(CompileError):
    """Two fields of the same message share a number."""


class UnknownType(CompileError):
    """A field type is neither a scalar nor a message of the file."""


class UnresolvedReference(CompileError):
    """A message reference in the AST doesn't resolve."""


class AccOnDirectField(CompileError):
    """The ``Acc`` option is used on a direct (inline) field."""


class LimitExceeded(CompileError):
    """Too many classes or too many fields in a message."""


# AST

@dataclass
class FieldDef:
    name: str
    number: int
    type_name: str
    label: str = SINGULAR
    acc: bool = False
    line: int = 0
    col: int = 0

    @property
    def is_scalar(self):
        return self.type_name in SCALAR_KINDS


@dataclass
class MessageDef:
    name: str
    full_name: str
    fields: list = field(default_factory=list)
    line: int = 0
    col: int = 0

    @property
    def scope(self):
        "The enclosing message full name, empty at top level."
        return self.full_name.rpartition('.')[0]


@dataclass
class ProtoFile:
    syntax: str = 'proto3'
    package: str = ''
    messages: list = field(default_factory=list)
    "All the messages, nested ones included, in declaration order."

    def message(self, full_name):
        for m in self.messages:
            if m.full_name == full_name:
                return m
        raise KeyError(full_name)


# Tokenizer

Token = namedtuple('Token', 'type value line col')

_TOKEN_RE = re.compile(r'''
    (?P<newline>\n)
  | (?P<space>[ \t\r\f\v]+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<string>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<number>[-+]?(?:0[xX][0-9a-fA-F]+|\d+(?:\.\d*)?(?:[eE][-+]?\d+)?))
  | (?P<ident>\.?[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<punct>[{}\[\]()<>=;,])
''', re.VERBOSE | re.DOTALL)


def tokenize(text):
    """Split `text` in tokens, dropping blanks and comments.

    :raises ProtoSyntaxError: on characters outside the grammar
    """
    line = 1
    line_start = 0
    pos = 0
    size = len(text)
    while pos < size:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ProtoSyntaxError("Unexpected character {char!r}".format(
                char=text[pos]), line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        if kind == 'newline':
            line += 1
            line_start = m.end()
        elif kind == 'comment':
            newlines = value.count('\n')
            if newlines:
                line += newlines
                line_start = m.start() + value.rindex('\n') + 1
        elif kind != 'space':
            yield Token(kind, value, line, m.start() - line_start + 1)
        pos = m.end()
    yield Token('eof', '', line, pos - line_start + 1)


# Parser

_UNSUPPORTED = frozenset(('enum', 'oneof', 'map', 'reserved', 'service',
                          'import', 'extend', 'extensions', 'group',
                          'required', 'rpc'))


class _Parser:

    def __init__(self, text):
        self.tokens = list(tokenize(text))
        self.index = 0

    @property
    def current(self):
        return self.tokens[self.index]

    def advance(self):
        tok = self.tokens[self.index]
        if tok.type != 'eof':
            self.index += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.current
        return ProtoSyntaxError(message, tok.line, tok.col)

    def accept(self, value):
        if self.current.value == value and self.current.type != 'string':
            return self.advance()

    def expect(self, value):
        tok = self.accept(value)
        if tok is None:
            raise self.error("Expected {exp!r}, found {found!r}".format(
                exp=value, found=self.current.value or 'end of file'))
        return tok

    def expect_type(self, type, what):
        tok = self.current
        if tok.type != type:
            raise self.error("Expected {what}, found {found!r}".format(
                what=what, found=tok.value or 'end of file'))
        return self.advance()

    def parse(self):
        proto = ProtoFile()
        first = True
        while self.current.type != 'eof':
            tok = self.current
            if tok.value == 'syntax' and tok.type == 'ident':
                if not first:
                    raise self.error("'syntax' must be the first statement")
                self.advance()
                self.expect('=')
                value = self.expect_type('string', 'a string')
                proto.syntax = value.value[1:-1]
                if proto.syntax != 'proto3':
                    raise self.error("Only proto3 syntax is supported", value)
                self.expect(';')
            elif tok.value == 'package' and tok.type == 'ident':
                self.advance()
                proto.package = self.expect_type('ident', 'a package name'
                                                 ).value
                self.expect(';')
            elif tok.value == 'option' and tok.type == 'ident':
                self.skip_option()
            elif tok.value == 'message' and tok.type == 'ident':
                self.parse_message(proto, '')
            elif tok.value == ';':
                self.advance()
            elif tok.value in _UNSUPPORTED:
                raise self.error("{what!r} is not supported".format(
                    what=tok.value))
            else:
                raise self.error("Unexpected {found!r}".format(
                    found=tok.value))
            first = False
        return proto

    def skip_option(self):
        # file and message level options carry nothing for us
        self.expect('option')
        name = self.expect_type('ident', 'an option name')
        self.expect('=')
        value = self.advance()
        if value.type not in ('ident', 'string', 'number'):
            raise self.error("Expected a constant", value)
        self.expect(';')
        logger.debug("Ignoring option %s = %s", name.value, value.value)

    def parse_message(self, proto, scope):
        start = self.expect('message')
        name = self.expect_type('ident', 'a message name')
        if '.' in name.value:
            raise self.error("Invalid message name", name)
        full_name = scope + '.' + name.value if scope else name.value
        for m in proto.messages:
            if m.full_name == full_name:
                raise self.error("Message {name} is defined already".format(
                    name=full_name), name)
        msg = MessageDef(name.value, full_name, line=start.line, col=start.col)
        proto.messages.append(msg)
        self.expect('{')
        numbers = {}
        names = set()
        while not self.accept('}'):
            tok = self.current
            if tok.type == 'eof':
                raise self.error("Unterminated message {name}".format(
                    name=full_name))
            elif tok.value == 'message' and tok.type == 'ident':
                self.parse_message(proto, full_name)
            elif tok.value == 'option' and tok.type == 'ident':
                self.skip_option()
            elif tok.value == ';':
                self.advance()
            elif tok.value in _UNSUPPORTED:
                raise self.error("{what!r} is not supported".format(
                    what=tok.value))
            else:
                fdef = self.parse_field()
                if fdef.number in numbers:
                    raise DuplicateFieldNumber(
                        "Field number {num} of {msg} is used by both {a} and "
                        "{b}".format(num=fdef.number, msg=full_name,
                                     a=numbers[fdef.number], b=fdef.name),
                        fdef.line, fdef.col)
                if fdef.name in names:
                    raise ProtoSyntaxError("Field {name} of {msg} is defined "
                                           "already".format(name=fdef.name,
                                                            msg=full_name),
                                           fdef.line, fdef.col)
                numbers[fdef.number] = fdef.name
                names.add(fdef.name)
                msg.fields.append(fdef)
        return msg

    def parse_field(self):
        start = self.current
        label = SINGULAR
        if self.accept('repeated'):
            label = REPEATED
        else:
            self.accept('optional')
        type_tok = self.expect_type('ident', 'a field type')
        name = self.expect_type('ident', 'a field name')
        if '.' in name.value:
            raise self.error("Invalid field name", name)
        self.expect('=')
        num_tok = self.expect_type('number', 'a field number')
        try:
            number = int(num_tok.value, 0)
        except ValueError:
            raise self.error("Invalid field number", num_tok) from None
        if not 1 <= number <= MAX_FIELD_NUMBER:
            raise self.error("Field number {num} out of range".format(
                num=number), num_tok)
        acc = False
        if self.accept('['):
            while True:
                acc = self.parse_field_option(acc)
                if not self.accept(','):
                    break
            self.expect(']')
        self.expect(';')
        return FieldDef(name.value, number, type_tok.value.lstrip('.'), label,
                        acc, start.line, start.col)

    def parse_field_option(self, acc):
        name = self.expect_type('ident', 'an option name')
        if name.value.lower() != 'acc':
            raise self.error("Unsupported field option {name!r}".format(
                name=name.value), name)
        if not self.accept('='):
            return True
        value = self.expect_type('ident', 'true or false')
        if value.value not in ('true', 'false'):
            raise self.error("Expected true or false", value)
        return value.value == 'true'


def _resolve(type_name, scope, names, package=''):
    # innermost scope first, as protoc does
    if package and type_name.startswith(package + '.'):
        type_name = type_name[len(package) + 1:]
    while True:
        candidate = scope + '.' + type_name if scope else type_name
        if candidate in names:
            return candidate
        if not scope:
            return None
        scope = scope.rpartition('.')[0]


def parse_proto(text):
    """Parse a schema source.

    :param str text: the proto3 source
    :returns: a :class:`ProtoFile`
    :raises ProtoSyntaxError: on grammar errors, with line and column
    :raises DuplicateFieldNumber: if a message reuses a field number
    :raises UnknownType: if a field type names no scalar nor message
    """
    proto = _Parser(text).parse()
    names = {m.full_name for m in proto.messages}
    for m in proto.messages:
        for f in m.fields:
            if f.is_scalar:
                continue
            if _resolve(f.type_name, m.full_name, names,
                        proto.package) is None:
                raise UnknownType(
                    "Unknown type {type!r} for field {msg}.{name}".format(
                        type=f.type_name, msg=m.full_name, name=f.name),
                    f.line, f.col)
    return proto


def compile(ast):
    """Compile a parsed file into runtime descriptors.

    Class ids are assigned in declaration order starting from 1.

    :param ast: a :class:`ProtoFile`
    :returns: a pair ``(schemas, table)``: the tuple of
      :class:`~.schema.MessageSchema` used by the host side and the
      :class:`~.schema.SchemaTable` loaded into the accelerator. Both
      share the same descriptors
    :raises UnresolvedReference: if a message reference doesn't resolve
    :raises AccOnDirectField: if ``Acc`` labels an inline field
    :raises LimitExceeded: if the table capacity is exceeded
    """
    if len(ast.messages) > MAX_CLASSES:
        raise LimitExceeded("More than {max} message classes".format(
            max=MAX_CLASSES))
    schemas = {}
    for cid, mdef in enumerate(ast.messages, start=1):
        if len(mdef.fields) > MAX_FIELDS:
            raise LimitExceeded("Message {name} has more than {max} fields"
                                .format(name=mdef.full_name, max=MAX_FIELDS),
                                mdef.line, mdef.col)
        schemas[mdef.full_name] = MessageSchema(cid, mdef.full_name)
    for mdef in ast.messages:
        schema = schemas[mdef.full_name]
        numbers = set()
        for f in mdef.fields:
            if f.number in numbers:
                raise DuplicateFieldNumber(
                    "Field number {num} of {msg} is used twice".format(
                        num=f.number, msg=mdef.full_name), f.line, f.col)
            numbers.add(f.number)
            if f.is_scalar:
                kind = f.type_name
                mtype = None
            else:
                kind = 'message'
                target = _resolve(f.type_name, mdef.full_name, schemas,
                                  ast.package)
                if target is None:
                    raise UnresolvedReference(
                        "Field {msg}.{name} refers to the undefined message "
                        "{type!r}".format(msg=mdef.full_name, name=f.name,
                                          type=f.type_name), f.line, f.col)
                mtype = schemas[target]
            if f.acc and kind not in ('string', 'bytes', 'message') \
               and f.label != REPEATED:
                raise AccOnDirectField(
                    "Field {msg}.{name} is a direct {kind} field, Acc applies "
                    "only to string, bytes, repeated and message fields"
                    .format(msg=mdef.full_name, name=f.name, kind=kind),
                    f.line, f.col)
            schema.add_field(FieldDescriptor(
                f.name, f.number, kind, f.label, acc=f.acc,
                type_name=mtype.name if mtype else None, message_type=mtype))
    ordered = tuple(schemas[m.full_name] for m in ast.messages)
    logger.debug("Compiled %d message classes", len(ordered))
    return ordered, SchemaTable(ordered)


def compile_proto(text):
    "Parse and compile `text`, returning just the schema table."
    return compile(parse_proto(text))[1]
