# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- schema compiler tests
# :Created:   mar 20 ott 2026 16:05:47 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

import pytest

from metapensiero.raccoon.rpcacc.compiler import (
    AccOnDirectField, CompileError, DuplicateFieldNumber, FieldDef,
    LimitExceeded, MessageDef, ProtoFile, ProtoSyntaxError, UnknownType,
    UnresolvedReference, compile, compile_proto, parse_proto, tokenize)
from metapensiero.raccoon.rpcacc.schema import DEREFERENCE, DIRECT


def test_sample_table(sample_table):
    assert len(sample_table) == 2
    address = sample_table.by_name('Address')
    person = sample_table.by_name('Person')
    assert address.class_id == 1
    assert person.class_id == 2
    assert [f.number for f in person.fields] == list(range(1, 10))
    assert person.field_named('id').addressing == DIRECT
    assert person.field_named('name').addressing == DEREFERENCE
    assert person.field_named('photo').acc
    assert not person.field_named('name').acc
    scores = person.field_named('scores')
    assert scores.repeated and scores.is_packed and scores.is_dereference
    home = person.field_named('home')
    assert home.message_type is address
    assert home.type_name == 'Address'
    assert person.field_named('office').acc


def test_acc_spellings():
    table = compile_proto("""
        syntax = "proto3";
        message M {
          bytes a = 1 [Acc];
          bytes b = 2 [acc = true];
          bytes c = 3 [acc = false];
          repeated int32 d = 4 [Acc];
          string e = 5;
        }
    """)
    m = table.by_name('M')
    assert [f.acc for f in m.fields] == [True, True, False, True, False]


def test_acc_on_direct_field():
    with pytest.raises(AccOnDirectField) as info:
        compile_proto('syntax = "proto3";\n'
                      'message M {\n'
                      '  int32 x = 1 [Acc];\n'
                      '}\n')
    assert info.value.line == 3


def test_duplicate_field_number():
    with pytest.raises(DuplicateFieldNumber) as info:
        parse_proto('message M {\n'
                    '  int32 x = 1;\n'
                    '  string y = 1;\n'
                    '}\n')
    assert info.value.line == 3


def test_unknown_type():
    with pytest.raises(UnknownType):
        parse_proto('message M { Nope x = 1; }')


def test_syntax_error_position():
    with pytest.raises(ProtoSyntaxError) as info:
        parse_proto('syntax = "proto3";\n'
                    'message A {\n'
                    '  int32 x = ;\n'
                    '}\n')
    assert (info.value.line, info.value.col) == (3, 13)
    assert '(line 3, column 13)' in str(info.value)


@pytest.mark.parametrize('text', [
    'syntax = "proto2";',
    'message M { int32 x = 0; }',
    'message M { int32 x = 1 }',
    'message M { int32 x = 1; ',
    'enum E { A = 0; }',
    'message M { oneof o { int32 x = 1; } }',
    'message M { map<string, int32> m = 1; }',
    'message M { int32 x = 1 [deprecated = true]; }',
    'message M { int32 x = 1; } message M { int32 y = 1; }',
    'message M { int32 x = 1; string x = 2; }',
    'message M { int32 x = 1; } $',
])
def test_rejected_sources(text):
    with pytest.raises(CompileError):
        compile_proto(text)


def test_comments_and_options():
    table = compile_proto("""
        // leading comment
        syntax = "proto3";
        package demo.v1;
        option java_package = "demo";
        /* a block
           comment */
        message M {
          optional int64 x = 1; // trailing
          option deprecated = true;
          .demo.v1.M self = 2;
        }
    """)
    m = table.by_name('M')
    assert m.field_named('x').kind == 'int64'
    assert m.field_named('self').message_type is m


def test_nested_messages():
    text = """
        syntax = "proto3";
        message Outer {
          message Inner { int32 x = 1; }
          Inner inner = 1;
          repeated Outer.Inner more = 2;
        }
        message Other { Outer.Inner i = 1; }
    """
    proto = parse_proto(text)
    assert [m.full_name for m in proto.messages] == ['Outer', 'Outer.Inner',
                                                     'Other']
    assert proto.message('Outer.Inner').scope == 'Outer'
    table = compile_proto(text)
    inner = table.by_name('Outer.Inner')
    outer = table.by_name('Outer')
    assert inner.class_id == 2
    assert outer.field_named('inner').message_type is inner
    assert outer.field_named('more').repeated
    assert table.by_name('Other').field_named('i').message_type is inner


def test_compile_shares_descriptors():
    schemas, table = compile(parse_proto(
        'message A { string s = 1; } message B { A a = 1; }'))
    assert [s.name for s in schemas] == ['A', 'B']
    assert table[2] is schemas[1]
    assert table[2].field(1).message_type is schemas[0]


def test_unresolved_reference():
    proto = ProtoFile(messages=[
        MessageDef('A', 'A', [FieldDef('x', 1, 'Missing')])])
    with pytest.raises(UnresolvedReference):
        compile(proto)


def test_too_many_fields():
    proto = ProtoFile(messages=[
        MessageDef('A', 'A', [FieldDef('f{}'.format(i), i, 'int32')
                              for i in range(1, 257)])])
    with pytest.raises(LimitExceeded):
        compile(proto)


def test_tokenize():
    tokens = list(tokenize('message M {\n  int32 x = 1;\n}'))
    assert [t.type for t in tokens[:3]] == ['ident', 'ident', 'punct']
    x = tokens[4]
    assert (x.value, x.line, x.col) == ('x', 2, 9)
    assert tokens[-1].type == 'eof'
