# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- command line interface
# :Created:   mar 20 ott 2026 11:18:05 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

"""The ``rpcacc`` command.

Exit status is 0 on success, 1 when a scenario criterion fails or a run
aborts, 2 on usage and configuration errors.
"""

import argparse
import logging
import sys

from . import log_noisy_error
from .apps import APPS
from .compiler import CompileError, compile_proto
from .context import ConfigError, SimContext, load_config
from .deserializer import DeserializeMode
from .interconnect import LinkError
from .pipeline import PipelineError, custom_config, run_pipeline
from .scenarios import UnknownScenario, list_scenarios, run_scenario
from .schema import (SchemaError, load_schema_table, serialize_schema_table,
                     table_report)
from .serializer import Strategy, UnknownStrategy
from .workload import (InvalidSpec, WorkloadSpec, generate_workload,
                       materialize)


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

USAGE_ERRORS = (CompileError, ConfigError, InvalidSpec, LinkError, OSError,
                SchemaError, UnknownScenario, UnknownStrategy, ValueError)


def cmd_compile(args):
    with open(args.proto, encoding='utf-8') as f:
        table = compile_proto(f.read())
    with open(args.output, 'wb') as f:
        f.write(serialize_schema_table(table))
    if args.report:
        with open(args.report, 'w', encoding='utf-8') as f:
            f.write(table_report(table))
    logger.info("Compiled %d message classes into %s", len(table),
                args.output)
    return EXIT_OK


def _context(args):
    ctx = load_config(args.config) if args.config else SimContext()
    if args.link:
        ctx = ctx.new({'link.profile': args.link})
    return ctx


def cmd_run(args):
    spec = WorkloadSpec.from_file(args.workload)
    workload = generate_workload(spec, args.seed)
    if args.schema:
        with open(args.schema, 'rb') as f:
            table = load_schema_table(f.read())
        for schema in workload.table:
            if table.by_name(schema.name).class_id != schema.class_id:
                raise SchemaError("Class {name} has another id in {path}"
                                  .format(name=schema.name, path=args.schema))
        workload = workload._replace(table=table)
    config = custom_config(args.mode, args.deser, name=args.mode)
    report = run_pipeline(workload, config, _context(args),
                          app=APPS[args.app]())
    report.write_json(args.out)
    if args.csv:
        report.write_csv(args.csv)
    agg = report.aggregates()
    print("{n} requests, mean {mean:.1f} ns, {link} link bytes".format(
        n=agg['requests'], mean=agg['mean_elapsed_ns'],
        link=agg['link_bytes']))
    return EXIT_OK


def cmd_scenario(args):
    if args.name == 'list':
        for s in list_scenarios():
            aka = ' (also {})'.format(', '.join(s.aliases)) if s.aliases \
                else ''
            print('{name:28} {desc}{aka}'.format(name=s.name,
                                                 desc=s.description, aka=aka))
        return EXIT_OK
    ctx = load_config(args.config) if args.config else SimContext()
    report = run_scenario(args.name, seed=args.seed, ctx=ctx)
    if args.out:
        report.write_json(args.out)
    if args.csv:
        report.write_csv(args.csv)
    print(report.verdict())
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_workload_gen(args):
    spec = WorkloadSpec.from_file(args.spec)
    workload = generate_workload(spec, args.seed)
    written = materialize(workload, args.out)
    print("Wrote {n} files to {out}".format(n=len(written), out=args.out))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog='rpcacc', description="RPC accelerator simulator")
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help="more logging, repeat for debug output")
    sub = parser.add_subparsers(dest='command')
    sub.required = True

    p = sub.add_parser('compile', help="compile a proto3 file")
    p.add_argument('proto')
    p.add_argument('-o', '--output', required=True,
                   help="the schema table image to write")
    p.add_argument('--report', help="write a readable report of the table")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser('run', help="run a workload through the pipeline")
    p.add_argument('--workload', required=True, help="workload spec file")
    p.add_argument('--schema', help="schema table image to use")
    p.add_argument('--mode', required=True,
                   choices=[s.value for s in Strategy])
    p.add_argument('--deser', choices=[m.value for m in DeserializeMode])
    p.add_argument('--link', help="link profile, pcie, upi, onchip-70ns or "
                   "custom")
    p.add_argument('--config', help="INI configuration file")
    p.add_argument('--app', choices=sorted(APPS), default='echo')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', required=True, help="JSON report")
    p.add_argument('--csv', help="CSV file of the request rows")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser('scenario', help="run a scenario, or list them")
    p.add_argument('name')
    p.add_argument('--config', help="INI configuration file")
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', help="JSON report")
    p.add_argument('--csv', help="CSV file of the rows")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser('workload', help="workload tools")
    wsub = p.add_subparsers(dest='action')
    wsub.required = True
    g = wsub.add_parser('gen', help="write a workload to a directory")
    g.add_argument('--spec', required=True)
    g.add_argument('--seed', type=int, default=0)
    g.add_argument('--out', required=True)
    g.set_defaults(func=cmd_workload_gen)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[
        min(args.verbose, 2)]
    logging.basicConfig(level=level,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        return args.func(args)
    except PipelineError as e:
        log_noisy_error(logger, "Run aborted at request %d: %s",
                        e.request_id, e)
        return EXIT_FAILED
    except USAGE_ERRORS as e:
        log_noisy_error(logger, "%s", e)
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
