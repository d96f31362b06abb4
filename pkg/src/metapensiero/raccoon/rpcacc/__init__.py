# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- RPC accelerator simulator
# :Created:   sab 17 ott 2026 09:12:03 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2016, 2017, 2018, 2026 Alberto Berti
#

import logging


NOISY_ERROR_LOGGER = logging.Logger.error


def log_noisy_error(logger, *args, **kwargs):
    NOISY_ERROR_LOGGER(logger, *args, **kwargs)

from .compiler import compile_proto
from .context import SimContext, load_config
from .message import Message
from .pipeline import run_pipeline
from .scenarios import run_scenario
from .simulator import Simulation
from .workload import WorkloadSpec, generate_workload


__all__ = (
    'Message',
    'SimContext',
    'Simulation',
    'WorkloadSpec',
    'compile_proto',
    'generate_workload',
    'load_config',
    'run_pipeline',
    'run_scenario',
)
