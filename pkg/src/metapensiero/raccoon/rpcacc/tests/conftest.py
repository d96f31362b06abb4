# -*- coding: utf-8 -*-
# :Project:   metapensiero.raccoon.rpcacc -- test fixtures
# :Created:   mar 20 ott 2026 15:22:10 CEST
# :Author:    Alberto Berti <alberto@metapensiero.it>
# :License:   GNU General Public License version 3 or later
# :Copyright: © 2026 Alberto Berti
#

from metapensiero.raccoon.rpcacc.testing import *
