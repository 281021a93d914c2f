import math

import numpy as np

from models import Trace, TraceKind

ALPHA, BETA = 1 / 16, 3 / 16
THETA_TWO_STATE = math.log(15 / 13)
DM1_ALPHA, DM1_BETA = 1.0, 10 / 11
THETA_DM1 = 0.17613


def increments(*values):
    return Trace(np.array(values, dtype=float), TraceKind.INCREMENTS)


def waits(*values):
    return Trace(np.array(values, dtype=float), TraceKind.WAITS)
