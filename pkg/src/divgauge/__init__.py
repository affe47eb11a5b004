"""Tightened variational estimators of f-divergences, with training and diagnostics.

The package is organised by concern:

``families``, ``gaussian``, ``quadrature``
    divergence families, Gaussian specs and ground-truth values;
``objectives``
    variational objectives with analytic gradients in the test-function values;
``models``
    neural and sufficient-statistic test-function families;
``trainer``
    Adam ascent over model parameters and transform scalars;
``analysis``
    curvature, asymptotic variance and consistency diagnostics;
``data``, ``config``, ``experiments``, ``cli``
    samplers, experiment files and the command-line harness.
"""

from .analysis import *  # noqa: F401,F403
from .config import *  # noqa: F401,F403
from .data import *  # noqa: F401,F403
from .errors import (  # noqa: F401
    ConvergenceError,
    DegenerateError,
    DivergedError,
    DivgaugeError,
    DomainError,
    FactorizationError,
    FormatError,
    ParseError,
)
from .families import *  # noqa: F401,F403
from .gaussian import *  # noqa: F401,F403
from .models import *  # noqa: F401,F403
from .objectives import *  # noqa: F401,F403
from .trainer import *  # noqa: F401,F403

__version__ = "0.1.0"
