"""renormlab: rescaling limits of harmonic functions and maps, and
hyperbolicity probes for planar tube bases.

Layout:

* ``expr`` / ``field``: exactly-harmonic expression trees with exact
  gradients, the damped derivative |grad f|/cosh f, spherical means,
  positivity-ratio checks, affine fitting.
* ``metric`` / ``engine``: the point-selection walk on metric spaces and
  the rescaling engine with limit classification.
* ``normality``: derivative-bound, level-set, and domination criteria for
  families; the expanding-box scan for globally bounded damped derivative.
* ``domains`` / ``tubes``: planar open-set algebra with exact slice
  queries, and the hyperbolicity classification of tube bases.
* ``maps`` / ``groups``: harmonic maps, torus targets, matrix-group targets
  with logarithmic derivatives and the matrix exponential.
* ``cli``: the batch scenario runner (``renormlab`` entry point).

The batch expression evaluator has a compiled core with a pure-Python
fallback selected at import; ``renormlab.active_backend()`` reports which
one is live (``RENORMLAB_BACKEND=python`` forces the fallback,
``RENORMLAB_THREADS`` caps scan parallelism).
"""

__version__ = "0.1.0"

from .tape import active_backend  # noqa: F401
from .expr import (  # noqa: F401
    AffineChart,
    HarmonicExpr,
    parse_expr,
    parse_holo,
)
from .field import (  # noqa: F401
    AffineFunc,
    Box,
    GridSpec,
    affine_fit,
    evaluate,
    gradient,
    harnack_check,
    spherical_mean,
    tilde_derivative,
)
from .engine import EngineConfig, limit_probe, make_rescaling, renormalize_entire  # noqa: F401
from .metric import BallSpace, FiniteMetricSpace, zalcman_select  # noqa: F401
from .domains import parse_domain  # noqa: F401
from .tubes import TubeConfig, classify_tube  # noqa: F401
