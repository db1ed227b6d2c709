"""eddymodes: modal-decomposition transients for filamentary eddy-current
networks with injected electrode currents.

The package builds partial-inductance matrices for a filament network,
splits the branch-current space into internal loops and electrode-fed
paths, and integrates the resulting stiff RL dynamics three ways: a
Cholesky-factored coupled theta-method (td1), decoupled per-mode scalar
updates after a generalized eigendecomposition (td2), and a per-tone
frequency-domain solve (fd).
"""

__version__ = "0.1.0"

from . import assembly, frequency, linalg, modal, ndt, network, reduction, transient  # noqa: F401
from .errors import EddymodesError  # noqa: F401
