"""pintlab: a parallel-in-time laboratory for diffusion problems.

Spectral deferred corrections (SDC) with inexact multigrid substep solves,
multi-level SDC with FAS coarse corrections, and a PFASST engine, all over
built-in geometric-multigrid heat operators.
"""

__version__ = "0.1.0"
