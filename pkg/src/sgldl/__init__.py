"""Incremental label distribution learning lab.

Core package: synthetic stream generation, a data-driven label correlation
matrix, a label-graph classifier whose trainable weights do not grow with the
label count, incremental training with forgetting countermeasures, and the
restricted-label evaluation protocol. `sgldl.service` exposes the lab as a
FastAPI service; the `sgldl` CLI is a thin client of that service.
"""

__version__ = "0.1.0"
