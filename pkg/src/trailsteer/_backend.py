"""Backend selection: compiled kernels when built, pure Python otherwise.

Set TRAILSTEER_PURE_PYTHON=1 to force the fallback (used by the backend
benchmark and the cross-backend tests).
"""

import os

from . import _kernels_py as _py

if os.environ.get("TRAILSTEER_PURE_PYTHON", "") == "1":
    _impl = _py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _py

BACKEND = "compiled" if _impl.COMPILED else "python"

sigma_sliding = _impl.sigma_sliding
kappa_command = _impl.kappa_command
c0_backout = _impl.c0_backout
lead_angle = _impl.lead_angle
c1_backout = _impl.c1_backout
kin_rk4 = _impl.kin_rk4
kinetic_rk4 = _impl.kinetic_rk4
project_packed = _impl.project_packed
simulate_chain_batch = _impl.simulate_chain_batch
simulate_reach_profile = _impl.simulate_reach_profile


def get_backend(name=None):
    """Return the kernel module for `name` ('compiled', 'python' or None=active)."""
    if name is None:
        return _impl
    if name == "python":
        return _py
    if name == "compiled":
        from . import _kernels  # raises ImportError if not built

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
