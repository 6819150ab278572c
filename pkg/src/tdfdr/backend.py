"""Select the scoring-kernel backend at import time.

The compiled Cython kernels are used when importable; otherwise the
pure-numpy fallback takes over transparently.  Both expose the same
functions and return bit-identical arrays (tests assert this), so the
choice only affects speed.

Set ``TDFDR_BACKEND=numpy`` to force the fallback, or ``=compiled`` to
require the extension (raising if it is missing).
"""

import os

from . import _kernels_np

_requested = os.environ.get("TDFDR_BACKEND", "").strip().lower()

if _requested == "numpy":
    _impl = _kernels_np
elif _requested == "compiled":
    from . import _kernels_c as _impl
elif _requested in ("", "auto"):
    try:
        from . import _kernels_c as _impl
    except ImportError:
        _impl = _kernels_np
else:
    raise ValueError(f"unknown TDFDR_BACKEND value: {_requested!r}")

BACKEND_NAME = _impl.BACKEND_NAME

t_scores_sampled = _impl.t_scores_sampled
t_scores_subsets = _impl.t_scores_subsets
rank_scores_sampled = _impl.rank_scores_sampled
rank_scores_subsets = _impl.rank_scores_subsets
rank_with_ties = _impl.rank_with_ties
