"""Set-to-set embedding retrieval.

Caption sets are fused with a modification-text transition vector, scored
against candidate point sets with a bidirectional conditional-transport
distance (or Sinkhorn OT / mean-cosine comparators), ranked, and evaluated
with recall@k, mAP@k, and subset recall@k.
"""

try:
    from setret._setret import *  # noqa: F401,F403  (installed layout)
    from setret._setret import __version__  # noqa: F401
except ImportError:  # development layout: extension sits on sys.path
    from _setret import *  # type: ignore  # noqa: F401,F403
    from _setret import __version__  # type: ignore  # noqa: F401
