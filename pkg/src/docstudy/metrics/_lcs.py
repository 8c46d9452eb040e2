"""LCS kernel selection: compiled extension when built, Python otherwise.

Set DOCSTUDY_PURE_PYTHON=1 to force the fallback; `BACKEND` reports the
active implementation. Both kernels take integer id sequences, so callers
intern tokens first and every comparison is an int compare.
"""

from __future__ import annotations

import os


def lcs_length_python(a: list[int], b: list[int]) -> int:
    """Two-row dynamic program over int ids."""
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return 0
    if m > n:
        a, b = b, a
        n, m = m, n
    prev = [0] * (m + 1)
    for x in a:
        curr = [0] * (m + 1)
        for j, y in enumerate(b):
            if x == y:
                curr[j + 1] = prev[j] + 1
            else:
                up = prev[j + 1]
                left = curr[j]
                curr[j + 1] = up if up >= left else left
        prev = curr
    return prev[m]


if os.environ.get("DOCSTUDY_PURE_PYTHON"):
    _kernel = lcs_length_python
    BACKEND = "python"
else:
    try:
        from ._lcs_fast import lcs_length as _kernel  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _kernel = lcs_length_python
        BACKEND = "python"


def lcs_length(a: list[str], b: list[str]) -> int:
    """LCS length of two token sequences."""
    ids: dict[str, int] = {}
    a_ids = [ids.setdefault(tok, len(ids)) for tok in a]
    b_ids = [ids.setdefault(tok, len(ids)) for tok in b]
    return _kernel(a_ids, b_ids)
