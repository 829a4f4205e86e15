"""Desk-scale V2X security credential management system.

Authorities (ECA, RA, ACA), end-entity clients, butterfly key expansion,
signed protocol data units and a latency benchmark, all over P-256.
The elliptic-curve kernel is a compiled extension when available and a
pure-Python fallback otherwise (set ``SCMS_PURE_PYTHON=1`` to force it).
"""

from __future__ import annotations

from scms._kernel import BACKEND
from scms.errors import ScmsError

__version__ = "0.1.0"
__all__ = ["BACKEND", "ScmsError", "__version__"]
