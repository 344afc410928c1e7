"""Select the compiled kernel if it was built, else the numpy fallback.

Set ``ANNULUSGP_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("ANNULUSGP_PURE_PYTHON", "") not in ("", "0"):
    kernels = _kernels_py
else:
    try:
        from . import _kernels_ext as kernels
    except ImportError:
        kernels = _kernels_py

NAME = kernels.NAME
product_gram = kernels.product_gram
loglik_grad = kernels.loglik_grad
