"""Married women's labour supply data (Mroz 1987) as a CensoredDataset.

Response: annual hours worked in units of 100 hours, zero for the 325 women
who did not work. Endogenous regressor: non-wife household income; instrument:
husband's years of education. The data come from the optional ``wooldridge``
package.
"""

from __future__ import annotations

import numpy as np

from .model import CensoredDataset

REGRESSORS = ("educ", "exper", "expersq", "age", "kidslt6", "kidsge6")
ENDOGENOUS = "nwifeinc"
INSTRUMENT = "huseduc"


def available() -> bool:
    try:
        import wooldridge  # noqa: F401
    except ImportError:
        return False
    return True


def load_mroz() -> CensoredDataset:
    try:
        import wooldridge
    except ImportError:
        raise ImportError("the Mroz data need the optional 'wooldridge' package "
                          "(pip install wooldridge)") from None
    df = wooldridge.data("mroz")
    col = lambda name: df[name].to_numpy(dtype=float)
    X = np.column_stack([np.ones(len(df))] + [col(c) for c in REGRESSORS])
    return CensoredDataset.from_arrays(col("hours") / 100.0, X, col(ENDOGENOUS), col(INSTRUMENT),
                                       x_names=("const",) + REGRESSORS)
