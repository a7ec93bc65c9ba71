"""
Jacobi elliptic functions by the descending Landen transformation.
"""
from typing import Tuple

import numpy as np


#: Stop the arithmetic-geometric mean once |c_n| drops below this.
AGM_TOL = 1e-16

AGM_MAX_ITERATIONS = 64


def jacobi_sn_cn_dn(x, m: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Return sn(x, m), cn(x, m), dn(x, m).

    @param x: Argument, scalar or array.
    @param m: Modulus (not the parameter m²), 0 ≤ m < 1.
    """
    if not 0 <= m < 1:
        raise ValueError(f"modulus must lie in [0, 1), got {m}")

    x = np.asarray(x, dtype=float)
    a, c = [1.0], [m]
    b = np.sqrt(1 - m * m)

    while abs(c[-1]) >= AGM_TOL:
        if len(a) > AGM_MAX_ITERATIONS:
            raise ArithmeticError(f"arithmetic-geometric mean did not converge for m={m}")

        a_n = a[-1]
        a.append((a_n + b) / 2)
        c.append((a_n - b) / 2)
        b = np.sqrt(a_n * b)

    n = len(a) - 1
    phi = 2.0 ** n * a[n] * x
    previous = phi

    for j in range(n, 0, -1):
        previous = phi
        phi = (phi + np.arcsin(c[j] / a[j] * np.sin(phi))) / 2

    sn = np.sin(phi)
    cn = np.cos(phi)
    dn = cn / np.cos(previous - phi) if n else np.ones_like(x)
    return sn, cn, dn
