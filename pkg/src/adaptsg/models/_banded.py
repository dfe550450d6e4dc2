import numpy as np


def solve_banded_batch(A, b, bandwidth):
    """Solve a batch of banded systems without pivoting.

    Meant for the symmetric positive definite stiffness matrices of the
    finite element models, where elimination without pivoting is stable.

    Parameters
    ----------
    A : ndarray, shape (M, n, 2*bandwidth + 1)
        ``A[m, i, bandwidth + j - i]`` holds entry ``(i, j)`` of system ``m``.
    b : ndarray, shape (M, n)
    bandwidth : int

    Returns
    -------
    ndarray, shape (M, n)
    """
    A = np.array(A, dtype=float)
    x = np.array(b, dtype=float)
    M, n, w = A.shape
    p = bandwidth
    for i in range(n):
        piv = A[:, i, p]
        if np.any(piv == 0.0):
            raise np.linalg.LinAlgError(f"zero pivot in row {i}")
        for r in range(1, min(p, n - 1 - i) + 1):
            f = A[:, i + r, p - r] / piv
            # row i occupies columns i..i+p; in row i+r those sit at offsets p-r..2p-r
            A[:, i + r, p - r : 2 * p - r + 1] -= f[:, None] * A[:, i, p : 2 * p + 1]
            x[:, i + r] -= f * x[:, i]
    for i in range(n - 1, -1, -1):
        s = x[:, i]
        for r in range(1, min(p, n - 1 - i) + 1):
            s = s - A[:, i, p + r] * x[:, i + r]
        x[:, i] = s / A[:, i, p]
    return x
