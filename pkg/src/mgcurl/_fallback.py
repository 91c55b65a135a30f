"""Numpy implementations of the hot loops; same contracts as ``_kernels``."""
import numpy as np


def accumulate_blocks(out, r, idx, ops, group_ptr):
    """``out[idx[b]] += ops[g] @ r[idx[b]]`` for blocks ``b`` of group ``g``."""
    if idx.shape[1] == 0 or idx.shape[0] == 0:
        return
    local = np.empty(idx.shape)
    for g in range(len(group_ptr) - 1):
        sl = slice(group_ptr[g], group_ptr[g + 1])
        local[sl] = r[idx[sl]] @ ops[g].T
    out += np.bincount(idx.ravel(), weights=local.ravel(), minlength=out.shape[0])


def csr_residual(out, g, indptr, indices, data, z):
    """``out = g - A z`` for ``A`` given by its CSR arrays."""
    n = len(indptr) - 1
    rows = np.repeat(np.arange(n), np.diff(indptr))
    az = np.bincount(rows, weights=data * z[indices], minlength=n)
    np.subtract(g, az, out=out)
