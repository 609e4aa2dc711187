"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and semantics; used when the extension is not built.
"""
import numpy as np


def apply_columns(op, vecs, base, offsets):
    idx = base[:, None] + offsets[None, :]
    out = np.empty_like(vecs)
    out[idx] = np.einsum("ij,rjc->ric", op, vecs[idx])
    return out


def project_columns(q, qh, vecs, base, offsets):
    idx = base[:, None] + offsets[None, :]
    coef = np.einsum("kj,rjc->rkc", qh, vecs[idx])
    out = np.empty_like(vecs)
    out[idx] = np.einsum("ik,rkc->ric", q, coef)
    return out
