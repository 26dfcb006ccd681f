from .cholesky import SpdFactor, spd_factor, spd_solve
from .csr import CsrMatrix, Vector, as_vector, axpy, dot, norm2, spmv

__all__ = [
    "CsrMatrix",
    "SpdFactor",
    "Vector",
    "as_vector",
    "axpy",
    "dot",
    "norm2",
    "spd_factor",
    "spd_solve",
    "spmv",
]
