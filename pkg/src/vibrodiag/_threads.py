"""BLAS thread pinning.

The model's matrices are small enough that multi-threaded GEMM loses to
dispatch overhead, and a fixed reduction order is what makes training and
generation bit-reproducible. All compute entry points pin BLAS to one
thread.
"""

from contextlib import contextmanager

from threadpoolctl import threadpool_limits


@contextmanager
def single_thread_blas():
    with threadpool_limits(limits=1):
        yield
