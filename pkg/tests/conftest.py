import os

# keep BLAS single-threaded: small matrices, reproducible timings
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import pytest

from restrack import backend


def pytest_report_header(config):
    return f"restrack simulation backend: {backend.BACKEND}"


@pytest.fixture(params=backend.available_backends())
def kernel(request):
    """Run a test against every available simulation backend."""
    return backend.get_backend(request.param)
