import pytest

from stablematch import _kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # JIT-compile (or no-op on the numpy path) before any timed test runs.
    _kernels.warm_up()
