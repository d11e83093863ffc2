import os

import pytest

slow = pytest.mark.skipif(
    os.getenv("TERRANP_SLOW_TESTS") != "1", reason="set TERRANP_SLOW_TESTS=1 to run it"
)
