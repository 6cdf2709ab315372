import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "monovo",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("monovo")



@pytest.fixture
def kitti_root():
    root = os.environ.get("KITTI_ROOT")
    if not root or not Path(root).is_dir():
        pytest.skip("KITTI_ROOT not set; dataset tests skipped")
    return Path(root)
