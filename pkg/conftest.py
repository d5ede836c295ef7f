"""
pytest conftest.py: project-level test configuration.

Overrides settings that would make tests slow or order-dependent.
"""
import pytest
from django.core.cache import cache


@pytest.fixture(autouse=True)
def use_fast_test_settings(settings):
    """
    Keep every test in-process and start from an empty cache.

    Without these overrides:
    - EOS_WORKERS defaults to os.cpu_count(), so every study spawns a pool
    - scenario geometry cached by one test leaks into the next
    """
    settings.CACHES = {
        "default": {
            "BACKEND": "django.core.cache.backends.locmem.LocMemCache",
            "LOCATION": "eos-tests",
        }
    }
    settings.EOS_WORKERS = 1
    cache.clear()
    yield
    cache.clear()
