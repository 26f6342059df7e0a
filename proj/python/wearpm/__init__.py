"""Calendar event logs enriched with wearable health data."""

from ._core import (
    WearpmError,
    aggregate,
    generate_fixture,
    interval_join,
    load_fixture_spec,
    run,
    scan_health_export,
)

__all__ = [
    "WearpmError",
    "aggregate",
    "generate_fixture",
    "interval_join",
    "load_fixture_spec",
    "run",
    "scan_health_export",
]
