from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mobihost import PeerGroup, create_overlay  # noqa: E402
from mobihost.wsdl import WsdlDescriptor, WsdlOperation  # noqa: E402

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def weather_wsdl(name: str = "WeatherService", description: str = "local weather forecasts", **kw) -> WsdlDescriptor:
    ops = kw.pop("operations", (WsdlOperation("getForecast", ("location",), ("forecast",)),))
    return WsdlDescriptor(name, description, tuple(ops), kw.pop("binding_path", "/ws/weather"), **kw)


@pytest.fixture
def star():
    """One rendezvous S with edges A and B: the smallest Mobile-Host layout."""
    ov = create_overlay(
        {
            "peers": [
                {"name": "S", "role": "super"},
                {"name": "A", "role": "edge", "rendezvous": "S", "address": "10.0.0.5:80", "phone": "4917000001"},
                {"name": "B", "role": "edge", "rendezvous": "S"},
            ]
        }
    )
    ov.register_group(PeerGroup("travel.weather", "Weather", ("travel", "weather")))
    return ov


@pytest.fixture
def chain():
    """Edge A on S1, edge B on S2, S1-S2 linked."""
    return create_overlay(
        {
            "peers": [
                {"name": "S1", "role": "super"},
                {"name": "S2", "role": "super"},
                {"name": "A", "role": "edge", "rendezvous": "S1"},
                {"name": "B", "role": "edge", "rendezvous": "S2"},
            ],
            "links": [["S1", "S2"]],
        }
    )


# -- acceptance summary -------------------------------------------------------

ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
