"""Desk-scale instances shipped with the package."""
from __future__ import annotations

from importlib import resources

from .instance import TepInstance, parse_instance

NAMES = ("fig1", "fig1_variant", "fig2_toy", "garver6", "lazy_probe", "hub_congested")


def fixture_path(name: str):
    return resources.files("tepcuts") / "data" / f"{name}.json"


def load_fixture(name: str) -> TepInstance:
    return parse_instance(fixture_path(name).read_text())
