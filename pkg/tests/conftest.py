"""Shared fixtures and the acceptance-criteria summary hook.

Acceptance tests register one line per criterion through
``record_criterion``; the terminal summary prints them after the run so
every criterion's PASS/FAIL status is visible at a glance.
"""

from __future__ import annotations

import numpy as np
import pytest

from streetloom import synthetic as syn
from streetloom.pano_index import PanoramaStore
from streetloom.planner import PlannerParams

_ACCEPTANCE: list[tuple[str, bool, str]] = []


def record_criterion(name: str, passed: bool, note: str = "") -> None:
    _ACCEPTANCE.append((name, passed, note))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, note in _ACCEPTANCE:
        status = "PASS" if ok else "FAIL"
        suffix = f"  ({note})" if note else ""
        terminalreporter.write_line(f"[{status}] {name}{suffix}")


@pytest.fixture(scope="session")
def pano_src():
    return syn.pano_source(height=64)


def _corpus_env(rows, max_gap_m=8.0):
    store = syn.build_store(rows)
    segments = store.group_trajectories(max_gap_m=max_gap_m)
    index = store.build_index()
    return store, segments, index


@pytest.fixture(scope="session")
def ring_env():
    """Closed-loop fixture: store, segments, index, path, params."""
    store, segments, index = _corpus_env(syn.ring_rows())
    path = syn.ring_path()
    params = PlannerParams(corridor_m=2.0, gap_max_m=1.2)
    return store, segments, index, path, params


@pytest.fixture(scope="session")
def junction_env():
    store, segments, index = _corpus_env(syn.junction_rows())
    return store, segments, index, syn.junction_path(), PlannerParams()


@pytest.fixture(scope="session")
def straight_env():
    store, segments, index = _corpus_env(syn.straight_street_rows())
    path = syn.path_from_en([(0.0, 0.0), (120.0, 0.0)])
    return store, segments, index, path, PlannerParams()
