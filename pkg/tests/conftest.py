from __future__ import annotations

import pytest

from reqqa.fixtures import stopwatch_cassette_path, stopwatch_project
from reqqa.gateway import Cassette, CompletionParams, Gateway, ReplayBackend
from reqqa.pipeline import Pipeline
from reqqa.store import Store


@pytest.fixture
def store(tmp_path):
    return Store(tmp_path / "store")


@pytest.fixture
def stopwatch():
    return stopwatch_project()


@pytest.fixture
def replay_gateway():
    cassette = Cassette.load(stopwatch_cassette_path())
    return Gateway(backend=ReplayBackend(cassette))


@pytest.fixture
def replay_pipeline(store, replay_gateway):
    return Pipeline(gateway=replay_gateway, store=store, params=CompletionParams())


@pytest.fixture
def evaluated_store(store, replay_pipeline, stopwatch):
    """Store holding the Stopwatch project with a fully evaluated matrix."""
    store.save_project(stopwatch)
    replay_pipeline.evaluate_project(stopwatch)
    return store
