import pytest

from urbanid.fixture import build_fixture, populate_store
from urbanid.semantic import load_starter_lexicon
from urbanid.store import EventStore


@pytest.fixture(scope="session")
def bundle():
    return build_fixture(seed=0)


@pytest.fixture(scope="session")
def populated_store(bundle):
    store = EventStore()
    populate_store(store, bundle)
    return store


@pytest.fixture(scope="session")
def snapshot(populated_store, bundle):
    return populated_store.snapshot(bundle.definition.study_id)


@pytest.fixture(scope="session")
def lexicon():
    return load_starter_lexicon()
