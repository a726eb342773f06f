"""Shared fixtures for the test suite."""

import pytest

from ageval.fixture import make_fixture_corpus


@pytest.fixture(scope="session")
def mini_corpus(tmp_path_factory):
    """A small synthetic corpus: 4 utterances at 2 SNRs with a quickly
    trained model. Used by the harness and CLI tests, which exercise
    plumbing rather than correlation quality."""
    root = tmp_path_factory.mktemp("mini_corpus")
    manifest = make_fixture_corpus(
        root, seed=7, snr_grid=(0.0, 20.0), n_utts=4, epochs=60
    )
    return manifest
