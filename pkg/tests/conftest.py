from __future__ import annotations

import sys
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

sys.path.insert(0, str(Path(__file__).parent))

from vizguide.config import Settings
from vizguide.sample import load_sample_dashboard, sample_dashboard_path
from vizguide.service import create_app


@pytest.fixture(scope="session")
def sample_spec():
    """Sample dashboard with inferred sub-regions (immutable; share freely)."""
    return load_sample_dashboard()


@pytest.fixture(scope="session")
def raw_sample_spec():
    return load_sample_dashboard(inferred=False)


@pytest.fixture()
def client():
    """TestClient over a fresh mock-mode app with the sample dashboard loaded."""
    settings = Settings(dashboards=(str(sample_dashboard_path()),))
    app = create_app(settings)
    with TestClient(app, raise_server_exceptions=False) as test_client:
        yield test_client


@pytest.fixture()
def make_client():
    """Factory for clients with custom settings (persist dirs, providers)."""
    clients: list[TestClient] = []

    def build(settings: Settings) -> TestClient:
        app = create_app(settings)
        test_client = TestClient(app, raise_server_exceptions=False)
        test_client.__enter__()
        clients.append(test_client)
        return test_client

    yield build
    for test_client in clients:
        test_client.__exit__(None, None, None)
