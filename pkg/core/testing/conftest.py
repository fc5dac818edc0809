# conftest.py
"""
Общие фикстуры тестов: журнал запусков в памяти, типовые параметры модели
"""

import os

os.environ["DICKE_DATABASE_URL"] = "sqlite://"

import pytest  # noqa: E402

from core.model.dicke import ModelParams  # noqa: E402
from core.services.database.database import init_db  # noqa: E402


@pytest.fixture(scope="session", autouse=True)
def journal():
    init_db()


@pytest.fixture
def resonant():
    """ω = ω₀ = γ = 1 (γ = 2γ_cr), малый J"""
    return ModelParams(omega=1.0, omega0=1.0, gamma=1.0, j=4.0)


@pytest.fixture
def decoupled():
    return ModelParams(omega=1.0, omega0=1.0, gamma=0.0, j=5.0)
