import pytest

from src.analysis.pipeline import analyze_module
from src.config.settings import Settings
from src.corpus.loader import MOTIVATION, load_module, scenario_paths
from src.ir.parser import parse_module
from src.toolchain import compile_module


@pytest.fixture
def settings():
    return Settings(SWEEP_MODE="sync", STACK_POINTERS=True, APP_THREADS=1, SEED=0, LOG_LEVEL="WARNING")


@pytest.fixture
def async_settings():
    return Settings(SWEEP_MODE="async", STACK_POINTERS=True, APP_THREADS=1, SEED=0, LOG_LEVEL="WARNING")


@pytest.fixture
def motivation():
    return load_module(MOTIVATION)


@pytest.fixture
def motivation_analysis(motivation):
    return analyze_module(motivation)


@pytest.fixture
def motivation_compiled(motivation):
    return compile_module(motivation)


@pytest.fixture
def scenario_files():
    return scenario_paths()


@pytest.fixture
def parse():
    return parse_module


@pytest.fixture
def compile_source():
    def _compile(source: str):
        return compile_module(parse_module(source))

    return _compile
