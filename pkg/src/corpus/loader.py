import logging
from pathlib import Path

from src.ir.module import Module
from src.ir.parser import parse_module

logger = logging.getLogger(__name__)

CORPUS_ROOT = Path(__file__).resolve().parents[2] / "corpus"
MOTIVATION = CORPUS_ROOT / "motivation" / "motivation.lir"
SCENARIOS = CORPUS_ROOT / "uaf-scenarios"
RANDOM = CORPUS_ROOT / "random"
SOURCE_SUFFIX = ".lir"


def load_module(path: Path) -> Module:
    logger.info("Loading %s", path)
    return parse_module(Path(path).read_text(encoding="utf-8"))


def module_paths(path: Path) -> list[Path]:
    """
    ``path`` itself when it is a file, otherwise every ``.lir`` file below it
    in name order.
    """
    path = Path(path)
    if path.is_dir():
        return sorted(path.rglob(f"*{SOURCE_SUFFIX}"))
    return [path]


def scenario_paths() -> list[Path]:
    return module_paths(SCENARIOS)
