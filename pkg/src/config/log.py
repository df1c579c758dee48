import logging

from src.config.settings import get_settings

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(threadName)s %(name)s: %(message)s"


def configure_logging(level: str | None = None) -> None:
    """
    Configure the root logger once for a CLI invocation.

    The level falls back to ``Settings.LOG_LEVEL`` when not given explicitly.
    """
    level_name = (level or get_settings().LOG_LEVEL).upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.WARNING), format=LOG_FORMAT)
    logging.getLogger().setLevel(getattr(logging, level_name, logging.WARNING))
