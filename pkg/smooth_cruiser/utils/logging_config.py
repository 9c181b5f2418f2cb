import logging
from typing import Optional

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level: str = "WARNING", log_file: Optional[str] = None):
    # Get root logger
    root_logger = logging.getLogger()
    # Avoid adding duplicate handlers
    if not root_logger.handlers:
        handlers = [logging.StreamHandler()]
        if log_file:
            handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
        logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers)

    # Set up package logger
    logging.getLogger("smooth_cruiser").setLevel(level)
