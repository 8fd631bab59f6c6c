# rlstate/log.py
import logging
import sys
from rlstate.settings import get_settings

_ROOT = "rlstate"
_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def _configure_root() -> logging.Logger:
    root = logging.getLogger(_ROOT)
    if not getattr(root, "_rlstate_configured", False):
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(logging.Formatter(_FORMAT))
        root.addHandler(console_handler)
        root.propagate = False
        root._rlstate_configured = True
    root.setLevel(get_settings().log_level)
    return root


def get_logger(name: str) -> logging.Logger:
    """Module logger under the shared rlstate handler."""
    _configure_root()
    if not name.startswith(_ROOT):
        name = f"{_ROOT}.{name}"
    return logging.getLogger(name)
