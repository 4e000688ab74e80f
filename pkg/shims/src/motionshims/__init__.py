"""Reference inference servers for the motioncurate wire protocol."""

from .config import SERVED_ENDPOINTS, ShimConfig
from .server import create_app, serve

__all__ = ["SERVED_ENDPOINTS", "ShimConfig", "create_app", "serve"]

__version__ = "0.1.0"
