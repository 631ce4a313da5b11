"""oracle_bridge: serve a serialized classifier over the JSON-lines query protocol."""

from .models import HostedModel, ModelLoadError, load_model
from .server import handle_line, serve_stdio, serve_tcp

__version__ = "0.1.0"

__all__ = [
    "HostedModel",
    "ModelLoadError",
    "handle_line",
    "load_model",
    "serve_stdio",
    "serve_tcp",
]
