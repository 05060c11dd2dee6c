"""Inference sidecar: multilingual model scoring over a line-JSON protocol."""

from .protocol import SidecarError
from .server import build_http_server, serve_stdio
from .session import ModelSession

__version__ = "0.1.0"
