"""Node-to-node messaging over TCP or a simulated virtual-time network."""
from .address import NodeAddress
from .endpoint import (
    DEFAULT_TIMEOUT,
    Endpoint,
    Handler,
    RequestTimeout,
    StreamReport,
    TransportError,
)
from .frames import (
    HEADER,
    AvailabilityPolicy,
    Envelope,
    FrameError,
    Kind,
    Result,
    StreamDone,
    StreamError,
    decode_query,
    decode_response,
    encode_query,
    encode_response,
)
from .sim import SimEndpoint, SimNetwork
from .simloop import SimDeadlock, VirtualLoop, run_sim
from .tcp import TcpEndpoint

__all__ = [n for n in dir() if not n.startswith("_")]
