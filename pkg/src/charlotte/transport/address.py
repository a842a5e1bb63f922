from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class NodeAddress:
    """``sim:<label>`` or ``tcp:<host>:<port>``."""

    backend: str
    label: str = ""
    host: str = ""
    port: int = 0

    @classmethod
    def sim(cls, label: str) -> "NodeAddress":
        return cls("sim", label=label)

    @classmethod
    def tcp(cls, host: str, port: int) -> "NodeAddress":
        return cls("tcp", host=host or "127.0.0.1", port=int(port))

    @classmethod
    def parse(cls, text: str) -> "NodeAddress":
        text = text.strip()
        if text.startswith("sim:"):
            if len(text) == 4:
                raise ValueError("empty sim label")
            return cls.sim(text[4:])
        if text.startswith("tcp:"):
            text = text[4:]
        host, sep, port = text.rpartition(":")
        if not sep or not port.isdigit():
            raise ValueError("address must look like host:port or sim:label, got %r" % text)
        return cls.tcp(host, int(port))

    def __str__(self) -> str:
        if self.backend == "sim":
            return "sim:" + self.label
        return "tcp:%s:%d" % (self.host, self.port)
