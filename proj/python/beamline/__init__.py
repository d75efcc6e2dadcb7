"""Python access to the beamline controller: kinematics, the line protocol,
clients and an in-process server."""

import json

from ._beamline import (
    BeamlineError,
    MonoConfig,
    energy_from_beta,
    fit_table,
    solve,
)
from . import _beamline

__all__ = [
    "BeamlineError",
    "Client",
    "MonoConfig",
    "Server",
    "call",
    "decode_request",
    "encode_request",
    "energy_from_beta",
    "fit_table",
    "solve",
]


def encode_request(id, op, args=None):
    return _beamline.encode_request(id, op, None if args is None else json.dumps(args))


def decode_request(line):
    id_, op, args = _beamline.decode_request(line)
    return id_, op, None if args is None else json.loads(args)


def _result(text):
    msg = json.loads(text)
    if "error" in msg:
        raise BeamlineError(msg["error"]["code"], msg["error"]["message"])
    return msg["result"]


def call(op, args=None, host="127.0.0.1", port=5025):
    """One request on its own connection (dynamic session)."""
    return _result(_beamline.call_dynamic(host, port, op, None if args is None else json.dumps(args)))


class Client:
    """Static session: one connection for many requests."""

    def __init__(self, host="127.0.0.1", port=5025):
        self._s = _beamline.Session(host, port)

    def call(self, op, args=None):
        return _result(self._s.call(op, None if args is None else json.dumps(args)))

    def close(self):
        self._s.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class Server:
    """Device server on a loopback port inside this process."""

    def __init__(self, config_path=None, clock_factor=0.0, port=0):
        self._srv = _beamline.Server(config_path, clock_factor, port)

    @property
    def port(self):
        return self._srv.port

    @property
    def accept_count(self):
        return self._srv.accept_count

    def stop(self):
        self._srv.stop()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()
