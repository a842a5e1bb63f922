"""charlotte: run servers, talk to them, and run the experiment suite.

    charlotte keygen --out KEYFILE
    charlotte serve wilbur --listen HOST:PORT --key KEYFILE [--config FILE]
    charlotte serve fern --kind KIND --listen HOST:PORT --key KEYFILE [--config FILE]
    charlotte client store|stamp ...
    charlotte experiment NAME [--seed N] [--backend sim|tcp] [--out PATH] [-p key=value ...]
"""
from __future__ import annotations

import argparse
import asyncio
import configparser
import logging
import os
import signal
import sys

from .core import ED25519, CryptoId, IdentityError, Opaque, QuorumConfig, SigningKey
from .core import TimestampBatch, load_key_file
from .transport import NodeAddress, TcpEndpoint

FERN_KINDS = ("agreement", "timestamp", "nakamoto", "git", "hetcons")


class ConfigError(ValueError):
    pass


# -- config files ------------------------------------------------------------------

def read_config(path: str | None) -> dict:
    """``key = value`` lines; ``#`` starts a comment.  Keys are case-sensitive."""
    if path is None:
        return {}
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                   inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_string("[config]\n" + fh.read(), source=path)
    except (OSError, configparser.Error) as e:
        raise ConfigError("cannot read config %s: %s" % (path, e)) from None
    return dict(cp["config"])


def _list(cfg, key) -> list:
    return [x.strip() for x in cfg.get(key, "").replace("\n", ",").split(",") if x.strip()]


def _addrs(cfg, key) -> list:
    try:
        return [NodeAddress.parse(x) for x in _list(cfg, key)]
    except ValueError as e:
        raise ConfigError("%s: %s" % (key, e)) from None


def _id(text: str) -> CryptoId:
    try:
        return CryptoId(ED25519, bytes.fromhex(text.strip()))
    except ValueError as e:
        raise ConfigError("bad identity %r: %s" % (text, e)) from None


def _int(cfg, key, default):
    try:
        return int(cfg.get(key, default))
    except ValueError:
        raise ConfigError("%s must be an integer" % key) from None


def _float(cfg, key, default):
    try:
        return float(cfg.get(key, default))
    except ValueError:
        raise ConfigError("%s must be a number" % key) from None


def _requirement(cfg, prefix):
    from .fern import Requirement
    return Requirement(_int(cfg, prefix + "_count", 0), frozenset(_id(x) for x in _list(cfg, prefix + "_issuers")))


def build_service(role: str, kind: str | None, key: SigningKey, cfg: dict):
    """The service object (and blocks to preload) for a role and config."""
    if role == "wilbur":
        from .wilbur import Wilbur
        return Wilbur(key, _addrs(cfg, "peers")), []
    if kind == "agreement":
        from .fern import AgreementConfig, AgreementFern
        conf = AgreementConfig(parent_integrity=_requirement(cfg, "parent"),
                               block_availability=_requirement(cfg, "availability"))
        return AgreementFern(key, conf, ledger=cfg.get("ledger"),
                             evidence_wait=_float(cfg, "evidence_wait", 1.0)), []
    if kind == "timestamp":
        from .fern import EntanglementConfig, TimestampFern
        return TimestampFern(key, EntanglementConfig(_int(cfg, "batch_size", 100),
                                                     _addrs(cfg, "peers"))), []
    if kind == "nakamoto":
        from .fern import NakamotoFern, PowChainConfig
        root = Opaque(cfg.get("root", "pow-root").encode())
        conf = PowChainConfig(root.ref(), difficulty_bits=_int(cfg, "difficulty_bits", 12),
                              k=_int(cfg, "k", 1), hash_rate=_float(cfg, "hash_rate", 16384.0))
        return NakamotoFern(conf, _addrs(cfg, "peers"), index=_int(cfg, "index", 0)), [root]
    if kind == "git":
        from .fern import GitFern, GitPolicy
        pol = GitPolicy(allowed_authors=frozenset(_id(x) for x in _list(cfg, "allowed_authors")),
                        required_availability=_requirement(cfg, "availability"))
        return GitFern(key, pol, ledger=cfg.get("ledger")), []
    if kind == "hetcons":
        from .fern import HetconsFern, make_chain
        directory = {}
        for item in _list(cfg, "participants"):
            ident, sep, addr = item.partition("@")
            if not sep:
                raise ConfigError("participants entries look like <id hex>@host:port")
            try:
                directory[_id(ident)] = NodeAddress.parse(addr)
            except ValueError as e:
                raise ConfigError(str(e)) from None
        blocks = []
        for k, v in cfg.items():
            if not k.startswith("chain."):
                continue
            f, sep, ids = v.partition(":")
            try:
                qc = QuorumConfig.threshold([_id(x) for x in ids.split()], int(f))
            except ValueError as e:
                raise ConfigError("%s: %s" % (k, e)) from None
            blocks += [qc, make_chain(k[len("chain."):], qc)]
        svc = HetconsFern(key, directory, ledger=cfg.get("ledger"),
                          timeout=_float(cfg, "timeout", 2.0), lease=_float(cfg, "lease", 5.0))
        return svc, blocks
    raise ConfigError("unknown fern kind %r (one of %s)" % (kind, ", ".join(FERN_KINDS)))


# -- commands ----------------------------------------------------------------------------

def _listen(text: str):
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigError("--listen takes HOST:PORT or :PORT")
    return host or "127.0.0.1", int(port)


async def serve(role, kind, listen, key, cfg, journal=None, ready=None):
    from .node import Node
    svc, preload = build_service(role, kind, key, cfg)
    host, port = _listen(listen)
    ep = TcpEndpoint(host, port)
    try:
        await ep.start()
    except OSError as e:
        raise ConfigError("cannot listen on %s: %s" % (listen, e)) from None
    node = Node("%s-%s" % (role, kind or ""), key, journal).bind(ep)
    node.add(svc)
    for b in preload:
        node.accept_local(b)
    print("%s%s listening on %s as %s" % (role, " (%s)" % kind if kind else "", ep.address,
                                           key.id.public_key.hex()), flush=True)
    stop = asyncio.Event()
    loop = asyncio.get_running_loop()
    for sig in (signal.SIGINT, signal.SIGTERM):
        try:
            loop.add_signal_handler(sig, stop.set)
        except (NotImplementedError, RuntimeError):
            pass
    if ready is not None:
        ready(ep, node)
    try:
        await stop.wait()
    finally:
        await ep.close()


async def client_cmd(args):
    from .client import Client, TimestampTarget
    ep = await TcpEndpoint("127.0.0.1", 0).start()
    try:
        c = Client(ep, timeout=args.timeout)
        data = sys.stdin.buffer.read() if args.file == "-" else open(args.file, "rb").read()
        blk = c.mint(data)
        if args.action == "store":
            ws = [NodeAddress.parse(a) for a in args.to]
            atts = await c.replicate(blk, ws, args.threshold or len(ws))
            print("block %s" % blk.hash.hex())
            for a in atts:
                print("stored-by %s attestation %s" % (a.issuer.public_key.hex(), a.hash.hex()))
        else:
            ref = await c.commit(blk, [], TimestampTarget([NodeAddress.parse(a) for a in args.to]))
            print("block %s" % blk.hash.hex())
            for r in ref.integrity:
                att = c.store.get(r.hash)
                assert isinstance(att, TimestampBatch)
                print("stamped-by %s at %d attestation %s" % (att.issuer.public_key.hex(), att.time,
                                                             r.hash.hex()))
    finally:
        await ep.close()


def experiment_cmd(args) -> int:
    from .experiments import EXPERIMENTS, run_experiment
    if args.list or not args.name:
        for n, (_, d) in EXPERIMENTS.items():
            print("%-22s %s" % (n, " ".join("%s=%s" % kv for kv in d.items())))
        return 0 if args.list else 2
    if args.name not in EXPERIMENTS:
        print("charlotte: unknown experiment %r; known: %s" % (args.name, ", ".join(EXPERIMENTS)),
              file=sys.stderr)
        return 2
    overrides = {}
    for kv in args.param:
        k, sep, v = kv.partition("=")
        if not sep:
            print("charlotte: -p takes key=value, got %r" % kv, file=sys.stderr)
            return 2
        overrides[k] = v
    try:
        m = run_experiment(args.name, overrides, args.seed, args.backend)
    except (KeyError, ValueError) as e:
        print("charlotte: %s" % (e.args[0] if e.args else e), file=sys.stderr)
        return 2
    if args.out:
        m.write(args.out)
    else:
        sys.stdout.write(m.render())
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="charlotte")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    k = sub.add_parser("keygen", help="write a new Ed25519 key file")
    k.add_argument("--out", required=True)
    k.add_argument("--seed", help="derive deterministically from a seed (for tests)")
    k.add_argument("--label", default="key")

    s = sub.add_parser("serve", help="run a server until signaled")
    s.add_argument("role", choices=("wilbur", "fern"))
    s.add_argument("--kind", choices=FERN_KINDS)
    s.add_argument("--listen", default=":0")
    s.add_argument("--key", required=True)
    s.add_argument("--config")
    s.add_argument("--journal", help="block store journal path")

    c = sub.add_parser("client", help="store or timestamp a file")
    c.add_argument("action", choices=("store", "stamp"))
    c.add_argument("file")
    c.add_argument("--to", action="append", required=True, help="server address (repeatable)")
    c.add_argument("--threshold", type=int)
    c.add_argument("--timeout", type=float, default=30.0)

    e = sub.add_parser("experiment", help="run one experiment and emit metrics")
    e.add_argument("name", nargs="?")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--backend", choices=("sim", "tcp"), default="sim")
    e.add_argument("--out")
    e.add_argument("-p", "--param", action="append", default=[], metavar="KEY=VALUE")
    e.add_argument("--list", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.cmd == "keygen":
            key = SigningKey.derive(args.seed, args.label) if args.seed is not None \
                else SigningKey(os.urandom(32))
            fd = os.open(args.out, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
            with os.fdopen(fd, "w") as fh:
                fh.write(key.secret_bytes().hex() + "\n")
            print(key.id.public_key.hex())
            return 0
        if args.cmd == "serve":
            if args.role == "fern" and not args.kind:
                raise ConfigError("serve fern needs --kind (%s)" % ", ".join(FERN_KINDS))
            key = load_key_file(args.key)
            cfg = read_config(args.config)
            asyncio.run(serve(args.role, args.kind, args.listen, key, cfg, args.journal))
            return 0
        if args.cmd == "client":
            asyncio.run(client_cmd(args))
            return 0
        return experiment_cmd(args)
    except (IdentityError, ConfigError) as e:
        print("charlotte: %s" % e, file=sys.stderr)
        return 2
    except OSError as e:
        print("charlotte: %s" % e, file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
