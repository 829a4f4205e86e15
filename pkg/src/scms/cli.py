"""Command-line entry points: ``scms-node``, ``scms-ee`` and ``scms-bench``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from scms import tlv
from scms.curve import Point
from scms.errors import ScmsError

log = logging.getLogger("scms")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def _setup_logging(args) -> None:
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


def _run(fn, args) -> int:
    _setup_logging(args)
    try:
        return fn(args) or 0
    except ScmsError as exc:
        print(f"error [{exc.code}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


# ---------------------------------------------------------------------------
# scms-node
# ---------------------------------------------------------------------------


def _node_bootstrap(args) -> int:
    from scms.certs import cert_digest, time64_to_datetime
    from scms.nodes import PkiConfig, bootstrap_pki

    pki = bootstrap_pki(PkiConfig(seed=args.seed, root=Path(args.root), max_batch=args.max_batch))
    for role, cert in sorted(pki.authority_certs().items()):
        print(f"{role.name:<4} {cert_digest(cert).hex()} valid until {time64_to_datetime(cert.validity_end):%Y-%m-%d}")
    print(f"PKI written to {args.root}")
    return 0


def _node_register(args) -> int:
    from scms.nodes import load_pki

    pki = load_pki(Path(args.root))
    pki.eca.register(args.ee_id, Point.decode(bytes.fromhex(args.canonical_key)))
    print(f"registered {args.ee_id}")
    return 0


def _node_serve(args) -> int:
    import threading

    from scms.nodes import AcaNode, load_pki
    from scms.transport import LoopbackTransport, NodeRole, parse_address, serve_tcp

    pki = load_pki(Path(args.root))
    pki.ra.aca = LoopbackTransport({NodeRole.ACA: AcaNode(pki.aca)})
    server = serve_tcp(pki.handlers(), parse_address(args.listen))
    host, port = server.server_address[:2]
    print(f"serving ECA, RA and ACA on {host}:{port}", flush=True)
    try:
        if args.max_seconds:
            threading.Timer(args.max_seconds, server.shutdown).start()
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def node_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="scms-node", description="Run or administer the SCMS authorities.")
    _common(parser)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("bootstrap", help="create electors, CTL, root and authority certificates")
    p.add_argument("--root", required=True)
    p.add_argument("--seed", type=int, default=None, help="deterministic key generation")
    p.add_argument("--max-batch", type=int, default=100)
    p.set_defaults(fn=_node_bootstrap)

    p = sub.add_parser("register", help="register a device's canonical key at the ECA")
    p.add_argument("--root", required=True)
    p.add_argument("--ee-id", required=True)
    p.add_argument("--canonical-key", required=True, help="33-octet compressed point, hex")
    p.set_defaults(fn=_node_register)

    p = sub.add_parser("serve", help="serve ECA, RA and ACA over TCP")
    p.add_argument("--root", required=True)
    p.add_argument("--listen", default="127.0.0.1:7000", help="host:port")
    p.add_argument("--max-seconds", type=float, default=None, help=argparse.SUPPRESS)
    p.set_defaults(fn=_node_serve)

    args = parser.parse_args(argv)
    return _run(args.fn, args)


# ---------------------------------------------------------------------------
# scms-ee
# ---------------------------------------------------------------------------


def _load_ee(args):
    from scms.ee import EndEntity
    from scms.transport import TcpTransport

    transport = TcpTransport(args.server) if getattr(args, "server", None) else None
    ee = EndEntity.load(Path(args.root), transport)
    if args.profile and ee.state.profile.kind.value != args.profile:
        raise ValueError(f"device under {args.root} is an {ee.state.profile.kind.value}, not {args.profile}")
    return ee


def _ee_init(args) -> int:
    from scms.certs import TrustStore
    from scms.ee import PROFILES, EndEntity

    ee = EndEntity.create(PROFILES[args.profile or "obu"], TrustStore.load(Path(args.trust)), ee_id=args.ee_id)
    ee.save(Path(args.root))
    print(f"{ee.state.ee_id} {ee.state.canonical.public.encode().hex()}")
    return 0


def _ee_enroll(args) -> int:
    ee = _load_ee(args)
    ec = ee.enroll()
    ee.save(Path(args.root))
    print(f"enrolled: EC valid {ec.validity_start}..{ec.validity_end}")
    return 0


def _ee_authorize(args) -> int:
    ee = _load_ee(args)
    h = ee.authorize()
    ee.save(Path(args.root))
    print(f"request_hash {h.hex()}")
    return 0


def _ee_download(args) -> int:
    ee = _load_ee(args)
    acs = ee.download()
    ee.save(Path(args.root))
    print(f"downloaded {len(acs)} authorization certificates")
    return 0


def _parse_location(text: Optional[str]):
    from scms.spdu import Location

    if text is None:
        return None
    lat, lon, elev = (int(v) for v in text.split(","))
    return Location(lat, lon, elev)


def _ee_sign(args) -> int:
    from scms.spdu import SignerMode, payload_from_hex

    ee = _load_ee(args)
    if ee.state.profile.msg_class.value != args.msg_class:
        raise ValueError(f"a {ee.state.profile.kind.value} device signs {ee.state.profile.msg_class.value}, not {args.msg_class}")
    mode = SignerMode.DIGEST if args.digest else SignerMode.CERTIFICATE
    spdu = ee.sign(payload_from_hex(args.payload_hex), mode, location=_parse_location(args.location), ac_index=args.ac_index)
    print(tlv.encode(spdu).hex())
    return 0


def _ee_verify(args) -> int:
    from scms.spdu import decode_spdu, extract_payload, verify_spdu

    ee = _load_ee(args)
    spdu = decode_spdu(bytes.fromhex(args.spdu_hex))
    ok = verify_spdu(spdu, ee.state.store, ee.clock())
    ee.state.store.save(Path(args.root) / "trust")  # keep cached signer certificates
    print(f"{'valid' if ok else 'invalid'} payload={extract_payload(spdu).hex()}")
    return 0 if ok else 1


def ee_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="scms-ee", description="End-entity (OBU / RSU) client.")
    _common(parser)
    sub = parser.add_subparsers(dest="cmd", required=True)

    def add(name, fn, help_, server=False):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--root", required=True, help="device state directory")
        p.add_argument("--profile", choices=("obu", "rsu"), default=None)
        if server:
            p.add_argument("--server", required=True, help="host:port of scms-node serve")
        p.set_defaults(fn=fn)
        return p

    p = add("init", _ee_init, "create device keys and copy the trust store")
    p.add_argument("--trust", required=True, help="trust directory written by scms-node bootstrap")
    p.add_argument("--ee-id", default=None)
    add("enroll", _ee_enroll, "obtain an enrollment certificate", server=True)
    add("authorize", _ee_authorize, "request a batch of authorization certificates", server=True)
    add("download", _ee_download, "download and unpack the batch", server=True)
    p = add("sign", _ee_sign, "sign a payload; prints the SPDU as hex")
    p.add_argument("--payload-hex", required=True)
    p.add_argument("--class", dest="msg_class", choices=("bsm", "spat"), required=True)
    p.add_argument("--digest", action="store_true", help="identify the signer by digest")
    p.add_argument("--location", default=None, help="lat,lon,elev in 1e-7 deg and 0.1 m (SPaT)")
    p.add_argument("--ac-index", type=int, default=None)
    p = add("verify", _ee_verify, "verify an SPDU against this device's trust store")
    p.add_argument("--spdu-hex", required=True)

    args = parser.parse_args(argv)
    return _run(args.fn, args)


# ---------------------------------------------------------------------------
# scms-bench
# ---------------------------------------------------------------------------


def _bench_run(args) -> int:
    from scms.bench import BenchConfig, emit_report, run_all

    cfg = BenchConfig(
        iterations=args.iterations,
        profiles=tuple(args.profiles.split(",")),
        transport=args.transport,
        seed=args.seed,
        warmup=args.warmup,
        cache=args.cache,
    )
    report = run_all(cfg)
    if args.out:
        fmt = "json" if args.out.endswith(".json") else "tlv"
        Path(args.out).write_bytes(emit_report(report, fmt))
    if args.text or not args.out:
        sys.stdout.write(emit_report(report, "text").decode())
    failed = any(r.failure for row in report.rows for r in (row.obu, row.rsu) if r is not None)
    return 1 if failed else 0


def _bench_show(args) -> int:
    from scms.bench import emit_report, load_report

    sys.stdout.write(emit_report(load_report(Path(args.report).read_bytes()), "text").decode())
    return 0


def bench_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="scms-bench", description="Thirteen-action latency benchmark.")
    _common(parser)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run the benchmark")
    p.add_argument("--iterations", type=int, default=20)
    p.add_argument("--transport", choices=("loopback", "tcp"), default="loopback")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--warmup", type=int, default=0)
    p.add_argument("--profiles", default="obu,rsu")
    p.add_argument("--cache", action="store_true", help="precompute expansion keys before download")
    p.add_argument("--out", default=None, help="write the report (.tlv, or .json)")
    p.add_argument("--text", action="store_true", help="print the table")
    p.set_defaults(fn=_bench_run)

    p = sub.add_parser("show", help="print a saved report as a table")
    p.add_argument("report")
    p.set_defaults(fn=_bench_show)

    args = parser.parse_args(argv)
    return _run(args.fn, args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(bench_main())
