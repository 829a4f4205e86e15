"""Thirteen-action latency benchmark over OBU and RSU profiles.

Every iteration replays the whole flow with a fresh device (fresh canonical
and enrollment keys) and times each action separately, from the device's
point of view. Actions 2, 5 and 8 include the transport round trip and all
server work; the server's own handler time is logged alongside for
diagnosis but is not subtracted.

Operation counts are collected per action with :func:`scms.curve.count_ops`
and are deterministic for a fixed seed. Wall-clock means are not.
"""

from __future__ import annotations

import json
import logging
import platform
import random
import statistics
import threading
import time
from dataclasses import asdict, dataclass
from typing import Callable, Optional

from scms import _kernel, tlv
from scms.curve import count_ops
from scms.ee import PROFILES, EndEntity
from scms.errors import ScmsError
from scms.nodes import AcaNode, Pki, PkiConfig, bootstrap_pki
from scms.spdu import Location, SignerMode, decode_spdu, fixture_hex, payload_from_hex, verify_spdu
from scms.transport import LoopbackTransport, NodeRole, TcpTransport, serve_tcp

log = logging.getLogger(__name__)

ACTIONS = {
    1: "Encode and sign EeEcaCertRequest",
    2: "Send EeEcaCertRequest, receive EcaEeCertResponse",
    3: "Decode and verify EcaEeCertResponse",
    4: "Encode and sign EeRaCertRequest",
    5: "Send EeRaCertRequest, receive RaEeCertAck",
    6: "Decode and verify RaEeCertAck",
    7: "Encode and sign EeRaDownloadRequest",
    8: "Send EeRaDownloadRequest, receive Zip",
    9: "Decode and verify Zip, rebuild butterfly keys",
    10: "Encode and sign SPDU (full certificate)",
    11: "Encode and sign SPDU (certificate digest)",
    12: "Decode and verify SPDU (full certificate)",
    13: "Decode and verify SPDU (certificate digest)",
}

# Mean milliseconds reported for the Android OBU / RSU devices; shown for comparison only.
REFERENCE_MS = {
    1: (46, 45),
    2: (322, 259),
    3: (396, 431),
    4: (161, 148),
    5: (1249, 281),
    6: (92, 79),
    7: (140, 141),
    8: (1144, 104),
    9: (13026, 348),
    10: (26, 28),
    11: (23, 25),
    12: (125, 130),
    13: (124, 123),
}

NETWORK_ACTIONS = {2: "EcaNode", 5: "RaNode", 8: "RaNode"}

# SPaT generation location used by the RSU profile (1e-7 degree, 0.1 m)
RSU_LOCATION = Location(latitude=250_330_000, longitude=1_215_650_000, elevation=100)


class _CountsCodec:
    """``dict[str, int]`` as a list of (name, value) pairs sorted by name."""

    def encode(self, v: dict) -> bytes:
        return tlv.ListOf(tlv.Struct(_OpCount)).encode([_OpCount(k, n) for k, n in sorted(v.items())])

    def decode(self, data: bytes, off: int) -> dict:
        items = tlv.ListOf(tlv.Struct(_OpCount)).decode(data, off)
        return {c.name: c.value for c in items}


@dataclass(frozen=True)
class _OpCount:
    name: str = tlv.f(tlv.Text())
    value: int = tlv.f(tlv.UInt())


@dataclass
class ProfileResult:
    samples_ns: list = tlv.f(tlv.ListOf(tlv.UInt()), default=None)
    op_counts: dict = tlv.f(_CountsCodec(), default=None)
    server_ns: list = tlv.f(tlv.ListOf(tlv.UInt()), default=None)
    failure: Optional[str] = tlv.f(tlv.Text(), default=None)

    def __post_init__(self):
        self.samples_ns = [] if self.samples_ns is None else list(self.samples_ns)
        self.op_counts = {} if self.op_counts is None else dict(self.op_counts)
        self.server_ns = [] if self.server_ns is None else list(self.server_ns)

    @property
    def mean_ms(self) -> Optional[float]:
        return statistics.fmean(self.samples_ns) / 1e6 if self.samples_ns else None

    def add_counts(self, counts: dict) -> None:
        for k, v in counts.items():
            if v:
                self.op_counts[k] = self.op_counts.get(k, 0) + v


@dataclass
class ActionRow:
    action: int = tlv.f(tlv.UInt(1))
    obu: Optional[ProfileResult] = tlv.f(tlv.Struct(ProfileResult), default=None)
    rsu: Optional[ProfileResult] = tlv.f(tlv.Struct(ProfileResult), default=None)


@tlv.message(0x50)
@dataclass
class BenchReport:
    iterations: int = tlv.f(tlv.UInt(4))
    seed: int = tlv.f(tlv.UInt())
    transport: str = tlv.f(tlv.Text())
    backend: str = tlv.f(tlv.Text())
    host: str = tlv.f(tlv.Text())
    rows: list = tlv.f(tlv.ListOf(tlv.Struct(ActionRow)))
    cache: int = tlv.f(tlv.UInt(1), default=0)

    def row(self, action: int) -> ActionRow:
        return self.rows[action - 1]

    def result(self, action: int, profile: str) -> Optional[ProfileResult]:
        return getattr(self.row(action), profile)


@dataclass
class BenchConfig:
    iterations: int = 20
    profiles: tuple = ("obu", "rsu")
    transport: str = "loopback"
    seed: int = 0
    warmup: int = 0
    cache: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.transport not in ("loopback", "tcp"):
            raise ValueError(f"unknown transport {self.transport!r}")


class _Harness:
    """Owns the PKI and transport for one benchmark run."""

    def __init__(self, cfg: BenchConfig):
        self.cfg = cfg
        self.pki: Pki = bootstrap_pki(PkiConfig(seed=cfg.seed))
        self.server = None
        if cfg.transport == "loopback":
            self.transport = self.pki.loopback()
        else:
            self.pki.ra.aca = LoopbackTransport({NodeRole.ACA: AcaNode(self.pki.aca)})
            self.server = serve_tcp(self.pki.handlers(), ("127.0.0.1", 0))
            threading.Thread(target=self.server.serve_forever, daemon=True).start()
            self.transport = TcpTransport(self.server.server_address)

    def close(self):
        if self.server is not None:
            self.server.shutdown()
            self.server.server_close()

    def _node_timings(self, name: str) -> list:
        return self.pki.eca.timings if name == "EcaNode" else self.pki.ra.timings

    def run_iteration(self, profile_name: str, it: int, record: Optional[dict]) -> None:
        """One full flow. ``record`` maps action -> ProfileResult, or None for warm-up."""
        profile = PROFILES[profile_name]
        rng = random.Random(f"{self.cfg.seed}:{profile_name}:{it}")
        ee = EndEntity.create(profile, self.pki.store, self.transport, rng=rng)
        self.pki.eca.register(ee.state.ee_id, ee.state.canonical.public)
        if profile_name == "obu":
            payload, location = payload_from_hex(fixture_hex("bsm")), None
        else:
            payload, location = payload_from_hex(fixture_hex("spat")), RSU_LOCATION
        receiver = self.pki.store.copy()
        ctx: dict = {}

        def timed(action: int, fn: Callable):
            if record is None:
                return fn()
            server_name = NETWORK_ACTIONS.get(action)
            mark = len(self._node_timings(server_name)) if server_name else 0
            with count_ops() as ctr:
                t0 = time.perf_counter_ns()
                out = fn()
                elapsed = time.perf_counter_ns() - t0
            res = record[action]
            res.samples_ns.append(elapsed)
            res.add_counts(ctr.as_dict())
            if server_name:
                spent = sum(t for _, t in self._node_timings(server_name)[mark:])
                res.server_ns.append(int(spent * 1e9))
            return out

        def verified(spdu_bytes: bytes) -> bool:
            ok = verify_spdu(decode_spdu(spdu_bytes), receiver, ee.clock())
            if not ok:
                raise ScmsError("SPDU failed verification")
            return ok

        send = self.transport.send
        req = timed(1, ee.prepare_enrollment)
        resp = timed(2, lambda: send(NodeRole.ECA, req))
        timed(3, lambda: ee.accept_enrollment(resp))
        req = timed(4, ee.prepare_authorization)
        if self.cfg.cache:
            ee.precompute_cache()  # off the timed path
        resp = timed(5, lambda: send(NodeRole.RA, req))
        timed(6, lambda: ee.accept_ack(resp))
        req = timed(7, ee.prepare_download)
        resp = timed(8, lambda: send(NodeRole.RA, req))
        timed(9, lambda: ee.accept_bundle(resp))
        k = ee.pick_ac()
        ctx["full"] = timed(10, lambda: tlv.encode(ee.sign(payload, SignerMode.CERTIFICATE, location=location, ac_index=k)))
        ctx["digest"] = timed(11, lambda: tlv.encode(ee.sign(payload, SignerMode.DIGEST, location=location, ac_index=k)))
        timed(12, lambda: verified(ctx["full"]))
        timed(13, lambda: verified(ctx["digest"]))


def _run_profile(h: _Harness, profile: str) -> dict:
    results = {a: ProfileResult() for a in ACTIONS}
    for w in range(h.cfg.warmup):
        h.run_iteration(profile, -1 - w, None)
    for it in range(h.cfg.iterations):
        before = {a: len(r.samples_ns) for a, r in results.items()}
        try:
            h.run_iteration(profile, it, results)
        except Exception as exc:  # noqa: BLE001 - reported, not swallowed
            failed = next((a for a in ACTIONS if len(results[a].samples_ns) == before[a]), None)
            log.error("%s iteration %d failed at action %s: %s", profile, it, failed, exc)
            for a in ACTIONS:
                if a == failed:
                    results[a].failure = f"iteration {it}: {type(exc).__name__}: {exc}"
                elif failed is not None and a > failed:
                    results[a].failure = f"not reached (action {failed} failed at iteration {it})"
            # drop the partial iteration so every mean covers completed iterations only
            for a in ACTIONS:
                r = results[a]
                if len(r.samples_ns) > before[a]:
                    del r.samples_ns[before[a]:]
            break
    return results


def run_action(cfg: BenchConfig, profile: str, action: int) -> list:
    """Samples (ns) for one action; the flow up to it is replayed every iteration."""
    if action not in ACTIONS:
        raise ValueError(f"action must be 1..13, got {action}")
    h = _Harness(cfg)
    try:
        return _run_profile(h, profile)[action].samples_ns
    finally:
        h.close()


def run_all(cfg: Optional[BenchConfig] = None) -> BenchReport:
    cfg = cfg or BenchConfig()
    h = _Harness(cfg)
    try:
        per_profile = {p: _run_profile(h, p) for p in cfg.profiles}
    finally:
        h.close()
    rows = [ActionRow(a, per_profile.get("obu", {}).get(a), per_profile.get("rsu", {}).get(a)) for a in ACTIONS]
    host = f"{platform.node()} {platform.platform()} python {platform.python_version()}"
    return BenchReport(cfg.iterations, cfg.seed, cfg.transport, _kernel.BACKEND, host, rows, int(cfg.cache))


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _cell(res: Optional[ProfileResult]) -> str:
    if res is None:
        return "-"
    if res.failure and not res.samples_ns:
        return "FAILED"
    mark = "*" if res.failure else ""
    return f"{res.mean_ms:.2f}{mark}"


def format_text(report: BenchReport) -> str:
    lines = [
        f"SCMS benchmark: {report.iterations} iterations, transport={report.transport}, "
        f"seed={report.seed}, backend={report.backend}, cache={'on' if report.cache else 'off'}",
        f"host: {report.host}",
        "",
        f"{'#':>3}  {'Action':<50} {'OBU ms':>9} {'RSU ms':>9} | {'ref OBU':>9} {'ref RSU':>9}",
        "-" * 98,
    ]
    notes = []
    for row in report.rows:
        p_obu, p_rsu = REFERENCE_MS[row.action]
        lines.append(
            f"{row.action:>3}  {ACTIONS[row.action]:<50} {_cell(row.obu):>9} {_cell(row.rsu):>9} | {p_obu:>9} {p_rsu:>9}"
        )
        for name in ("obu", "rsu"):
            res = getattr(row, name)
            if res is not None and res.failure:
                notes.append(f"  action {row.action} {name.upper()}: {res.failure}")
    lines.append("")
    lines.append("ref columns: published Android 10 handset means, for qualitative comparison only.")
    if notes:
        lines.append("Failures (* = mean over completed iterations):")
        lines.extend(notes)
    return "\n".join(lines) + "\n"


def emit_report(report: BenchReport, fmt: str = "text") -> bytes:
    """``text`` (table), ``tlv`` (canonical, lossless) or ``json`` (lossless)."""
    if fmt == "text":
        return format_text(report).encode()
    if fmt == "tlv":
        return tlv.encode(report)
    if fmt == "json":
        return json.dumps(asdict(report), indent=2, sort_keys=True).encode()
    raise ValueError(f"unknown report format {fmt!r}")


def load_report(data: bytes) -> BenchReport:
    if data[:1] == b"{":
        raw = json.loads(data)
        rows = [
            ActionRow(r["action"], *(ProfileResult(**r[p]) if r[p] is not None else None for p in ("obu", "rsu")))
            for r in raw.pop("rows")
        ]
        return BenchReport(rows=rows, **raw)
    return tlv.decode(data, BenchReport)
