"""Authority-side actors: enrollment CA, registration authority, authorization CA.

Each node owns a state object and a ``handle(bytes) -> bytes`` entry point
for the transport. Failures are answered with a signed ErrorResponse whose
code maps back to the exception class on the client.

The RA expands cocoon public keys and forwards them to the ACA but never
holds ``p``/``q`` scalars, so it cannot read the encrypted ``c`` values
passing through it.
"""

from __future__ import annotations

import datetime as _dt
import logging
import random
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

from scms import tlv
from scms.bke import CocoonIndex, CocoonPublicPair, aca_respond, cocoon_publics
from scms.certs import (
    WEEK,
    YEAR,
    Certificate,
    CertificateTrustList,
    Role,
    TrustStore,
    build_ctl,
    cert_digest,
    issue_cert,
    time64,
    verify_chain,
    verify_ctl,
)
from scms.curve import KeyPair, Point, ecdsa_sign, ecdsa_verify, keygen, scalar_from_bytes, scalar_to_bytes, sha256
from scms.errors import (
    BadEnrollmentCert,
    BadSignature,
    BatchTooLarge,
    MalformedInput,
    MissingIssuer,
    NotFound,
    NotReady,
    ScmsError,
    UnknownDevice,
    ValidityViolation,
    WrongRequester,
)
from scms.messages import (
    AcaRaCertResponse,
    AckStatus,
    EcaEeCertResponse,
    EeEcaCertRequest,
    EeRaCertRequest,
    EeRaDownloadRequest,
    ErrorResponse,
    RaAcaCertRequest,
    RaEeCertAck,
    RaEeCertInfo,
    pack_bundle,
)
from scms.transport import NodeRole, Transport

log = logging.getLogger(__name__)

Clock = Callable[[], int]


@tlv.message(0x28)
@dataclass(frozen=True)
class RaEeBundle:
    """Download response: the Zip archive as one opaque value."""

    archive: bytes = tlv.f(tlv.Octets())


@tlv.message(0x40)
@dataclass(frozen=True)
class RegistryEntry:
    ee_id: str = tlv.f(tlv.Text())
    canonical_public: Point = tlv.f(tlv.PointCodec())


@tlv.message(0x41)
@dataclass(frozen=True)
class PendingEntry:
    request: bytes = tlv.f(tlv.Octets())
    requester: bytes = tlv.f(tlv.Octets(8))


def period_validity(time_period: int) -> tuple[int, int]:
    """Authorization certificates are valid for one week-long time period."""
    return time_period * WEEK, (time_period + 1) * WEEK


def current_period(now: int) -> int:
    return now // WEEK


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------


@dataclass
class EcaState:
    cert: Certificate
    key: KeyPair
    store: TrustStore
    registry: dict = field(default_factory=dict)  # ee_id -> canonical public Point
    issued: list = field(default_factory=list)  # HashedId8 of issued ECs
    rng: Optional[random.Random] = None
    clock: Clock = time64
    root: Optional[Path] = None
    timings: list = field(default_factory=list)

    def register(self, ee_id: str, canonical_public: Point) -> None:
        self.registry[ee_id] = canonical_public
        if self.root is not None:
            d = self.root / "registry"
            d.mkdir(parents=True, exist_ok=True)
            (d / f"{ee_id.encode().hex()}.tlv").write_bytes(tlv.encode(RegistryEntry(ee_id, canonical_public)))

    def lookup(self, ee_id: str) -> Optional[Point]:
        """Registered canonical key; falls back to disk so out-of-band registrations show up."""
        found = self.registry.get(ee_id)
        if found is None and self.root is not None:
            path = self.root / "registry" / f"{ee_id.encode().hex()}.tlv"
            if path.exists():
                found = self.registry[ee_id] = tlv.decode(path.read_bytes(), RegistryEntry).canonical_public
        return found


@dataclass
class AcaState:
    cert: Certificate
    key: KeyPair
    ra_cert: Certificate
    issued: list = field(default_factory=list)
    rng: Optional[random.Random] = None
    timings: list = field(default_factory=list)


@dataclass
class RaState:
    cert: Certificate
    key: KeyPair
    store: TrustStore
    aca: Optional[Transport] = None
    pending: dict = field(default_factory=dict)  # request_hash -> PendingEntry
    bundles: dict = field(default_factory=dict)  # request_hash -> Zip octets
    max_batch: int = 100
    rng: Optional[random.Random] = None
    clock: Clock = time64
    root: Optional[Path] = None
    timings: list = field(default_factory=list)


def _sign(msg, key: KeyPair, field_name: str, rng):
    return replace(msg, **{field_name: ecdsa_sign(key.private, tlv.tbs_bytes(msg), rng)})


def _write(root: Optional[Path], name: str, data: bytes) -> None:
    if root is None:
        return
    root.mkdir(parents=True, exist_ok=True)
    (root / name).write_bytes(data)


# ---------------------------------------------------------------------------
# handlers
# ---------------------------------------------------------------------------


def eca_handle_cert_request(state: EcaState, req: EeEcaCertRequest) -> EcaEeCertResponse:
    canonical = state.lookup(req.ee_id)
    if canonical is None:
        raise UnknownDevice(f"device {req.ee_id!r} is not registered")
    if req.canonical_signature is None or not ecdsa_verify(canonical, tlv.tbs_bytes(req), req.canonical_signature):
        raise BadSignature("request not signed by the registered canonical key")
    start = max(req.validity_start, state.cert.validity_start)
    end = min(req.validity_end, state.cert.validity_end)
    if start >= end:
        raise ValidityViolation("requested validity outside ECA validity")
    ec = issue_cert(
        state.cert,
        state.key,
        subject_name=req.ee_id,
        role=Role.EC,
        validity=(start, end),
        psids=req.psids,
        verify_key=req.enrollment_public,
        rng=state.rng,
    )
    digest = cert_digest(ec)
    state.issued.append(digest)
    _write(state.root and state.root / "issued", f"{digest.hex()}.cert", tlv.encode(ec))
    return _sign(EcaEeCertResponse(ec), state.key, "eca_signature", state.rng)


def aca_handle_request(state: AcaState, req: RaAcaCertRequest) -> AcaRaCertResponse:
    if req.ra_signature is None or not ecdsa_verify(state.ra_cert.verify_key, tlv.tbs_bytes(req), req.ra_signature):
        raise BadSignature("ACA request not signed by the RA")
    contrib = aca_respond(CocoonPublicPair(req.B, req.Q, req.index), state.rng)
    rng = state.rng or random.SystemRandom()
    ac = issue_cert(
        state.cert,
        state.key,
        subject_name=rng.randbytes(8).hex(),  # pseudonym, never the device identity
        role=Role.AC,
        validity=(req.validity_start, req.validity_end),
        psids=[req.psid],
        verify_key=contrib.butterfly_public,
        rng=state.rng,
    )
    state.issued.append(cert_digest(ac))
    resp = AcaRaCertResponse(ac, contrib.c_ciphertext, req.index)
    return _sign(resp, state.key, "aca_signature", state.rng)


def _call_aca(state: RaState, req: RaAcaCertRequest) -> AcaRaCertResponse:
    if state.aca is None:
        raise ScmsError("RA has no ACA transport")
    out = tlv.decode(state.aca.send(NodeRole.ACA, tlv.encode(req)))
    if isinstance(out, ErrorResponse):
        raise out.exception()
    if not isinstance(out, AcaRaCertResponse):
        raise MalformedInput(f"unexpected ACA reply {type(out).__name__}")
    return out


def ra_handle_cert_request(state: RaState, req: EeRaCertRequest, raw: Optional[bytes] = None) -> RaEeCertAck:
    """Validate, expand cocoon keys, obtain ACs from the ACA and store the bundle.

    ``raw`` is the request exactly as received; the request hash is taken
    over it (the canonical re-encoding when absent).
    """
    now = state.clock()
    ec = req.enrollment_cert
    try:
        chain_ok = ec.role is Role.EC and verify_chain(ec, state.store, now)
    except MissingIssuer:
        chain_ok = False
    if not chain_ok:
        raise BadEnrollmentCert("enrollment certificate does not validate")
    if ec.psids and req.psid not in ec.psids:
        raise BadEnrollmentCert(f"PSID {req.psid:#x} not permitted by the enrollment certificate")
    sig = req.enrollment_signature
    if sig is None or not ecdsa_verify(ec.verify_key, tlv.tbs_bytes(req), sig):
        raise BadSignature("request not signed by the enrollment key")
    if req.batch_size < 1:
        raise MalformedInput("batch_size must be at least 1")
    if req.batch_size > state.max_batch:
        raise BatchTooLarge(f"batch {req.batch_size} exceeds {state.max_batch}")

    raw = tlv.encode(req) if raw is None else raw
    h = sha256(raw)
    start, end = period_validity(req.time_period)
    indices = [CocoonIndex(req.time_period, j) for j in range(req.batch_size)]
    responses = []
    for pair in cocoon_publics(req.A, req.P, req.ck, req.ek, indices):
        aca_req = RaAcaCertRequest(pair.B, pair.Q, pair.index, req.psid, start, end)
        responses.append(_call_aca(state, _sign(aca_req, state.key, "ra_signature", state.rng)))

    info = _sign(RaEeCertInfo(h, req.batch_size, req.time_period, now), state.key, "ra_signature", state.rng)
    entry = PendingEntry(raw, cert_digest(ec))
    state.pending[h] = entry
    state.bundles[h] = pack_bundle(info, responses)
    _write(state.root and state.root / "pending", f"{h.hex()}.tlv", tlv.encode(entry))
    _write(state.root and state.root / "bundles", f"{h.hex()}.zip", state.bundles[h])
    ack = RaEeCertAck(h, AckStatus.ACCEPTED, download_ready_hint=now)
    return _sign(ack, state.key, "ra_signature", state.rng)


def ra_handle_download(state: RaState, req: EeRaDownloadRequest) -> bytes:
    entry = state.pending.get(req.request_hash)
    if entry is None:
        raise NotFound(f"no request with hash {req.request_hash.hex()}")
    bundle = state.bundles.get(req.request_hash)
    if bundle is None:
        raise NotReady("bundle not yet available")
    if req.requester != entry.requester:
        raise WrongRequester("download requested by a different end entity")
    original = tlv.decode(entry.request, EeRaCertRequest)
    key = original.enrollment_cert.verify_key
    if req.enrollment_signature is None or not ecdsa_verify(key, tlv.tbs_bytes(req), req.enrollment_signature):
        raise BadSignature("download request not signed by the original requester")
    return bundle


# ---------------------------------------------------------------------------
# transport glue
# ---------------------------------------------------------------------------


class Node:
    """Decode, dispatch, encode; exceptions become signed ErrorResponses."""

    def __init__(self, state, routes: dict):
        self.state = state
        self.routes = routes

    def error(self, exc: ScmsError) -> bytes:
        err = ErrorResponse(exc.code, str(exc), cert_digest(self.state.cert))
        return tlv.encode(_sign(err, self.state.key, "signature", self.state.rng))

    def __call__(self, payload: bytes) -> bytes:
        t0 = time.perf_counter()
        try:
            msg = tlv.decode(payload)
            route = self.routes.get(type(msg))
            if route is None:
                raise MalformedInput(f"{type(self).__name__} does not accept {type(msg).__name__}")
            out = route(msg, payload)
        except ScmsError as exc:
            log.info("%s rejected request: %s", type(self).__name__, exc)
            out = self.error(exc)
        self.state.timings.append((type(self).__name__, time.perf_counter() - t0))
        return out


class EcaNode(Node):
    def __init__(self, state: EcaState):
        super().__init__(state, {EeEcaCertRequest: lambda m, raw: tlv.encode(eca_handle_cert_request(state, m))})


class AcaNode(Node):
    def __init__(self, state: AcaState):
        super().__init__(state, {RaAcaCertRequest: lambda m, raw: tlv.encode(aca_handle_request(state, m))})


class RaNode(Node):
    def __init__(self, state: RaState):
        super().__init__(
            state,
            {
                EeRaCertRequest: lambda m, raw: tlv.encode(ra_handle_cert_request(state, m, raw)),
                EeRaDownloadRequest: lambda m, raw: tlv.encode(RaEeBundle(ra_handle_download(state, m))),
            },
        )


# ---------------------------------------------------------------------------
# bootstrap and persistence
# ---------------------------------------------------------------------------

DEFAULT_START = time64(_dt.datetime(2024, 1, 1, tzinfo=_dt.timezone.utc))


@dataclass
class PkiConfig:
    seed: Optional[int] = None
    root: Optional[Path] = None
    electors: int = 3
    quorum: int = 2
    start: int = DEFAULT_START
    lifetime: int = 30 * YEAR
    max_batch: int = 100


@dataclass
class Pki:
    ctl: CertificateTrustList
    elector_certs: list
    store: TrustStore
    eca: EcaState
    ra: RaState
    aca: AcaState
    config: PkiConfig

    def loopback(self):
        """Wire all three nodes onto one loopback transport (RA -> ACA included)."""
        from scms.transport import LoopbackTransport

        transport = LoopbackTransport(self.handlers())
        self.ra.aca = transport
        return transport

    def handlers(self) -> dict:
        return {NodeRole.ECA: EcaNode(self.eca), NodeRole.RA: RaNode(self.ra), NodeRole.ACA: AcaNode(self.aca)}

    def authority_certs(self) -> dict:
        return {role: self.store.get(d) for role, d in _by_role(self.store).items()}


def _by_role(store: TrustStore) -> dict:
    return {c.role: d for d, c in store.certs.items() if c.role is not Role.EC and c.role is not Role.AC}


def bootstrap_pki(config: Optional[PkiConfig] = None) -> Pki:
    """Create electors, RCA, ICA, ECA, ACA and RA; persist them if ``config.root`` is set."""
    config = config or PkiConfig()
    rng = random.Random(config.seed) if config.seed is not None else random.SystemRandom()
    validity = (config.start, config.start + config.lifetime)

    electors = []
    for k in range(config.electors):
        key = keygen(rng)
        cert = issue_cert(None, key, subject_name=f"elector-{k}", role=Role.ELECTOR, validity=validity, verify_key=key.public, rng=rng)
        electors.append((key, cert))

    keys = {}
    rca_key = keys["rca"] = keygen(rng)
    rca = issue_cert(None, rca_key, subject_name="rca", role=Role.RCA, validity=validity, verify_key=rca_key.public, rng=rng)
    ica_key = keys["ica"] = keygen(rng)
    ica = issue_cert(rca, rca_key, subject_name="ica", role=Role.ICA, validity=validity, verify_key=ica_key.public, rng=rng)
    certs = {"rca": rca, "ica": ica}
    for name, role in (("eca", Role.ECA), ("aca", Role.ACA), ("ra", Role.RA)):
        keys[name] = keygen(rng)
        certs[name] = issue_cert(ica, ica_key, subject_name=name, role=role, validity=validity, verify_key=keys[name].public, rng=rng)

    ctl = build_ctl([rca], electors, config.quorum, rng=rng)
    store = TrustStore(ctl)
    for cert in certs.values():
        store.add(cert)

    if config.root is not None:
        _persist(Path(config.root), electors, certs, keys, store)
    return _assemble(config, ctl, [c for _, c in electors], store, certs, keys, rng)


def _node_rng(rng, label: str):
    if isinstance(rng, random.SystemRandom):
        return rng
    return random.Random(f"{rng.getrandbits(64)}:{label}")


def _assemble(config, ctl, elector_certs, store, certs, keys, rng) -> Pki:
    root = Path(config.root) if config.root is not None else None
    eca = EcaState(certs["eca"], keys["eca"], store.copy(), rng=_node_rng(rng, "eca"), root=root and root / "eca")
    ra = RaState(certs["ra"], keys["ra"], store.copy(), max_batch=config.max_batch, rng=_node_rng(rng, "ra"), root=root and root / "ra")
    aca = AcaState(certs["aca"], keys["aca"], certs["ra"], rng=_node_rng(rng, "aca"))
    return Pki(ctl, elector_certs, store, eca, ra, aca, config)


def _persist(root: Path, electors, certs, keys, store: TrustStore) -> None:
    try:
        store.save(root / "trust")
        edir = root / "electors"
        edir.mkdir(parents=True, exist_ok=True)
        for key, cert in electors:
            (edir / f"{cert_digest(cert).hex()}.cert").write_bytes(tlv.encode(cert))
        for name, key in keys.items():
            d = root / name
            d.mkdir(parents=True, exist_ok=True)
            # plaintext private keys: research artifact only
            (d / "key.bin").write_bytes(scalar_to_bytes(key.private))
            (d / "cert.cert").write_bytes(tlv.encode(certs[name]))
    except OSError as exc:
        raise ScmsError(f"cannot persist PKI under {root}: {exc}") from exc


def load_pki(root: Path, seed: Optional[int] = None, quorum: int = 2) -> Pki:
    """Reload a PKI written by :func:`bootstrap_pki`, including RA tables and the ECA registry."""
    root = Path(root)
    store = TrustStore.load(root / "trust")
    elector_certs = [tlv.decode(p.read_bytes(), Certificate) for p in sorted((root / "electors").glob("*.cert"))]
    if not verify_ctl(store.ctl, elector_certs, quorum):
        raise ScmsError("stored CTL does not verify under elector quorum")
    certs, keys = {}, {}
    for name in ("rca", "ica", "eca", "aca", "ra"):
        certs[name] = tlv.decode((root / name / "cert.cert").read_bytes(), Certificate)
        keys[name] = KeyPair.from_private(scalar_from_bytes((root / name / "key.bin").read_bytes()))
    rng = random.Random(seed) if seed is not None else random.SystemRandom()
    config = PkiConfig(seed=seed, root=root, quorum=quorum)
    pki = _assemble(config, store.ctl, elector_certs, store, certs, keys, rng)
    for path in sorted((root / "eca" / "registry").glob("*.tlv")):
        entry = tlv.decode(path.read_bytes(), RegistryEntry)
        pki.eca.registry[entry.ee_id] = entry.canonical_public
    for path in sorted((root / "ra" / "pending").glob("*.tlv")):
        h = bytes.fromhex(path.stem)
        pki.ra.pending[h] = tlv.decode(path.read_bytes(), PendingEntry)
        bundle = root / "ra" / "bundles" / f"{path.stem}.zip"
        if bundle.exists():
            pki.ra.bundles[h] = bundle.read_bytes()
    return pki
