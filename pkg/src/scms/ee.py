"""End-entity (OBU / RSU) client.

The flow is split into prepare / exchange / accept steps so the benchmark
can time encoding, transport and verification separately::

    prepare_enrollment -> ECA -> accept_enrollment
    prepare_authorization -> RA -> accept_ack
    prepare_download -> RA -> accept_bundle

``enroll``, ``authorize`` and ``download`` run each triple end to end.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from scms import tlv
from scms.bke import (
    AcaContribution,
    ButterflyKeyPair,
    CaterpillarKeySet,
    CocoonIndex,
    cocoon_privates,
    gen_caterpillar,
    recover_butterfly,
)
from scms.certs import YEAR, Certificate, Role, TrustStore, cert_digest, time64, verify_chain
from scms.curve import (
    G,
    KeyPair,
    default_rng,
    ecdsa_sign,
    ecdsa_verify,
    keygen,
    record,
    scalar_from_bytes,
    scalar_mul,
    scalar_to_bytes,
)
from scms.errors import (
    AckHashMismatch,
    KeyMismatch,
    MalformedInput,
    MissingIssuer,
    MissingPrecondition,
    ResponseVerifyFailed,
    TagMismatch,
    VerifyFailed,
)
from scms.messages import (
    AckStatus,
    EcaEeCertResponse,
    EeEcaCertRequest,
    EeRaCertRequest,
    EeRaDownloadRequest,
    ErrorResponse,
    RaEeCertAck,
    request_hash,
    unpack_bundle,
)
from scms.nodes import RaEeBundle, current_period
from scms.spdu import (
    PSID_BSM,
    PSID_SPAT,
    Location,
    MessageClass,
    SignerMode,
    Spdu,
    build_spdu,
    make_tbs,
)
from scms.transport import NodeRole, Transport

log = logging.getLogger(__name__)


class DeviceKind(enum.Enum):
    OBU = "obu"
    RSU = "rsu"


@dataclass(frozen=True)
class EeProfile:
    kind: DeviceKind
    batch_size: int
    psid: int

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")

    @property
    def msg_class(self) -> MessageClass:
        return MessageClass.BSM if self.kind is DeviceKind.OBU else MessageClass.SPAT


OBU = EeProfile(DeviceKind.OBU, 20, PSID_BSM)
RSU = EeProfile(DeviceKind.RSU, 1, PSID_SPAT)
PROFILES = {"obu": OBU, "rsu": RSU}


@dataclass
class EeState:
    profile: EeProfile
    ee_id: str
    canonical: KeyPair
    store: TrustStore
    enrollment: Optional[KeyPair] = None
    ec: Optional[Certificate] = None
    caterpillar: Optional[CaterpillarKeySet] = None
    time_period: Optional[int] = None
    sent_hash: Optional[bytes] = None
    request_hash: Optional[bytes] = None
    acs: list = field(default_factory=list)  # (Certificate, ButterflyKeyPair)
    key_cache: Optional[dict] = None  # CocoonIndex -> (b, q)
    next_ac: int = 0


def _unwrap(data: bytes, expect: type):
    msg = tlv.decode(data)
    if isinstance(msg, ErrorResponse):
        raise msg.exception()
    if not isinstance(msg, expect):
        raise MalformedInput(f"expected {expect.__name__}, got {type(msg).__name__}")
    return msg


class EndEntity:
    """One device. Single-threaded; share nodes between devices via a transport."""

    def __init__(self, state: EeState, transport: Optional[Transport] = None, *, rng=None, clock=time64):
        self.state = state
        self.transport = transport
        self.rng = rng
        self.clock = clock

    @classmethod
    def create(cls, profile: EeProfile, store: TrustStore, transport=None, *, ee_id=None, rng=None, clock=time64):
        rng_ = rng or default_rng()
        ee_id = ee_id or f"{profile.kind.value}-{rng_.randbytes(4).hex()}"
        state = EeState(profile, ee_id, keygen(rng_), store.copy())
        return cls(state, transport, rng=rng, clock=clock)

    # -- helpers ------------------------------------------------------------

    def _authority(self, role: Role) -> Certificate:
        for cert in self.state.store.certs.values():
            if cert.role is role:
                return cert
        raise MissingPrecondition(f"no {role.name} certificate in the trust store")

    def _signed_by(self, msg, sig_field: str, key) -> bool:
        sig = getattr(msg, sig_field)
        return sig is not None and ecdsa_verify(key, tlv.tbs_bytes(msg), sig)

    def _sign(self, msg, sig_field: str, key: KeyPair):
        return replace(msg, **{sig_field: ecdsa_sign(key.private, tlv.tbs_bytes(msg), self.rng)})

    def _send(self, role: NodeRole, payload: bytes) -> bytes:
        if self.transport is None:
            raise MissingPrecondition("end entity has no transport")
        return self.transport.send(role, payload)

    # -- enrollment ---------------------------------------------------------

    def prepare_enrollment(self, lifetime: int = 3 * YEAR) -> bytes:
        """Fresh enrollment key pair (the caterpillar signing pair), signed request."""
        st = self.state
        st.enrollment = keygen(self.rng)
        now = self.clock()
        req = EeEcaCertRequest(st.ee_id, st.enrollment.public, now, now + lifetime, [st.profile.psid])
        return tlv.encode(self._sign(req, "canonical_signature", st.canonical))

    def accept_enrollment(self, data: bytes) -> Certificate:
        st = self.state
        resp = _unwrap(data, EcaEeCertResponse)
        ec = resp.enrollment_cert
        eca = st.store.get(ec.issuer) if ec.issuer else None
        if eca is None or eca.role is not Role.ECA:
            raise ResponseVerifyFailed("enrollment certificate not issued by a known ECA")
        if not self._signed_by(resp, "eca_signature", eca.verify_key):
            raise ResponseVerifyFailed("ECA response signature does not verify")
        if not verify_chain(ec, st.store, self.clock()):
            raise ResponseVerifyFailed("enrollment certificate chain does not validate")
        if st.enrollment is None or ec.verify_key != st.enrollment.public:
            raise ResponseVerifyFailed("enrollment certificate carries a different key")
        st.ec = ec
        return ec

    def enroll(self) -> Certificate:
        return self.accept_enrollment(self._send(NodeRole.ECA, self.prepare_enrollment()))

    # -- authorization ------------------------------------------------------

    def prepare_authorization(self, time_period: Optional[int] = None) -> bytes:
        st = self.state
        if st.ec is None or st.enrollment is None:
            raise MissingPrecondition("enroll before requesting authorization certificates")
        st.caterpillar = gen_caterpillar(self.rng, signing=st.enrollment)
        st.time_period = current_period(self.clock()) if time_period is None else time_period
        st.key_cache = None
        cat = st.caterpillar
        req = EeRaCertRequest(
            st.ec, cat.A, cat.P, cat.ck, cat.ek, st.profile.psid, st.profile.batch_size, st.time_period
        )
        signed = self._sign(req, "enrollment_signature", st.enrollment)
        st.request_hash = None
        st.sent_hash = request_hash(signed)
        return tlv.encode(signed)

    def accept_ack(self, data: bytes) -> bytes:
        st = self.state
        ack = _unwrap(data, RaEeCertAck)
        if not self._signed_by(ack, "ra_signature", self._authority(Role.RA).verify_key):
            raise ResponseVerifyFailed("RA acknowledgement signature does not verify")
        if ack.status is not AckStatus.ACCEPTED:
            raise ResponseVerifyFailed(f"request rejected: {ack.reason}")
        if ack.request_hash != st.sent_hash:
            raise AckHashMismatch("RA acknowledged different request bytes")
        st.request_hash = ack.request_hash
        return ack.request_hash

    def authorize(self, time_period: Optional[int] = None) -> bytes:
        return self.accept_ack(self._send(NodeRole.RA, self.prepare_authorization(time_period)))

    def precompute_cache(self, indices=None) -> dict:
        """Expand cocoon private keys ahead of the download (off the critical path)."""
        st = self.state
        if st.caterpillar is None:
            raise MissingPrecondition("no caterpillar keys to expand")
        if indices is None:
            indices = [CocoonIndex(st.time_period, j) for j in range(st.profile.batch_size)]
        cat = st.caterpillar
        st.key_cache = {i: cocoon_privates(cat.a, cat.p, cat.ck, cat.ek, i) for i in indices}
        return st.key_cache

    # -- download -----------------------------------------------------------

    def prepare_download(self) -> bytes:
        st = self.state
        if st.request_hash is None:
            raise MissingPrecondition("no accepted authorization request")
        req = EeRaDownloadRequest(st.request_hash, cert_digest(st.ec))
        return tlv.encode(self._sign(req, "enrollment_signature", st.enrollment))

    def accept_bundle(self, data: bytes) -> list:
        """Verify every response and certificate, then rebuild the butterfly keys."""
        st = self.state
        archive = _unwrap(data, RaEeBundle).archive
        info, responses = unpack_bundle(archive)
        if not self._signed_by(info, "ra_signature", self._authority(Role.RA).verify_key):
            raise VerifyFailed("bundle info signature does not verify")
        if info.request_hash != st.request_hash or info.batch_size != st.profile.batch_size:
            raise VerifyFailed("bundle does not belong to the pending request")
        now = self.clock()
        cat = st.caterpillar
        acs = []
        for k, resp in enumerate(responses):
            ac = resp.authorization_cert
            aca = st.store.get(ac.issuer) if ac.issuer else None
            record("aca_response_verifies")
            if aca is None or not self._signed_by(resp, "aca_signature", aca.verify_key):
                raise VerifyFailed("ACA response signature does not verify", index=k)
            try:
                chain_ok = ac.role is Role.AC and verify_chain(ac, st.store, now)
            except MissingIssuer:
                chain_ok = False
            if not chain_ok or resp.index != CocoonIndex(info.time_period, k):
                raise VerifyFailed("authorization certificate does not validate", index=k)
            if st.key_cache is not None and resp.index in st.key_cache:
                b, q = st.key_cache[resp.index]
            else:
                b, q = cocoon_privates(cat.a, cat.p, cat.ck, cat.ek, resp.index)
            contrib = AcaContribution(ac.verify_key, resp.c_ciphertext, resp.index)
            try:
                pair = recover_butterfly(b, q, contrib)
            except (KeyMismatch, TagMismatch) as exc:
                raise KeyMismatch(str(exc), index=k) from exc
            acs.append((ac, pair))
        st.acs = acs
        st.next_ac = 0
        return acs

    def download(self) -> list:
        return self.accept_bundle(self._send(NodeRole.RA, self.prepare_download()))

    # -- SPDUs --------------------------------------------------------------

    def pick_ac(self) -> int:
        """OBUs rotate round-robin per message; RSUs stay on their first AC."""
        st = self.state
        if not st.acs:
            raise MissingPrecondition("no authorization certificates")
        if st.profile.kind is DeviceKind.RSU:
            return 0
        k = st.next_ac % len(st.acs)
        st.next_ac += 1
        return k

    def sign(
        self,
        payload: bytes,
        mode: SignerMode = SignerMode.CERTIFICATE,
        *,
        location: Optional[Location] = None,
        ac_index: Optional[int] = None,
        generation_time: Optional[int] = None,
    ) -> Spdu:
        k = self.pick_ac() if ac_index is None else ac_index
        ac, pair = self.state.acs[k]
        msg_class = self.state.profile.msg_class
        gen = self.clock() if generation_time is None else generation_time
        tbs = make_tbs(payload, msg_class, gen, location, psid=self.state.profile.psid)
        return build_spdu(tbs, mode, ac, pair, msg_class=msg_class, rng=self.rng)

    # -- persistence --------------------------------------------------------

    def save(self, root: Path) -> None:
        """Plain files, including private keys: research use only."""
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        st = self.state
        (root / "profile").write_text(f"{st.profile.kind.value}\n{st.ee_id}\n")
        (root / "canonical.key").write_bytes(scalar_to_bytes(st.canonical.private))
        st.store.save(root / "trust")
        if st.enrollment is not None:
            (root / "enrollment.key").write_bytes(scalar_to_bytes(st.enrollment.private))
        if st.ec is not None:
            (root / "ec.cert").write_bytes(tlv.encode(st.ec))
        if st.caterpillar is not None:
            cat = st.caterpillar
            (root / "caterpillar.bin").write_bytes(
                scalar_to_bytes(cat.p) + cat.ck + cat.ek + st.time_period.to_bytes(4, "big")
            )
        if st.request_hash is not None:
            (root / "request_hash").write_text(st.request_hash.hex())
        acdir = root / "acs"
        if st.acs:
            acdir.mkdir(exist_ok=True)
            for k, (ac, pair) in enumerate(st.acs):
                (acdir / f"{k:04d}.cert").write_bytes(tlv.encode(ac))
                (acdir / f"{k:04d}.key").write_bytes(pair.index.encode() + scalar_to_bytes(pair.private))

    @classmethod
    def load(cls, root: Path, transport=None, *, rng=None) -> "EndEntity":
        root = Path(root)
        kind, ee_id = (root / "profile").read_text().split()
        profile = PROFILES[kind]
        store = TrustStore.load(root / "trust")
        canonical = KeyPair.from_private(scalar_from_bytes((root / "canonical.key").read_bytes()))
        st = EeState(profile, ee_id, canonical, store)
        if (root / "enrollment.key").exists():
            st.enrollment = KeyPair.from_private(scalar_from_bytes((root / "enrollment.key").read_bytes()))
        if (root / "ec.cert").exists():
            st.ec = tlv.decode((root / "ec.cert").read_bytes(), Certificate)
        if (root / "caterpillar.bin").exists():
            raw = (root / "caterpillar.bin").read_bytes()
            p = scalar_from_bytes(raw[:32])
            st.caterpillar = CaterpillarKeySet(
                st.enrollment.private, st.enrollment.public, p, scalar_mul(p, G), raw[32:48], raw[48:64]
            )
            st.time_period = int.from_bytes(raw[64:68], "big")
        if (root / "request_hash").exists():
            st.request_hash = bytes.fromhex((root / "request_hash").read_text().strip())
        for path in sorted((root / "acs").glob("*.cert")) if (root / "acs").exists() else ():
            ac = tlv.decode(path.read_bytes(), Certificate)
            raw = path.with_suffix(".key").read_bytes()
            st.acs.append((ac, ButterflyKeyPair(scalar_from_bytes(raw[8:]), ac.verify_key, CocoonIndex.decode(raw[:8]))))
        st.sent_hash = st.request_hash
        return cls(st, transport, rng=rng)
