"""Exception hierarchy shared by every layer.

Node-side failures carry a stable numeric ``code`` so they survive the trip
through a signed error response and are re-raised on the client as the same
class.
"""


class ScmsError(Exception):
    code = 1


# crypto
class TagMismatch(ScmsError):
    code = 10


class MalformedEphemeralPoint(ScmsError):
    code = 11


class KeyMismatch(ScmsError):
    code = 12

    def __init__(self, msg="", index=None):
        super().__init__(msg if index is None else f"entry {index}: {msg}")
        self.index = index


# certificates
class RoleViolation(ScmsError):
    code = 20


class ValidityViolation(ScmsError):
    code = 21


class MissingIssuer(ScmsError):
    code = 22


class InsufficientElectors(ScmsError):
    code = 23


# codec
class MalformedInput(ScmsError):
    code = 30

    def __init__(self, msg, offset=None):
        super().__init__(msg if offset is None else f"{msg} (offset {offset})")
        self.offset = offset


class BadArchive(ScmsError):
    code = 31


class MissingEntry(ScmsError):
    code = 32


class CountMismatch(ScmsError):
    code = 33


# nodes
class UnknownDevice(ScmsError):
    code = 40


class BadSignature(ScmsError):
    code = 41


class BadEnrollmentCert(ScmsError):
    code = 42


class BatchTooLarge(ScmsError):
    code = 43


class NotFound(ScmsError):
    code = 44


class NotReady(ScmsError):
    code = 45


class WrongRequester(ScmsError):
    code = 46


class TransportError(ScmsError):
    code = 47


# end entity
class ResponseVerifyFailed(ScmsError):
    code = 50


class AckHashMismatch(ScmsError):
    code = 51


class VerifyFailed(ScmsError):
    code = 52

    def __init__(self, msg="", index=None):
        super().__init__(msg if index is None else f"entry {index}: {msg}")
        self.index = index


class MissingPrecondition(ScmsError):
    code = 53


# spdu
class HeaderRuleViolation(ScmsError):
    code = 60


class KeyCertMismatch(ScmsError):
    code = 61


class UnknownSigner(ScmsError):
    code = 62


def _collect(cls):
    out = {cls.code: cls}
    for sub in cls.__subclasses__():
        out.update(_collect(sub))
    return out


def error_for_code(code):
    """Return the exception class registered for ``code`` (ScmsError if unknown)."""
    return _collect(ScmsError).get(code, ScmsError)
