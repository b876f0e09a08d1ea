"""Exception hierarchy shared across the toolkit."""


class PlcMimicError(Exception):
    """Base class for all toolkit errors."""


class CodecError(PlcMimicError):
    """A frame could not be encoded or decoded."""


class Truncated(CodecError):
    """Input ends before the layer named in the message is complete."""


class BadProtocolId(CodecError):
    """Modbus/TCP protocol identifier field is nonzero."""


class UnknownFunction(CodecError):
    """Function code outside the supported set."""


class LengthMismatch(CodecError):
    """A length field disagrees with the actual byte count."""


class InvalidPdu(CodecError):
    """PDU fields are internally inconsistent (quantity vs byte count etc.)."""


class InvalidRequest(CodecError):
    """A request frame required by an operation does not decode."""


class InvalidItem(CodecError):
    """S7 item list is malformed or empty."""


class EmptyRange(PlcMimicError):
    """Boundary triplet requested over a degenerate interval."""


class DegenerateDensity(PlcMimicError):
    """Weighted sampling density has zero total mass."""


class InsufficientHistory(PlcMimicError):
    """Not enough request/response pairs to build a context window."""


class BadPcap(PlcMimicError):
    """Capture file is not a classic PCAP or is structurally broken."""


class NoMatchingTraffic(PlcMimicError):
    """Capture contains no TCP traffic on the configured port."""


class BadRequest(PlcMimicError):
    """Ground-truth request in an evaluation record does not decode."""


class ProbeTimeout(PlcMimicError):
    """A probe request exhausted its retry budget."""


class ConnectionLost(PlcMimicError):
    """The probing connection dropped and could not be re-established."""


class TrainerUnavailable(PlcMimicError):
    """Iterative sizing was started without a usable trainer handle."""


class BindError(PlcMimicError):
    """A server could not bind its listening port."""


class ResponderTimeout(PlcMimicError):
    """A responder missed its per-record deadline."""
