from .probe import (
    DnsProber,
    Evidence,
    ProbeOutcome,
    ProbeTarget,
    Verdict,
    judge,
    load_targets,
    probe_host,
    validate_target,
)
from .simcensor import SimulatedCensor
from .wire import (
    UNRELATED,
    DecodeError,
    DnsQuestion,
    EncodeError,
    ParsedResponse,
    decode_response,
    encode_query,
    encode_response,
)

__all__ = [
    "DecodeError", "DnsProber", "DnsQuestion", "EncodeError", "Evidence", "ParsedResponse",
    "ProbeOutcome", "ProbeTarget", "SimulatedCensor", "UNRELATED", "Verdict", "decode_response",
    "encode_query", "encode_response", "judge", "load_targets", "probe_host", "validate_target",
]
