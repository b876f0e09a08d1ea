"""Response-quality metrics: byte-exact accuracy, configuration-aware
validity, and epsilon-tolerant validity, plus the evaluation driver."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from . import modbus, s7
from .capture import split_context
from .config import ProtocolConfig
from .dataset import SamplePair
from .errors import BadRequest
from .plant import modbus_verdict, s7_verdict


def bca(pred_hex: str, ref_hex: str) -> bool:
    """Byte-exact match after hex canonicalization."""
    try:
        return modbus.canonical_hex(pred_hex) == modbus.canonical_hex(ref_hex)
    except Exception:
        return False


# -- Modbus validity ---------------------------------------------------------

def _modbus_rva(pred_hex: str, request: modbus.Frame, cfg: ProtocolConfig) -> bool:
    try:
        pred = modbus.decode(pred_hex, role="response")
    except Exception:
        return False
    if pred.header.transaction_id != request.header.transaction_id:
        return False
    if pred.header.unit_id != request.header.unit_id:
        return False
    expected_exc = modbus_verdict(cfg, request)
    fc = request.pdu.function_code
    body = pred.pdu.body
    if expected_exc is not None:
        return pred.pdu.function_code == (fc | 0x80) and isinstance(body, modbus.ExceptionPdu)
    if pred.pdu.function_code != fc:
        return False
    req_body = request.pdu.body
    if fc in modbus.READ_FUNCTIONS:
        if not isinstance(body, modbus.ReadResponse):
            return False
        if fc == modbus.READ_HOLDING_REGISTERS:
            if body.byte_count != 2 * req_body.quantity:
                return False
            for i in range(req_body.quantity):
                word = int.from_bytes(body.values[2 * i:2 * i + 2], "big")
                if not cfg.val_low <= word <= cfg.val_high:
                    return False
            return True
        if body.byte_count != (req_body.quantity + 7) // 8:
            return False
        # pad bits beyond the requested quantity must be zero
        bits = modbus.unpack_bits(body.values, 8 * body.byte_count)
        return all(b == 0 for b in bits[req_body.quantity:])
    if fc in (modbus.WRITE_SINGLE_COIL, modbus.WRITE_SINGLE_REGISTER):
        if not isinstance(body, modbus.WriteAck) or body.address != req_body.address:
            return False
        if fc == modbus.WRITE_SINGLE_COIL:
            return body.value == req_body.value  # bit echo has no tolerance
        return cfg.val_low <= body.value <= cfg.val_high
    # fc 15/16 ack echoes address and quantity
    return (isinstance(body, modbus.WriteAck)
            and body.address == req_body.address
            and body.value == req_body.quantity)


def _modbus_values(frame: modbus.Frame, quantity: int | None):
    """(analog values, digital values) carried by a response frame."""
    body = frame.pdu.body
    if isinstance(body, modbus.ExceptionPdu):
        return [body.exception_code], []
    if isinstance(body, modbus.ReadResponse):
        if frame.pdu.function_code == modbus.READ_HOLDING_REGISTERS:
            words = [int.from_bytes(body.values[2 * i:2 * i + 2], "big")
                     for i in range(body.byte_count // 2)]
            return words, []
        count = quantity if quantity is not None else 8 * body.byte_count
        return [], modbus.unpack_bits(body.values, count)
    if isinstance(body, modbus.WriteAck):
        if frame.pdu.function_code == modbus.WRITE_SINGLE_REGISTER:
            return [body.value], []
        if frame.pdu.function_code == modbus.WRITE_SINGLE_COIL:
            return [], [1 if body.value == modbus.COIL_ON else 0]
        return [], []  # multi-write ack fields are structural
    return [], []


def _modbus_rva_eps(pred_hex: str, ref_hex: str, request: modbus.Frame,
                    cfg: ProtocolConfig, eps: int) -> bool:
    if not _modbus_rva(pred_hex, request, cfg):
        return False
    try:
        pred = modbus.decode(pred_hex, role="response")
        ref = modbus.decode(ref_hex, role="response")
    except Exception:
        return False
    if type(pred.pdu.body) is not type(ref.pdu.body):
        return False
    quantity = None
    if isinstance(request.pdu.body, modbus.ReadRequest):
        quantity = request.pdu.body.quantity
    pred_analog, pred_digital = _modbus_values(pred, quantity)
    ref_analog, ref_digital = _modbus_values(ref, quantity)
    if len(pred_analog) != len(ref_analog) or len(pred_digital) != len(ref_digital):
        return False
    if any(abs(p - r) > eps for p, r in zip(pred_analog, ref_analog)):
        return False
    return pred_digital == ref_digital  # digital has no epsilon tolerance


# -- S7 validity -------------------------------------------------------------

def _s7_rva(pred_hex: str, request: s7.S7Frame, cfg: ProtocolConfig) -> bool:
    try:
        pred = s7.decode_s7(pred_hex)
    except Exception:
        return False
    if pred.pdu_type != s7.PDU_TYPE_ACK_DATA or pred.pdu_ref != request.pdu_ref:
        return False
    if pred.function != request.function:
        return False
    verdict = s7_verdict(cfg, request)
    if isinstance(verdict, tuple):
        return pred.error_class != 0
    if pred.error_class != 0:
        return False
    if request.function == s7.FUNC_READ_VAR:
        if len(pred.data_items) != len(request.items):
            return False
        for item, data, code in zip(request.items, pred.data_items, verdict):
            if (data.return_code == s7.RET_SUCCESS) != (code == s7.RET_SUCCESS):
                return False
            if code != s7.RET_SUCCESS:
                continue
            if item.transport_size == s7.TRANSPORT_BIT:
                if len(data.values) != item.count:
                    return False
            else:
                if len(data.values) != 2 * item.count:
                    return False
                for i in range(item.count):
                    word = int.from_bytes(data.values[2 * i:2 * i + 2], "big")
                    if not cfg.val_low <= word <= cfg.val_high:
                        return False
        return True
    if len(pred.write_ack_codes) != len(request.items):
        return False
    return all((got == s7.RET_SUCCESS) == (want == s7.RET_SUCCESS)
               for got, want in zip(pred.write_ack_codes, verdict))


def _s7_values(frame: s7.S7Frame):
    analog: list[int] = []
    digital: list[int] = []
    if frame.error_class:
        analog.extend([frame.error_class, frame.error_code])
    for d in frame.data_items:
        analog.append(d.return_code)
        if d.transport_size == s7.DATA_TRANSPORT_BIT:
            digital.extend(1 if b else 0 for b in d.values)
        else:
            analog.extend(int.from_bytes(d.values[2 * i:2 * i + 2], "big")
                          for i in range(len(d.values) // 2))
    analog.extend(frame.write_ack_codes)
    return analog, digital


def _s7_rva_eps(pred_hex: str, ref_hex: str, request: s7.S7Frame,
                cfg: ProtocolConfig, eps: int) -> bool:
    if not _s7_rva(pred_hex, request, cfg):
        return False
    try:
        pred = s7.decode_s7(pred_hex)
        ref = s7.decode_s7(ref_hex)
    except Exception:
        return False
    pred_analog, pred_digital = _s7_values(pred)
    ref_analog, ref_digital = _s7_values(ref)
    if len(pred_analog) != len(ref_analog) or len(pred_digital) != len(ref_digital):
        return False
    if any(abs(p - r) > eps for p, r in zip(pred_analog, ref_analog)):
        return False
    return pred_digital == ref_digital


# -- public metric entry points ---------------------------------------------

def _decode_request(request_hex: str, cfg: ProtocolConfig):
    try:
        if cfg.protocol == "modbus":
            return modbus.decode(request_hex, role="request")
        frame = s7.decode_s7(request_hex)
        if frame.pdu_type != s7.PDU_TYPE_JOB:
            raise BadRequest("S7 request must be a job frame")
        return frame
    except BadRequest:
        raise
    except Exception as exc:
        raise BadRequest(f"request does not decode: {exc}") from None


def rva(pred_hex: str, request_hex: str, cfg: ProtocolConfig) -> bool:
    """Configuration-aware packet validity; payload values are only checked
    for range membership."""
    request = _decode_request(request_hex, cfg)
    if cfg.protocol == "modbus":
        return _modbus_rva(pred_hex, request, cfg)
    return _s7_rva(pred_hex, request, cfg)


def rva_eps(pred_hex: str, ref_hex: str, request_hex: str,
            cfg: ProtocolConfig, eps: int) -> bool:
    """Validity plus payload closeness: analog values within +/- eps counts
    of the recorded response, digital values equal."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    request = _decode_request(request_hex, cfg)
    if cfg.protocol == "modbus":
        return _modbus_rva_eps(pred_hex, ref_hex, request, cfg, eps)
    return _s7_rva_eps(pred_hex, ref_hex, request, cfg, eps)


DEFAULT_EPS_GRID = (0, 1, 2, 5, 10, 100)


@dataclass
class MetricReport:
    n: int
    bca: float
    rva: float
    rva_eps: list[tuple[int, float]]
    failures: Counter = field(default_factory=Counter)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "bca": self.bca,
            "rva": self.rva,
            "rva_eps": [{"eps": e, "accuracy": a} for e, a in self.rva_eps],
            "failures": dict(self.failures),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def curve_csv(self) -> str:
        lines = ["eps,rva_eps"]
        lines.extend(f"{e},{a}" for e, a in self.rva_eps)
        return "\n".join(lines) + "\n"


def request_of_record(source_text: str) -> str:
    """The trailing query of a record: context windows end in "q:"."""
    if ":" in source_text:
        _, query = split_context(source_text)
        return query
    return source_text


def evaluate(responder: Callable[[str], str], dataset: Iterable[SamplePair],
             cfg: ProtocolConfig,
             eps_grid: Sequence[int] = DEFAULT_EPS_GRID) -> MetricReport:
    """Query the responder once per record in order and aggregate all three
    metrics over the epsilon grid."""
    eps_grid = sorted(set(eps_grid))
    n = 0
    bca_hits = 0
    rva_hits = 0
    eps_hits = {e: 0 for e in eps_grid}
    failures: Counter = Counter()
    for record in dataset:
        try:
            request_hex = request_of_record(record.source_text)
            _decode_request(request_hex, cfg)
        except (BadRequest, ValueError):
            failures["bad_request"] += 1
            continue
        n += 1
        try:
            pred = responder(record.source_text)
        except Exception:
            failures["responder_error"] += 1
            continue
        if bca(pred, record.target_text):
            bca_hits += 1
        elif pred:
            failures["byte_mismatch"] += 1
        else:
            failures["empty_response"] += 1
        if rva(pred, request_hex, cfg):
            rva_hits += 1
        else:
            failures["invalid_response"] += 1
        for e in eps_grid:
            if rva_eps(pred, record.target_text, request_hex, cfg, e):
                eps_hits[e] += 1
    if n == 0:
        return MetricReport(0, 0.0, 0.0, [(e, 0.0) for e in eps_grid], failures)
    return MetricReport(
        n=n,
        bca=bca_hits / n,
        rva=rva_hits / n,
        rva_eps=[(e, eps_hits[e] / n) for e in eps_grid],
        failures=failures,
    )
