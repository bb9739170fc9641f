"""Device-to-host telemetry frames.

One 20-byte little-endian datagram per sample::

    [0:2]   magic b"LS"
    [2]     version (1)
    [3]     flags (bit 0: absolute encoder valid)
    [4:8]   seq            u32
    [8:12]  device_time_ms u32
    [12:14] handlebar_raw  u16 (14-bit)
    [14:16] treadmill_delta i16
    [16:20] CRC-32 (IEEE) of bytes 0..16, u32
"""
import logging
import socket
import struct
import zlib
from dataclasses import dataclass

log = logging.getLogger(__name__)

MAGIC = b"LS"
VERSION = 1
FRAME_SIZE = 20
DEFAULT_PORT = 47801

FLAG_ABS_VALID = 0x01
HANDLEBAR_MAX = 16383

_BODY = struct.Struct("<2sBBIIHh")
_CRC = struct.Struct("<I")


class ProtocolError(ValueError):
    kind = "protocol"


class WrongLength(ProtocolError):
    kind = "wrong-length"


class BadMagic(ProtocolError):
    kind = "bad-magic"


class BadVersion(ProtocolError):
    kind = "bad-version"


class BadCrc(ProtocolError):
    kind = "bad-crc"


class FieldOutOfRange(ProtocolError):
    kind = "field-out-of-range"


@dataclass(frozen=True)
class EncoderFrame:
    seq: int
    device_time_ms: int
    handlebar_raw: int
    treadmill_delta: int
    flags: int = FLAG_ABS_VALID

    def validate(self):
        _check_range("seq", self.seq, 0, 0xFFFFFFFF)
        _check_range("device_time_ms", self.device_time_ms, 0, 0xFFFFFFFF)
        _check_range("handlebar_raw", self.handlebar_raw, 0, HANDLEBAR_MAX)
        _check_range("treadmill_delta", self.treadmill_delta, -32768, 32767)
        _check_range("flags", self.flags, 0, 0xFF)
        return self

    @property
    def abs_valid(self):
        return bool(self.flags & FLAG_ABS_VALID)


def _check_range(name, value, lo, hi):
    if not isinstance(value, int) or isinstance(value, bool):
        raise FieldOutOfRange(f"{name} must be an int, got {type(value).__name__}")
    if not lo <= value <= hi:
        raise FieldOutOfRange(f"{name}={value} outside [{lo}, {hi}]")


def encode_frame(frame: EncoderFrame) -> bytes:
    frame.validate()
    body = _BODY.pack(
        MAGIC,
        VERSION,
        frame.flags,
        frame.seq,
        frame.device_time_ms,
        frame.handlebar_raw,
        frame.treadmill_delta,
    )
    return body + _CRC.pack(zlib.crc32(body))


def decode_frame(packet) -> EncoderFrame:
    """Parse one datagram. Raises a ``ProtocolError`` subclass naming the
    first check that failed; never anything else."""
    try:
        packet = bytes(packet)
    except (TypeError, ValueError) as exc:
        raise WrongLength(f"not a byte string: {exc}") from None
    if len(packet) != FRAME_SIZE:
        raise WrongLength(f"expected {FRAME_SIZE} bytes, got {len(packet)}")
    if packet[0:2] != MAGIC:
        raise BadMagic(f"magic {packet[0:2].hex()}")
    if packet[2] != VERSION:
        raise BadVersion(f"version {packet[2]}")
    (crc,) = _CRC.unpack_from(packet, 16)
    if zlib.crc32(packet[:16]) != crc:
        raise BadCrc(f"crc mismatch (got {crc:08x})")
    _, _, flags, seq, t_ms, raw, delta = _BODY.unpack_from(packet, 0)
    if raw > HANDLEBAR_MAX:
        raise FieldOutOfRange(f"handlebar_raw={raw} exceeds 14 bits")
    return EncoderFrame(seq, t_ms, raw, delta, flags)


def seq_after(prev, seq):
    """True if ``seq`` follows ``prev`` allowing for u32 wraparound."""
    return 0 < ((seq - prev) & 0xFFFFFFFF) < 0x80000000


class FrameSender:
    """Fire-and-forget UDP sender, one frame per datagram."""

    def __init__(self, host="127.0.0.1", port=DEFAULT_PORT):
        self.addr = (host, port)
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    def send(self, frame):
        self.sock.sendto(encode_frame(frame), self.addr)

    def close(self):
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class FrameReceiver:
    """Blocking UDP receiver. Malformed datagrams are counted and dropped;
    frames that do not advance ``seq`` are discarded as duplicates."""

    def __init__(self, host="0.0.0.0", port=DEFAULT_PORT, timeout=0.1):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind((host, port))
        self.sock.settimeout(timeout)
        self.port = self.sock.getsockname()[1]
        self.last_seq = None
        self.rejected = {}
        self.stale = 0

    def recv(self):
        """Next valid frame, or None on timeout."""
        while True:
            try:
                data, _ = self.sock.recvfrom(64)
            except socket.timeout:
                return None
            try:
                frame = decode_frame(data)
            except ProtocolError as exc:
                self.rejected[exc.kind] = self.rejected.get(exc.kind, 0) + 1
                log.debug("dropped datagram: %s", exc)
                continue
            if self.last_seq is not None and not seq_after(self.last_seq, frame.seq):
                self.stale += 1
                continue
            self.last_seq = frame.seq
            return frame

    def close(self):
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
