"""Minimal FITS reader/writer with bit-exact round-trips.

Supports what the pipeline consumes: primary image HDUs and IMAGE
extensions, BITPIX in {8, 16, 32, -32, -64}, BSCALE/BZERO value scaling,
and scalar metadata keywords. Header cards are kept verbatim (raw
80-character card images) so that parse -> write reproduces the input
byte for byte. Tables, tile compression and WCS math are out of scope.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import (
    HeaderOverflow,
    MalformedFile,
    MissingKeyword,
    NotAnImage,
    UnsupportedBitpix,
)
from .image import Image2D

BLOCK_SIZE = 2880
CARD_SIZE = 80
CARDS_PER_BLOCK = BLOCK_SIZE // CARD_SIZE

SUPPORTED_BITPIX = (8, 16, 32, -32, -64)

_BITPIX_DTYPE = {
    8: ">u1",
    16: ">i2",
    32: ">i4",
    -32: ">f4",
    -64: ">f8",
}

_INT_RANGE = {
    8: (0, 255),
    16: (-32768, 32767),
    32: (-2147483648, 2147483647),
}

# Keywords the writer owns; user-supplied copies are replaced, not duplicated.
_STRUCTURAL_KEYWORDS = ("SIMPLE", "XTENSION", "BITPIX", "NAXIS", "END")


class ImageSource(enum.Enum):
    LR_GONG = "LR_GONG"
    HR_GST = "HR_GST"


NOMINAL_PLATE_SCALE = {
    ImageSource.LR_GONG: 1.0,
    ImageSource.HR_GST: 0.029,
}

PLATE_SCALE_TOLERANCE = 0.20


# ---------------------------------------------------------------------------
# header cards
# ---------------------------------------------------------------------------

class Card:
    """One 80-character header card, stored verbatim."""

    __slots__ = ("raw",)

    def __init__(self, raw: str):
        if len(raw) != CARD_SIZE:
            raise MalformedFile(f"card must be {CARD_SIZE} chars, got {len(raw)}")
        self.raw = raw

    @property
    def keyword(self) -> str:
        return self.raw[:8].rstrip()

    @property
    def has_value(self) -> bool:
        return self.raw[8:10] == "= "

    @property
    def value(self):
        """Parsed value: bool, int, float, str, or None for valueless cards."""
        if not self.has_value:
            return None
        body = self.raw[10:]
        return _parse_value(body)[0]

    @property
    def comment(self) -> str:
        if not self.has_value:
            return self.raw[8:].rstrip()
        return _parse_value(self.raw[10:])[1]

    @classmethod
    def make(cls, keyword: str, value=None, comment: str = "") -> "Card":
        """Format a new card in fixed format.

        Raises HeaderOverflow when the value or comment does not fit the
        80-character card.
        """
        keyword = keyword.upper()
        if len(keyword) > 8:
            raise HeaderOverflow(f"keyword longer than 8 chars: {keyword!r}")
        if keyword in ("COMMENT", "HISTORY", ""):
            text = str(value if value is not None else comment or "")
            raw = keyword.ljust(8) + text
            if len(raw) > CARD_SIZE:
                raise HeaderOverflow(f"commentary card too long: {keyword}")
            return cls(raw.ljust(CARD_SIZE))
        if value is None and not comment:
            return cls(keyword.ljust(CARD_SIZE))
        raw = keyword.ljust(8) + "= " + _format_value(value)
        if comment:
            raw += " / " + comment
        if len(raw) > CARD_SIZE:
            raise HeaderOverflow(
                f"card for {keyword} is {len(raw)} chars; limit is {CARD_SIZE}"
            )
        return cls(raw.ljust(CARD_SIZE))

    def __repr__(self):
        return f"Card({self.raw.rstrip()!r})"

    def __eq__(self, other):
        return isinstance(other, Card) and self.raw == other.raw

    def __hash__(self):
        return hash(self.raw)


def _parse_value(body: str):
    """Split the portion after '= ' into (value, comment)."""
    body_str = body
    if body_str.lstrip().startswith("'"):
        # quoted string; '' is an escaped quote
        s = body_str.lstrip()
        consumed = len(body_str) - len(s)
        i = 1
        chars = []
        while i < len(s):
            if s[i] == "'":
                if i + 1 < len(s) and s[i + 1] == "'":
                    chars.append("'")
                    i += 2
                    continue
                i += 1
                break
            chars.append(s[i])
            i += 1
        rest = s[i:]
        comment = ""
        slash = rest.find("/")
        if slash >= 0:
            comment = rest[slash + 1:].strip()
        # FITS strings have significant leading, insignificant trailing blanks
        return "".join(chars).rstrip(), comment
    slash = body_str.find("/")
    if slash >= 0:
        value_str = body_str[:slash].strip()
        comment = body_str[slash + 1:].strip()
    else:
        value_str = body_str.strip()
        comment = ""
    if value_str == "":
        return None, comment
    if value_str == "T":
        return True, comment
    if value_str == "F":
        return False, comment
    try:
        return int(value_str), comment
    except ValueError:
        pass
    try:
        return float(value_str.replace("D", "E").replace("d", "e")), comment
    except ValueError:
        pass
    return value_str, comment


def _format_value(value) -> str:
    if isinstance(value, bool):
        return str("T" if value else "F").rjust(20)
    if isinstance(value, (int, np.integer)):
        return str(int(value)).rjust(20)
    if isinstance(value, (float, np.floating)):
        text = repr(float(value)).upper()
        if "." not in text and "E" not in text and "NAN" not in text and "INF" not in text:
            text += ".0"
        return text.rjust(20)
    if isinstance(value, str):
        escaped = value.replace("'", "''")
        if len(escaped) > 68:
            raise HeaderOverflow(f"string value too long for one card: {value!r}")
        return "'" + escaped.ljust(8) + "'"
    raise HeaderOverflow(f"unsupported header value type: {type(value).__name__}")


# ---------------------------------------------------------------------------
# file model
# ---------------------------------------------------------------------------

@dataclass
class HDU:
    """Header cards (END excluded) plus the padded raw data payload."""

    cards: list[Card]
    data: bytes
    data_nbytes: int

    def get(self, keyword: str, default=None):
        for card in self.cards:
            if card.keyword == keyword:
                return card.value
        return default

    def require_int(self, keyword: str) -> int:
        value = self.get(keyword)
        if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
            raise MalformedFile(f"missing or non-integer {keyword} card")
        return int(value)


@dataclass
class FitsFile:
    hdus: list[HDU]


def parse_fits(data: bytes) -> FitsFile:
    """Parse a FITS byte stream into its HDUs, preserving all cards verbatim."""
    if not data:
        raise MalformedFile("empty input")
    if len(data) % BLOCK_SIZE != 0:
        raise MalformedFile(
            f"file size {len(data)} is not a multiple of {BLOCK_SIZE}"
        )
    hdus: list[HDU] = []
    pos = 0
    while pos < len(data):
        hdu, pos = _parse_hdu(data, pos, primary=not hdus)
        hdus.append(hdu)
    return FitsFile(hdus)


def _parse_hdu(data: bytes, pos: int, primary: bool) -> tuple[HDU, int]:
    cards: list[Card] = []
    end_found = False
    while not end_found:
        if pos + BLOCK_SIZE > len(data):
            raise MalformedFile("unterminated header (missing END card)")
        block = data[pos:pos + BLOCK_SIZE]
        try:
            text = block.decode("ascii")
        except UnicodeDecodeError as exc:
            raise MalformedFile("header block contains non-ASCII bytes") from exc
        for i in range(CARDS_PER_BLOCK):
            raw = text[i * CARD_SIZE:(i + 1) * CARD_SIZE]
            if raw[:8].rstrip() == "END":
                end_found = True
                break
            cards.append(Card(raw))
        pos += BLOCK_SIZE

    if not cards:
        raise MalformedFile("header has no cards before END")
    first = cards[0].keyword
    if primary:
        if first != "SIMPLE":
            raise MalformedFile(f"first keyword must be SIMPLE, got {first!r}")
    else:
        if first != "XTENSION":
            raise MalformedFile(f"extension must start with XTENSION, got {first!r}")
        xtype = cards[0].value
        if not isinstance(xtype, str) or xtype.strip() != "IMAGE":
            raise NotAnImage(f"unsupported extension type {xtype!r}")

    hdu_probe = HDU(cards, b"", 0)
    bitpix = hdu_probe.require_int("BITPIX")
    if bitpix not in SUPPORTED_BITPIX:
        raise UnsupportedBitpix(f"BITPIX {bitpix} not in {SUPPORTED_BITPIX}")
    naxis = hdu_probe.require_int("NAXIS")
    if naxis < 0 or naxis > 999:
        raise MalformedFile(f"NAXIS {naxis} out of range")
    dims = []
    for n in range(1, naxis + 1):
        dims.append(hdu_probe.require_int(f"NAXIS{n}"))
    pcount = int(hdu_probe.get("PCOUNT", 0) or 0)
    gcount = int(hdu_probe.get("GCOUNT", 1) or 1)
    nbytes = 0
    if naxis > 0:
        nbytes = abs(bitpix) // 8 * gcount * (pcount + math.prod(dims))
    padded = (nbytes + BLOCK_SIZE - 1) // BLOCK_SIZE * BLOCK_SIZE
    if pos + padded > len(data):
        raise MalformedFile("data segment truncated")
    payload = data[pos:pos + padded]
    return HDU(cards, payload, nbytes), pos + padded


# ---------------------------------------------------------------------------
# image access
# ---------------------------------------------------------------------------

@dataclass
class ObsMetadata:
    """Observation metadata the pipeline needs from a FITS header."""

    timestamp: datetime | None
    plate_scale: float
    rotation_angle: float
    source: ImageSource

    def __post_init__(self):
        if not self.plate_scale > 0:
            raise ValueError(f"plate scale must be positive, got {self.plate_scale}")


def read_image_hdu(
    file: FitsFile,
    index: int = 0,
    *,
    timestamp_keyword: str = "DATE-OBS",
    rotation_keyword: str | None = None,
    plate_scale_keyword: str = "CDELT1",
    source: ImageSource | None = None,
    strict: bool = False,
    check_plate_scale: bool = True,
) -> tuple[Image2D, ObsMetadata]:
    """Decode a 2-D image HDU into physical values plus its metadata.

    Physical value = raw * BSCALE + BZERO. Integer rasters honour the BLANK
    keyword; float rasters treat NaN as the undefined-pixel marker. Both are
    reported through the validity mask. The rotation-angle keyword has no
    standard name across observatories, so it must be supplied explicitly;
    when None (or absent from the header) the angle is 0.
    """
    if index < 0 or index >= len(file.hdus):
        raise NotAnImage(f"no HDU at index {index}")
    hdu = file.hdus[index]
    naxis = hdu.require_int("NAXIS")
    if naxis != 2:
        raise NotAnImage(f"HDU has NAXIS={naxis}, need 2")
    width = hdu.require_int("NAXIS1")
    height = hdu.require_int("NAXIS2")
    bitpix = hdu.require_int("BITPIX")
    if bitpix not in SUPPORTED_BITPIX:
        raise UnsupportedBitpix(f"BITPIX {bitpix} not in {SUPPORTED_BITPIX}")

    raw = np.frombuffer(hdu.data[:hdu.data_nbytes], dtype=_BITPIX_DTYPE[bitpix])
    raw = raw.reshape(height, width)
    bscale = float(hdu.get("BSCALE", 1.0))
    bzero = float(hdu.get("BZERO", 0.0))
    pixels = raw.astype(np.float64) * bscale + bzero

    if bitpix > 0:
        blank = hdu.get("BLANK")
        mask = np.ones(pixels.shape, dtype=bool)
        if blank is not None:
            mask = raw != int(blank)
    else:
        mask = np.isfinite(pixels)
    pixels = np.where(mask, pixels, 0.0)
    image = Image2D(pixels, mask)

    timestamp = None
    ts_value = hdu.get(timestamp_keyword)
    if ts_value is not None:
        timestamp = parse_timestamp(str(ts_value))
    elif strict:
        raise MissingKeyword(f"{timestamp_keyword} absent and strict mode on")

    rotation = 0.0
    if rotation_keyword:
        rot_value = hdu.get(rotation_keyword)
        if rot_value is not None:
            rotation = float(rot_value)
        elif strict:
            raise MissingKeyword(f"{rotation_keyword} absent and strict mode on")

    ps_value = hdu.get(plate_scale_keyword)
    plate_scale = abs(float(ps_value)) if ps_value is not None else None

    if source is None:
        if plate_scale is not None:
            source = ImageSource.HR_GST if plate_scale < 0.1 else ImageSource.LR_GONG
        else:
            source = ImageSource.LR_GONG
    if plate_scale is None:
        plate_scale = NOMINAL_PLATE_SCALE[source]
    elif check_plate_scale:
        nominal = NOMINAL_PLATE_SCALE[source]
        if abs(plate_scale - nominal) > PLATE_SCALE_TOLERANCE * nominal:
            raise ValueError(
                f"plate scale {plate_scale} arcsec/px is outside 20% of the "
                f"{source.value} nominal {nominal}"
            )

    meta = ObsMetadata(timestamp, plate_scale, rotation, source)
    return image, meta


# ---------------------------------------------------------------------------
# writing
# ---------------------------------------------------------------------------

def write_fits(obj, header=None, bitpix: int | None = None) -> bytes:
    """Serialize a FitsFile verbatim, or encode an Image2D with the given cards.

    For Image2D input the structural cards (SIMPLE, BITPIX, NAXIS*) are
    synthesized from the data; all other supplied cards are carried through
    unchanged, and the payload is zero-padded to a 2880-byte boundary.
    """
    if isinstance(obj, FitsFile):
        if header is not None:
            raise ValueError("header argument only applies to Image2D input")
        return _serialize_file(obj)
    if isinstance(obj, Image2D):
        return _write_image(obj, header or [], bitpix)
    raise TypeError(f"cannot write object of type {type(obj).__name__}")


def _serialize_header(cards: list[Card]) -> bytes:
    text = "".join(card.raw for card in cards)
    text += "END".ljust(CARD_SIZE)
    remainder = len(text) % BLOCK_SIZE
    if remainder:
        text += " " * (BLOCK_SIZE - remainder)
    return text.encode("ascii")


def _serialize_file(file: FitsFile) -> bytes:
    out = bytearray()
    for hdu in file.hdus:
        out += _serialize_header(hdu.cards)
        out += hdu.data
    return bytes(out)


def _coerce_cards(header) -> list[Card]:
    cards = []
    for item in header:
        if isinstance(item, Card):
            cards.append(item)
        elif isinstance(item, (tuple, list)):
            cards.append(Card.make(*item))
        else:
            raise TypeError(f"header entries must be Card or tuple, got {type(item)}")
    return cards


def _write_image(image: Image2D, header, bitpix: int | None) -> bytes:
    cards = _coerce_cards(header)
    kept = [c for c in cards if c.keyword not in _STRUCTURAL_KEYWORDS
            and not (c.keyword.startswith("NAXIS") and c.keyword[5:].isdigit())]

    def _lookup(keyword):
        for c in cards:
            if c.keyword == keyword:
                return c.value
        return None

    if bitpix is None:
        header_bitpix = _lookup("BITPIX")
        bitpix = int(header_bitpix) if header_bitpix is not None else -64
    if bitpix not in SUPPORTED_BITPIX:
        raise UnsupportedBitpix(f"BITPIX {bitpix} not in {SUPPORTED_BITPIX}")

    bscale = float(_lookup("BSCALE") or 1.0)
    bzero_value = _lookup("BZERO")
    bzero = float(bzero_value) if bzero_value is not None else 0.0
    blank = _lookup("BLANK")

    out_cards = [
        Card.make("SIMPLE", True, "conforms to FITS standard"),
        Card.make("BITPIX", bitpix),
        Card.make("NAXIS", 2),
        Card.make("NAXIS1", image.width),
        Card.make("NAXIS2", image.height),
    ]
    out_cards.extend(kept)

    payload = _encode_pixels(image, bitpix, bscale, bzero, blank)
    remainder = len(payload) % BLOCK_SIZE
    if remainder:
        payload += b"\0" * (BLOCK_SIZE - remainder)

    return _serialize_header(out_cards) + payload


def _encode_pixels(image: Image2D, bitpix: int, bscale: float, bzero: float,
                   blank) -> bytes:
    dtype = _BITPIX_DTYPE[bitpix]
    if bitpix < 0:
        values = (image.pixels - bzero) / bscale
        values = np.where(image.valid_mask, values, np.nan)
        return values.astype(dtype).tobytes()
    scaled = (image.pixels - bzero) / bscale
    raw = np.rint(scaled)
    lo, hi = _INT_RANGE[bitpix]
    in_range = (raw >= lo) & (raw <= hi)
    if not np.all(in_range[image.valid_mask]):
        raise ValueError(f"pixel values do not fit BITPIX {bitpix} after descaling")
    if not image.all_valid():
        if blank is None:
            raise ValueError(
                "image has invalid pixels but no BLANK card for integer BITPIX"
            )
        raw = np.where(image.valid_mask, raw, float(int(blank)))
    return raw.astype(dtype).tobytes()


# ---------------------------------------------------------------------------
# timestamps
# ---------------------------------------------------------------------------

def parse_timestamp(text: str) -> datetime:
    """Parse a DATE-OBS style timestamp permissively; result is UTC-aware."""
    s = text.strip()
    if s.endswith("Z"):
        s = s[:-1]
    s = s.replace(" ", "T", 1) if ("T" not in s and " " in s) else s
    try:
        dt = datetime.fromisoformat(s)
    except ValueError as exc:
        raise ValueError(f"unparseable timestamp {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    """Strict ISO-8601 UTC, seconds precision unless sub-second data exists."""
    dt = dt.astimezone(timezone.utc) if dt.tzinfo else dt.replace(tzinfo=timezone.utc)
    if dt.microsecond:
        return dt.strftime("%Y-%m-%dT%H:%M:%S.%f")
    return dt.strftime("%Y-%m-%dT%H:%M:%S")
