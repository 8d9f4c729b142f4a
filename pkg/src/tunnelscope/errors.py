"""Exception types shared across the toolkit."""


class TunnelScopeError(Exception):
    """Base class for every error raised by this package."""


# capture / pcap


class BadMagic(TunnelScopeError):
    """File does not start with a recognized classic-pcap magic number."""


class TruncatedRecord(TunnelScopeError):
    """A pcap header claims more bytes than remain in the file."""


class InvalidFormat(TunnelScopeError):
    """A CSV, profile, or manifest file does not match its documented layout."""


# DNS question parsing


class DnsParseError(TunnelScopeError):
    """Base class for DNS question-section parse failures."""


class MalformedName(DnsParseError):
    pass


class NoQuestion(DnsParseError):
    pass


class CompressedName(DnsParseError):
    """Compression pointers are rejected in the question name."""


# entropy / statistics


class EmptyInput(TunnelScopeError):
    """An operation that needs at least one element got none."""


class EmptySeries(EmptyInput):
    pass


class NoMatchingPackets(TunnelScopeError):
    """No packet in the capture satisfied the abstraction level's filter."""


# tunnel codec


class CodecError(TunnelScopeError):
    pass


class AlphabetViolation(CodecError):
    """Decode input contains a byte outside the codec's alphabet."""


class NameOverflow(CodecError):
    """An encoded fragment cannot fit DNS name limits; lower fragment_size."""


class MissingFragment(CodecError):
    pass


class HeaderMismatch(CodecError):
    pass


class DecompressFailure(CodecError):
    pass


# classifier / evaluation


class NoProfiles(TunnelScopeError):
    pass


class DuplicateLabel(TunnelScopeError):
    pass
