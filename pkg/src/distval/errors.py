"""Exception hierarchy shared by all distval modules."""


class DistvalError(Exception):
    """Base class for all errors raised by this package."""


class IndexOutOfRange(DistvalError):
    """A player index lies outside [0, n_players)."""


class AlreadyMember(DistvalError):
    """Attempted to insert a player already present in a coalition."""


class TooManyPlayers(DistvalError):
    """An exact-enumeration path was requested beyond the configured limit."""


class OracleFailure(DistvalError):
    """The payoff oracle failed or returned family-inconsistent parameters."""


class InvalidWeights(DistvalError):
    """Size weights are negative or carry no mass."""


class NotNormalized(DistvalError):
    """A probability table does not sum to one within tolerance."""


class BadPermutation(DistvalError):
    """A permutation key is not a permutation of [0, n)."""


class SelfMembership(DistvalError):
    """A player's coalition table contains the player itself."""


class OutOfRange(DistvalError):
    """A numeric argument violates its domain (probability, count, class index)."""


class NegativeSigma(DistvalError):
    """A Gaussian scale parameter is negative."""


class NonFinite(DistvalError):
    """Natural parameters contain NaN or infinities."""


class NormalizationFailure(DistvalError):
    """A computed distribution's mass deviates from one beyond hard tolerance."""


class UnsupportedFamily(DistvalError):
    """The requested statistic is undefined for this payoff family."""


class SpecValidation(DistvalError):
    """A game specification is malformed or dimensionally inconsistent."""


class BridgeStartFailure(DistvalError):
    """The bridge subprocess could not be started or failed its handshake."""


class ProtocolViolation(DistvalError):
    """The bridge sent a malformed or dimensionally wrong message."""


class BridgeTimeout(DistvalError):
    """The bridge did not answer within the configured timeout."""


class InvalidClasses(DistvalError):
    """Fidelity classes are equal or outside [0, d)."""
