import hashlib
from fractions import Fraction

from sieve_mmr.core import SieveMessage


def mid(label):
    return hashlib.sha256(label.encode()).digest()


def msg(label, ts, coffer=(), w=1):
    """Hand-built message whose dpow is derived from its label."""
    return SieveMessage(label.encode(), ts, frozenset(mid(c) for c in coffer), 0, mid(label), w)


def accept_all(m):
    return True


def labels(messages, names):
    back = {mid(n): n for n in names}
    return sorted(back[m.dpow] for m in messages)


HALF = Fraction(1, 2)
THIRD = Fraction(1, 3)
