"""Reduced-word algebra and ball indexing for the homogeneous tree of degree q.

Vertices are reduced words over a q-letter alphabet.  For even q the
letters come in inverse pairs (letter j and letter j + q/2 cancel); for
odd q every letter is its own inverse.  Words are stored as tuples of
small integers 0..q-1, so equality and hashing are structural and O(1)
amortized.
"""

from dataclasses import dataclass
from functools import cached_property

from .errors import CapacityError

#: A vertex of the tree: a reduced tuple of letters.
Word = tuple

ROOT: Word = ()

# Balls are enumerated eagerly; this guards against accidental exponential
# requests.  Overridable per call.
DEFAULT_BALL_CAP = 500_000


@dataclass(frozen=True)
class Alphabet:
    """The generator alphabet of the degree-q tree."""

    q: int

    def __post_init__(self):
        if self.q < 3:
            raise ValueError(f"tree degree must be >= 3, got {self.q}")

    @property
    def parity(self) -> str:
        return "even" if self.q % 2 == 0 else "odd"

    @cached_property
    def letters(self):
        return tuple(range(self.q))

    def inverse(self, letter: int) -> int:
        """Inverse letter: identity for odd q, half-shift for even q."""
        self.check_letter(letter)
        if self.q % 2 == 1:
            return letter
        return (letter + self.q // 2) % self.q

    def check_letter(self, letter):
        if not isinstance(letter, int) or not 0 <= letter < self.q:
            raise ValueError(f"unknown letter {letter!r} for q={self.q}")

    def letter_name(self, letter: int) -> str:
        self.check_letter(letter)
        if self.q % 2 == 1:
            if self.q == 3:
                return "abc"[letter]
            return f"a{letter + 1}"
        half = self.q // 2
        if self.q == 4:
            base = "ab"[letter % half]
        else:
            base = f"a{letter % half + 1}"
        return base if letter < half else base + "^-1"

    def word_name(self, word: Word) -> str:
        if not word:
            return "e"
        return ".".join(self.letter_name(l) for l in word)


def reduce_word(letters, alphabet: Alphabet) -> Word:
    """Reduce a letter sequence to its canonical form.

    Adjacent inverse pairs (equal pairs for odd q) are cancelled until
    none remain; the result is independent of cancellation order.
    """
    stack = []
    for letter in letters:
        alphabet.check_letter(letter)
        if stack and stack[-1] == alphabet.inverse(letter):
            stack.pop()
        else:
            stack.append(letter)
    return tuple(stack)


def append_letter(word: Word, letter: int, alphabet: Alphabet) -> Word:
    """Reduced product word * letter; length changes by exactly one."""
    alphabet.check_letter(letter)
    if word and word[-1] == alphabet.inverse(letter):
        return word[:-1]
    return word + (letter,)


def inverse_word(word: Word, alphabet: Alphabet) -> Word:
    return tuple(alphabet.inverse(l) for l in reversed(word))


def concat(x: Word, y: Word, alphabet: Alphabet) -> Word:
    """Reduced product x * y."""
    return reduce_word(x + y, alphabet)


def neighbors(word: Word, alphabet: Alphabet):
    """The q nearest neighbors of a vertex, in letter order."""
    return [append_letter(word, l, alphabet) for l in alphabet.letters]


def distance(x: Word, y: Word, alphabet: Alphabet) -> int:
    """Graph distance: the length of the reduced word x^{-1} y."""
    return len(concat(inverse_word(x, alphabet), y, alphabet))


def ball_size(q: int, radius: int) -> int:
    """Closed-form vertex count of a radius-L ball: 1 + sum_l q(q-1)^{l-1}."""
    return 1 + sum(q * (q - 1) ** (l - 1) for l in range(1, radius + 1))


class BallIndex:
    """A deterministic bijection between a ball's vertices and 0..n-1.

    Enumeration is breadth-first by distance to the center; each shell is
    sorted by (length, letters) so two runs produce identical maps.
    """

    def __init__(self, center: Word, radius: int, alphabet: Alphabet, words):
        self.center = center
        self.radius = radius
        self.alphabet = alphabet
        self.words = words
        self._index = {w: i for i, w in enumerate(words)}
        self.distances = [distance(w, center, alphabet) for w in words]
        self.length_parities = [len(w) % 2 for w in words]

    def __len__(self):
        return len(self.words)

    def __contains__(self, word: Word) -> bool:
        return word in self._index

    def index_of(self, word: Word) -> int:
        return self._index[word]

    def vertex_of(self, index: int) -> Word:
        return self.words[index]

    def shell(self, d: int):
        return [w for w, dd in zip(self.words, self.distances) if dd == d]


def enumerate_ball(center: Word, radius: int, alphabet: Alphabet,
                   cap: int = DEFAULT_BALL_CAP) -> BallIndex:
    """Index every vertex within `radius` of `center`."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    n = ball_size(alphabet.q, radius)
    if n > cap:
        raise CapacityError(f"ball of radius {radius} has {n} vertices, cap is {cap}")
    words = [center]
    seen = {center}
    shell = [center]
    for _ in range(radius):
        nxt = []
        for w in shell:
            for v in neighbors(w, alphabet):
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        nxt.sort(key=lambda w: (len(w), w))
        words.extend(nxt)
        shell = nxt
    return BallIndex(center, radius, alphabet, words)
