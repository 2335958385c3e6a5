"""Coin-matrix families, decorated permutations, and shape classification.

Basis conventions: for q=3 the coin basis is ordered (a, b, c); for q=4 it
is (a, b, a^-1, b^-1).  All constructors return exactly unitary matrices
(up to rounding) and raise on out-of-range parameters.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

UNITARITY_TOL = 1e-12


def unitarity_defect(m: np.ndarray) -> float:
    """Max-norm residual of m* m - I."""
    q = m.shape[0]
    return float(np.abs(m.conj().T @ m - np.eye(q)).max())


def spectral_norm(m: np.ndarray) -> float:
    return float(np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False)[0])


@dataclass(frozen=True)
class CoinMatrix:
    """A q x q unitary coin."""

    m: np.ndarray
    check: bool = True

    def __post_init__(self):
        m = np.asarray(self.m, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "m", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"coin must be square, got shape {m.shape}")
        if self.check and unitarity_defect(m) > UNITARITY_TOL:
            raise ValueError("coin matrix is not unitary within 1e-12")

    @property
    def q(self) -> int:
        return self.m.shape[0]

    def decorated(self, phases) -> "CoinMatrix":
        """Left-multiply by diag(e^{i phi_1}, ..., e^{i phi_q})."""
        phases = np.asarray(phases, dtype=float)
        if phases.shape != (self.q,):
            raise ValueError(f"need {self.q} phases, got shape {phases.shape}")
        return CoinMatrix(np.exp(1j * phases)[:, None] * self.m)


class CoinClass(Enum):
    FULLY_LOCALIZING = "fully_localizing"
    FULLY_DELOCALIZING = "fully_delocalizing"
    MIXED = "mixed"
    PROPAGATING_SHAPE = "propagating_shape"
    REDUCING_SHAPE = "reducing_shape"
    OTHER = "other"


def permutation_coin(perm, phases=None) -> CoinMatrix:
    """Decorated permutation coin: entry (perm[t], t) carries e^{i phi_{perm[t]}}.

    `perm` maps source letter t to target letter perm[t] (0-based).
    """
    perm = tuple(perm)
    q = len(perm)
    if sorted(perm) != list(range(q)):
        raise ValueError(f"not a permutation of 0..{q - 1}: {perm}")
    if phases is None:
        phases = np.zeros(q)
    phases = np.asarray(phases, dtype=float)
    m = np.zeros((q, q), dtype=complex)
    for t in range(q):
        m[perm[t], t] = np.exp(1j * phases[perm[t]])
    return CoinMatrix(m)


def cycle_perm(q: int, *cycles) -> tuple:
    """Permutation (0-based mapping tuple) from disjoint cycles."""
    p = list(range(q))
    for cyc in cycles:
        for i, src in enumerate(cyc):
            p[src] = cyc[(i + 1) % len(cyc)]
    return tuple(p)


def boundary_permutation(q: int) -> tuple:
    """The permutation used for localizing boundary conditions.

    Odd q: the full cycle j -> j+1.  Even q: the product of transpositions
    pairing each letter with its inverse.
    """
    if q % 2 == 1:
        return tuple((j + 1) % q for j in range(q))
    return tuple((j + q // 2) % q for j in range(q))


def _rt(r: float):
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must lie in [0, 1], got {r}")
    return r, math.sqrt(1.0 - r * r)


def family_q3_delocalizing(j: int, r: float) -> CoinMatrix:
    """One-parameter q=3 coins with purely a.c. walks for 0 < r <= 1."""
    r, t = _rt(r)
    if j == 1:
        m = [[1, 0, 0], [0, r, t], [0, -t, r]]
    elif j == 2:
        m = [[r, 0, t], [0, 1, 0], [-t, 0, r]]
    elif j == 3:
        m = [[r, t, 0], [-t, r, 0], [0, 0, 1]]
    else:
        raise ValueError(f"j must be 1, 2 or 3, got {j}")
    return CoinMatrix(np.array(m, dtype=complex))


def family_q3_localizing(j: int, r: float) -> CoinMatrix:
    """One-parameter q=3 coins with almost-sure pure point walks for 0 < r < 1."""
    r, t = _rt(r)
    mats = {
        1: [[0, r, t], [1, 0, 0], [0, -t, r]],
        2: [[0, 1, 0], [r, 0, t], [-t, 0, r]],
        3: [[0, 0, 1], [-t, r, 0], [r, t, 0]],
        4: [[0, t, r], [0, r, -t], [1, 0, 0]],
        5: [[r, 0, -t], [t, 0, r], [0, 1, 0]],
        6: [[r, -t, 0], [0, 0, 1], [t, r, 0]],
    }
    if j not in mats:
        raise ValueError(f"j must be in 1..6, got {j}")
    return CoinMatrix(np.array(mats[j], dtype=complex))


def family_q4(kind: str, *angles) -> CoinMatrix:
    """q=4 families: 'reducing', 'propagating_1..3', 'localizing_1..4'.

    Reducing and propagating kinds take two angles (psi, xi); localizing
    kinds take one (psi).
    """
    if kind == "reducing":
        psi, xi = angles
        cp, sp, cx, sx = math.cos(psi), math.sin(psi), math.cos(xi), math.sin(xi)
        m = [[cp, 0, sp, 0], [0, cx, 0, sx], [-sp, 0, cp, 0], [0, -sx, 0, cx]]
    elif kind.startswith("propagating_"):
        psi, xi = angles
        cp, sp, cx, sx = math.cos(psi), math.sin(psi), math.cos(xi), math.sin(xi)
        j = int(kind.split("_")[1])
        if j == 1:
            m = [[cp, 0, 0, sp], [0, cx, sx, 0], [0, -sx, cx, 0], [-sp, 0, 0, cp]]
        elif j == 2:
            m = [[0, cx, 0, sx], [cp, 0, sp, 0], [0, -sx, 0, cx], [-sp, 0, cp, 0]]
        elif j == 3:
            m = [[cp, sp, 0, 0], [-sp, cp, 0, 0], [0, 0, cx, sx], [0, 0, -sx, cx]]
        else:
            raise ValueError(f"unknown kind {kind!r}")
    elif kind.startswith("localizing_"):
        (psi,) = angles
        cp, sp = math.cos(psi), math.sin(psi)
        j = int(kind.split("_")[1])
        if j == 1:
            m = [[0, 0, cp, sp], [0, 0, -sp, cp], [1, 0, 0, 0], [0, 1, 0, 0]]
        elif j == 2:
            m = [[0, 0, 1, 0], [0, 0, 0, 1], [cp, sp, 0, 0], [-sp, cp, 0, 0]]
        elif j == 3:
            m = [[0, cp, sp, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -sp, cp, 0]]
        elif j == 4:
            m = [[0, 0, 1, 0], [cp, 0, 0, sp], [-sp, 0, 0, cp], [0, 1, 0, 0]]
        else:
            raise ValueError(f"unknown kind {kind!r}")
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return CoinMatrix(np.array(m, dtype=complex))


# The localizing subspace family index matching each q=4 localizing
# permutation (see localizing_block_family).
_Q4_LAMBDA = {
    cycle_perm(4, (0, 1, 3, 2)): 4,   # (a b b^-1 a^-1)
    cycle_perm(4, (0, 2, 1, 3)): 1,   # (a a^-1 b b^-1)
    cycle_perm(4, (0, 2, 3, 1)): 3,   # (a a^-1 b^-1 b)
    cycle_perm(4, (0, 3, 1, 2)): 2,   # (a b^-1 b a^-1)
    cycle_perm(4, (0, 2), (1, 3)): 12,  # (a a^-1)(b b^-1)
}

_Q4_S = {
    cycle_perm(4, (0, 1, 2, 3)),  # (a b a^-1 b^-1)
    cycle_perm(4, (0, 3, 2, 1)),  # (a b^-1 a^-1 b)
}

_Q4_PI1 = _Q4_S | {
    cycle_perm(4, (0, 1), (2, 3)),
    cycle_perm(4, (0, 3), (1, 2)),
    cycle_perm(4, (2, 3)),
    cycle_perm(4, (1, 2)),
    cycle_perm(4, (0, 3)),
    cycle_perm(4, (0, 1)),
    cycle_perm(4),  # identity
}

_Q4_PI2 = {
    cycle_perm(4, (1, 2, 3)),
    cycle_perm(4, (1, 3, 2)),
    cycle_perm(4, (0, 2, 3)),
    cycle_perm(4, (0, 3, 2)),
    cycle_perm(4, (0, 1, 3)),
    cycle_perm(4, (0, 3, 1)),
    cycle_perm(4, (0, 1, 2)),
    cycle_perm(4, (0, 2, 1)),
}

_Q4_M = {
    cycle_perm(4, (1, 3)),  # (a)(b b^-1)(a^-1)
    cycle_perm(4, (0, 2)),  # (a a^-1)(b)(b^-1)
}

_Q3_LAMBDA = {cycle_perm(3, (0, 1, 2)), cycle_perm(3, (0, 2, 1))}
_Q3_S = {cycle_perm(3)}
_Q3_M = {cycle_perm(3, (1, 2)), cycle_perm(3, (0, 2)), cycle_perm(3, (0, 1))}

# Zero positions of the q=4 shape templates (row, col).
PROPAGATING_ZEROS = ((0, 2), (1, 3), (2, 0), (3, 1))
REDUCING_ZEROS = ((0, 1), (0, 3), (1, 0), (1, 2), (2, 1), (2, 3), (3, 0), (3, 2))


def as_permutation(coin: CoinMatrix, tol: float = 1e-12):
    """The underlying permutation if the coin is a decorated permutation, else None."""
    m = coin.m
    perm = [None] * coin.q
    for t in range(coin.q):
        col = np.abs(m[:, t])
        hits = np.nonzero(col > tol)[0]
        if len(hits) != 1 or abs(col[hits[0]] - 1.0) > tol:
            return None
        perm[hits[0]] = t
    inv = [None] * coin.q
    for target, src in enumerate(perm):
        inv[src] = target
    return tuple(inv)


def matches_zero_pattern(coin: CoinMatrix, zeros, tol: float = 1e-12) -> bool:
    return all(abs(coin.m[i, j]) <= tol for i, j in zeros)


def classify_shape(coin: CoinMatrix) -> CoinClass:
    """Classify a coin by its zero pattern and permutation structure.

    Decorated permutations are matched against the explicit q=3 and q=4
    lists; other q=4 matrices are tested against the propagating and
    reducing zero templates.  Anything else is OTHER.
    """
    perm = as_permutation(coin)
    if perm is not None:
        if coin.q == 3:
            if perm in _Q3_LAMBDA:
                return CoinClass.FULLY_LOCALIZING
            if perm in _Q3_S:
                return CoinClass.FULLY_DELOCALIZING
            if perm in _Q3_M:
                return CoinClass.MIXED
        elif coin.q == 4:
            if perm in _Q4_LAMBDA:
                return CoinClass.FULLY_LOCALIZING
            if perm in _Q4_S:
                return CoinClass.FULLY_DELOCALIZING
            if perm in _Q4_M:
                return CoinClass.MIXED
            if perm in _Q4_PI1:
                return CoinClass.PROPAGATING_SHAPE
            if perm in _Q4_PI2:
                return CoinClass.OTHER
        elif coin.q % 2 == 1 and perm == boundary_permutation(coin.q):
            return CoinClass.FULLY_LOCALIZING
        elif coin.q % 2 == 0 and perm == boundary_permutation(coin.q):
            return CoinClass.FULLY_LOCALIZING
    if coin.q == 4:
        if matches_zero_pattern(coin, REDUCING_ZEROS):
            return CoinClass.REDUCING_SHAPE
        if matches_zero_pattern(coin, PROPAGATING_ZEROS):
            return CoinClass.PROPAGATING_SHAPE
    return CoinClass.OTHER


def localizing_block_family(perm) -> int | None:
    """For a q=4 fully localizing permutation, which 4-dim subspace family it uses."""
    return _Q4_LAMBDA.get(tuple(perm))


def haar_random(q: int, rng: np.random.Generator) -> CoinMatrix:
    """Haar-distributed unitary, for fuzz tests."""
    z = rng.normal(size=(q, q)) + 1j * rng.normal(size=(q, q))
    qmat, rmat = np.linalg.qr(z)
    d = np.diag(rmat)
    return CoinMatrix(qmat * (d / np.abs(d)))
