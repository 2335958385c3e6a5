"""The one-step walk unitary on the tree: shifts, disorder, finite volumes.

The operator is represented column-sparse and lazily: a column is computed
on demand from (site coin, shift rule, disorder phase), so light-cone
computations never materialize a ball and finite-volume restrictions are
assembled only on their invariant subspace.
"""

import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .coins import CoinMatrix, boundary_permutation, permutation_coin
from .disorder import DisorderField
from .errors import CapacityError, ConditioningError, HorizonError, NotLocalizingError
from .tree import (
    ROOT,
    Alphabet,
    BallIndex,
    Word,
    append_letter,
    concat,
    distance,
    enumerate_ball,
    inverse_word,
)

AMP_TOL = 1e-14
INVARIANCE_TOL = 1e-12


def default_dim_cap() -> int:
    return int(os.environ.get("ARBORWALK_CAP_DIM", "20000"))


def shift_target(word: Word, coin_letter: int, alphabet: Alphabet) -> Word:
    """Vertex reached from `word` when the coin state is `coin_letter`.

    Even q: append the coin letter itself.  Odd q: append the next letter
    (length-even vertices) or the next-next letter (length-odd vertices),
    indices cyclic.
    """
    q = alphabet.q
    if q % 2 == 0:
        return append_letter(word, coin_letter, alphabet)
    step = 1 if len(word) % 2 == 0 else 2
    return append_letter(word, (coin_letter + step) % q, alphabet)


def shift_source(word: Word, coin_letter: int, alphabet: Alphabet) -> Word:
    """The unique vertex x with shift_target(x, coin_letter) == word."""
    q = alphabet.q
    if q % 2 == 0:
        return append_letter(word, alphabet.inverse(coin_letter), alphabet)
    # The source parity is opposite to |word|'s; that picks the rule.
    if len(word) % 2 == 1:
        return append_letter(word, (coin_letter + 1) % q, alphabet)
    return append_letter(word, (coin_letter + 2) % q, alphabet)


@dataclass(frozen=True)
class SiteCoinField:
    """Coin assignment per vertex: an optional rule, overrides, then a default."""

    default: CoinMatrix
    overrides: dict = field(default_factory=dict)
    rule: object = None  # callable Word -> CoinMatrix | None

    def coin_at(self, word: Word) -> np.ndarray:
        if word in self.overrides:
            return self.overrides[word].m
        if self.rule is not None:
            c = self.rule(word)
            if c is not None:
                return c.m
        return self.default.m

    @property
    def q(self) -> int:
        return self.default.q


class WalkOperator:
    """Lazy column-sparse action of U_omega = D_omega S (I (x) C(x)).

    States are dicts {(word, letter): amplitude}.  In light-cone mode the
    operator refuses to apply once the support could leave the exactness
    horizon, instead of silently truncating.
    """

    def __init__(self, alphabet: Alphabet, coins: SiteCoinField,
                 disorder: DisorderField | None = None,
                 center: Word = ROOT, horizon: int | None = None):
        if coins.q != alphabet.q:
            raise ValueError("coin dimension must equal tree degree")
        self.alphabet = alphabet
        self.coins = coins
        self.disorder = disorder
        self.center = center
        self.horizon = horizon

    @property
    def q(self) -> int:
        return self.alphabet.q

    @property
    def mode(self) -> str:
        return "light_cone" if self.horizon is not None else "lazy"

    def column(self, word: Word, letter: int):
        """Nonzero entries of U applied to the basis state word (x) letter."""
        c = self.coins.coin_at(word)
        out = []
        for b in range(self.q):
            w = c[b, letter]
            if w == 0:
                continue
            target = shift_target(word, b, self.alphabet)
            if self.disorder is not None:
                w = w * np.exp(1j * self.disorder.phase(target, b))
            out.append(((target, b), w))
        return out

    def _check_horizon(self, state):
        if self.horizon is None:
            return
        for (word, _letter) in state:
            if distance(word, self.center, self.alphabet) + 1 > self.horizon:
                raise HorizonError(
                    "support would leave the light-cone horizon "
                    f"{self.horizon}; enlarge the horizon instead of truncating")

    def apply(self, state: dict) -> dict:
        self._check_horizon(state)
        out = {}
        for (word, letter), amp in state.items():
            if abs(amp) <= AMP_TOL:
                continue
            for key, w in self.column(word, letter):
                out[key] = out.get(key, 0.0) + w * amp
        return out

    def apply_adjoint(self, state: dict) -> dict:
        self._check_horizon(state)
        out = {}
        for (word, sigma), amp in state.items():
            if abs(amp) <= AMP_TOL:
                continue
            src = shift_source(word, sigma, self.alphabet)
            c = self.coins.coin_at(src)
            phase = 1.0
            if self.disorder is not None:
                phase = np.exp(1j * self.disorder.phase(word, sigma))
            for tau in range(self.q):
                w = c[sigma, tau]
                if w == 0:
                    continue
                out_key = (src, tau)
                out[out_key] = out.get(out_key, 0.0) + np.conj(w * phase) * amp
        return out

    def matrix(self, basis, allow_leakage: bool = False):
        """Dense matrix of U on a basis list of (word, letter) states.

        Returns (matrix, leakage) where leakage is the largest amplitude
        that fell outside the basis; raises unless allow_leakage.
        """
        index = {key: i for i, key in enumerate(basis)}
        n = len(basis)
        m = np.zeros((n, n), dtype=complex)
        leak = 0.0
        for j, (word, letter) in enumerate(basis):
            for key, w in self.column(word, letter):
                i = index.get(key)
                if i is None:
                    leak = max(leak, abs(w))
                else:
                    m[i, j] = w
        if leak > 0 and not allow_leakage:
            raise ValueError(f"operator leaks off the given basis (max {leak:.3e})")
        return m, leak


def constant_coins(coin: CoinMatrix) -> SiteCoinField:
    return SiteCoinField(default=coin)


def build_shift(alphabet: Alphabet, center: Word = ROOT,
                horizon: int | None = None) -> WalkOperator:
    """The bare coin-conditioned shift (identity coin, no disorder)."""
    identity = CoinMatrix(np.eye(alphabet.q, dtype=complex))
    return WalkOperator(alphabet, constant_coins(identity), None, center, horizon)


def build_walk(coins, disorder: DisorderField | None, alphabet: Alphabet,
               center: Word = ROOT, horizon: int | None = None) -> WalkOperator:
    """General walk operator; `coins` is a CoinMatrix or a SiteCoinField."""
    if isinstance(coins, CoinMatrix):
        coins = constant_coins(coins)
    return WalkOperator(alphabet, coins, disorder, center, horizon)


@dataclass
class InvariantBlock:
    """A finite invariant subspace with its dense unitary restriction."""

    anchor: Word
    basis: list
    matrix: np.ndarray
    residual: float

    @property
    def dim(self) -> int:
        return len(self.basis)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.matrix)


def _permutation_orbit(start, perm, alphabet: Alphabet, max_steps: int):
    """Orbit of a basis state under the (undisordered) permutation-coin walk."""
    orbit = [start]
    word, letter = start
    for _ in range(max_steps):
        b = perm[letter]
        word = shift_target(word, b, alphabet)
        letter = b
        if (word, letter) == start:
            return orbit
        orbit.append((word, letter))
    raise NotLocalizingError(f"permutation orbit did not close within {max_steps} steps")


def localizing_block_basis(anchor: Word, alphabet: Alphabet):
    """Basis states of the invariant block anchored at an odd-length vertex.

    Odd q: the single 2q-cycle of the full-cycle permutation coin through
    anchor (x) a_1.  Even q: the q two-cycles of the inversion-pairing coin.
    """
    q = alphabet.q
    perm = boundary_permutation(q)
    if q % 2 == 1:
        return _permutation_orbit((anchor, 0), perm, alphabet, 2 * q)
    states = []
    for j in range(q):
        states.extend(_permutation_orbit((anchor, j), perm, alphabet, 2))
    return states


def orbit_closure(op: WalkOperator, start, max_dim: int):
    """Smallest set of basis states containing `start` and closed under U, U*.

    Works only when the operator genuinely decomposes into finite blocks;
    otherwise the closure exceeds max_dim and NotLocalizingError is raised.
    """
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for key in frontier:
            state = {key: 1.0}
            for image in (op.apply(state), op.apply_adjoint(state)):
                for k, amp in image.items():
                    if abs(amp) > AMP_TOL and k not in seen:
                        seen.add(k)
                        nxt.append(k)
        if len(seen) > max_dim:
            raise NotLocalizingError(
                f"orbit closure exceeded {max_dim} states; coin is not localizing")
        frontier = nxt
    return sorted(seen, key=lambda k: (len(k[0]), k[0], k[1]))


def localizing_blocks(coin: CoinMatrix, disorder: DisorderField | None,
                      ball: BallIndex, max_dim: int | None = None):
    """Discover the finite invariant blocks of a fully localizing walk.

    Blocks are found by orbit closure under U and U* (no transcription),
    scanning anchors through the ball in index order.  The per-block
    invariance residual is reported.
    """
    alphabet = ball.alphabet
    q = alphabet.q
    if max_dim is None:
        max_dim = 2 * q
    op = build_walk(coin, disorder, alphabet)
    assigned = set()
    blocks = []
    for word in ball.words:
        for letter in range(q):
            key = (word, letter)
            if key in assigned:
                continue
            basis = orbit_closure(op, key, max_dim)
            assigned.update(basis)
            m, leak = op.matrix(basis, allow_leakage=True)
            anchor = min((w for w, _ in basis), key=lambda w: (len(w), w))
            blocks.append(InvariantBlock(anchor=anchor, basis=basis,
                                         matrix=m, residual=leak))
    return blocks


def finite_volume_dim(q: int, L: int) -> int:
    return (2 * q * ((q - 1) ** (L + 1) - 1)) // (q - 2)


class FiniteVolumeOperator:
    """Unitary restriction of the walk to the ball subspace H_{Lambda_L}.

    Built by surrounding the ball with fully localizing boundary coins at
    distances L-1, L, L+1 from the center; the direct sum of the anchored
    blocks is then exactly invariant.
    """

    def __init__(self, op: WalkOperator, basis, center: Word, radius: int,
                 boundary_blocks, disorder: DisorderField | None):
        self.op = op
        self.basis = basis
        self.index = {key: i for i, key in enumerate(basis)}
        self.center = center
        self.radius = radius
        self.boundary_blocks = boundary_blocks
        self.disorder = disorder

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def mode(self) -> str:
        return "boundary_restricted"

    def invariance_residual(self) -> float:
        """Max amplitude leaking out of the subspace, over all columns."""
        _, leak = self.op.matrix(self.basis, allow_leakage=True)
        return leak

    @cached_property
    def _matrix_no_disorder(self) -> np.ndarray:
        if self.dim > default_dim_cap():
            raise CapacityError(
                f"dense restriction of dim {self.dim} exceeds cap {default_dim_cap()}")
        bare = WalkOperator(self.op.alphabet, self.op.coins, None)
        m, leak = bare.matrix(self.basis, allow_leakage=True)
        if leak > INVARIANCE_TOL:
            raise ValueError(f"subspace is not invariant (leakage {leak:.3e})")
        return m

    def row_phases(self, disorder: DisorderField) -> np.ndarray:
        return np.array([disorder.phase(w, l) for (w, l) in self.basis])

    def dense_matrix(self, disorder: DisorderField | None = "default") -> np.ndarray:
        """Dense unitary on the block; disorder enters as row phases only."""
        if isinstance(disorder, str):
            disorder = self.disorder
        m = self._matrix_no_disorder
        if disorder is None:
            return m.copy()
        return np.exp(1j * self.row_phases(disorder))[:, None] * m

    def apply(self, vec: np.ndarray, disorder="default") -> np.ndarray:
        return self.dense_matrix(disorder) @ vec

    def basis_vector(self, word: Word, letter: int) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index[(word, letter)]] = 1.0
        return v


def boundary_coin_rule(center: Word, L: int, boundary_coin: CoinMatrix,
                       alphabet: Alphabet):
    shells = {L - 1, L, L + 1}

    def rule(word: Word):
        if distance(word, center, alphabet) in shells:
            return boundary_coin
        return None

    return rule


def build_finite_volume(coin: CoinMatrix, phases, disorder: DisorderField | None,
                        center: Word, L: int, alphabet: Alphabet,
                        ball_cap: int = 500_000) -> FiniteVolumeOperator:
    """Finite-volume walk on the odd-radius ball Lambda_L(center).

    `phases` decorates the boundary permutation coin (None for no
    decoration).  Returns the operator together with the provably
    invariant boundary blocks (anchors at distance exactly L).
    """
    q = alphabet.q
    if L < 1 or L % 2 == 0:
        raise ValueError(f"L must be odd and >= 1, got {L}")
    if len(center) % 2 != 0:
        raise ValueError("center must be an even-length vertex")
    boundary = permutation_coin(boundary_permutation(q),
                                phases if phases is not None else None)
    coins = SiteCoinField(default=coin,
                          rule=boundary_coin_rule(center, L, boundary, alphabet))
    op = WalkOperator(alphabet, coins, disorder)

    ball = enumerate_ball(center, L, alphabet, cap=ball_cap)
    anchors = [w for w in ball.words if len(w) % 2 == 1]
    basis = []
    boundary_blocks = []
    for anchor in anchors:
        block_states = localizing_block_basis(anchor, alphabet)
        basis.extend(block_states)
        if distance(anchor, center, alphabet) == L:
            m, leak = op.matrix(block_states, allow_leakage=True)
            boundary_blocks.append(InvariantBlock(anchor=anchor, basis=block_states,
                                                  matrix=m, residual=leak))
    expected = finite_volume_dim(q, L)
    if len(basis) != expected or len(set(basis)) != expected:
        raise AssertionError(
            f"finite-volume basis has {len(basis)} states, expected {expected}")
    return FiniteVolumeOperator(op, basis, center, L, boundary_blocks, disorder)


def green(fv: FiniteVolumeOperator, z: complex, source, min_gap: float = 1e-6):
    """Green-function column (U - z)^{-1} delta_source on the block.

    `source` is a (word, letter) pair or a basis index.  z must stay a
    safe distance off the unit circle.
    """
    if abs(abs(z) - 1.0) < min_gap:
        raise ConditioningError(f"|z|={abs(z):.8f} is within {min_gap} of the circle")
    m = fv.dense_matrix()
    if not isinstance(source, (int, np.integer)):
        source = fv.index[tuple(source)]
    rhs = np.zeros(fv.dim, dtype=complex)
    rhs[source] = 1.0
    a = m - z * np.eye(fv.dim)
    g = np.linalg.solve(a, rhs)
    resid = np.linalg.norm(a @ g - rhs)
    if resid > 1e-10 * max(np.linalg.norm(g), 1.0):
        raise ConditioningError(f"solve residual {resid:.3e} too large")
    return g


def check_covariance(coin: CoinMatrix, seed: int, translation: Word,
                     radius: int, alphabet: Alphabet,
                     distribution=None) -> float:
    """Max residual of the covariance T_z^* U_omega T_z = U_{T_z omega}.

    Expected to vanish identically for even-length translations; odd
    lengths are allowed and simply report the (nonzero) discrepancy.
    """
    kwargs = {} if distribution is None else {"distribution": distribution}
    omega = DisorderField(seed, **kwargs)
    u_omega = build_walk(coin, omega, alphabet)
    u_moved = build_walk(coin, omega.translated(translation, alphabet), alphabet)
    inv_t = inverse_word(translation, alphabet)
    ball = enumerate_ball(ROOT, radius, alphabet)
    worst = 0.0
    for y in ball.words:
        zy = concat(translation, y, alphabet)
        for tau in range(alphabet.q):
            lhs = {}
            for (w, b), amp in u_omega.column(zy, tau):
                lhs[(concat(inv_t, w, alphabet), b)] = amp
            rhs = dict(u_moved.column(y, tau))
            keys = set(lhs) | set(rhs)
            for k in keys:
                worst = max(worst, abs(lhs.get(k, 0.0) - rhs.get(k, 0.0)))
    return worst
