"""Combinatorial path oracles: closed-walk counts and path-sum amplitudes.

Everything here enumerates explicitly and is intended as an independent
check on the operator machinery, so the caps are small and hard.
"""

from dataclasses import dataclass

import numpy as np

from .disorder import DisorderField
from .tree import ROOT, Alphabet, Word
from .walk import shift_target

MAX_CLOSED_STEPS = 16
MAX_AMPLITUDE_STEPS = 8
MAX_AUDIT_STEPS = 12


def count_closed_dp(q: int, steps: int) -> int:
    """Closed nearest-neighbour walk count on T_q by distance recursion.

    f(n, d) walks of length n ending at distance d: from d = 0 all q moves
    go out, from d > 0 one move comes in and q - 1 go out.
    """
    if steps % 2 == 1:
        return 0
    f = {0: 1}
    for _ in range(steps):
        g = {}
        for d, c in f.items():
            if d == 0:
                g[1] = g.get(1, 0) + q * c
            else:
                g[d - 1] = g.get(d - 1, 0) + c
                g[d + 1] = g.get(d + 1, 0) + (q - 1) * c
        f = g
    return f.get(0, 0)


def count_closed(q: int, steps: int) -> int:
    """Closed walk count by explicit depth-first enumeration on words.

    Branches are pruned when the current distance exceeds the remaining
    steps.  Hard cap: steps <= 16.
    """
    if steps > MAX_CLOSED_STEPS:
        raise ValueError(f"steps={steps} exceeds the enumeration cap {MAX_CLOSED_STEPS}")
    if steps % 2 == 1:
        return 0
    alphabet = Alphabet(q)
    total = 0
    stack = [(ROOT, steps)]
    while stack:
        word, remaining = stack.pop()
        if remaining == 0:
            total += (word == ROOT)
            continue
        if len(word) > remaining:
            continue
        for letter in alphabet.letters:
            nxt = word[:-1] if (word and word[-1] == alphabet.inverse(letter)) \
                else word + (letter,)
            stack.append((nxt, remaining - 1))
    return total


def _iter_paths(op_coins, alphabet: Alphabet, source, steps: int,
                target_word: Word):
    """Yield (path amplitude, state sequence) for all nonzero n-step paths
    from `source` ending at any coin state over `target_word`."""
    src_word, src_coin = source
    stack = [(src_word, src_coin, 1.0 + 0.0j, (source,))]
    while stack:
        word, coin_state, amp, traj = stack.pop()
        remaining = steps - (len(traj) - 1)
        if remaining == 0:
            if word == target_word:
                yield amp, traj
            continue
        # distance to target can shrink by at most 1 per step
        if len(word) - len(target_word) > remaining or \
                len(target_word) - len(word) > remaining:
            continue
        c = op_coins.coin_at(word)
        for b in range(alphabet.q):
            w = c[b, coin_state]
            if w == 0:
                continue
            nxt = shift_target(word, b, alphabet)
            stack.append((nxt, b, amp * w, traj + ((nxt, b),)))


def amplitude_by_paths(coins, disorder: DisorderField | None, source,
                       target, steps: int, alphabet: Alphabet) -> complex:
    """<target| U^n |source> as an explicit sum over contributing paths.

    Each path contributes the product of traversed coin entries and, when
    disorder is given, the product of the visited phase factors.  Hard
    cap: steps <= 8.
    """
    if steps > MAX_AMPLITUDE_STEPS:
        raise ValueError(f"steps={steps} exceeds the path-sum cap {MAX_AMPLITUDE_STEPS}")
    from .walk import SiteCoinField, constant_coins
    if not isinstance(coins, SiteCoinField):
        coins = constant_coins(coins)
    target = tuple(target[0]), target[1]
    total = 0.0 + 0.0j
    for amp, traj in _iter_paths(coins, alphabet, source, steps, target[0]):
        if traj[-1] != target:
            continue
        if disorder is not None:
            for (word, letter) in traj[1:]:
                amp = amp * np.exp(1j * disorder.phase(word, letter))
        total += amp
    return total


@dataclass
class DiagonalAudit:
    """Census of repeated-coin steps along closed paths (odd q only)."""

    q: int
    steps: int
    n_paths: int
    max_repeats: int
    histogram: dict
    bound: int            # the claimed ceiling: half the number of steps
    witness: tuple | None  # a coin sequence attaining max_repeats

    @property
    def bound_holds(self) -> bool:
        return self.max_repeats <= self.bound


def diagonal_count_audit(q: int, steps: int, source_parity: int = 0,
                         strict: bool = True) -> DiagonalAudit:
    """Count, along every closed path, steps whose coin state repeats.

    A path is closed when both the vertex and the coin state return to
    their starting values.  A repeated coin state is a step using the same
    coin letter as the step before (a diagonal coin entry).  The audited
    claim is that the repeat count never exceeds steps/2 on a closed path;
    with strict=True a violation raises, carrying a witness coin sequence.
    Hard cap: steps <= 12.
    """
    if q % 2 == 0:
        raise ValueError("the audit applies to odd degrees only")
    if steps > MAX_AUDIT_STEPS:
        raise ValueError(f"steps={steps} exceeds the audit cap {MAX_AUDIT_STEPS}")
    if steps % 2 == 1:
        raise ValueError("closed paths need an even number of steps")
    alphabet = Alphabet(q)
    src = ROOT if source_parity == 0 else (0,)
    hist: dict[int, int] = {}
    n_paths = 0
    witness = None
    max_reps = -1
    for tau0 in range(q):
        # states: (word, previous coin letter, repeats, remaining, coin trace)
        stack = [(src, tau0, 0, steps, ())]
        while stack:
            word, prev, reps, remaining, trace = stack.pop()
            if remaining == 0:
                if word == src and prev == tau0:
                    hist[reps] = hist.get(reps, 0) + 1
                    n_paths += 1
                    if reps > max_reps:
                        max_reps, witness = reps, (tau0,) + trace
                continue
            if abs(len(word) - len(src)) > remaining:
                continue
            for b in range(q):
                nxt = shift_target(word, b, alphabet)
                stack.append((nxt, b, reps + (b == prev),
                              remaining - 1, trace + (b,)))
    bound = steps // 2
    audit = DiagonalAudit(q=q, steps=steps, n_paths=n_paths,
                          max_repeats=max(max_reps, 0), histogram=hist,
                          bound=bound, witness=witness)
    if strict and not audit.bound_holds:
        raise AssertionError(
            f"closed path with {audit.max_repeats} repeated-coin steps exceeds "
            f"the claimed bound {bound}; witness coin trace {witness}")
    return audit
