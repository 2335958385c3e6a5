"""One-dimensional reduction of the q=3 walk for the localizing family.

The walk restricted to a cyclic subspace is a banded unitary on the line
with period-6 structure; its generalized eigenvectors are propagated by
2x2 transfer matrices.  The band matrix is always derived by restricting
the actual walk operator to the discovered basis; the hand-transcribed
band pattern is kept only as a cross-check.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .coins import family_q3_localizing
from .disorder import TWO_PI, DisorderField
from .errors import SingularParameterError
from .tree import ROOT, Alphabet, Word, append_letter, reduce_word
from .walk import build_walk

A, B, C = 0, 1, 2
_ALPHABET3 = Alphabet(3)

# the vertex offset between consecutive period-6 blocks of the cyclic basis
BLOCK_SHIFT = (C, B, A, C)           # cbac, reading left to right
BLOCK_SHIFT_INV = (C, A, B, C)       # its inverse (self-inverse letters)


def block_anchor(x_e: Word, k: int) -> Word:
    """Vertex y_k = x_e (cbac)^k anchoring the k-th period-6 block."""
    step = BLOCK_SHIFT if k >= 0 else BLOCK_SHIFT_INV
    word = x_e
    for _ in range(abs(k)):
        word = reduce_word(word + step, _ALPHABET3)
    return word


def block_states(anchor: Word):
    """The six basis states e_{6k+1} .. e_{6k+6} of one block."""
    yc = append_letter(anchor, C, _ALPHABET3)
    ycb = append_letter(yc, B, _ALPHABET3)
    return [(anchor, A), (yc, C), (yc, A), (yc, B), (ycb, C), (ycb, B)]


def build_cyclic_basis(x_e: Word = ROOT, k_min: int = 0, k_max: int = 0):
    """Ordered cyclic-subspace basis e_j for j in [6 k_min + 1, 6 k_max + 6].

    The anchor must be an even-length vertex; the subspace is generated by
    x_e (x) a under the localizing walk.
    """
    if len(x_e) % 2 != 0:
        raise ValueError("cyclic anchor must have even length")
    if k_max < k_min:
        raise ValueError("empty block range")
    states = []
    for k in range(k_min, k_max + 1):
        states.extend(block_states(block_anchor(x_e, k)))
    return states


@dataclass
class BandUnitaryWindow:
    """A window of the period-6 banded line unitary, rows j_min .. j_max."""

    r: float
    j_min: int
    j_max: int
    states: list
    matrix: np.ndarray
    omegas: np.ndarray

    @property
    def size(self) -> int:
        return self.j_max - self.j_min + 1

    def index(self, j: int) -> int:
        if not self.j_min <= j <= self.j_max:
            raise IndexError(f"line index {j} outside window [{self.j_min}, {self.j_max}]")
        return j - self.j_min

    def interior_unitarity_residual(self, margin: int = 7) -> float:
        """Deviation from column orthonormality away from the window edges."""
        sl = slice(margin, self.size - margin)
        g = self.matrix.conj().T @ self.matrix
        return float(np.abs(g[sl, sl] - np.eye(self.size)[sl, sl]).max())


def build_V(r: float, omegas=None, x_e: Word = ROOT,
            k_min: int = 0, k_max: int = 9) -> BandUnitaryWindow:
    """Window of the banded unitary, derived by restricting the walk.

    `omegas` supplies the row phases: a DisorderField (evaluated at the
    basis states), an array aligned with the window rows, or None for no
    phases.  Columns near the window edges are truncated; everything a
    caller checks should stay in the interior.
    """
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    states = build_cyclic_basis(x_e, k_min, k_max)
    j_min, j_max = 6 * k_min + 1, 6 * k_max + 6
    index = {s: i for i, s in enumerate(states)}
    op = build_walk(family_q3_localizing(1, r), None, _ALPHABET3)
    n = len(states)
    m = np.zeros((n, n), dtype=complex)
    for jcol, state in enumerate(states):
        for key, w in op.column(*state):
            i = index.get(key)
            if i is not None:
                m[i, jcol] = w
    if isinstance(omegas, DisorderField):
        om = np.array([omegas.phase(w, l) for (w, l) in states])
    elif omegas is None:
        om = np.zeros(n)
    else:
        om = np.asarray(omegas, dtype=float)
        if om.shape != (n,):
            raise ValueError(f"need {n} row phases, got {om.shape}")
    m = np.exp(1j * om)[:, None] * m
    return BandUnitaryWindow(r=r, j_min=j_min, j_max=j_max,
                             states=states, matrix=m, omegas=om)


def transcribed_V(r: float, j_min: int, j_max: int) -> np.ndarray:
    """Hand-transcribed band pattern (no phases), as an expected-value check.

    Column rules, absolute line indices, t = sqrt(1 - r^2), period 6:
    e_{6k+1} -> e_{6k+4};        e_{6k+2} -> t e_{6k+1} + r e_{6k+5};
    e_{6k+3} -> e_{6k};          e_{6k+4} -> r e_{6k+1} - t e_{6k+5};
    e_{6k+5} -> t e_{6k+3} + r e_{6k+8};
    e_{6k+6} -> r e_{6k+3} - t e_{6k+8}.
    """
    t = math.sqrt(1.0 - r * r)
    rules = {1: [(4, 1.0)], 2: [(1, t), (5, r)], 3: [(0, 1.0)],
             4: [(1, r), (5, -t)], 5: [(3, t), (8, r)], 6: [(3, r), (8, -t)]}
    n = j_max - j_min + 1
    m = np.zeros((n, n), dtype=complex)
    for j in range(j_min, j_max + 1):
        k, pos = divmod(j - 1, 6)
        for (target_pos, w) in rules[pos + 1]:
            i = 6 * k + target_pos
            if j_min <= i <= j_max:
                m[i - j_min, j - j_min] = w
    return m


def _denominators(z: complex, beta: float, r: float, tol: float = 1e-10):
    e = cmath.exp(-1j * beta)
    d1 = r * z * z * e - 1.0
    d2 = z * z * e - r
    if abs(z) < tol or abs(d1) < tol or abs(d2) < tol:
        raise SingularParameterError(
            f"degenerate transfer denominators at z={z}, beta={beta}, r={r}")
    return d1, d2


def transfer_matrix(z: complex, alpha: float, beta: float, gamma: float,
                    r: float) -> np.ndarray:
    """The 2x2 transfer matrix T_z(alpha, beta, gamma)."""
    t = math.sqrt(1.0 - r * r)
    d1, d2 = _denominators(z, beta, r)
    pref = d1 * cmath.exp(1j * gamma) / (r * z * z * d2)
    t22 = cmath.exp(-1j * alpha) * z * z / r + pref * t * t
    return np.array([[pref * r * r, -pref * t * r],
                     [-pref * t * r, t22]], dtype=complex)


def transfer_for_block(z: complex, w6, r: float) -> np.ndarray:
    """T_z(j) from the six row phases (w_{6j}, ..., w_{6j+5}) of block j."""
    w6 = np.asarray(w6, dtype=float)
    return transfer_matrix(z, w6[0] + w6[3], w6[1] + w6[4], w6[2] + w6[5], r)


def auxiliary_coefficients(z: complex, w6, pair, r: float):
    """psi(6j+1 .. 6j+4) from (psi(6j-1), psi(6j)) and the block phases."""
    t = math.sqrt(1.0 - r * r)
    w6 = np.asarray(w6, dtype=float)
    pm1, p0 = pair
    core = r * pm1 - t * p0
    den = z * z * cmath.exp(-1j * (w6[1] + w6[4])) - r
    if abs(den) < 1e-10 or abs(z) < 1e-12:
        raise SingularParameterError("degenerate auxiliary denominator")
    psi1 = t * cmath.exp(1j * (w6[2] - w6[4])) * core / den
    psi2 = cmath.exp(1j * w6[2]) * core / z
    psi3 = z * cmath.exp(-1j * w6[0]) * p0
    psi4 = t * cmath.exp(1j * w6[2]) * core / (z * den)
    return psi1, psi2, psi3, psi4


def propagate_eigenvector(z: complex, omegas: np.ndarray, j_min: int,
                          pair0, r: float):
    """Generalized eigenvector on a window from a seed pair.

    `omegas[i]` is the row phase of line index j_min + i; the window must
    start at a block boundary covering index 6 j0 - 1 for some j0, and the
    seed pair is (psi(6 j0 - 1), psi(6 j0)).  Returns (indices, psi).
    """
    if (j_min + 1) % 6 != 0:
        raise ValueError("window must start at a line index of the form 6 j - 1")
    j0 = (j_min + 1) // 6
    n_blocks = (j_min + len(omegas) - 1 - (6 * j0)) // 6
    psi = {j_min: complex(pair0[0]), j_min + 1: complex(pair0[1])}
    pair = (complex(pair0[0]), complex(pair0[1]))
    for j in range(j0, j0 + n_blocks):
        w6 = omegas[6 * j - j_min: 6 * j + 6 - j_min]
        p1, p2, p3, p4 = auxiliary_coefficients(z, w6, pair, r)
        psi[6 * j + 1], psi[6 * j + 2] = p1, p2
        psi[6 * j + 3], psi[6 * j + 4] = p3, p4
        new_pair = transfer_for_block(z, w6, r) @ np.array(pair)
        psi[6 * j + 5], psi[6 * j + 6] = complex(new_pair[0]), complex(new_pair[1])
        pair = (complex(new_pair[0]), complex(new_pair[1]))
    indices = sorted(psi)
    return indices, np.array([psi[i] for i in indices])


def quotient_r(theta: float, eta: float, r: float) -> np.ndarray:
    t = math.sqrt(1.0 - r * r)
    return np.array([
        [cmath.exp(1j * theta), (t / r) * (cmath.exp(1j * eta) - cmath.exp(1j * theta))],
        [0.0, cmath.exp(1j * eta)]], dtype=complex)


def quotient_l(theta: float, eta: float, r: float) -> np.ndarray:
    return quotient_r(theta, eta, r).T


def lr_trace(theta: float, eta: float, r: float) -> float:
    """Closed form for tr(L(theta,eta) R(-theta,-eta))."""
    t2 = 1.0 - r * r
    return 2.0 * (1.0 + (t2 / r ** 2) * (1.0 - math.cos(theta - eta)))


_I2 = np.eye(2)
_J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def realify(m: np.ndarray) -> np.ndarray:
    """The standard embedding of a 2x2 complex matrix into M_4(R)."""
    m = np.asarray(m)
    out = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            out[2 * i: 2 * i + 2, 2 * j: 2 * j + 2] = \
                m[i, j].real * _I2 + m[i, j].imag * _J2
    return out


def _chi(beta: float, r: float) -> float:
    w = (r * cmath.exp(-1j * beta) - 1.0) / (cmath.exp(-1j * beta) - r)
    return -cmath.phase(w)


def decomposition_basis(r: float):
    t = math.sqrt(1.0 - r * r)
    s = t * t / r
    m1 = np.array([[r, 0, -t, 0], [0, r, 0, -t], [-t, 0, s, 0], [0, -t, 0, s]])
    m2 = np.array([[0, r, 0, -t], [-r, 0, t, 0], [0, -t, 0, s], [t, 0, -s, 0]])
    n1 = np.zeros((4, 4)); n1[2, 2] = n1[3, 3] = 1.0 / r
    n2 = np.zeros((4, 4)); n2[2, 3] = 1.0 / r; n2[3, 2] = -1.0 / r
    return m1, m2, n1, n2


def decompose_T1(alpha: float, beta: float, gamma: float, r: float):
    """Coefficients (A, B) and residual of the four-matrix decomposition
    of the realified unit-energy transfer matrix."""
    a = gamma - _chi(beta, r)
    b = -alpha
    m1, m2, n1, n2 = decomposition_basis(r)
    lhs = realify(transfer_matrix(1.0, alpha, beta, gamma, r))
    rhs = math.cos(a) * m1 + math.sin(a) * m2 + math.cos(b) * n1 + math.sin(b) * n2
    return a, b, float(np.abs(lhs - rhs).max())


@dataclass
class LyapunovEstimate:
    r: float
    z: complex
    gamma: float
    stderr: float
    n_matrices: int
    n_batches: int

    @property
    def positive(self) -> bool:
        return self.gamma > 0

    @property
    def sigmas(self) -> float:
        return self.gamma / self.stderr if self.stderr > 0 else math.inf


def lyapunov(r: float, z: complex, n_matrices: int, seed: int,
             phase_sampler=None, renorm_every: int = 8,
             n_batches: int = 25) -> LyapunovEstimate:
    """Monte Carlo Lyapunov exponent of the random transfer cocycle.

    Six fresh phases per matrix (uniform by default); the propagated
    vector is renormalized every few steps with the logs accumulated by
    compensated summation, and the standard error comes from batched
    means over contiguous segments of the orbit.
    """
    if n_matrices < 1000:
        raise ValueError("need at least 1000 matrices for a stable estimate")
    rng = np.random.Generator(np.random.Philox(seed))
    if phase_sampler is None:
        phases = rng.uniform(0.0, TWO_PI, size=(n_matrices, 6))
    else:
        phases = np.asarray(phase_sampler(rng, n_matrices), dtype=float)
        if phases.shape != (n_matrices, 6):
            raise ValueError("phase sampler must return shape (n, 6)")
    v0, v1 = 1.0 + 0.0j, 0.0 + 0.0j
    logs = []
    batch = np.zeros(n_batches)
    per_batch = n_matrices // n_batches
    for k in range(n_matrices):
        w6 = phases[k]
        t_mat = transfer_matrix(z, w6[0] + w6[3], w6[1] + w6[4], w6[2] + w6[5], r)
        v0, v1 = t_mat[0, 0] * v0 + t_mat[0, 1] * v1, \
            t_mat[1, 0] * v0 + t_mat[1, 1] * v1
        if (k + 1) % renorm_every == 0 or k == n_matrices - 1:
            nrm = math.hypot(abs(v0), abs(v1))
            if nrm == 0.0:
                raise ArithmeticError("transfer product annihilated the frame")
            logs.append(math.log(nrm))
            v0, v1 = v0 / nrm, v1 / nrm
            batch[min(k // per_batch, n_batches - 1)] += logs[-1]
    gamma = math.fsum(logs) / n_matrices
    means = batch / per_batch
    stderr = float(np.std(means, ddof=1) / math.sqrt(n_batches))
    return LyapunovEstimate(r=r, z=z, gamma=gamma, stderr=stderr,
                            n_matrices=n_matrices, n_batches=n_batches)
