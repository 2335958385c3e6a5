"""Spectral diagnostics: return amplitudes, Cesaro averages, eigenphase
distributions, Green-function fractional moments.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .disorder import DisorderField
from .errors import ConditioningError
from .tree import ROOT, Alphabet, Word, distance
from .walk import FiniteVolumeOperator, WalkOperator, build_walk, green


@dataclass
class AmplitudeSeries:
    """Return amplitudes <source| U^n |source> for n = 0 .. nmax."""

    source: tuple
    amplitudes: np.ndarray

    @property
    def nmax(self) -> int:
        return len(self.amplitudes) - 1

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def wiener_averages(self) -> np.ndarray:
        """Cesaro means w_m = (m+1)^{-1} sum_{n<=m} |a_n|^2."""
        p = self.probabilities()
        return np.cumsum(p) / np.arange(1, len(p) + 1)


def return_amplitudes(op, source, nmax: int) -> AmplitudeSeries:
    """Diagonal matrix elements of U^n at a single site-coin state.

    Accepts a FiniteVolumeOperator (dense powers) or a lazy WalkOperator.
    The lazy route meets in the middle, evolving bras and kets half the
    time each, so the light-cone horizon only needs ceil(nmax/2) room.
    """
    if isinstance(op, FiniteVolumeOperator):
        m = op.dense_matrix()
        v = op.basis_vector(*source)
        amps = np.empty(nmax + 1, dtype=complex)
        cur = v.copy()
        src = int(np.argmax(np.abs(v)))
        for n in range(nmax + 1):
            amps[n] = cur[src]
            if n < nmax:
                cur = m @ cur
        return AmplitudeSeries(source=tuple(source), amplitudes=amps)

    kets = [{tuple(source): 1.0 + 0.0j}]
    for _ in range(nmax - nmax // 2):
        kets.append(op.apply(kets[-1]))
    bra = {tuple(source): 1.0 + 0.0j}
    bras = [bra]
    for _ in range(nmax // 2):
        bras.append(op.apply_adjoint(bras[-1]))
    amps = np.empty(nmax + 1, dtype=complex)
    for n in range(nmax + 1):
        b, k = bras[n // 2], kets[n - n // 2]
        small = b if len(b) <= len(k) else k
        amps[n] = sum(np.conj(b.get(key, 0.0)) * k.get(key, 0.0) for key in small)
    return AmplitudeSeries(source=tuple(source), amplitudes=amps)


def certified_propagating_returns(coin, source, nmax: int,
                                  alphabet: Alphabet,
                                  check_until: int = 12) -> AmplitudeSeries:
    """Exactly-zero return amplitudes for walks with the one-way zero pattern.

    When C[b, tau] = 0 whenever the move b undoes the arrival direction tau
    (for all tau), any amplitude leaving a vertex can never return to it:
    inward-moving components strip letters along the ancestor line and the
    single forbidden matrix entry blocks the only first step that could
    re-enter the subtree.  So <x (x) c | U^n | x (x) c> = 0 for every n >= 1.
    The structural hypothesis is verified on the coin, and the conclusion
    is cross-checked against direct evolution for n <= check_until.
    """
    q = alphabet.q
    m = coin.m if hasattr(coin, "m") else np.asarray(coin)
    for tau in range(q):
        if q % 2 == 0:
            # arriving along tau, the first step back is the move tau^{-1}
            bad = {alphabet.inverse(tau)}
        else:
            # self-inverse letters: arrival appended letter tau+1 (from even
            # length) or tau+2 (from odd); undoing re-appends the same letter,
            # which pins the coin move to tau-1 resp. tau+1
            bad = {(tau + 1) % q, (tau - 1) % q}
        for b in bad:
            if abs(m[b, tau]) > 1e-14:
                raise ValueError("coin lacks the one-way zero pattern; "
                                 f"entry ({b},{tau}) is nonzero")
    amps = np.zeros(nmax + 1, dtype=complex)
    amps[0] = 1.0
    n_check = min(nmax, check_until)
    op = build_walk(coin if hasattr(coin, "m") else coin, None, alphabet)
    direct = return_amplitudes(op, source, n_check)
    if np.abs(direct.amplitudes[1:]).max(initial=0.0) > 1e-12:
        raise AssertionError("certificate contradicted by direct evolution")
    return AmplitudeSeries(source=tuple(source), amplitudes=amps)


def wiener_average(series: AmplitudeSeries, m: int | None = None) -> float:
    w = series.wiener_averages()
    return float(w[m if m is not None else -1])


@dataclass
class SpectralSummary:
    """Eigen-decomposition of a finite unitary block, seen from one vector."""

    eigenphases: np.ndarray       # sorted in (-pi, pi]
    weights: np.ndarray           # |<v_i, phi>|^2 summed per distinct phase
    participation_ratio: float    # 1 / sum_i weights_i^2
    cesaro_limit: float           # sum_i weights_i^2 over distinct eigenvalues

    def reconstruct_returns(self, nmax: int) -> np.ndarray:
        n = np.arange(nmax + 1)
        return (self.weights[None, :]
                * np.exp(1j * np.outer(n, self.eigenphases))).sum(axis=1)


def diagonalize_block(matrix: np.ndarray, vector: np.ndarray,
                      degeneracy_tol: float = 1e-8) -> SpectralSummary:
    """Schur-based spectral resolution of a unitary matrix at a vector.

    Eigenvalues within degeneracy_tol of each other (as points on the
    circle) are merged into one point mass with combined weight, so the
    Cesaro limit sum of squared masses is computed over distinct
    eigenvalues.
    """
    t, zmat = scipy.linalg.schur(matrix, output="complex")
    # unitary => normal => T is diagonal up to roundoff; columns of Z are
    # an orthonormal eigenbasis.
    offdiag = np.abs(t - np.diag(np.diag(t))).max()
    if offdiag > 1e-8:
        raise ConditioningError(f"matrix is not normal enough (offdiag {offdiag:.2e})")
    eigvals = np.diag(t)
    overlaps = np.abs(zmat.conj().T @ vector) ** 2
    order = np.argsort(np.angle(eigvals), kind="stable")
    eigvals, overlaps = eigvals[order], overlaps[order]

    phases: list[float] = []
    weights: list[float] = []
    for lam, w in zip(eigvals, overlaps):
        if phases and abs(lam - np.exp(1j * phases[-1])) < degeneracy_tol:
            weights[-1] += w
        else:
            phases.append(float(np.angle(lam)))
            weights.append(float(w))
    # wrap-around merge between -pi and +pi ends
    if len(phases) > 1 and abs(np.exp(1j * phases[0]) - np.exp(1j * phases[-1])) < degeneracy_tol:
        weights[0] += weights.pop()
        phases.pop()
    wv = np.array(weights)
    pr = 1.0 / float((wv ** 2).sum()) if wv.any() else math.inf
    return SpectralSummary(eigenphases=np.array(phases), weights=wv,
                           participation_ratio=pr,
                           cesaro_limit=float((wv ** 2).sum()))


def free_shift_green_modulus(z: complex, dist: int) -> float:
    """|G(x; z)| for the pure one-way shift on a line, |z| < 1.

    The resolvent of the bilateral shift at distance d behind the motion
    has modulus |z|^{d-1}; ahead of the motion it vanishes.  Disorder
    phases are gauge-equivalent to none on a line, so the modulus profile
    is deterministic.
    """
    if abs(z) >= 1:
        raise ValueError("closed form stated for |z| < 1")
    if dist <= 0:
        # the Neumann series of (S - z)^{-1} only hits strictly negative sites
        return 0.0
    return abs(z) ** (dist - 1)


@dataclass
class MomentFit:
    """Weighted linear fit of log E|G|^s against distance."""

    s: float
    z: complex
    distances: np.ndarray
    log_means: np.ndarray
    log_stderr: np.ndarray
    slope: float
    slope_stderr: float
    intercept: float
    r_squared: float
    n_failures: int = 0

    @property
    def slope_ci95(self) -> tuple:
        return (self.slope - 1.96 * self.slope_stderr,
                self.slope + 1.96 * self.slope_stderr)

    @property
    def decay_rate(self) -> float:
        return -self.slope


def fractional_moments(fv: FiniteVolumeOperator, z: complex, s: float,
                       seed: int, n_realizations: int,
                       source=None, distribution=None,
                       max_distance: int | None = None) -> MomentFit:
    """Monte Carlo estimate of E|G(source, y; z)|^s versus distance.

    Fresh disorder per realization enters only through row phases, so the
    deterministic restriction is factored once.  Targets are grouped by
    tree distance from the source vertex; the decay rate is the negative
    slope of a weighted least-squares line through log of the means.
    """
    if not (0.0 < s < 1.0):
        raise ValueError("fractional exponent must lie in (0, 1)")
    if source is None:
        source = (fv.center, 0)
    src_idx = fv.index[tuple(source)]
    alphabet = fv.op.alphabet
    dists = np.array([distance(w, source[0], alphabet) for (w, _l) in fv.basis])
    dmax = max_distance if max_distance is not None else int(dists.max()) - 1
    kwargs = {} if distribution is None else {"distribution": distribution}

    samples = np.zeros((n_realizations, fv.dim))
    failures = 0
    for k in range(n_realizations):
        field_k = DisorderField(seed + k, **kwargs)
        try:
            g = _green_with_field(fv, z, src_idx, field_k)
        except ConditioningError:
            failures += 1
            continue
        samples[k] = np.abs(g) ** s
    good = n_realizations - failures
    if good < 2:
        raise ConditioningError("too few conditioned realizations for a fit")
    mean_per_state = samples.sum(axis=0) / good
    var_per_state = ((samples - mean_per_state) ** 2).sum(axis=0) / (good * (good - 1))

    ds, log_means, log_errs = [], [], []
    for d in range(0, dmax + 1):
        mask = dists == d
        if not mask.any():
            continue
        m = float(mean_per_state[mask].mean())
        se = float(np.sqrt(var_per_state[mask].sum()) / mask.sum())
        if m <= 0:
            continue
        ds.append(d)
        log_means.append(math.log(m))
        log_errs.append(se / m)
    ds = np.array(ds, dtype=float)
    log_means = np.array(log_means)
    log_errs = np.maximum(np.array(log_errs), 1e-12)

    w = 1.0 / log_errs ** 2
    x = np.vstack([ds, np.ones_like(ds)]).T
    cov = np.linalg.inv(x.T @ (w[:, None] * x))
    beta = cov @ (x.T @ (w * log_means))
    resid = log_means - x @ beta
    ss_tot = float((w * (log_means - np.average(log_means, weights=w)) ** 2).sum())
    r2 = 1.0 - float((w * resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return MomentFit(s=s, z=z, distances=ds, log_means=log_means,
                     log_stderr=log_errs, slope=float(beta[0]),
                     slope_stderr=float(np.sqrt(cov[0, 0])),
                     intercept=float(beta[1]), r_squared=r2,
                     n_failures=failures)


def _green_with_field(fv: FiniteVolumeOperator, z: complex, src_idx: int,
                      field: DisorderField, min_gap: float = 1e-6) -> np.ndarray:
    if abs(abs(z) - 1.0) < min_gap:
        raise ConditioningError(f"|z|={abs(z):.8f} too close to the circle")
    m = fv.dense_matrix(field)
    rhs = np.zeros(fv.dim, dtype=complex)
    rhs[src_idx] = 1.0
    a = m - z * np.eye(fv.dim)
    g = np.linalg.solve(a, rhs)
    if np.linalg.norm(a @ g - rhs) > 1e-10 * max(np.linalg.norm(g), 1.0):
        raise ConditioningError("solve residual too large")
    return g
