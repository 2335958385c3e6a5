"""Acceptance gate: one test per release criterion, pinned tolerances.

Each test prints a single pass/fail line; run with -v to see one line per
criterion from the test runner itself.  Criterion 3 is expected to fail:
its second clause (the repeated-coin ceiling on closed paths) is false as
stated, and the audit produces an explicit counterexample rather than
being weakened to pass.
"""

import cmath
import json
import os

import numpy as np
import pytest
import scipy.linalg

from arborwalk import cli, experiments
from arborwalk.coins import (boundary_permutation, family_q3_delocalizing,
                             family_q3_localizing, family_q4, haar_random,
                             permutation_coin)
from arborwalk.disorder import DisorderField
from arborwalk.paths import amplitude_by_paths, diagonal_count_audit
from arborwalk.spectral import (certified_propagating_returns,
                                diagonalize_block, fractional_moments,
                                free_shift_green_modulus, return_amplitudes)
from arborwalk.transfer import (build_V, decompose_T1, lr_trace, lyapunov,
                                propagate_eigenvector, quotient_r,
                                transfer_matrix)
from arborwalk.tree import ROOT, Alphabet, append_letter
from arborwalk.walk import (build_finite_volume, build_shift, build_walk,
                            check_covariance, finite_volume_dim, green,
                            localizing_block_basis, shift_source)


def _line(num: int, name: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"criterion {num:02d} {name}: {status}{suffix}")


def test_criterion_01_finite_volume_structure():
    worst = 0.0
    for q in (3, 4):
        alphabet = Alphabet(q)
        coin = family_q3_localizing(1, 0.5) if q == 3 else family_q4("localizing_1", 0.4)
        for L in (1, 3, 5):
            fv = build_finite_volume(coin, None, DisorderField(q * 10 + L),
                                     ROOT, L, alphabet)
            assert fv.dim == finite_volume_dim(q, L)
            worst = max(worst, fv.invariance_residual())
    assert finite_volume_dim(3, 1) == 18 and finite_volume_dim(4, 1) == 32
    ok = worst <= 1e-12
    _line(1, "finite-volume structure", ok, f"max residual {worst:.2e}")
    assert ok


def test_criterion_02_block_spectra_closed_forms():
    rng = np.random.default_rng(20)
    worst = 0.0
    for q in (3, 5):
        alphabet = Alphabet(q)
        for _ in range(50):
            phases = rng.uniform(0, 2 * np.pi, q)
            om = DisorderField(int(rng.integers(1 << 30)))
            coin = permutation_coin(boundary_permutation(q), phases)
            op = build_walk(coin, om, alphabet)
            x_o = (int(rng.integers(q)),)
            basis = localizing_block_basis(x_o, alphabet)
            m, _ = op.matrix(basis)
            theta = sum(om.phase(append_letter(x_o, (j + 3) % q, alphabet), (j + 1) % q)
                        + om.phase(x_o, j) for j in range(q))
            pred = np.exp(1j * (theta / (2 * q) + phases.mean()
                                + 2 * np.pi * np.arange(2 * q) / (2 * q)))
            got = np.linalg.eigvals(m)
            worst = max(worst, np.abs(np.sort(np.angle(got))
                                      - np.sort(np.angle(pred))).max())
    alphabet = Alphabet(4)
    for _ in range(20):
        phases = rng.uniform(0, 2 * np.pi, 4)
        om = DisorderField(int(rng.integers(1 << 30)))
        coin = permutation_coin(boundary_permutation(4), phases)
        op = build_walk(coin, om, alphabet)
        x_o = (int(rng.integers(4)),)
        m, _ = op.matrix(localizing_block_basis(x_o, alphabet))
        pred = []
        for j in range(4):
            inv = alphabet.inverse(j)
            th = om.phase(append_letter(x_o, inv, alphabet), inv) + om.phase(x_o, j)
            ph = (phases[j] + phases[inv]) / 2
            root = np.exp(1j * (th / 2 + ph))
            pred += [root, -root]
        got = np.linalg.eigvals(m)
        worst = max(worst, np.abs(np.sort(np.angle(got))
                                  - np.sort(np.angle(np.array(pred)))).max())
    ok = worst <= 1e-10
    _line(2, "invariant block spectra", ok, f"max phase error {worst:.2e}")
    assert ok


def test_criterion_03_path_oracles_and_repeat_audit():
    # first clause: path sums equal operator powers
    rng = np.random.default_rng(33)
    worst = 0.0
    for trial in range(50):
        q = 3 if trial % 2 == 0 else 4
        alphabet = Alphabet(q)
        coin = haar_random(q, rng)
        disorder = DisorderField(int(rng.integers(1 << 30)))
        steps = int(rng.choice([2, 4, 6]))
        source = (ROOT, int(rng.integers(q)))
        op = build_walk(coin, disorder, alphabet)
        state = {source: 1.0 + 0.0j}
        for _ in range(steps):
            state = op.apply(state)
        targets = sorted(state, key=lambda k: -abs(state[k]))[:3]
        for target in targets:
            amp = amplitude_by_paths(coin, disorder, source, target,
                                     steps, alphabet)
            worst = max(worst, abs(amp - state[target]))
    assert worst <= 1e-12

    # second clause, taken literally: on every closed path the number of
    # repeated-coin steps stays within half the step count, for q in {3, 5}
    # and up to 12 steps.  The sweep runs in increasing order and surfaces
    # the first counterexample it meets.
    violation = None
    for q in (3, 5):
        for steps in (2, 4, 6, 8, 10, 12):
            audit = diagonal_count_audit(q, steps, strict=False)
            if not audit.bound_holds:
                violation = audit
                break
        if violation:
            break
    ok = violation is None
    detail = (f"oracle match {worst:.1e}; repeat ceiling violated at "
              f"q={violation.q}, steps={violation.steps}: max repeats "
              f"{violation.max_repeats} > {violation.bound}, witness coin "
              f"trace {violation.witness}") if violation else \
        f"oracle match {worst:.1e}; ceiling holds through 12 steps"
    _line(3, "path-sum oracles and repeat ceiling", ok, detail)
    assert ok, detail


def test_criterion_04_exact_return_laws():
    worst = 0.0
    alphabet = Alphabet(3)
    for r in (0.3, 0.6, 0.9):
        t = np.sqrt(1 - r * r)
        op = build_walk(family_q3_delocalizing(2, r), DisorderField(7), alphabet)
        series = return_amplitudes(op, (ROOT, 2), 20)
        for n in range(11):
            worst = max(worst, abs(abs(series.amplitudes[2 * n]) - t ** (2 * n)))
    a4 = Alphabet(4)
    for kind in ("propagating_1", "propagating_2", "propagating_3"):
        series = certified_propagating_returns(family_q4(kind, 0.6, 1.2),
                                               (ROOT, 0), 40, a4)
        assert np.all(series.amplitudes[1:] == 0.0)
    shift = build_shift(alphabet, horizon=12)
    state = {(ROOT, 0): 1.0 + 0.0j}
    for _ in range(10):
        state = shift.apply(state)
        assert abs(state.get((ROOT, 0), 0.0)) == 0.0
    ok = worst <= 1e-10
    _line(4, "exact return laws", ok, f"max deviation {worst:.2e}")
    assert ok


def test_criterion_05_transfer_matrix_suite():
    rng = np.random.default_rng(55)
    r = 0.5
    worst_det = worst_shift = worst_quot = worst_tr = worst_dec = 0.0
    for _ in range(20):
        al, be, ga, lam, a2, c2 = rng.uniform(0, 2 * np.pi, 6)
        t1 = transfer_matrix(1.0, al, be, ga, r)
        worst_det = max(worst_det, abs(abs(np.linalg.det(t1)) - 1.0))
        shifted = transfer_matrix(cmath.exp(-1j * lam), al, be, ga, r)
        ref = transfer_matrix(1.0, al + 2 * lam, be + 2 * lam, ga + 2 * lam, r)
        worst_shift = max(worst_shift, np.abs(shifted - ref).max())
        z = rng.uniform(0.6, 0.9) * cmath.exp(1j * rng.uniform(0, 2 * np.pi))
        quot = np.linalg.inv(transfer_matrix(z, al, be, ga, r)) \
            @ transfer_matrix(z, a2, be, c2, r)
        worst_quot = max(worst_quot, np.abs(quot - quotient_r(c2 - ga, al - a2, r)).max())
        _, _, resid = decompose_T1(al, be, ga, rng.uniform(0.1, 0.9))
        worst_dec = max(worst_dec, resid)
    for theta in np.linspace(-np.pi, np.pi, 20):
        for eta in np.linspace(-np.pi, np.pi, 20):
            tr = np.trace(quotient_r(theta, eta, r).T
                          @ quotient_r(-theta, -eta, r))
            worst_tr = max(worst_tr, abs(tr.real - lr_trace(theta, eta, r)),
                           abs(tr.imag))
    worst_eig = 0.0
    for trial in range(20):
        om = rng.uniform(0, 2 * np.pi, size=60)
        win = build_V(r, omegas=om, k_min=0, k_max=9)
        modulus = 1.0 if trial % 2 == 0 else rng.uniform(0.6, 1.6)
        z = modulus * cmath.exp(1j * rng.uniform(0, 2 * np.pi))
        idx, psi = propagate_eigenvector(z, win.omegas[win.index(5):], 5,
                                         (1.0 + 0.0j, 0.4 - 0.6j), r)
        vec = np.zeros(win.size, dtype=complex)
        for j, p in zip(idx, psi):
            vec[win.index(j)] = p
        res = win.matrix @ vec - z * vec
        rows = [win.index(j) for j in range(8, idx[-1] - 2)]
        worst_eig = max(worst_eig, np.abs(res[rows]).max() / np.abs(vec).max())
    ok = (worst_det <= 1e-12 and worst_shift <= 1e-12 and worst_quot <= 1e-10
          and worst_tr <= 1e-12 and worst_dec <= 1e-10 and worst_eig <= 1e-9)
    _line(5, "transfer-matrix identities", ok,
          f"det {worst_det:.1e}, shift {worst_shift:.1e}, quot {worst_quot:.1e}, "
          f"trace {worst_tr:.1e}, split {worst_dec:.1e}, eig {worst_eig:.1e}")
    assert ok


def test_criterion_06_lyapunov_positivity():
    margins = []
    for r in (0.3, 0.5, 0.8):
        est = lyapunov(r, 1.0, 100_000, seed=600 + int(r * 10))
        margins.append(est.sigmas)
        assert est.positive
    ok = min(margins) >= 5.0
    _line(6, "positive Lyapunov exponents", ok,
          "sigmas " + ", ".join(f"{m:.0f}" for m in margins))
    assert ok


def test_criterion_07_fractional_moment_contrast():
    alphabet = Alphabet(3)
    # a coin a short distance from the full-cycle permutation: localized side
    rng = np.random.default_rng(7)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    k = (a - a.conj().T) / 2
    k *= 0.05 / np.linalg.norm(k, 2)
    base = permutation_coin(boundary_permutation(3), None)
    near = type(base)(base.m @ scipy.linalg.expm(k))
    fv = build_finite_volume(near, None, None, ROOT, 7, alphabet)
    fit = fractional_moments(fv, 0.3 + 0.2j, 0.2, seed=70, n_realizations=200)
    ci_lo, ci_hi = fit.slope_ci95

    # decorated identity coin: the walk is a pure shift and |G| along the
    # ancestor line must match the closed-form resolvent of a shift
    phases = [0.3, 1.1, 2.0]
    ident = permutation_coin((0, 1, 2), phases)
    fv2 = build_finite_volume(ident, phases, DisorderField(4), ROOT, 7, alphabet)
    z = 0.5
    g = green(fv2, z, (ROOT, 0))
    word, worst_profile = ROOT, 0.0
    for d in range(1, 6):
        word = shift_source(word, 0, alphabet)
        got = abs(g[fv2.index[(word, 0)]])
        worst_profile = max(worst_profile, abs(got - free_shift_green_modulus(z, d)))
    worst_profile = max(worst_profile, abs(g[fv2.index[(ROOT, 0)]]))
    ok = ci_hi < 0.0 and worst_profile <= 1e-6
    _line(7, "fractional-moment contrast", ok,
          f"slope {fit.slope:.3f} CI [{ci_lo:.3f}, {ci_hi:.3f}], "
          f"shift profile dev {worst_profile:.1e}")
    assert ok


def test_criterion_08_cesaro_contrast():
    alphabet = Alphabet(3)
    coin = family_q3_localizing(1, 0.5)
    fv = build_finite_volume(coin, None, DisorderField(3), ROOT, 3, alphabet)
    series = return_amplitudes(fv, ((0,), 0), 2000)
    cesaro = float(series.wiener_averages()[-1])
    summary = diagonalize_block(fv.dense_matrix(), fv.basis_vector((0,), 0))
    diff = abs(cesaro - summary.cesaro_limit)

    prop = certified_propagating_returns(family_q4("propagating_3", 0.7, 1.1),
                                         (ROOT, 0), 2000, Alphabet(4))
    prop_cesaro = float(prop.wiener_averages()[-1])
    ok = cesaro > 0.1 and diff <= 1e-3 and prop_cesaro <= (1 / 2000) * 1.1
    _line(8, "Cesaro return contrast", ok,
          f"localized {cesaro:.4f} (eig diff {diff:.1e}), "
          f"propagating {prop_cesaro:.2e}")
    assert ok


def test_criterion_09_translation_covariance():
    rng = np.random.default_rng(9)
    worst = 0.0
    for q in (3, 4):
        alphabet = Alphabet(q)
        coin = family_q3_delocalizing(1, 0.7) if q == 3 \
            else family_q4("localizing_3", 0.8)
        for _ in range(10):
            length = 2 * int(rng.integers(1, 4))
            word = ROOT
            while len(word) < length:
                word = append_letter(word, int(rng.integers(q)), alphabet)
            worst = max(worst, check_covariance(coin, int(rng.integers(1 << 30)),
                                                word, 2, alphabet))
    ok = worst <= 1e-14
    _line(9, "translation covariance", ok, f"max residual {worst:.2e}")
    assert ok


def test_criterion_10_deterministic_outputs(tmp_path):
    doc = {"schema_version": 1, "kind": "return_prob", "q": 3,
           "coin": {"family": "q3_localizing_1", "params": {"r": 0.5}},
           "nmax": 10, "realizations": 3, "seed": 4,
           "grid": {"r": [0.4, 0.6]}}
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc), encoding="utf-8")

    def outputs(out_dir):
        data = {}
        for name in ("results.csv", "summary.json", "manifest.json"):
            with open(os.path.join(out_dir, name), "rb") as fh:
                data[name] = fh.read()
        return data

    assert cli.main(["run", str(path), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", str(path), "--out", str(tmp_path / "b")]) == 0
    same_rerun = outputs(str(tmp_path / "a")) == outputs(str(tmp_path / "b"))

    experiments.run(dict(doc), str(tmp_path / "c"), stop_after=2)
    assert os.path.exists(tmp_path / "c" / "partial.jsonl")
    assert cli.main(["run", str(path), "--out", str(tmp_path / "c"),
                     "--resume"]) == 0
    same_resume = outputs(str(tmp_path / "a")) == outputs(str(tmp_path / "c"))
    ok = same_rerun and same_resume
    _line(10, "byte-deterministic outputs", ok,
          f"rerun match {same_rerun}, resume match {same_resume}")
    assert ok
