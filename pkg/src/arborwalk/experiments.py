"""Experiment driver: manifest execution, disorder sweeps, persistence.

Work is split into independent units (grid point x realization); each
completed unit is appended to partial.jsonl so interrupted runs resume
without recomputation, and the final CSV is assembled in a deterministic
order and written atomically.
"""

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import manifest as manifest_mod
from .coins import (CoinClass, CoinMatrix, boundary_permutation, classify_shape,
                    family_q3_delocalizing, family_q3_localizing, family_q4,
                    permutation_coin)
from .disorder import DisorderField
from .errors import ConditioningError, ManifestError
from .paths import count_closed, diagonal_count_audit
from .spectral import (certified_propagating_returns, diagonalize_block,
                       fractional_moments, return_amplitudes)
from .transfer import lyapunov
from .tree import ROOT, Alphabet, append_letter, enumerate_ball
from .walk import build_finite_volume, build_walk, check_covariance, localizing_blocks


def fmt(value) -> str:
    """Deterministic scalar formatting: 17 significant digits for floats."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def resolve_coin(spec: dict, q: int, params: dict | None = None) -> CoinMatrix:
    """Build the coin named by a manifest coin spec, with grid overrides."""
    family = spec["family"]
    p = dict(spec.get("params", {}))
    if params:
        p.update(params)
    phases = spec.get("phases")
    if family.startswith("q3_delocalizing"):
        coin = family_q3_delocalizing(int(family.rsplit("_", 1)[1]), p["r"])
    elif family.startswith("q3_localizing"):
        coin = family_q3_localizing(int(family.rsplit("_", 1)[1]), p["r"])
    elif family == "q4_reducing":
        coin = family_q4("reducing", p["psi"], p["xi"])
    elif family.startswith("q4_propagating"):
        coin = family_q4(f"propagating_{family.rsplit('_', 1)[1]}", p["psi"], p["xi"])
    elif family.startswith("q4_localizing"):
        coin = family_q4(f"localizing_{family.rsplit('_', 1)[1]}", p["psi"])
    elif family == "permutation":
        return permutation_coin(tuple(spec["perm"]), phases)
    elif family == "boundary":
        return permutation_coin(boundary_permutation(q), phases)
    else:
        raise ManifestError("coin.family", f"unknown family {family!r}")
    if phases is not None:
        coin = coin.decorated(phases)
    return coin


def expand_grid(doc: dict):
    """Cartesian product of the manifest grid, in key-sorted order."""
    grid = doc.get("grid", {})
    if not grid:
        return [{}]
    keys = sorted(grid)
    points = [{}]
    for key in keys:
        points = [dict(pt, **{key: v}) for pt in points for v in grid[key]]
    return points


# ---------------------------------------------------------------------------
# per-kind unit workers: (doc, grid point, grid index, realization) -> rows


def _source(doc, q):
    src = doc.get("source")
    if src is None:
        return (ROOT, 0)
    return (tuple(src[0]), int(src[1]))


def _unit_return_prob(doc, point, gi, ri):
    q = doc["q"]
    alphabet = Alphabet(q)
    coin = resolve_coin(doc["coin"], q, point)
    seed = doc["seed"] + ri
    nmax = doc["nmax"]
    source = _source(doc, q)
    shape = classify_shape(coin)
    if shape is CoinClass.PROPAGATING_SHAPE:
        series = certified_propagating_returns(coin, source, nmax, alphabet)
    else:
        disorder = DisorderField(seed)
        horizon = (nmax + 1) // 2 + len(source[0]) + 1
        op = build_walk(coin, disorder, alphabet, horizon=horizon)
        series = return_amplitudes(op, source, nmax)
    return [{"grid_index": gi, "realization": ri, "seed": seed, "n": n,
             **point,
             "re_amp": series.amplitudes[n].real,
             "im_amp": series.amplitudes[n].imag,
             "prob": abs(series.amplitudes[n]) ** 2}
            for n in range(nmax + 1)]


def _unit_wiener(doc, point, gi, ri):
    q = doc["q"]
    alphabet = Alphabet(q)
    coin = resolve_coin(doc["coin"], q, point)
    seed = doc["seed"] + ri
    nmax = doc["nmax"]
    source = _source(doc, q)
    shape = classify_shape(coin)
    if shape is CoinClass.PROPAGATING_SHAPE:
        series = certified_propagating_returns(coin, source, nmax, alphabet)
    else:
        fv = build_finite_volume(coin, doc["coin"].get("phases"),
                                 DisorderField(seed), ROOT, doc.get("L", 3),
                                 alphabet)
        series = return_amplitudes(fv, source, nmax)
    w = series.wiener_averages()
    stride = max(1, nmax // int(doc.get("max_rows", 200)))
    rows = [{"grid_index": gi, "realization": ri, "seed": seed, "n": n,
             **point, "prob": abs(series.amplitudes[n]) ** 2, "cesaro": w[n]}
            for n in range(0, nmax + 1, stride)]
    if (nmax % stride) != 0:
        rows.append({"grid_index": gi, "realization": ri, "seed": seed,
                     "n": nmax, **point,
                     "prob": abs(series.amplitudes[nmax]) ** 2, "cesaro": w[nmax]})
    return rows


def _unit_green_moments(doc, point, gi, ri):
    # one unit per grid point; realizations are averaged inside the fit
    q = doc["q"]
    alphabet = Alphabet(q)
    coin = resolve_coin(doc["coin"], q, point)
    fv = build_finite_volume(coin, doc["coin"].get("phases"), None, ROOT,
                             doc["L"], alphabet)
    z = complex(doc["z"][0], doc["z"][1])
    fit = fractional_moments(fv, z, doc["s"], doc["seed"],
                             doc["realizations"])
    rows = [{"grid_index": gi, "realization": 0, "seed": doc["seed"],
             **point, "distance": int(d), "log_mean": lm, "log_stderr": ls,
             "slope": fit.slope, "slope_stderr": fit.slope_stderr,
             "n_failures": fit.n_failures}
            for d, lm, ls in zip(fit.distances, fit.log_means, fit.log_stderr)]
    return rows


def _unit_lyapunov(doc, point, gi, ri):
    r = point.get("r", doc.get("r"))
    z = complex(*doc.get("z", [1.0, 0.0]))
    est = lyapunov(r, z, doc["n_matrices"], doc["seed"] + ri)
    return [{"grid_index": gi, "realization": ri, "seed": doc["seed"] + ri,
             "r": r, "z_angle": float(np.angle(z)), "gamma": est.gamma,
             "stderr": est.stderr, "n_matrices": est.n_matrices}]


def _unit_diagram_q3(doc, point, gi, ri):
    # localizing family sweep: Lyapunov exponent per r, as the diagram curve
    return _unit_lyapunov(doc, point, gi, ri)


def _unit_diagram_q4(doc, point, gi, ri):
    q = 4
    alphabet = Alphabet(q)
    coin = resolve_coin(doc["coin"], q, point)
    seed = doc["seed"] + ri
    shape = classify_shape(coin)
    nmax = doc.get("nmax", 500)
    source = _source(doc, q)
    if shape is CoinClass.PROPAGATING_SHAPE:
        series = certified_propagating_returns(coin, source, nmax, alphabet)
    else:
        fv = build_finite_volume(coin, doc["coin"].get("phases"),
                                 DisorderField(seed), ROOT, doc.get("L", 1),
                                 alphabet)
        series = return_amplitudes(fv, source, nmax)
    return [{"grid_index": gi, "realization": ri, "seed": seed, **point,
             "coin_class": shape.name.lower(),
             "cesaro": float(series.wiener_averages()[-1]), "nmax": nmax}]


def _unit_blocks(doc, point, gi, ri):
    q = doc["q"]
    alphabet = Alphabet(q)
    coin = resolve_coin(doc["coin"], q, point)
    ball = enumerate_ball(ROOT, doc["radius"], alphabet)
    blocks = localizing_blocks(coin, DisorderField(doc["seed"] + ri), ball)
    return [{"grid_index": gi, "realization": ri, "seed": doc["seed"] + ri,
             **point, "anchor": "".join(alphabet.letter_name(l) for l in b.anchor) or "e",
             "dim": b.dim, "residual": b.residual,
             "eig_modulus_defect": float(np.abs(np.abs(b.eigenvalues()) - 1).max())}
            for b in blocks]


def _unit_covariance(doc, point, gi, ri):
    q = doc["q"]
    alphabet = Alphabet(q)
    coin = resolve_coin(doc["coin"], q, point)
    rng = np.random.Generator(np.random.Philox(doc["seed"] + ri))
    rows = []
    for k in range(doc["translations"]):
        length = 2 * int(rng.integers(1, 4))
        word = ROOT
        while len(word) < length:
            word = append_letter(word, int(rng.integers(0, q)), alphabet)
        resid = check_covariance(coin, doc["seed"] + ri, word, doc["radius"],
                                 alphabet)
        rows.append({"grid_index": gi, "realization": ri,
                     "seed": doc["seed"] + ri, "k": k,
                     "translation": "".join(alphabet.letter_name(l) for l in word),
                     "parity": len(word) % 2, "residual": resid})
    return rows


def _unit_paths_audit(doc, point, gi, ri):
    rows = []
    for steps in doc["steps"]:
        audit = diagonal_count_audit(doc["q"], steps, strict=False)
        rows.append({"grid_index": gi, "realization": ri, "steps": steps,
                     "n_paths": audit.n_paths, "max_j": audit.max_repeats,
                     "bound": audit.bound, "bound_holds": audit.bound_holds,
                     "closed_count": count_closed(doc["q"], steps)})
    return rows


_WORKERS = {
    "return_prob": _unit_return_prob,
    "wiener": _unit_wiener,
    "green_moments": _unit_green_moments,
    "lyapunov": _unit_lyapunov,
    "diagram_q3": _unit_diagram_q3,
    "diagram_q4": _unit_diagram_q4,
    "blocks": _unit_blocks,
    "covariance": _unit_covariance,
    "paths_audit": _unit_paths_audit,
}

# kinds whose realizations are folded into a single Monte Carlo fit
_SINGLE_UNIT_KINDS = {"green_moments"}


@dataclass
class ResultSet:
    out_dir: str
    manifest: dict
    rows: list
    summary: dict

    @property
    def csv_path(self) -> str:
        return os.path.join(self.out_dir, "results.csv")


def _json_default(obj):
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _atomic_write(path: str, data: bytes):
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_bytes(rows: list) -> bytes:
    buf = io.StringIO()
    columns = list(rows[0].keys()) if rows else []
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c, "")) for c in columns])
    return buf.getvalue().encode("utf-8")


def _summarize(kind: str, rows: list, n_units: int) -> dict:
    summary = {"kind": kind, "n_rows": len(rows), "n_units": n_units}
    if kind in ("lyapunov", "diagram_q3"):
        summary["gamma_by_r"] = {
            fmt(row["r"]): {"gamma": row["gamma"], "stderr": row["stderr"]}
            for row in rows}
        summary["all_positive"] = all(row["gamma"] > 0 for row in rows)
    elif kind == "green_moments":
        summary["slope"] = rows[0]["slope"] if rows else None
        summary["slope_stderr"] = rows[0]["slope_stderr"] if rows else None
        summary["n_failures"] = rows[0]["n_failures"] if rows else 0
    elif kind in ("wiener", "diagram_q4"):
        last_n = max((row["n"] for row in rows), default=None) if kind == "wiener" \
            else None
        tails = [row["cesaro"] for row in rows
                 if last_n is None or row["n"] == last_n]
        summary["cesaro_tail_mean"] = float(np.mean(tails)) if tails else None
    elif kind == "blocks":
        summary["max_residual"] = max((r["residual"] for r in rows), default=0.0)
        summary["dims"] = sorted({r["dim"] for r in rows})
    elif kind == "covariance":
        summary["max_residual"] = max((r["residual"] for r in rows), default=0.0)
    elif kind == "paths_audit":
        summary["bound_holds_everywhere"] = all(r["bound_holds"] for r in rows)
        summary["max_j_by_steps"] = {str(r["steps"]): r["max_j"] for r in rows}
    return summary


def run(doc: dict, out_dir: str, threads: int = 1, resume: bool = False,
        stop_after: int | None = None) -> ResultSet:
    """Execute a validated manifest; returns the assembled result set.

    Completed units are logged to partial.jsonl as they finish; with
    resume=True, units already present there are not recomputed.
    stop_after (testing hook) aborts after that many newly computed units,
    leaving the partial log behind.
    """
    doc = manifest_mod.validate(dict(doc))
    kind = doc["kind"]
    os.makedirs(out_dir, exist_ok=True)
    partial_path = os.path.join(out_dir, "partial.jsonl")

    points = expand_grid(doc)
    n_real = 1 if kind in _SINGLE_UNIT_KINDS else doc["realizations"]
    units = [(gi, ri) for gi in range(len(points)) for ri in range(n_real)]

    done: dict = {}
    if resume and os.path.exists(partial_path):
        with open(partial_path, encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                done[tuple(rec["unit"])] = rec["rows"]
    pending = [u for u in units if u not in done]
    if stop_after is not None:
        pending = pending[:stop_after]

    worker = _WORKERS[kind]
    failures = 0

    def compute(unit):
        gi, ri = unit
        try:
            return unit, worker(doc, points[gi], gi, ri), None
        except ConditioningError as exc:
            return unit, [], exc

    results = dict(done)
    log = open(partial_path, "a", encoding="utf-8")
    try:
        if threads > 1:
            outcomes = ThreadPoolExecutor(max_workers=threads).map(compute, pending)
        else:
            outcomes = map(compute, pending)
        for unit, rows, exc in outcomes:
            if exc is not None:
                failures += 1
                if failures > doc.get("failure_budget", 0):
                    raise exc
            results[unit] = rows
            log.write(json.dumps({"unit": list(unit), "rows": rows},
                                 default=_json_default) + "\n")
            log.flush()
    finally:
        log.close()

    if stop_after is not None and len(results) < len(units):
        return ResultSet(out_dir=out_dir, manifest=doc, rows=[],
                         summary={"partial": True, "units_done": len(results)})

    rows = []
    for unit in units:
        rows.extend(results[unit])
    summary = _summarize(kind, rows, len(units))
    _atomic_write(os.path.join(out_dir, "results.csv"), _csv_bytes(rows))
    _atomic_write(os.path.join(out_dir, "summary.json"),
                  json.dumps(summary, indent=2, sort_keys=True,
                             default=_json_default).encode("utf-8"))
    _atomic_write(os.path.join(out_dir, "manifest.json"),
                  json.dumps(doc, indent=2, sort_keys=True).encode("utf-8"))
    if os.path.exists(partial_path):
        os.unlink(partial_path)
    return ResultSet(out_dir=out_dir, manifest=doc, rows=rows, summary=summary)
