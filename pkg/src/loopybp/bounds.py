"""Distance bounds between sum-product fixed points.

Single-update contractions (delta1, delta2), the per-edge error recursions
they generate, and the node-level log-distance bounds assembled from the
recursions' largest fixed points. All recursions run in log space through
t = exp(-log eps), which keeps the arithmetic stable when eps saturates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .models import PairwiseMRF, StrengthTable, compute_strengths

_REL_TOL = 1e-14
_MAX_SOLVE = 100000
_ZERO_EPS = 1e-9  # log-eps values below this count as the trivial fixed point


def delta1(d_pair: float, d_star: float, dE: float) -> float:
    """Squared-ratio cap on the outgoing error of one update.

    Uses both the edge strength and the summed-out marginal strength of the
    sender; dE is the dynamic range of the incoming error. Accepts dE=inf,
    where the cap saturates at (d_pair*d_star)**2.
    """
    if d_pair < 1.0 or d_star < 1.0 or dE < 1.0:
        raise ValueError("strengths and error range must be at least 1")
    dd = d_pair * d_star
    if math.isinf(dE):
        return dd * dd
    return ((dd * dE + 1.0) / (dd + dE)) ** 2


def delta2(d_pair: float, dE: float) -> float:
    """Squared-ratio cap using the edge strength alone (squared inside)."""
    if d_pair < 1.0 or dE < 1.0:
        raise ValueError("strength and error range must be at least 1")
    d2 = d_pair * d_pair
    if math.isinf(dE):
        return d2 * d2
    return ((d2 * dE + 1.0) / (d2 + dE)) ** 2


_VARIATION_KINDS = {
    # kind -> (use d_pair*d_star, log coefficient)
    "G_O": (True, 2.0),
    "G_I": (False, 2.0),
    "G_II": (False, 1.0),
}


def bound_variation(kind: str, strengths, log_eps: float) -> float:
    """Net change of the error recursion at a node, as a function of log eps.

    ``strengths`` lists (d_pair, d_star) per incoming edge excluding the
    target. Zero at log_eps = 0 for every kind; eventually decreasing with
    slope -1, so the largest root is the recursion's stable fixed point.
    """
    try:
        use_star, coeff = _VARIATION_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown kind {kind!r}") from None
    if log_eps < 0.0:
        raise ValueError("log_eps must be non-negative")
    t = math.exp(-log_eps)
    total = 0.0
    for d_pair, d_star in strengths:
        if d_pair < 1.0 or d_star < 1.0:
            raise ValueError("strengths must be at least 1")
        v = d_pair * d_star if use_star else d_pair * d_pair
        total += coeff * (math.log(v + t) - math.log1p(v * t))
    return total - log_eps


# -- recursion plumbing ----------------------------------------------------


class _EdgeTerms:
    """Flat predecessor structure over directed edges.

    For edge f = (u -> t), the predecessors are the edges (v -> u) with
    v != t; term i says segment term_seg[i] receives a contribution driven
    by edge term_feed[i].
    """

    def __init__(self, model: PairwiseMRF, strengths: StrengthTable):
        directed = model.directed_edges()
        self.n_dir = len(directed)
        self.dst = np.array([e.dst for e in directed], dtype=int)
        self.dd = np.array([strengths.directed_product(t, s)
                            for t, s in directed])
        self.d2 = np.array([strengths.pair(t, s) ** 2 for t, s in directed])
        seg = []
        feed = []
        for f, (u, _) in enumerate(directed):
            for g, (_, w) in enumerate(directed):
                if w == u and g != (f ^ 1):
                    seg.append(f)
                    feed.append(g)
        self.term_seg = np.array(seg, dtype=int)
        self.term_feed = np.array(feed, dtype=int)


class _Recursion:
    def __init__(self, terms: _EdgeTerms, coeff: float, strength: np.ndarray):
        self.n = terms.n_dir
        self.seg = terms.term_seg
        self.feed = terms.term_feed
        self.coeff = coeff
        self.v = strength[self.feed] if self.feed.size else np.empty(0)

    def sums_scalar(self, z: float) -> np.ndarray:
        t = math.exp(-z)
        vals = self.coeff * (np.log(self.v + t) - np.log1p(self.v * t))
        return np.bincount(self.seg, weights=vals, minlength=self.n)

    def sums_vector(self, z: np.ndarray) -> np.ndarray:
        t = np.exp(-z[self.feed]) if self.feed.size else np.empty(0)
        vals = self.coeff * (np.log(self.v + t) - np.log1p(self.v * t))
        return np.bincount(self.seg, weights=vals, minlength=self.n)

    def saturated(self) -> np.ndarray:
        vals = self.coeff * np.log(self.v)
        return np.bincount(self.seg, weights=vals, minlength=self.n)


def _solve_uniform(rec: _Recursion) -> float:
    """Largest fixed point, in log space, of z <- max over edges of the
    predecessor sums.

    Two-stage zero test: twenty iterations from just above zero that contract
    below 1+1e-9 certify that no nonzero fixed point exists (the map is
    monotone, so a nonzero fixed point would force those iterates upward).
    Otherwise iterate down from the saturated initialization, which the
    recursion's shape makes monotone non-increasing and bounded below.
    """
    if rec.n == 0:
        return 0.0
    top = float(rec.saturated().max())
    if top <= 0.0:
        return 0.0
    z = math.log1p(1e-6)
    for _ in range(20):
        z = float(rec.sums_scalar(z).max())
    if z <= math.log1p(_ZERO_EPS):
        return 0.0
    z = top
    for _ in range(_MAX_SOLVE):
        znew = float(rec.sums_scalar(z).max())
        if abs(znew - z) <= _REL_TOL * max(1.0, z):
            z = znew
            break
        z = znew
    if z <= math.log1p(_ZERO_EPS):
        return 0.0
    return z


def _solve_nonuniform(rec: _Recursion, n: Optional[int]) -> np.ndarray:
    """Per-edge log eps after n recursion steps (n=None: to the fixed point).

    Step 1 is the saturated initialization, so the sequence is monotone
    non-increasing componentwise.
    """
    z = rec.saturated()
    if n is None:
        for _ in range(_MAX_SOLVE):
            znew = rec.sums_vector(z)
            if float(np.max(np.abs(znew - z))) <= _REL_TOL * max(1.0, float(z.max())):
                z = znew
                break
            z = znew
    else:
        if n < 1:
            raise ValueError("n must be at least 1")
        for _ in range(n - 1):
            z = rec.sums_vector(z)
    return z


def _node_bounds(model: PairwiseMRF, terms: _EdgeTerms, strength: np.ndarray,
                 z) -> np.ndarray:
    """Assemble per-node bounds: each incoming edge contributes the squared
    contraction at its own eps. Values below 1e-9 collapse to exactly 0."""
    t = np.exp(-z) if np.ndim(z) else np.full(terms.n_dir, math.exp(-z))
    contrib = 2.0 * (np.log(strength + t) - np.log1p(strength * t))
    out = np.bincount(terms.dst, weights=contrib, minlength=model.num_nodes)
    out[out < _ZERO_EPS] = 0.0
    return out


def _prepared(model, strengths):
    if strengths is None:
        strengths = compute_strengths(model)
    return strengths, _EdgeTerms(model, strengths)


# -- node-level bounds -----------------------------------------------------


def uniform_distance_bound(model: PairwiseMRF, strengths=None):
    """Per-node log-distance bound from the doubled-log recursion with the
    combined strength d*d_star. Returns (bounds, eps_star)."""
    if model.num_directed == 0:
        return np.zeros(model.num_nodes), 1.0
    strengths, terms = _prepared(model, strengths)
    z = _solve_uniform(_Recursion(terms, 2.0, terms.dd))
    return _node_bounds(model, terms, terms.dd, z), math.exp(z)


def improved_uniform_distance_bound(model: PairwiseMRF, strengths=None):
    """Same node assembly, but eps_star comes from the single-log recursion
    in squared edge strength, which has a higher zero threshold."""
    if model.num_directed == 0:
        return np.zeros(model.num_nodes), 1.0
    strengths, terms = _prepared(model, strengths)
    z = _solve_uniform(_Recursion(terms, 1.0, terms.d2))
    return _node_bounds(model, terms, terms.dd, z), math.exp(z)


def ihler_uniform_distance_bound(model: PairwiseMRF, strengths=None):
    """Dynamic-range recursion end to end: the single-log eps fixed point
    assembled with the squared edge strength."""
    if model.num_directed == 0:
        return np.zeros(model.num_nodes), 1.0
    strengths, terms = _prepared(model, strengths)
    z = _solve_uniform(_Recursion(terms, 1.0, terms.d2))
    return _node_bounds(model, terms, terms.d2, z), math.exp(z)


def nonuniform_distance_bound(model: PairwiseMRF, strengths=None,
                              n: Optional[int] = None, improved=False):
    """Per-edge eps recursion kept separate per directed edge.

    ``n`` counts recursion steps including the saturated initialization;
    None runs to the fixed point. ``improved`` switches the per-edge
    recursion to the single-log squared-strength form. Returns
    (bounds, per-directed-edge eps array).
    """
    if model.num_directed == 0:
        return np.zeros(model.num_nodes), np.empty(0)
    strengths, terms = _prepared(model, strengths)
    if improved:
        rec = _Recursion(terms, 1.0, terms.d2)
    else:
        rec = _Recursion(terms, 2.0, terms.dd)
    z = _solve_nonuniform(rec, n)
    return _node_bounds(model, terms, terms.dd, z), np.exp(z)


def ihler_nonuniform_distance_bound(model: PairwiseMRF, strengths=None,
                                    n: Optional[int] = None):
    if model.num_directed == 0:
        return np.zeros(model.num_nodes), np.empty(0)
    strengths, terms = _prepared(model, strengths)
    z = _solve_nonuniform(_Recursion(terms, 1.0, terms.d2), n)
    return _node_bounds(model, terms, terms.d2, z), np.exp(z)


# -- empirical distance ----------------------------------------------------


def true_distance(model: PairwiseMRF, seeds: int = 0, runs: int = 12,
                  max_iters: int = 5000, tol: float = 1e-10,
                  dedup_tol: float = 1e-6) -> Optional[np.ndarray]:
    """Largest per-node log belief ratio across fixed points discovered by
    seeded random restarts. None when no restart converges; zeros when all
    converged restarts agree.
    """
    if runs < 2:
        raise ValueError("need at least 2 runs")
    from .engine import _Layout, _beliefs_batch, _random_logm, _run_batch
    if model.num_directed == 0:
        return np.zeros(model.num_nodes)
    layout = _Layout(model)
    logm0 = _random_logm(layout, [seeds + r for r in range(runs)])
    status, _, snap, _ = _run_batch(layout, logm0, max_iters, tol,
                                    detect_oscillation=False)
    good = status == 1
    if not np.any(good):
        return None
    beliefs = _beliefs_batch(layout, snap[good])
    reps: list[np.ndarray] = []
    for b in beliefs:
        if all(float(np.abs(b - r).max()) > dedup_tol for r in reps):
            reps.append(b)
    out = np.zeros(model.num_nodes)
    for i in range(len(reps)):
        for j in range(i):
            for v in range(model.num_nodes):
                k = model.cards[v]
                gap = np.abs(np.log(reps[i][v, :k]) - np.log(reps[j][v, :k]))
                out[v] = max(out[v], float(gap.max()))
    return out


# -- combined report -------------------------------------------------------

BOUND_KEYS = ("udb", "improved_udb", "ihler_udb",
              "nudb", "improved_nudb", "ihler_nudb")


@dataclass
class BoundReport:
    """All node bounds side by side, with the eps values behind them.

    eps_star holds one value per directed edge for every kind; the uniform
    kinds broadcast their shared scalar.
    """

    node_bounds: dict
    eps_star: dict
    true_log_distance: Optional[np.ndarray] = None


def bound_report(model: PairwiseMRF, strengths=None, n: Optional[int] = None,
                 true_runs: int = 0, seed: int = 0) -> BoundReport:
    """Compute every bound kind for one model.

    ``n`` is passed to the per-edge recursions; ``true_runs`` >= 2 adds the
    empirical distance from that many random restarts.
    """
    if strengths is None:
        strengths = compute_strengths(model)
    n_dir = model.num_directed
    node_bounds = {}
    eps = {}
    for key, (bounds, eps_val) in (
            ("udb", uniform_distance_bound(model, strengths)),
            ("improved_udb", improved_uniform_distance_bound(model, strengths)),
            ("ihler_udb", ihler_uniform_distance_bound(model, strengths))):
        node_bounds[key] = bounds
        eps[key] = np.full(n_dir, eps_val)
    for key, improved in (("nudb", False), ("improved_nudb", True)):
        bounds, eps_vec = nonuniform_distance_bound(model, strengths, n=n,
                                                    improved=improved)
        node_bounds[key] = bounds
        eps[key] = eps_vec
    bounds, eps_vec = ihler_nonuniform_distance_bound(model, strengths, n=n)
    node_bounds["ihler_nudb"] = bounds
    eps["ihler_nudb"] = eps_vec

    for key in BOUND_KEYS:
        if np.any(node_bounds[key] < 0.0):
            raise AssertionError(f"{key} produced a negative bound")
    for tight, loose in (("improved_udb", "udb"), ("improved_nudb", "nudb")):
        if np.any(node_bounds[tight] > node_bounds[loose] + 1e-9):
            raise AssertionError(f"{tight} exceeded {loose}")

    true_log = None
    if true_runs >= 2:
        true_log = true_distance(model, seeds=seed, runs=true_runs)
    return BoundReport(node_bounds, eps, true_log)
