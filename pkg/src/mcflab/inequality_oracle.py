"""Randomised verification of the algebraic inequalities behind the two theorems.

Every check draws singular values ``lam`` from a constraint domain and, where
the inequality involves the second fundamental form, symmetric ``h`` tensors
``h[q, i, j]`` uniform in ``[-h_scale, h_scale]``.  A check returns its final
inequality plus each intermediate step of the displayed argument as
``(lhs, rhs)`` pairs; all of them are asserted with margin ``lhs - rhs >= -TOL``.

The search is: uniform rejection sampling with a fraction of samples pushed
onto the constraint boundary, a heavy-tail pass with ``h`` scaled by 1e3, and
coordinate-wise hill climbing from the 100 worst samples.  Everything is
driven by one seeded generator and reduced in a fixed batch order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .pointwise_geometry import term_I, term_II

__all__ = [
    "TOL",
    "CONSTRAINTS",
    "SampleDomain",
    "ViolationReport",
    "sample",
    "thm1_c0",
    "check_I_geq_deltaA2",
    "check_II_nonneg",
    "check_II_lower_bound",
    "check_thm2_termI",
    "probe_thm2_termII",
    "thm2_termI_value",
    "thm2_termII_value",
]

TOL = 1e-12
CONSTRAINTS = ("DetRatioBelow", "PairProductBelow", "Thm2NullConfig")
BATCH = 100_000
MAX_STORED = 100
BOUNDARY_FRACTION = 0.1
HEAVY_TAIL_SCALE = 1e3
HEAVY_TAIL_FRACTION = 0.1
CLIMB_STARTS = 100
CLIMB_ROUNDS = 40


@dataclass
class SampleDomain:
    """Constraint domain for ``(lam, h)`` samples.

    ``DetRatioBelow`` bounds ``prod(1 + lam_i^2) <= 4 - epsilon``;
    ``PairProductBelow`` bounds ``lam_i lam_j <= 1 - epsilon / 4``;
    ``Thm2NullConfig`` is ``lam_1 >= ... >= lam_n >= 0``, ``lam_1 lam_2 < 1``,
    ``lam_i < 1`` for ``i >= 2`` (with ``null_exact`` the pair product is
    pinned to 1).
    """

    n: int
    m: int
    lambda_constraint: str
    epsilon: float = 0.5
    h_scale: float = 1.0
    k1: float = 1.0
    k2: float = 0.0
    sample_count: int = 1_000_000
    seed: int = 0
    null_exact: bool = False

    def __post_init__(self):
        if self.lambda_constraint not in CONSTRAINTS:
            raise ConfigError(f"unknown constraint {self.lambda_constraint!r}", field="lambda_constraint")
        if not 0 < self.epsilon < 3:
            raise ConfigError("epsilon must lie in (0, 3)", field="epsilon")
        if self.sample_count < 1:
            raise ConfigError("sample_count must be >= 1", field="sample_count")
        if self.n < 1 or self.m < 1:
            raise ConfigError("dimensions must be >= 1", field="n")
        if self.k1 < 0 or not (self.k2 <= 0 or self.k1 >= self.k2 > 0):
            raise ConfigError("curvatures must satisfy k1 >= 0 and (k2 <= 0 or k1 >= k2 > 0)", field="k1")
        if self.lambda_constraint == "Thm2NullConfig" and self.n < 2:
            raise ConfigError("the Theorem 2 configuration needs n >= 2", field="n")

    @property
    def rank(self) -> int:
        """Number of possibly nonzero singular values."""
        return min(self.n, self.m)

    @property
    def branch(self) -> str:
        return "a" if self.k2 <= 0 else "b"

    @property
    def det_bound(self) -> float:
        return 4.0 - self.epsilon

    @property
    def pair_bound(self) -> float:
        return 1.0 - self.epsilon / 4.0


@dataclass
class ViolationReport:
    """Outcome of one check.

    ``worst_margin`` is the least margin over the final inequality and every
    asserted step; ``steps`` holds the least margin per step.  At most
    ``MAX_STORED`` violations are kept (the worst ones), ``violation_count``
    counts them all.
    """

    name: str
    checked: int = 0
    worst_margin: float = math.inf
    violations: list = field(default_factory=list)
    violation_count: int = 0
    identity_max_err: float = 0.0
    steps: dict = field(default_factory=dict)
    step_violations: dict = field(default_factory=dict)
    worst_sample: dict = None
    asserted: bool = True
    climbed_worst: float = math.inf

    @property
    def passed(self) -> bool:
        return self.violation_count == 0 and self.identity_max_err <= TOL

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "checked": self.checked,
            "worst_margin": self.worst_margin,
            "violation_count": self.violation_count,
            "violations": self.violations,
            "identity_max_err": self.identity_max_err,
            "steps": self.steps,
            "step_violations": self.step_violations,
            "worst_sample": self.worst_sample,
            "asserted": self.asserted,
            "climbed_worst": self.climbed_worst,
            "passed": self.passed if self.asserted else None,
        }


# ------------------------------------------------------------------ sampling


def _pairs(n):
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def _max_pair(lam):
    n = lam.shape[1]
    if n < 2:
        return np.zeros(lam.shape[0])
    s = -np.sort(-lam, axis=1)
    return s[:, 0] * s[:, 1]


def contains(domain: SampleDomain, lam) -> np.ndarray:
    """Mask of rows of ``lam`` inside the domain."""
    ok = np.all(np.isfinite(lam), axis=1) & np.all(lam >= 0.0, axis=1)
    if domain.rank < domain.n:
        ok &= np.all(lam[:, domain.rank:] == 0.0, axis=1)
    c = domain.lambda_constraint
    if c == "DetRatioBelow":
        ok &= np.prod(1.0 + lam * lam, axis=1) <= domain.det_bound
    elif c == "PairProductBelow":
        ok &= _max_pair(lam) <= domain.pair_bound
    else:
        ok &= np.all(lam[:, :-1] >= lam[:, 1:], axis=1)
        ok &= np.all(lam[:, 1:] < 1.0, axis=1)
        if domain.null_exact:
            ok &= np.abs(lam[:, 0] * lam[:, 1] - 1.0) <= 4.0 * np.finfo(float).eps
        else:
            ok &= lam[:, 0] * lam[:, 1] < 1.0
    return ok


def project(domain: SampleDomain, lam) -> np.ndarray:
    """Restore the structural part of the constraint after a hill-climbing move."""
    lam = np.abs(lam)
    if domain.rank < domain.n:
        lam[:, domain.rank:] = 0.0
    if domain.lambda_constraint == "Thm2NullConfig":
        lam = -np.sort(-lam, axis=1)
        if domain.null_exact:
            lam[:, 1] = np.clip(lam[:, 1], 1e-3, 1.0)
            lam[:, 0] = 1.0 / lam[:, 1]
            lam[:, 2:] = np.minimum(lam[:, 2:], lam[:, 1:2] * (1.0 - 1e-15))
    return lam


def _draw_lam(domain: SampleDomain, rng, count):
    k = domain.rank
    n = domain.n
    lam = np.zeros((count, n))
    edge = rng.random(count) < BOUNDARY_FRACTION
    c = domain.lambda_constraint
    if c == "DetRatioBelow":
        L = math.log(domain.det_bound)
        u = rng.random((count, k)) * L
        total = u.sum(axis=1)
        hug = L * (1.0 - 1e-9 * rng.random(count))
        u[edge] *= (hug[edge] / np.maximum(total[edge], 1e-300))[:, None]
        lam[:, :k] = np.sqrt(np.expm1(u))
    elif c == "PairProductBelow":
        x = np.exp(rng.uniform(-6.0, 3.0, (count, k)))
        x[rng.random((count, k)) < 0.1] = 0.0
        lam[:, :k] = x
        if k >= 2:
            top = np.argmax(x, axis=1)
            mp = _max_pair(lam)
            target = domain.pair_bound * (1.0 - 1e-9 * rng.random(count))
            scale = np.where(mp > 0, target / np.where(mp > 0, mp, 1.0), 1.0)
            s = np.where(edge, scale, 1.0)
            keep = lam[np.arange(count), top].copy()
            lam[:, :k] *= s[:, None]
            lam[np.arange(count), top] = keep
    else:
        if domain.null_exact:
            l2 = np.exp(rng.uniform(-4.0, 0.0, count))
            l1 = 1.0 / l2
        else:
            l2 = rng.random(count)
            l2[edge] = 1.0 - 1e-6 * rng.random(int(edge.sum()))
            v = rng.random(count)
            v[edge] = 1.0 - 1e-9 * rng.random(int(edge.sum()))
            l1 = l2 ** (1.0 - 2.0 * v)
        lam[:, 0] = l1
        lam[:, 1] = l2
        if n > 2:
            lam[:, 2:] = l2[:, None] * rng.random((count, n - 2))
        lam = -np.sort(-lam, axis=1)
        if k < n:
            lam[:, k:] = 0.0
    return lam


def _draw_h(domain: SampleDomain, rng, count, scale):
    n, m = domain.n, domain.m
    h = rng.uniform(-scale, scale, (count, m, n, n))
    return 0.5 * (h + np.swapaxes(h, -1, -2))


def sample(domain: SampleDomain, rng, count, h_scale=None):
    """``count`` in-domain samples ``(lam, h)``; every one is checked against the constraint."""
    h_scale = domain.h_scale if h_scale is None else h_scale
    out_lam = []
    got = 0
    while got < count:
        lam = _draw_lam(domain, rng, max(count - got, 1024))
        lam = lam[contains(domain, lam)][: count - got]
        out_lam.append(lam)
        got += lam.shape[0]
    lam = np.concatenate(out_lam)
    h = _draw_h(domain, rng, count, h_scale)
    assert np.all(contains(domain, lam))
    return lam, h


# ------------------------------------------------------------------- formulas


def thm1_c0(n: int, k1: float, epsilon: float, branch: str) -> float:
    if branch == "a":
        return k1 * (n - 1) / 4.0
    return epsilon * k1 * (n - 1) / 16.0


def _offdiag_sum(lam, fn):
    n = lam.shape[1]
    out = np.zeros(lam.shape[0])
    for i in range(n):
        for k in range(n):
            if k != i:
                out = out + fn(i, k)
    return out


def thm2_termI_value(lam, k1, k2):
    """Curvature term of the Theorem 2 test function for constant curvatures."""
    l2 = lam * lam
    n = lam.shape[1]
    out = np.zeros(lam.shape[0])
    for a in (0, 1):
        for k in range(n):
            if k != a:
                out = out + 2.0 * l2[:, a] * (k1 - l2[:, k] * k2) / ((1.0 + l2[:, k]) * (1.0 + l2[:, a]) ** 2)
    return out


def _s_diagonal(lam, m):
    """Diagonal of S on tangent (``n``) and normal (``m``) adapted frames; off-diagonal ``D`` lives on (i, n+i)."""
    l2 = lam * lam
    B = (1.0 - l2) / (1.0 + l2)
    n = lam.shape[1]
    k = min(n, m)
    normal = -np.ones((lam.shape[0], m))
    normal[:, :k] = -B[:, :k]
    return B, normal


def thm2_termII_value(lam, h):
    """Second fundamental form term of the Theorem 2 test function.

    ``2 h^a_kj h^a_k1 S_j1 + 2 h^a_kj h^a_k2 S_j2 - 2 h^a_k1 h^b_k1 S_ab - 2 h^a_k2 h^b_k2 S_ab``
    with ``S`` diagonal on tangent-tangent and normal-normal blocks, so each
    sum collapses to squares of ``h^a_{k1}`` and ``h^a_{k2}``.
    """
    m = h.shape[1]
    B, Snn = _s_diagonal(lam, m)
    out = np.zeros(lam.shape[0])
    for c in (0, 1):
        sq = np.sum(h[:, :, :, c] ** 2, axis=2)  # (N, m): sum_k (h^a_{kc})^2
        out = out + 2.0 * np.sum(sq * (B[:, c:c + 1] - Snn), axis=1)
    return out


# ---------------------------------------------------------------- check kernels


def _eval_I_geq_deltaA2(domain, lam, h):
    delta = domain.epsilon / 8.0
    k = domain.rank
    A2 = np.sum(h * h, axis=(1, 2, 3))
    I = term_I(lam, h)
    sq = np.zeros(lam.shape[0])
    for i in range(k):
        sq = sq + np.sum(h[:, i] ** 2, axis=(1, 2))
    cross = np.zeros(lam.shape[0])
    diff = np.zeros(lam.shape[0])
    for i, j in _pairs(k):
        a = np.abs(h[:, i, j, :])  # |h^{n+i}_{jk}|
        b = np.abs(h[:, j, i, :])  # |h^{n+j}_{ik}|
        cross = cross + np.sum(a * b, axis=1)
        diff = diff + np.sum((a - b) ** 2, axis=1)
    r1 = delta * A2 + (1.0 - delta) * sq - 2.0 * (1.0 - delta) * cross
    r2 = delta * A2 + (1.0 - delta) * diff
    r3 = delta * A2
    return {
        "final": (I, r3),
        "step1_drop_lambda_terms": (I, r1),
        "step2_complete_square": (r1, r2),
        "step3_drop_square": (r2, r3),
    }


def _eval_II_nonneg(domain, lam, h=None):
    II = term_II(lam, domain.k1, domain.k2)
    zero = np.zeros_like(II)
    out = {"final": (II, zero)}
    if domain.branch == "a":
        # each summand k1 l_i^2 - k2 l_i^2 l_k^2 is nonnegative
        out["step1_termwise"] = (II, zero)
        return out
    l2 = lam * lam
    den = lambda i, k: (1.0 + l2[:, i]) * (1.0 + l2[:, k])
    s1 = _offdiag_sum(lam, lambda i, k: (l2[:, i] - l2[:, i] * l2[:, k]) / den(i, k)) * domain.k2
    sym = np.zeros_like(II)
    for i, k in _pairs(lam.shape[1]):
        sym = sym + (l2[:, i] + l2[:, k] - 2.0 * l2[:, i] * l2[:, k]) / den(i, k)
    sym = sym * domain.k2
    out["step1_k1_to_k2"] = (II, s1)
    out["step2_symmetrise_eq"] = (s1, sym)
    out["step2_symmetrise_eq_rev"] = (sym, s1)
    out["step3_pairwise_nonneg"] = (sym, zero)
    return out


def _identity_err(lam):
    """Largest pairwise error of the identity, evaluated in extended precision.

    The domain admits ``lam_i`` in the hundreds (with a tiny partner), where
    double rounding of ``lam_i^2`` alone exceeds the tolerance.
    """
    lam = lam.astype(np.longdouble)
    err = np.zeros(lam.shape[0])
    for i, k in _pairs(lam.shape[1]):
        a, b = lam[:, i], lam[:, k]
        lhs = a * a + b * b - 2.0 * a * a * b * b
        rhs = (a - b) ** 2 + 2.0 * a * b * (1.0 - a * b)
        err = np.maximum(err, np.abs(lhs - rhs).astype(float))
    return err


def _eval_II_lower_bound(domain, lam, h=None):
    c0 = thm1_c0(domain.n, domain.k1, domain.epsilon, domain.branch)
    II = term_II(lam, domain.k1, domain.k2)
    s = np.sum(lam * lam, axis=1)
    logs = np.sum(np.log1p(lam * lam), axis=1)
    return {
        "final": (II, c0 * logs),
        "step1_quadratic_bound": (II, c0 * s),
        "step2_log_bound": (c0 * s, c0 * logs),
    }


def _eval_thm2_termI(domain, lam, h=None):
    k1, k2 = domain.k1, domain.k2
    I = thm2_termI_value(lam, k1, k2)
    zero = np.zeros_like(I)
    out = {"final": (I, zero)}
    if domain.branch == "a":
        return out
    l2 = lam * lam
    n = lam.shape[1]
    a1, a2 = l2[:, 0], l2[:, 1]
    L1 = np.zeros_like(I)
    for c in (0, 1):
        for k in range(n):
            if k != c:
                L1 = L1 + (2.0 * l2[:, c] - 2.0 * l2[:, k] * l2[:, c]) / ((1.0 + l2[:, k]) * (1.0 + l2[:, c]) ** 2)
    L1 = k1 * L1
    pair = (2.0 * a1 - 2.0 * a2 * a1) / ((1.0 + a2) * (1.0 + a1) ** 2) + (2.0 * a2 - 2.0 * a1 * a2) / (
        (1.0 + a1) * (1.0 + a2) ** 2
    )
    rest = np.zeros_like(I)
    for k in range(2, n):
        rest = rest + 2.0 * a1 * (1.0 - l2[:, k]) / ((1.0 + l2[:, k]) * (1.0 + a1) ** 2)
        rest = rest + 2.0 * a2 * (1.0 - l2[:, k]) / ((1.0 + l2[:, k]) * (1.0 + a2) ** 2)
    L3 = k1 * (2.0 * a1 + 2.0 * a2 - 4.0 * a1 * a2) / (1.0 + a1) ** 3 + k1 * rest
    l1v, l2v = lam[:, 0], lam[:, 1]
    L4 = k1 * (2.0 * (l1v - l2v) ** 2 + 4.0 * l1v * l2v * (1.0 - l1v * l2v)) / (1.0 + a1) ** 3
    out["step1_k2_to_k1"] = (I, L1)
    out["step2_split"] = (L1, k1 * pair + k1 * rest)
    out["step3_common_denominator"] = (k1 * pair + k1 * rest, L3)
    out["step4_drop_tail"] = (L3, L4)
    out["step5_nonneg"] = (L4, zero)
    return out


def _eval_thm2_termII(domain, lam, h):
    II = thm2_termII_value(lam, h)
    return {"final": (II, np.zeros_like(II))}


# --------------------------------------------------------------------- engine


def _margins(terms):
    return {k: lhs - rhs for k, (lhs, rhs) in terms.items()}


def _normalised_worst(terms):
    worst = None
    for lhs, rhs in terms.values():
        v = (lhs - rhs) / (1.0 + np.abs(lhs) + np.abs(rhs))
        worst = v if worst is None else np.minimum(worst, v)
    return worst


def _sample_record(domain, lam, h, uses_h):
    rec = {"lam": [float(x) for x in lam]}
    if uses_h:
        rec["h"] = h.tolist()
    rec["k1"] = domain.k1
    rec["k2"] = domain.k2
    return rec


class _Accumulator:
    def __init__(self, report, domain, uses_h):
        self.r = report
        self.domain = domain
        self.uses_h = uses_h
        self.stored = []  # (margin, step, sample)

    def add(self, lam, h, terms, identity=None):
        r = self.r
        margins = _margins(terms)
        r.checked += lam.shape[0]
        for step, mg in margins.items():
            w = float(mg.min())
            r.steps[step] = min(r.steps.get(step, math.inf), w)
            bad = np.flatnonzero(mg < -TOL)
            r.step_violations[step] = r.step_violations.get(step, 0) + int(bad.size)
            r.violation_count += int(bad.size)
            if w < r.worst_margin:
                r.worst_margin = w
                p = int(np.argmin(mg))
                r.worst_sample = dict(_sample_record(self.domain, lam[p], h[p], self.uses_h), step=step)
            if bad.size:
                order = bad[np.argsort(mg[bad])][:MAX_STORED]
                for p in order:
                    self.stored.append((float(mg[p]), step, _sample_record(self.domain, lam[p], h[p], self.uses_h)))
                self.stored.sort(key=lambda t: t[0])
                del self.stored[MAX_STORED:]
        if identity is not None:
            r.identity_max_err = max(r.identity_max_err, float(identity.max()))

    def finish(self):
        self.r.violations = [dict(sample=s, step=step, margin=mg) for mg, step, s in self.stored]
        return self.r


def _climb(domain, evaluate, lam, h, rng, uses_h):
    """Coordinate-wise descent of the normalised worst margin from the given starts."""
    lam = lam.copy()
    h = h.copy()
    score = _normalised_worst(evaluate(domain, lam, h))
    N = lam.shape[0]
    n, m = domain.n, domain.m
    iu = np.triu_indices(n)
    coords = [("lam", i) for i in range(domain.rank)]
    if uses_h:
        coords += [("h", (q, a, b)) for q in range(m) for a, b in zip(*iu)]
    step = np.full(N, 0.1)
    for _ in range(CLIMB_ROUNDS):
        improved = np.zeros(N, dtype=bool)
        for kind, c in coords:
            for sign in (1.0, -1.0):
                L2 = lam.copy()
                H2 = h.copy()
                if kind == "lam":
                    L2[:, c] = L2[:, c] * (1.0 + sign * step) + sign * step * 1e-3
                    L2 = project(domain, L2)
                else:
                    q, a, b = c
                    d = sign * step * max(domain.h_scale, 1e-12)
                    H2[:, q, a, b] += d
                    if a != b:
                        H2[:, q, b, a] += d
                ok = contains(domain, L2)
                if not ok.any():
                    continue
                s2 = _normalised_worst(evaluate(domain, L2, H2))
                better = ok & (s2 < score)
                lam[better] = L2[better]
                h[better] = H2[better]
                score = np.where(better, s2, score)
                improved |= better
        step = np.where(improved, step, step * 0.5)
    return lam, h


def _run(name, domain, evaluate, uses_h, identity=None, asserted=True):
    rng = np.random.default_rng(domain.seed)
    report = ViolationReport(name=name, asserted=asserted)
    acc = _Accumulator(report, domain, uses_h)
    heavy = int(domain.sample_count * HEAVY_TAIL_FRACTION) if uses_h else 0
    main = domain.sample_count - heavy
    pool_lam, pool_h, pool_s = [], [], []

    def batch(count, scale):
        done = 0
        while done < count:
            c = min(BATCH, count - done)
            lam, h = sample(domain, rng, c, scale)
            terms = evaluate(domain, lam, h)
            acc.add(lam, h, terms, identity(lam) if identity else None)
            s = _normalised_worst(terms)
            pool_lam.append(lam)
            pool_h.append(h)
            pool_s.append(s)
            # keep only the current worst candidates
            all_s = np.concatenate(pool_s)
            keep = np.argsort(all_s, kind="stable")[:CLIMB_STARTS]
            pool_lam[:] = [np.concatenate(pool_lam)[keep]]
            pool_h[:] = [np.concatenate(pool_h)[keep]]
            pool_s[:] = [all_s[keep]]
            done += c

    batch(main, domain.h_scale)
    if heavy:
        batch(heavy, domain.h_scale * HEAVY_TAIL_SCALE)
    lam0, h0 = pool_lam[0], pool_h[0]
    lam1, h1 = _climb(domain, evaluate, lam0, h0, rng, uses_h)
    terms = evaluate(domain, lam1, h1)
    acc.add(lam1, h1, terms, identity(lam1) if identity else None)
    report.climbed_worst = float(min(float((lhs - rhs).min()) for lhs, rhs in terms.values()))
    return acc.finish()


def check_I_geq_deltaA2(domain: SampleDomain) -> ViolationReport:
    """``term_I >= (epsilon / 8) |A|^2`` on ``DetRatioBelow(4 - epsilon)``, with each completed-square step."""
    if domain.lambda_constraint != "DetRatioBelow":
        raise ConfigError("check_I_geq_deltaA2 needs DetRatioBelow", field="lambda_constraint")
    return _run("check_I_geq_deltaA2", domain, _eval_I_geq_deltaA2, True)


def check_II_nonneg(domain: SampleDomain) -> ViolationReport:
    """``term_II >= 0`` for pair products below one; also the pairwise identity of branch (b)."""
    if domain.lambda_constraint != "PairProductBelow":
        raise ConfigError("check_II_nonneg needs PairProductBelow", field="lambda_constraint")
    return _run(f"check_II_nonneg[{domain.branch}]", domain, _eval_II_nonneg, False, identity=_identity_err)


def check_II_lower_bound(domain: SampleDomain) -> ViolationReport:
    """``term_II >= c0 sum ln(1 + lam_i^2)`` with the branch constant, on ``DetRatioBelow(4 - epsilon)``."""
    if domain.lambda_constraint != "DetRatioBelow":
        raise ConfigError("check_II_lower_bound needs DetRatioBelow", field="lambda_constraint")
    if domain.k1 <= 0:
        raise ConfigError("the lower bound needs k1 > 0", field="k1")
    return _run(f"check_II_lower_bound[{domain.branch}]", domain, _eval_II_lower_bound, False)


def check_thm2_termI(domain: SampleDomain) -> ViolationReport:
    """Curvature term of the Theorem 2 test function is nonnegative, step by step."""
    if domain.lambda_constraint != "Thm2NullConfig":
        raise ConfigError("check_thm2_termI needs Thm2NullConfig", field="lambda_constraint")
    return _run(f"check_thm2_termI[{domain.branch}]", domain, _eval_thm2_termI, False)


def probe_thm2_termII(domain: SampleDomain) -> ViolationReport:
    """Report-only search for negative second fundamental form terms at ``lam_1 lam_2 = 1``."""
    if domain.lambda_constraint != "Thm2NullConfig":
        raise ConfigError("probe_thm2_termII needs Thm2NullConfig", field="lambda_constraint")
    domain = SampleDomain(**{**domain.__dict__, "null_exact": True})
    return _run("probe_thm2_termII", domain, _eval_thm2_termII, True, asserted=False)
