"""Per-point kernels in orthonormal frames.

Every kernel takes the differential ``M`` (``(P, m, n)``, target-orthonormal
rows by domain-orthonormal columns) and, where needed, the covariant Hessian
``T`` of the map (``(P, m, n, n)``) in the same frames.  Working in
orthonormal frames keeps the chart singularities of the sphere out of the
kernels entirely.

Two implementations of each kernel exist: a loop version compiled by numba
and a batched numpy version.  ``geometry`` / ``graph_trace`` dispatch on
:data:`mcflab._backend.USE_NUMBA`; the ``*_numpy`` and ``*_loop`` names are
importable directly for benchmarking and cross-checking.
"""
import numpy as np

from ._backend import USE_NUMBA, njit

__all__ = [
    "RANK_TOL",
    "geometry",
    "geometry_numpy",
    "geometry_loop",
    "graph_trace",
    "graph_trace_numpy",
    "graph_trace_loop",
    "det_ratio",
    "top_singular_value",
]

RANK_TOL = 1e-12
_SIGN_TOL = 1e-12


# --------------------------------------------------------------------- numpy


def _sign_fix_numpy(U, S, Vh):
    P, m, _ = U.shape
    n = Vh.shape[1]
    k = S.shape[1]
    V = np.swapaxes(Vh, 1, 2).copy()
    U = U.copy()
    # first component above tolerance of each domain vector made positive
    big = np.abs(V) > _SIGN_TOL
    first = np.argmax(big, axis=1)  # (P, n)
    lead = np.take_along_axis(V, first[:, None, :], axis=1)[:, 0, :]
    flip = np.where(lead < 0.0, -1.0, 1.0)
    V *= flip[:, None, :]
    U[:, :, :k] *= flip[:, None, :k]
    if m > k:
        bigu = np.abs(U[:, :, k:]) > _SIGN_TOL
        firstu = np.argmax(bigu, axis=1)
        leadu = np.take_along_axis(U[:, :, k:], firstu[:, None, :], axis=1)[:, 0, :]
        U[:, :, k:] *= np.where(leadu < 0.0, -1.0, 1.0)[:, None, :]
    return U, V


def geometry_numpy(M, T, k_dom, k_tar):
    P, m, n = M.shape
    U, S, Vh = np.linalg.svd(M, full_matrices=True)
    U, V = _sign_fix_numpy(U, S, Vh)
    k = S.shape[1]
    lam = np.zeros((P, n))
    lam[:, :k] = np.where(S < RANK_TOL, 0.0, S)
    lam2 = lam * lam
    det = np.prod(1.0 + lam2, axis=1)
    star = 1.0 / np.sqrt(det)
    B = (1.0 - lam2) / (1.0 + lam2)
    D = -2.0 * lam / (1.0 + lam2)
    if n >= 2:
        iu, ju = np.triu_indices(n, 1)
        s2 = (B[:, iu] + B[:, ju]).min(axis=1)
        pair = (lam[:, iu] * lam[:, ju]).max(axis=1)
    else:
        s2 = np.full(P, np.inf)
        pair = np.zeros(P)

    lam_t = np.zeros((P, m))
    kk = min(n, m)
    lam_t[:, :kk] = lam[:, :kk]
    c_dom = 1.0 / np.sqrt(1.0 + lam2)
    c_tar = 1.0 / np.sqrt(1.0 + lam_t * lam_t)
    sff = np.einsum("pcq,pcde,pda,peb->pqab", U, T, V, V, optimize=True)
    sff *= c_tar[:, :, None, None] * c_dom[:, None, :, None] * c_dom[:, None, None, :]
    sff = 0.5 * (sff + np.swapaxes(sff, 2, 3))
    A2 = np.einsum("pqab,pqab->p", sff, sff)
    H = np.einsum("pqaa->pq", sff)

    diag_terms = np.zeros(P)
    cross = np.zeros(P)
    for i in range(kk):
        diag_terms += lam2[:, i] * np.sum(sff[:, i, i, :] ** 2, axis=1)
        for j in range(i + 1, kk):
            cross += lam[:, i] * lam[:, j] * np.sum(sff[:, j, i, :] * sff[:, i, j, :], axis=1)
    term_I = A2 + diag_terms + 2.0 * cross

    denom = (1.0 + lam2)[:, :, None] * (1.0 + lam2)[:, None, :]
    num = lam2[:, :, None] * k_dom - lam2[:, :, None] * lam2[:, None, :] * k_tar
    off = ~np.eye(n, dtype=bool)
    term_II = np.sum(np.where(off[None], num / denom, 0.0), axis=(1, 2))

    return {
        "lam": lam,
        "det_ratio": det,
        "star_omega": star,
        "B": B,
        "D": D,
        "s2_min": s2,
        "max_pair": pair,
        "sff": sff,
        "A2": A2,
        "H": H,
        "term_I": term_I,
        "term_II": term_II,
        "V": V,
        "U": U,
    }


def graph_trace_numpy(M, T):
    """``sum_ab (I + M^T M)^{-1}_ab T[:, a, b]`` per point."""
    n = M.shape[2]
    G = np.eye(n)[None] + np.einsum("pca,pcb->pab", M, M)
    Ginv = np.linalg.inv(G)
    return np.einsum("pab,pcab->pc", Ginv, T)


# ---------------------------------------------------------------------- loop


@njit
def _geometry_point(M, T, k_dom, k_tar, lam, B, D, sff, H, V, U):
    m, n = M.shape
    k = min(m, n)
    u, s, vh = np.linalg.svd(M)
    for a in range(n):
        for b in range(n):
            V[a, b] = vh[b, a]
    for a in range(m):
        for b in range(m):
            U[a, b] = u[a, b]
    for i in range(n):
        lead = 0.0
        for d in range(n):
            if abs(V[d, i]) > _SIGN_TOL:
                lead = V[d, i]
                break
        if lead < 0.0:
            for d in range(n):
                V[d, i] = -V[d, i]
            if i < k:
                for c in range(m):
                    U[c, i] = -U[c, i]
    for q in range(k, m):
        lead = 0.0
        for c in range(m):
            if abs(U[c, q]) > _SIGN_TOL:
                lead = U[c, q]
                break
        if lead < 0.0:
            for c in range(m):
                U[c, q] = -U[c, q]
    for i in range(n):
        lam[i] = 0.0
    for i in range(k):
        lam[i] = s[i] if s[i] >= RANK_TOL else 0.0

    det = 1.0
    for i in range(n):
        l2 = lam[i] * lam[i]
        det *= 1.0 + l2
        B[i] = (1.0 - l2) / (1.0 + l2)
        D[i] = -2.0 * lam[i] / (1.0 + l2)
    s2 = np.inf
    pair = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            if B[i] + B[j] < s2:
                s2 = B[i] + B[j]
            if lam[i] * lam[j] > pair:
                pair = lam[i] * lam[j]

    # T contracted with U on the target index, then V on both domain indices
    tu = np.zeros((m, n, n))
    for q in range(m):
        for d in range(n):
            for e in range(n):
                acc = 0.0
                for c in range(m):
                    acc += U[c, q] * T[c, d, e]
                tu[q, d, e] = acc
    A2 = 0.0
    for q in range(m):
        lq = lam[q] if q < k else 0.0
        cq = 1.0 / np.sqrt(1.0 + lq * lq)
        for a in range(n):
            for b in range(n):
                acc = 0.0
                for d in range(n):
                    va = V[d, a]
                    for e in range(n):
                        acc += tu[q, d, e] * va * V[e, b]
                ca = 1.0 / np.sqrt(1.0 + lam[a] * lam[a])
                cb = 1.0 / np.sqrt(1.0 + lam[b] * lam[b])
                sff[q, a, b] = acc * cq * ca * cb
        for a in range(n):
            for b in range(a + 1, n):
                sym = 0.5 * (sff[q, a, b] + sff[q, b, a])
                sff[q, a, b] = sym
                sff[q, b, a] = sym
        hq = 0.0
        for a in range(n):
            hq += sff[q, a, a]
            for b in range(n):
                A2 += sff[q, a, b] * sff[q, a, b]
        H[q] = hq

    diag_terms = 0.0
    cross = 0.0
    for i in range(k):
        for kk in range(n):
            diag_terms += lam[i] * lam[i] * sff[i, i, kk] * sff[i, i, kk]
        for j in range(i + 1, k):
            for kk in range(n):
                cross += lam[i] * lam[j] * sff[j, i, kk] * sff[i, j, kk]
    term_I = A2 + diag_terms + 2.0 * cross

    term_II = 0.0
    for i in range(n):
        li2 = lam[i] * lam[i]
        for kk in range(n):
            if kk == i:
                continue
            lk2 = lam[kk] * lam[kk]
            term_II += (li2 * k_dom - li2 * lk2 * k_tar) / ((1.0 + li2) * (1.0 + lk2))
    return det, s2, pair, A2, term_I, term_II


@njit
def _geometry_loop(M, T, k_dom, k_tar, lam, det, s2, pair, B, D, sff, A2, H, tI, tII, V, U):
    for p in range(M.shape[0]):
        Mp = np.ascontiguousarray(M[p])
        Tp = np.ascontiguousarray(T[p])
        d, s, pr, a2, ti, tii = _geometry_point(
            Mp, Tp, k_dom, k_tar, lam[p], B[p], D[p], sff[p], H[p], V[p], U[p]
        )
        det[p] = d
        s2[p] = s
        pair[p] = pr
        A2[p] = a2
        tI[p] = ti
        tII[p] = tii


def geometry_loop(M, T, k_dom, k_tar):
    M = np.ascontiguousarray(M, dtype=np.float64)
    T = np.ascontiguousarray(T, dtype=np.float64)
    P, m, n = M.shape
    out = {
        "lam": np.zeros((P, n)),
        "det_ratio": np.zeros(P),
        "s2_min": np.zeros(P),
        "max_pair": np.zeros(P),
        "B": np.zeros((P, n)),
        "D": np.zeros((P, n)),
        "sff": np.zeros((P, m, n, n)),
        "A2": np.zeros(P),
        "H": np.zeros((P, m)),
        "term_I": np.zeros(P),
        "term_II": np.zeros(P),
        "V": np.zeros((P, n, n)),
        "U": np.zeros((P, m, m)),
    }
    _geometry_loop(
        M, T, float(k_dom), float(k_tar), out["lam"], out["det_ratio"], out["s2_min"], out["max_pair"],
        out["B"], out["D"], out["sff"], out["A2"], out["H"], out["term_I"], out["term_II"],
        out["V"], out["U"],
    )
    out["star_omega"] = 1.0 / np.sqrt(out["det_ratio"])
    return out


@njit
def _graph_trace_loop(M, T, out):
    P, m, n = M.shape
    c = T.shape[1]
    G = np.empty((n, n))
    for p in range(P):
        for a in range(n):
            for b in range(n):
                acc = 1.0 if a == b else 0.0
                for r in range(m):
                    acc += M[p, r, a] * M[p, r, b]
                G[a, b] = acc
        if n == 1:
            Gi = np.empty((1, 1))
            Gi[0, 0] = 1.0 / G[0, 0]
        elif n == 2:
            dt = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
            Gi = np.empty((2, 2))
            Gi[0, 0] = G[1, 1] / dt
            Gi[1, 1] = G[0, 0] / dt
            Gi[0, 1] = -G[0, 1] / dt
            Gi[1, 0] = -G[1, 0] / dt
        else:
            Gi = np.linalg.inv(G)
        for r in range(c):
            acc = 0.0
            for a in range(n):
                for b in range(n):
                    acc += Gi[a, b] * T[p, r, a, b]
            out[p, r] = acc


def graph_trace_loop(M, T):
    M = np.ascontiguousarray(M, dtype=np.float64)
    T = np.ascontiguousarray(T, dtype=np.float64)
    out = np.zeros((M.shape[0], T.shape[1]))
    _graph_trace_loop(M, T, out)
    return out


# ----------------------------------------------------------------- dispatch

if USE_NUMBA:
    geometry = geometry_loop
    graph_trace = graph_trace_loop
else:
    geometry = geometry_numpy
    graph_trace = graph_trace_numpy


def det_ratio(M):
    """``det(I + M^T M)`` per point, i.e. ``prod(1 + lambda_i^2)``."""
    P, m, n = M.shape
    G = np.einsum("pca,pcb->pab", M, M)
    if n == 1:
        return 1.0 + G[:, 0, 0]
    if n == 2:
        return (1.0 + G[:, 0, 0]) * (1.0 + G[:, 1, 1]) - G[:, 0, 1] * G[:, 1, 0]
    return np.linalg.det(np.eye(n)[None] + G)


def top_singular_value(M):
    """Largest singular value per point."""
    P, m, n = M.shape
    G = np.einsum("pca,pcb->pab", M, M)
    if n == 1:
        return np.sqrt(G[:, 0, 0])
    if n == 2:
        tr = G[:, 0, 0] + G[:, 1, 1]
        dif = G[:, 0, 0] - G[:, 1, 1]
        top = 0.5 * (tr + np.sqrt(dif * dif + 4.0 * G[:, 0, 1] * G[:, 1, 0]))
        return np.sqrt(np.maximum(top, 0.0))
    return np.sqrt(np.maximum(np.linalg.eigvalsh(G)[:, -1], 0.0))
