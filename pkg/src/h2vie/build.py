"""Two-stage construction of the nested low-rank matrix representation.

Stage I compresses, for every cluster, the horizontal concatenation of all
admissible blocks it owns into a single A @ B.T factor (cross approximation
followed by an SVD trim). Stage II turns those factors into one shared
family of orthonormal cluster bases: leaf bases come from an accuracy-
truncated eigendecomposition of the per-cluster Gram matrix, non-leaf bases
are expressed through transfer matrices after projecting the Gram onto the
children's bases, and each admissible block reduces to a small coupling
matrix between the two bases. Inadmissible leaf blocks stay dense.

The resulting H2Matrix is immutable in spirit: arithmetic lives in
h2vie.arith and mutates explicit copies only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import clustering as cl
from . import kernel as kn
from .linalg import (
    AcaRankExceeded,
    CompressionParams,
    aca_factorize,
    recompress_lowrank,
    trunc_eig_hermitian,
)


class ClusterCompressionError(RuntimeError):
    """Stage I failed for one cluster; .cluster_id names it."""

    def __init__(self, message, cluster_id):
        super().__init__(message)
        self.cluster_id = cluster_id


class MissingBasisError(KeyError):
    pass


@dataclass
class ClusterAB:
    """Grouped low-rank factor of all admissible blocks one cluster owns."""

    cluster: int
    a: np.ndarray  # (#t, k)
    b: np.ndarray  # (sum #s_j, k), rows grouped per partner
    col_clusters: list  # partner cluster ids, in b's row order
    col_offsets: np.ndarray  # len(col_clusters) + 1 prefix offsets into b's rows
    btb: np.ndarray  # cached B^T conj(B), (k, k)

    @property
    def rank(self):
        return self.a.shape[1]

    def b_slice(self, s):
        j = self.col_clusters.index(s)
        return self.b[self.col_offsets[j]:self.col_offsets[j + 1]]


class NestedBasis:
    """One shared family of nested cluster bases (leaf V's plus transfers)."""

    def __init__(self, tree):
        self.tree = tree
        self.leaf_v = {}
        self.transfers = {}  # cid -> (T_child_lo, T_child_hi)
        self.ranks = {}
        self._mat = {}  # materialization cache
        self._overlap = {}  # V^T V cache (needed by formatted products)

    def rank(self, cid):
        return self.ranks.get(cid, 0)

    def set_leaf(self, cid, v):
        self.leaf_v[cid] = v
        self.ranks[cid] = v.shape[1]

    def set_transfer(self, cid, t_lo, t_hi):
        self.transfers[cid] = (t_lo, t_hi)
        self.ranks[cid] = t_lo.shape[1]

    def apply_vh(self, cid, x):
        """V_c^H @ x without materializing non-leaf bases."""
        c = self.tree.cluster(cid)
        if c.is_leaf:
            if cid not in self.leaf_v:
                raise MissingBasisError(f"no basis for leaf cluster {cid}")
            return self.leaf_v[cid].conj().T @ x
        lo, hi = c.children()
        if cid not in self.transfers:
            raise MissingBasisError(f"no transfer for cluster {cid}")
        t_lo, t_hi = self.transfers[cid]
        n_lo = self.tree.cluster(lo).size
        return t_lo.conj().T @ self.apply_vh(lo, x[:n_lo]) + t_hi.conj().T @ self.apply_vh(hi, x[n_lo:])

    def materialize(self, cid):
        """Explicit (#c, k_c) basis matrix, cached."""
        got = self._mat.get(cid)
        if got is not None:
            return got
        c = self.tree.cluster(cid)
        if c.is_leaf:
            v = self.leaf_v[cid]
        else:
            lo, hi = c.children()
            t_lo, t_hi = self.transfers[cid]
            v = np.vstack(
                [self.materialize(lo) @ t_lo, self.materialize(hi) @ t_hi]
            )
        self._mat[cid] = v
        return v

    def overlap(self, cid):
        """V_c^T V_c (not conjugated), cached; identity only for real bases."""
        got = self._overlap.get(cid)
        if got is not None:
            return got
        c = self.tree.cluster(cid)
        if c.is_leaf:
            v = self.leaf_v[cid]
            m = v.T @ v
        else:
            lo, hi = c.children()
            t_lo, t_hi = self.transfers[cid]
            m = t_lo.T @ self.overlap(lo) @ t_lo + t_hi.T @ self.overlap(hi) @ t_hi
        self._overlap[cid] = m
        return m


@dataclass
class H2Matrix:
    """Nested-basis representation: couplings on admissible leaves, dense rest."""

    tree: cl.ClusterTree
    btree: cl.BlockClusterTree
    basis: NestedBasis
    coupling: dict  # (t, s) -> (k_t, k_s)
    dense: dict  # (t, s) -> (#t, #s)
    params: CompressionParams

    @property
    def n(self):
        return self.tree.n_points

    @property
    def shape(self):
        return (self.n, self.n)

    def copy(self):
        """Structure-sharing copy with private leaf payloads (for inversion)."""
        return H2Matrix(
            self.tree,
            self.btree,
            self.basis,
            {k: v.copy() for k, v in self.coupling.items()},
            {k: v.copy() for k, v in self.dense.items()},
            self.params,
        )

    def rank_per_level(self):
        """level -> max basis rank over clusters at that level."""
        out = {lvl: 0 for lvl in range(self.tree.depth)}
        for cid, k in self.basis.ranks.items():
            lvl = self.tree.cluster(cid).level
            out[lvl] = max(out[lvl], k)
        return out

    def max_rank(self):
        return max(self.basis.ranks.values(), default=0)

    def storage_bytes(self):
        """Bytes held by bases, transfers, couplings and dense leaves."""
        total = self.tree.perm.nbytes
        for v in self.basis.leaf_v.values():
            total += v.nbytes
        for t_lo, t_hi in self.basis.transfers.values():
            total += t_lo.nbytes + t_hi.nbytes
        for s in self.coupling.values():
            total += s.nbytes
        for d in self.dense.values():
            total += d.nbytes
        return total


def build_all_cluster_ab(tree, btree, oracle, params):
    """Stage I: one grouped A @ B.T factor per cluster owning admissible blocks."""
    out = {}
    for c in tree.clusters:
        partners = btree.partners.get(c.id, [])
        rows = tree.indices(c.id)
        if not partners:
            out[c.id] = ClusterAB(
                c.id,
                np.zeros((c.size, 0), dtype=np.complex128),
                np.zeros((0, 0), dtype=np.complex128),
                [],
                np.zeros(1, dtype=np.int64),
                np.zeros((0, 0), dtype=np.complex128),
            )
            continue
        col_blocks = [tree.indices(s) for s in partners]
        offsets = np.zeros(len(partners) + 1, dtype=np.int64)
        np.cumsum([b.size for b in col_blocks], out=offsets[1:])
        cols = np.concatenate(col_blocks)

        def block(ri, ci, rows=rows, cols=cols):
            return oracle(rows[ri], cols[ci])

        try:
            f = aca_factorize(block, (rows.size, cols.size), params.eps_aca,
                              min(params.max_rank, rows.size, cols.size))
        except AcaRankExceeded as exc:
            raise ClusterCompressionError(
                f"cluster {c.id}: {exc}", c.id
            ) from exc
        f = recompress_lowrank(f, params.eps_acc)
        out[c.id] = ClusterAB(
            c.id, f.a, f.b, list(partners), offsets, f.b.T @ f.b.conj()
        )
    return out


def _gram_terms(cid, abs_map, tree):
    """(A-rows, BtBbar) pairs feeding cluster cid's Gram matrix."""
    c = tree.cluster(cid)
    terms = []
    own = abs_map[cid]
    if own.rank > 0:
        terms.append((own.a, own.btb))
    for j in tree.ancestors(cid):
        abj = abs_map[j]
        if abj.rank > 0:
            cj = tree.cluster(j)
            terms.append((abj.a[c.start - cj.start:c.stop - cj.start], abj.btb))
    return terms


def build_leaf_basis(cid, abs_map, tree, params):
    """Orthonormal basis of a leaf cluster from its own and ancestral factors."""
    c = tree.cluster(cid)
    terms = _gram_terms(cid, abs_map, tree)
    if not terms:
        return np.zeros((c.size, 0), dtype=np.complex128), 0
    g = np.zeros((c.size, c.size), dtype=np.complex128)
    for a, m in terms:
        g += a @ m @ a.conj().T
    g = 0.5 * (g + g.conj().T)  # kill accumulated round-off skew
    p, k = trunc_eig_hermitian(g, params.eps_acc)
    return p, k


def build_transfer(cid, basis, abs_map, tree, params):
    """Transfer matrices of a non-leaf cluster via the children-projected Gram."""
    c = tree.cluster(cid)
    lo, hi = c.children()
    k_lo = basis.rank(lo)
    k_hi = basis.rank(hi)
    terms = _gram_terms(cid, abs_map, tree)
    if not terms or k_lo + k_hi == 0:
        empty_lo = np.zeros((k_lo, 0), dtype=np.complex128)
        empty_hi = np.zeros((k_hi, 0), dtype=np.complex128)
        return empty_lo, empty_hi, 0
    n_lo = tree.cluster(lo).size
    g = np.zeros((k_lo + k_hi, k_lo + k_hi), dtype=np.complex128)
    for a, m in terms:
        a_small = np.vstack(
            [basis.apply_vh(lo, a[:n_lo]), basis.apply_vh(hi, a[n_lo:])]
        )
        g += a_small @ m @ a_small.conj().T
    g = 0.5 * (g + g.conj().T)
    p, k = trunc_eig_hermitian(g, params.eps_acc)
    return p[:k_lo], p[k_lo:], k


def build_bases(tree, abs_map, params):
    """Stage II bottom-up sweep: leaf bases first, then transfers level by level."""
    basis = NestedBasis(tree)
    for level in range(tree.depth - 1, -1, -1):
        for cid in tree.levels[level]:
            if tree.cluster(cid).is_leaf:
                v, _ = build_leaf_basis(cid, abs_map, tree, params)
                basis.set_leaf(cid, v)
            else:
                t_lo, t_hi, _ = build_transfer(cid, basis, abs_map, tree, params)
                basis.set_transfer(cid, t_lo, t_hi)
    return basis


def build_coupling(btree, abs_map, basis, tree):
    """Coupling matrix of every admissible leaf from the Stage-I factors."""
    coupling = {}
    proj_a = {}  # cluster -> V_t^H A_t, shared across its partners
    for t, s in btree.admissible:
        ab = abs_map[t]
        if t not in proj_a:
            proj_a[t] = basis.apply_vh(t, ab.a)
        if basis.rank(t) == 0 or basis.rank(s) == 0:
            coupling[(t, s)] = np.zeros(
                (basis.rank(t), basis.rank(s)), dtype=np.complex128
            )
            continue
        q = basis.apply_vh(s, ab.b_slice(s))
        coupling[(t, s)] = proj_a[t] @ q.T
    return coupling


def build_h2(geom, kparams, cparams=None, n_min=32, eta=1.0):
    """Assemble the full nested representation of the system matrix."""
    cparams = cparams or CompressionParams()
    oracle = kn.entry_oracle(geom, kparams)
    tree = cl.ClusterTree(geom.centers, n_min)
    btree = cl.build_block_tree(tree, eta)
    abs_map = build_all_cluster_ab(tree, btree, oracle, cparams)
    basis = build_bases(tree, abs_map, cparams)
    coupling = build_coupling(btree, abs_map, basis, tree)
    dense = {
        (t, s): oracle(tree.indices(t), tree.indices(s))
        for t, s in btree.inadmissible
    }
    return H2Matrix(tree, btree, basis, coupling, dense, cparams)


def materialize(h2):
    """Dense reconstruction in the original voxel ordering (verification only)."""
    n = h2.n
    out = np.zeros((n, n), dtype=np.complex128)
    tree = h2.tree
    for (t, s), d in h2.dense.items():
        out[np.ix_(tree.indices(t), tree.indices(s))] = d
    for (t, s), smat in h2.coupling.items():
        if smat.size == 0:
            continue
        block = h2.basis.materialize(t) @ smat @ h2.basis.materialize(s).T
        out[np.ix_(tree.indices(t), tree.indices(s))] = block
    return out


def rep_error(h2, dense):
    """Relative Frobenius distance between the representation and a dense oracle."""
    dense = np.asarray(dense)
    if dense.shape != h2.shape:
        raise ValueError("shape mismatch")
    return float(
        np.linalg.norm(dense - materialize(h2)) / np.linalg.norm(dense)
    )
