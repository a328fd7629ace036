"""Compiled restaurant arena shared by the HPYLM and HPYLM+c samplers.

All restaurants of a model live in flat record arrays (one cache line per
entry; sampling is dominated by memory latency, not arithmetic):

* ``node[i]``  one restaurant (a context): customers, tables, hyperparameter
               group.
* ``ent[i]``   one (restaurant, dish) pair: node, customers N, tables m,
               head/tail of its histogram bin list, and the slice
               ``fac[fs:fs+fl]`` of entries whose probabilities multiply
               into its base distribution (none for a root, which uses the
               uniform base of its group; one for an ordinary back-off
               chain; two or more for a product base).  ``par`` caches the
               single factor of a chain entry.
* ``bins[i]``  one histogram cell (occupancy t, number of tables c, next).
               Free cells are chained from ``meta[0]``; ``meta[1]`` counts
               them.

Entries are created up front for every (context, dish) pair the training
data can reach and are never deleted, so an empty restaurant is simply an
entry with zero counts.  Bins are appended at the tail and unlinked in place
which reproduces Python dict insertion order; together with identical
arithmetic this makes the kernels agree draw for draw with
``crp.Restaurant``.

Uniform variates come from ``us`` when it is non-empty (tests) and from
numba's internal generator otherwise; the latter is seeded from the
caller's numpy Generator before each kernel call.
"""
from typing import NamedTuple

import numpy as np
from numba import njit

MAX_DEPTH = 64
STATUS_DONE = 0
STATUS_GROW = 1

# node record
N_CUST, N_TAB, N_GRP = 0, 1, 2
# entry record
E_NODE, E_N, E_M, E_HEAD, E_TAIL, E_FS, E_FL, E_PAR = range(8)
# bin record
B_T, B_C, B_NEXT = 0, 1, 2


class Arena(NamedTuple):
    node: np.ndarray
    ent: np.ndarray
    fac: np.ndarray
    bins: np.ndarray
    meta: np.ndarray
    grp_a: np.ndarray
    grp_b: np.ndarray
    grp_base: np.ndarray

    # column views for the Python side
    node_n = property(lambda s: s.node[:, N_CUST])
    node_m = property(lambda s: s.node[:, N_TAB])
    node_g = property(lambda s: s.node[:, N_GRP])
    ent_node = property(lambda s: s.ent[:, E_NODE])
    ent_N = property(lambda s: s.ent[:, E_N])
    ent_m = property(lambda s: s.ent[:, E_M])
    ent_fs = property(lambda s: s.ent[:, E_FS])
    ent_fl = property(lambda s: s.ent[:, E_FL])


def new_arena(node_g, ent_node, ent_fs, ent_fl, fac, grp_base, n_bins=1024, a=0.5, b=1.0):
    nn, ne, ng = len(node_g), len(ent_node), len(grp_base)
    node = np.zeros((nn, 4), np.int64)
    node[:, N_GRP] = node_g
    ent = np.zeros((ne, 8), np.int64)
    ent[:, E_NODE] = ent_node
    ent[:, E_HEAD] = -1
    ent[:, E_TAIL] = -1
    ent[:, E_FS] = ent_fs
    ent[:, E_FL] = ent_fl
    fac = np.asarray(fac, np.int64)
    chain = np.asarray(ent_fl) == 1
    ent[:, E_PAR] = -1
    ent[chain, E_PAR] = fac[np.asarray(ent_fs)[chain]]
    A = Arena(node=node, ent=ent, fac=fac,
              bins=np.zeros((0, 4), np.int64), meta=np.array([-1, 0], np.int64),
              grp_a=np.full(ng, a, np.float64), grp_b=np.full(ng, b, np.float64),
              grp_base=np.asarray(grp_base, np.float64))
    return grow_bins(A, n_bins)


def grow_bins(A, extra):
    """Return an arena with ``extra`` more free bins (the bin array is copied)."""
    old = len(A.bins)
    new = old + int(extra)
    bins = np.zeros((new, 4), np.int64)
    bins[:old] = A.bins
    # new cells go in front of the existing free chain
    bins[old:new - 1, B_NEXT] = np.arange(old + 1, new)
    bins[new - 1, B_NEXT] = A.meta[0]
    meta = A.meta.copy()
    meta[0] = old
    meta[1] += extra
    return A._replace(bins=bins, meta=meta)


@njit(cache=True)
def seed_numba(seed):
    np.random.seed(seed)


@njit(cache=True, inline="always")
def _uniform(us, pos):
    if us.shape[0] > 0:
        v = us[pos[0]]
        pos[0] += 1
        return v
    return np.random.random()


@njit(cache=True, inline="always")
def _alloc(A, t, c):
    bins = A.bins
    k = A.meta[0]
    A.meta[0] = bins[k, B_NEXT]
    A.meta[1] -= 1
    bins[k, B_T] = t
    bins[k, B_C] = c
    bins[k, B_NEXT] = -1
    return k


@njit(cache=True, inline="always")
def _append(A, e, k):
    ent = A.ent
    if ent[e, E_TAIL] >= 0:
        A.bins[ent[e, E_TAIL], B_NEXT] = k
    else:
        ent[e, E_HEAD] = k
    ent[e, E_TAIL] = k


@njit(cache=True, inline="always")
def _hist_add(A, e, t):
    """One more table of occupancy t for entry e (appends a bin if needed)."""
    bins = A.bins
    k = A.ent[e, E_HEAD]
    while k >= 0:
        if bins[k, B_T] == t:
            bins[k, B_C] += 1
            return
        k = bins[k, B_NEXT]
    _append(A, e, _alloc(A, t, 1))


@njit(cache=True, inline="always")
def _hist_sub(A, e, t):
    """One fewer table of occupancy t (frees the bin when it empties)."""
    bins = A.bins
    ent = A.ent
    prev = -1
    k = ent[e, E_HEAD]
    while bins[k, B_T] != t:
        prev = k
        k = bins[k, B_NEXT]
    bins[k, B_C] -= 1
    if bins[k, B_C] > 0:
        return
    nxt = bins[k, B_NEXT]
    if prev >= 0:
        bins[prev, B_NEXT] = nxt
    else:
        ent[e, E_HEAD] = nxt
    if ent[e, E_TAIL] == k:
        ent[e, E_TAIL] = prev
    bins[k, B_NEXT] = A.meta[0]
    A.meta[0] = k
    A.meta[1] += 1


@njit(cache=True, inline="always")
def predictive(A, e, base):
    nd = A.ent[e, E_NODE]
    n = A.node[nd, N_CUST]
    if n == 0:
        return base
    g = A.node[nd, N_GRP]
    a = A.grp_a[g]
    b = A.grp_b[g]
    return (A.ent[e, E_N] - a * A.ent[e, E_M] + (a * A.node[nd, N_TAB] + b) * base) / (n + b)


@njit(cache=True, inline="always")
def seat(A, e, base, us, pos, random_init):
    """Seat one customer at entry e.  Returns (opened, occupancy joined)."""
    ent = A.ent
    node = A.node
    bins = A.bins
    nd = ent[e, E_NODE]
    Nw = ent[e, E_N]
    if Nw == 0:
        _hist_add(A, e, 1)
        ent[e, E_N] = 1
        ent[e, E_M] = 1
        node[nd, N_CUST] += 1
        node[nd, N_TAB] += 1
        return True, 0
    g = node[nd, N_GRP]
    a = A.grp_a[g]
    b = A.grp_b[g]
    if random_init:
        # uniform over the existing tables of the dish plus one new table
        join = float(ent[e, E_M])
        new = 1.0
    else:
        join = Nw - a * ent[e, E_M]
        new = (a * node[nd, N_TAB] + b) * base
    r = _uniform(us, pos) * (join + new)
    ent[e, E_N] = Nw + 1
    node[nd, N_CUST] += 1
    if r < join:
        k = ent[e, E_HEAD]
        last = k
        while k >= 0:
            last = k
            if random_init:
                r -= bins[k, B_C]
            else:
                r -= (bins[k, B_T] - a) * bins[k, B_C]
            if r < 0:
                break
            k = bins[k, B_NEXT]
        t = bins[last, B_T]
        _hist_sub(A, e, t)
        _hist_add(A, e, t + 1)
        return False, t
    _hist_add(A, e, 1)
    ent[e, E_M] += 1
    node[nd, N_TAB] += 1
    return True, 0


@njit(cache=True, inline="always")
def unseat(A, e, us, pos):
    """Remove one customer from entry e.  Returns True if its table closed."""
    ent = A.ent
    bins = A.bins
    nd = ent[e, E_NODE]
    Nw = ent[e, E_N]
    r = _uniform(us, pos) * Nw
    k = ent[e, E_HEAD]
    last = k
    while k >= 0:
        last = k
        r -= bins[k, B_T] * bins[k, B_C]
        if r < 0:
            break
        k = bins[k, B_NEXT]
    t = bins[last, B_T]
    _hist_sub(A, e, t)
    ent[e, E_N] = Nw - 1
    A.node[nd, N_CUST] -= 1
    if t > 1:
        _hist_add(A, e, t - 1)
        return False
    ent[e, E_M] -= 1
    A.node[nd, N_TAB] -= 1
    return True


@njit(cache=True, inline="always")
def _chain(A, e, chain):
    """Fill ``chain`` with e and its back-off ancestors; returns the length."""
    k = 0
    while True:
        chain[k] = e
        k += 1
        p = A.ent[e, E_PAR]
        if p < 0:
            return k
        e = p


@njit(cache=True, inline="always")
def chain_prob(A, e, chain):
    """Predictive probability of chain entry e (``chain`` is scratch space)."""
    k = _chain(A, e, chain)
    p = A.grp_base[A.node[A.ent[chain[k - 1], E_NODE], N_GRP]]
    for j in range(k - 1, -1, -1):
        p = predictive(A, chain[j], p)
    return p


@njit(cache=True, inline="always")
def base_prob(A, e, chain):
    fl = A.ent[e, E_FL]
    if fl == 0:
        return A.grp_base[A.node[A.ent[e, E_NODE], N_GRP]]
    fs = A.ent[e, E_FS]
    p = 1.0
    for j in range(fl):
        p *= chain_prob(A, A.fac[fs + j], chain)
    return p


@njit(cache=True)
def entry_prob(A, e, chain):
    return predictive(A, e, base_prob(A, e, chain))


@njit(cache=True, inline="always")
def _log(rec, nrec, e, t):
    if nrec[0] < rec.shape[0]:
        rec[nrec[0], 0] = e
        rec[nrec[0], 1] = t
    nrec[0] += 1


@njit(cache=True, inline="always")
def _insert_chain(A, e, us, pos, random_init, rec, nrec, chain, probs):
    k = _chain(A, e, chain)
    probs[k] = A.grp_base[A.node[A.ent[chain[k - 1], E_NODE], N_GRP]]
    # the bases of the higher levels do not change while the lower ones are
    # seated, so one top-down pass is enough
    for j in range(k - 1, 0, -1):
        probs[j] = predictive(A, chain[j], probs[j + 1])
    for j in range(k):
        opened, t = seat(A, chain[j], probs[j + 1], us, pos, random_init)
        _log(rec, nrec, chain[j], t)
        if not opened:
            break


@njit(cache=True)
def _insert(A, e, us, pos, random_init, rec, nrec, chain, probs):
    fl = A.ent[e, E_FL]
    if fl < 2:
        _insert_chain(A, e, us, pos, random_init, rec, nrec, chain, probs)
        return
    base = base_prob(A, e, chain)
    opened, t = seat(A, e, base, us, pos, random_init)
    _log(rec, nrec, e, t)
    if opened:
        fs = A.ent[e, E_FS]
        for j in range(fl):
            _insert_chain(A, A.fac[fs + j], us, pos, random_init, rec, nrec, chain, probs)


@njit(cache=True)
def insert(A, e, us, pos, random_init, rec, nrec):
    """Add one data customer at entry e, spawning base customers as needed.

    Every seating is logged to ``rec`` as (entry, occupancy joined; 0 for a
    new table) so ``undo`` can invert the call exactly.
    """
    chain = np.empty(MAX_DEPTH, np.int64)
    probs = np.empty(MAX_DEPTH + 1, np.float64)
    _insert(A, e, us, pos, random_init, rec, nrec, chain, probs)


@njit(cache=True, inline="always")
def _remove_chain(A, e, us, pos):
    while True:
        if not unseat(A, e, us, pos):
            return
        e = A.ent[e, E_PAR]
        if e < 0:
            return


@njit(cache=True)
def remove(A, e, us, pos):
    fl = A.ent[e, E_FL]
    if fl < 2:
        _remove_chain(A, e, us, pos)
        return
    if unseat(A, e, us, pos):
        fs = A.ent[e, E_FS]
        for j in range(fl):
            _remove_chain(A, A.fac[fs + j], us, pos)


@njit(cache=True)
def undo(A, rec, nrec):
    """Invert the seatings logged by ``insert`` (latest first)."""
    for i in range(nrec - 1, -1, -1):
        e = rec[i, 0]
        t = rec[i, 1]
        nd = A.ent[e, E_NODE]
        A.ent[e, E_N] -= 1
        A.node[nd, N_CUST] -= 1
        if t == 0:
            _hist_sub(A, e, 1)
            A.ent[e, E_M] -= 1
            A.node[nd, N_TAB] -= 1
        else:
            _hist_sub(A, e, t + 1)
            _hist_add(A, e, t)


@njit(cache=True)
def run_events(A, data, order, start, mode, random_init, us, pos, margin):
    """Process data entries ``data[order[start:]]``.

    mode 0: insert, mode 1: remove, mode 2: remove then insert (Gibbs).
    Stops early, returning (STATUS_GROW, next index), when fewer than
    ``margin`` free bins remain.  ``pos`` is the read position in ``us``.
    """
    rec = np.empty((0, 2), np.int64)
    nrec = np.zeros(1, np.int64)
    chain = np.empty(MAX_DEPTH, np.int64)
    probs = np.empty(MAX_DEPTH + 1, np.float64)
    for i in range(start, order.shape[0]):
        if A.meta[1] < margin:
            return STATUS_GROW, i
        e = data[order[i]]
        if mode != 0:
            remove(A, e, us, pos)
        if mode != 1:
            _insert(A, e, us, pos, random_init, rec, nrec, chain, probs)
    return STATUS_DONE, order.shape[0]


@njit(cache=True)
def live_bins(A):
    """(entry, occupancy, count) for every stored histogram cell."""
    ent = A.ent
    bins = A.bins
    total = 0
    for e in range(ent.shape[0]):
        k = ent[e, E_HEAD]
        while k >= 0:
            total += 1
            k = bins[k, B_NEXT]
    oe = np.empty(total, np.int64)
    ot = np.empty(total, np.int64)
    oc = np.empty(total, np.int64)
    i = 0
    for e in range(ent.shape[0]):
        k = ent[e, E_HEAD]
        while k >= 0:
            oe[i] = e
            ot[i] = bins[k, B_T]
            oc[i] = bins[k, B_C]
            i += 1
            k = bins[k, B_NEXT]
    return oe, ot, oc


@njit(cache=True)
def load_bins(A, ent, t, c):
    for i in range(ent.shape[0]):
        _append(A, ent[i], _alloc(A, t[i], c[i]))


@njit(cache=True)
def entry_probs(A, ents):
    chain = np.empty(MAX_DEPTH, np.int64)
    out = np.empty(ents.shape[0], np.float64)
    for i in range(ents.shape[0]):
        out[i] = entry_prob(A, ents[i], chain)
    return out


@njit(cache=True)
def count_free(A):
    free = 0
    k = A.meta[0]
    while k >= 0:
        free += 1
        k = A.bins[k, B_NEXT]
    return free


@njit(cache=True)
def compact(A, out):
    """Copy the live bins into ``out`` entry by entry (list order kept).

    Afterwards every histogram occupies consecutive cells, which keeps the
    bin walks cache friendly; the free list is rebuilt behind them.
    """
    ent = A.ent
    bins = A.bins
    j = 0
    for e in range(ent.shape[0]):
        k = ent[e, E_HEAD]
        if k < 0:
            continue
        ent[e, E_HEAD] = j
        while k >= 0:
            out[j, B_T] = bins[k, B_T]
            out[j, B_C] = bins[k, B_C]
            out[j, B_NEXT] = j + 1
            j += 1
            k = bins[k, B_NEXT]
        out[j - 1, B_NEXT] = -1
        ent[e, E_TAIL] = j - 1
    n = out.shape[0]
    for i in range(j, n):
        out[i, B_T] = 0
        out[i, B_C] = 0
        out[i, B_NEXT] = i + 1
    if j < n:
        out[n - 1, B_NEXT] = -1
        A.meta[0] = j
    else:
        A.meta[0] = -1
    A.meta[1] = n - j
