# cython: language_level=3
"""Compiled LazySP kernel; same algorithm and interface as ``_pyengine``."""

from libc.stdlib cimport malloc, free
from libc.string cimport memset
from libc.stdint cimport int64_t

cdef enum:
    UNKNOWN = 0
    YES = 1
    NO = 2

cdef int64_t INF = (<int64_t>1) << 62


cdef inline void heap_push(int64_t* hk, int* hv, int* size, int64_t key, int v) noexcept nogil:
    cdef int i = size[0]
    cdef int parent
    size[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if hk[parent] <= key:
            break
        hk[i] = hk[parent]
        hv[i] = hv[parent]
        i = parent
    hk[i] = key
    hv[i] = v


cdef inline void heap_pop(int64_t* hk, int* hv, int* size, int64_t* key, int* v) noexcept nogil:
    cdef int n, i, child
    cdef int64_t lk
    cdef int lv
    key[0] = hk[0]
    v[0] = hv[0]
    size[0] -= 1
    n = size[0]
    if n == 0:
        return
    lk = hk[n]
    lv = hv[n]
    i = 0
    while True:
        child = 2 * i + 1
        if child >= n:
            break
        if child + 1 < n and hk[child + 1] < hk[child]:
            child += 1
        if hk[child] >= lk:
            break
        hk[i] = hk[child]
        hv[i] = hv[child]
        i = child
    hk[i] = lk
    hv[i] = lv


cdef class Kernel:
    cdef public int n, s, t, m, nb
    cdef int* edge_bundle
    cdef int* bstart        # CSR: edges of bundle b are bedges[bstart[b]:bstart[b+1]]
    cdef int* bedges
    cdef int* astart        # CSR: bundles incident to v are abund[astart[v]:astart[v+1]]
    cdef int* abund
    cdef int* aother
    # per-run buffers
    cdef unsigned char* status
    cdef int* yes_min
    cdef int* unk_ptr
    cdef int64_t* dist
    cdef unsigned char* done
    cdef int64_t* hk
    cdef int* hv
    cdef int* pedges
    cdef int* pverts
    cdef int plen

    def __cinit__(self, int n, int s, int t, eu, ev):
        cdef int e, b, u, v, k
        self.n = n
        self.s = s
        self.t = t
        self.m = len(eu)
        index = {}
        order = []
        owner = [0] * self.m
        for e in range(self.m):
            u = eu[e]
            v = ev[e]
            key = (u, v) if u < v else (v, u)
            b = index.get(key, -1)
            if b < 0:
                b = len(order)
                index[key] = b
                order.append(key)
            owner[e] = b
        self.nb = len(order)
        self.edge_bundle = <int*>malloc(max(self.m, 1) * sizeof(int))
        self.bstart = <int*>malloc((self.nb + 1) * sizeof(int))
        self.bedges = <int*>malloc(max(self.m, 1) * sizeof(int))
        self.astart = <int*>malloc((n + 1) * sizeof(int))
        self.abund = <int*>malloc(max(2 * self.nb, 1) * sizeof(int))
        self.aother = <int*>malloc(max(2 * self.nb, 1) * sizeof(int))
        self.status = <unsigned char*>malloc(max(self.m, 1))
        self.yes_min = <int*>malloc(max(self.nb, 1) * sizeof(int))
        self.unk_ptr = <int*>malloc(max(self.nb, 1) * sizeof(int))
        self.dist = <int64_t*>malloc(n * sizeof(int64_t))
        self.done = <unsigned char*>malloc(n)
        self.hk = <int64_t*>malloc((2 * self.nb + 2) * sizeof(int64_t))
        self.hv = <int*>malloc((2 * self.nb + 2) * sizeof(int))
        self.pedges = <int*>malloc(n * sizeof(int))
        self.pverts = <int*>malloc((n + 1) * sizeof(int))
        if (not self.edge_bundle or not self.bstart or not self.bedges or not self.astart
                or not self.abund or not self.aother or not self.status or not self.yes_min
                or not self.unk_ptr or not self.dist or not self.done or not self.hk
                or not self.hv or not self.pedges or not self.pverts):
            raise MemoryError()
        # bundle CSR, edge ids ascending within each bundle
        memset(self.bstart, 0, (self.nb + 1) * sizeof(int))
        for e in range(self.m):
            self.edge_bundle[e] = owner[e]
            self.bstart[owner[e] + 1] += 1
        for b in range(self.nb):
            self.bstart[b + 1] += self.bstart[b]
        fill = [self.bstart[b] for b in range(self.nb)]
        for e in range(self.m):
            b = owner[e]
            self.bedges[fill[b]] = e
            fill[b] += 1
        # vertex -> bundle adjacency, bundles in creation order
        memset(self.astart, 0, (n + 1) * sizeof(int))
        for b in range(self.nb):
            u, v = order[b]
            self.astart[u + 1] += 1
            self.astart[v + 1] += 1
        for u in range(n):
            self.astart[u + 1] += self.astart[u]
        afill = [self.astart[u] for u in range(n)]
        for b in range(self.nb):
            u, v = order[b]
            k = afill[u]
            self.abund[k] = b
            self.aother[k] = v
            afill[u] += 1
            k = afill[v]
            self.abund[k] = b
            self.aother[k] = u
            afill[v] += 1

    def __dealloc__(self):
        free(self.edge_bundle)
        free(self.bstart)
        free(self.bedges)
        free(self.astart)
        free(self.abund)
        free(self.aother)
        free(self.status)
        free(self.yes_min)
        free(self.unk_ptr)
        free(self.dist)
        free(self.done)
        free(self.hk)
        free(self.hv)
        free(self.pedges)
        free(self.pverts)

    cdef bint _shortest(self) noexcept nogil:
        cdef int n = self.n
        cdef int s = self.s
        cdef int t = self.t
        cdef int64_t big = n
        cdef int hsize = 0
        cdef int64_t d, nd, c
        cdef int u, w, b, k, rep, best_e, best_w
        for u in range(n):
            self.dist[u] = INF
            self.done[u] = 0
        self.dist[t] = 0
        heap_push(self.hk, self.hv, &hsize, 0, t)
        while hsize > 0:
            heap_pop(self.hk, self.hv, &hsize, &d, &u)
            if self.done[u]:
                continue
            self.done[u] = 1
            if u == s:
                break
            for k in range(self.astart[u], self.astart[u + 1]):
                w = self.aother[k]
                if self.done[w]:
                    continue
                b = self.abund[k]
                if self.yes_min[b] >= 0:
                    nd = d + big
                elif self.unk_ptr[b] < self.bstart[b + 1]:
                    nd = d + big + 1
                else:
                    continue
                if nd < self.dist[w]:
                    self.dist[w] = nd
                    heap_push(self.hk, self.hv, &hsize, nd, w)
        if not self.done[s]:
            self.plen = -1
            return False
        self.plen = 0
        self.pverts[0] = s
        u = s
        while u != t:
            best_e = -1
            best_w = -1
            for k in range(self.astart[u], self.astart[u + 1]):
                b = self.abund[k]
                w = self.aother[k]
                if self.yes_min[b] >= 0:
                    rep = self.yes_min[b]
                    c = big
                elif self.unk_ptr[b] < self.bstart[b + 1]:
                    rep = self.bedges[self.unk_ptr[b]]
                    c = big + 1
                else:
                    continue
                if self.dist[w] + c == self.dist[u] and (best_e < 0 or rep < best_e):
                    best_e = rep
                    best_w = w
            self.pedges[self.plen] = best_e
            self.plen += 1
            self.pverts[self.plen] = best_w
            u = best_w
        return True

    cdef int _select(self, int code) except -2:
        cdef int L = self.plen
        cdef int i, last, nxt, best, d, best_d
        cdef int far = L + 1
        if code == 0:
            for i in range(L):
                if self.status[self.pedges[i]] == UNKNOWN:
                    return i
        elif code == 1:
            for i in range(L - 1, -1, -1):
                if self.status[self.pedges[i]] == UNKNOWN:
                    return i
        elif code == 2:
            left = [far] * L
            last = -1
            for i in range(L):
                if self.status[self.pedges[i]] != UNKNOWN:
                    last = i
                left[i] = i - last if last >= 0 else far
            if last < 0:
                return (L - 1) // 2
            best = -1
            best_d = -1
            nxt = -1
            for i in range(L - 1, -1, -1):
                if self.status[self.pedges[i]] != UNKNOWN:
                    nxt = i
                    continue
                d = left[i]
                if nxt >= 0 and nxt - i < d:
                    d = nxt - i
                if d >= best_d:
                    best = i
                    best_d = d
            return best
        else:
            raise ValueError(f"unknown selector code {code}")
        raise ValueError("every edge on the path is already queried")

    cdef tuple _path_edges(self):
        return tuple([self.pedges[i] for i in range(self.plen)])

    def run(self, query, int code, preset=None, bint record=False):
        cdef int e, b, k, i, unverified
        cdef bint found
        memset(self.status, UNKNOWN, max(self.m, 1))
        for b in range(self.nb):
            self.yes_min[b] = -1
        if preset:
            for e_obj, a in preset.items():
                e = e_obj
                b = self.edge_bundle[e]
                if a:
                    self.status[e] = YES
                    if self.yes_min[b] < 0 or e < self.yes_min[b]:
                        self.yes_min[b] = e
                else:
                    self.status[e] = NO
        for b in range(self.nb):
            k = self.bstart[b]
            while k < self.bstart[b + 1] and self.status[self.bedges[k]] != UNKNOWN:
                k += 1
            self.unk_ptr[b] = k
        candidates = [] if record else None
        step_candidate = [] if record else None

        found = self._shortest()
        unverified = 0
        if found:
            if record:
                candidates.append(self._path_edges())
            for i in range(self.plen):
                if self.status[self.pedges[i]] == UNKNOWN:
                    unverified += 1
        while found and unverified:
            e = self.pedges[self._select(code)]
            if record:
                step_candidate.append(len(candidates) - 1)
            b = self.edge_bundle[e]
            if query(e):
                self.status[e] = YES
                if self.yes_min[b] < 0 or e < self.yes_min[b]:
                    self.yes_min[b] = e
                unverified -= 1
            else:
                self.status[e] = NO
                k = self.unk_ptr[b]
                while k < self.bstart[b + 1] and self.status[self.bedges[k]] != UNKNOWN:
                    k += 1
                self.unk_ptr[b] = k
                found = self._shortest()
                if found:
                    if record:
                        candidates.append(self._path_edges())
                    unverified = 0
                    for i in range(self.plen):
                        if self.status[self.pedges[i]] == UNKNOWN:
                            unverified += 1
        if not found:
            return None, None, candidates, step_candidate
        return (self._path_edges(),
                tuple([self.pverts[i] for i in range(self.plen + 1)]),
                candidates, step_candidate)
