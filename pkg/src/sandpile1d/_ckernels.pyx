# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels.  Semantics and random-number usage match ``_pykernels``."""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport log1p
from numpy.random cimport bitgen_t
cimport numpy as cnp

cnp.import_array()

cdef enum:
    C_DONE = 0
    C_GROW = 1
    C_MAX_EVENTS = 2

DONE = C_DONE
GROW = C_GROW
MAX_EVENTS = C_MAX_EVENTS


cdef bitgen_t* _bitgen(object bit_generator) except NULL:
    return <bitgen_t*>PyCapsule_GetPointer(bit_generator.capsule, "BitGenerator")


cdef inline double _uniform(bitgen_t* bg) noexcept nogil:
    return bg.next_double(bg.state)


cdef inline Py_ssize_t _pick(bitgen_t* bg, Py_ssize_t size) noexcept nogil:
    cdef Py_ssize_t k = <Py_ssize_t>(_uniform(bg) * size)
    if k >= size:
        k = size - 1
    return k


cdef inline Py_ssize_t _topple(cnp.int8_t* h, Py_ssize_t j,
                               Py_ssize_t* pl, Py_ssize_t* pr) noexcept nogil:
    cdef Py_ssize_t r = j + 1
    cdef Py_ssize_t l = j - 1
    cdef Py_ssize_t hole
    while h[r] == 2:
        r += 1
    while h[l] == 2:
        l -= 1
    hole = l + r - j
    h[hole] = 1
    h[l] = 2
    h[r] = 2
    pl[0] = l
    pr[0] = r
    return hole


def add_grains(cnp.int8_t[::1] h, const cnp.int64_t[::1] sites):
    cdef Py_ssize_t w = h.shape[0]
    cdef Py_ssize_t m = sites.shape[0]
    cdef Py_ssize_t s, j, l, r
    if w == 0:
        return
    with nogil:
        for s in range(m):
            j = sites[s]
            if h[j] == 1:
                h[j] = 2
                continue
            r = j + 1
            while r < w and h[r] == 2:
                r += 1
            l = j - 1
            while l >= 0 and h[l] == 2:
                l -= 1
            h[l + r - j] = 1
            if r < w:
                h[r] = 2
            if l >= 0:
                h[l] = 2


def run_chain(cnp.int8_t[::1] buf, Py_ssize_t base, Py_ssize_t wlo, Py_ssize_t whi,
              Py_ssize_t n_birth, double t, double horizon, long long max_events,
              object rng, object log=None):
    cdef cnp.int8_t* h = &buf[0]
    cdef Py_ssize_t nbuf = buf.shape[0]
    cdef long long events = 0
    cdef int status = C_DONE
    cdef Py_ssize_t size, i, j, l, r
    cdef double dt
    bit_generator = rng.bit_generator
    cdef bitgen_t* bg = _bitgen(bit_generator)
    with bit_generator.lock, nogil:
        while True:
            if wlo > whi:
                t = horizon
                break
            if wlo - base < 1 or whi - base > nbuf - 2:
                status = C_GROW
                break
            size = whi - wlo + 1
            dt = -log1p(-_uniform(bg)) / size
            if t + dt > horizon:
                t = horizon
                break
            t += dt
            i = wlo + _pick(bg, size)
            j = i - base
            if h[j] == 2:
                _topple(h, j, &l, &r)
                if l + base < wlo:
                    wlo = l + base
                if r + base > whi:
                    whi = r + base
            elif -n_birth <= i <= n_birth:
                h[j] = 2
            else:
                continue
            events += 1
            if 0 <= max_events <= events:
                status = C_MAX_EVENTS
                break
    return status, t, events, wlo, whi


def avalanche_jumps(cnp.int8_t[::1] buf, Py_ssize_t base, Py_ssize_t wlo, Py_ssize_t whi,
                    Py_ssize_t steps, object rng, cnp.int8_t[::1] out, bint check):
    cdef cnp.int8_t* h = &buf[0]
    cdef Py_ssize_t zero = -base
    cdef Py_ssize_t s, size, j, l, r, a, b, x, gaps
    cdef long long violations = 0
    bit_generator = rng.bit_generator
    cdef bitgen_t* bg = _bitgen(bit_generator)
    with bit_generator.lock, nogil:
        for s in range(steps):
            size = whi - wlo + 1
            while True:
                j = wlo + _pick(bg, size) - base
                if h[j] == 2:
                    break
            _topple(h, j, &l, &r)
            if l + base < wlo:
                wlo = l + base
            if r + base > whi:
                whi = r + base
            out[s] = 1 if h[zero] == 1 else 0
            if check:
                a = wlo - base
                b = whi - base
                while h[a] != 2:
                    a += 1
                while h[b] != 2:
                    b -= 1
                gaps = 0
                for x in range(a, b + 1):
                    if h[x] == 1:
                        gaps += 1
                if gaps > 1:
                    violations += 1
    return violations


cdef inline void _apply(cnp.int8_t* h, Py_ssize_t j, Py_ssize_t* wlo, Py_ssize_t* whi,
                        Py_ssize_t base) noexcept nogil:
    cdef Py_ssize_t l, r
    if h[j] == 1:
        h[j] = 2
        return
    _topple(h, j, &l, &r)
    if l + base < wlo[0]:
        wlo[0] = l + base
    if r + base > whi[0]:
        whi[0] = r + base


def run_coupled(cnp.int8_t[::1] up, cnp.int8_t[::1] lo, Py_ssize_t base,
                Py_ssize_t wlo, Py_ssize_t whi, int mode, Py_ssize_t n,
                double t, double horizon, long long max_events, object rng, object log=None):
    cdef cnp.int8_t* U = &up[0]
    cdef cnp.int8_t* D = &lo[0]
    cdef Py_ssize_t nbuf = up.shape[0]
    cdef Py_ssize_t nclk = 1 if mode == 0 else 2
    cdef long long events = 0
    cdef long long violations = 0
    cdef int status = C_DONE
    cdef Py_ssize_t size, slots, k, i, j, l, r, l2, r2, hole, x
    cdef double dt
    bit_generator = rng.bit_generator
    cdef bitgen_t* bg = _bitgen(bit_generator)
    with bit_generator.lock, nogil:
        while True:
            if wlo > whi:
                t = horizon
                break
            if wlo - base < 1 or whi - base > nbuf - 2:
                status = C_GROW
                break
            size = whi - wlo + 1
            slots = size * nclk
            dt = -log1p(-_uniform(bg)) / slots
            if t + dt > horizon:
                t = horizon
                break
            t += dt
            k = _pick(bg, slots)
            i = wlo + k // nclk
            j = i - base
            if k % nclk == 0:
                if U[j] != 2:
                    continue
                hole = _topple(U, j, &l, &r)
                if D[hole] == 2:
                    r2 = hole + 1
                    while D[r2] == 2:
                        r2 += 1
                    l2 = hole - 1
                    while D[l2] == 2:
                        l2 -= 1
                    D[hole] = 1
                    D[l2] = 2
                    D[r2] = 2
                if l + base < wlo:
                    wlo = l + base
                if r + base > whi:
                    whi = r + base
            else:
                if -n <= i <= n:
                    if U[j] == 1:
                        U[j] = 2
                        _apply(D, j, &wlo, &whi, base)
                    elif D[j] == 1:
                        D[j] = 2
                    else:
                        continue
                elif mode == 2 and (i == n + 1 or i == -n - 1) and U[j] == 1:
                    U[j] = 2
                else:
                    continue
            events += 1
            # outside the buffer both chains are all ones
            for x in range(max(wlo - base - 1, 0), min(whi - base + 2, nbuf)):
                if D[x] > U[x]:
                    violations += 1
                    break
            if 0 <= max_events <= events:
                status = C_MAX_EVENTS
                break
    return status, t, events, violations, wlo, whi
