"""Pure-Python kernels.

These are the reference semantics for the compiled module ``_ckernels``;
both consume random numbers from a :class:`numpy.random.Generator` one
double at a time, in the same order, so a given seed yields identical
results on either backend.

Buffers are ``int8`` arrays of heights in {1, 2}.  Index ``k`` of a chain
buffer holds lattice site ``base + k``; every site outside the buffer has
height 1.  ``[wlo, whi]`` is a running hull that contains every critical
site and the birth window; it only grows.  Kernels return ``GROW`` before
drawing any random number when the hull gets within one site of a buffer
edge, so the caller can re-allocate and resume without changing the stream.
"""

import math

DONE = 0
GROW = 1
MAX_EVENTS = 2

AVALANCHE = "avalanche"
BIRTH = "birth"
COUPLED = "coupled"


def _topple(h, j):
    """Avalanche at index ``j`` (``h[j] == 2``); returns ``(l, r, hole)``."""
    r = j + 1
    while h[r] == 2:
        r += 1
    l = j - 1
    while h[l] == 2:
        l -= 1
    hole = l + r - j
    h[hole] = 1
    h[l] = 2
    h[r] = 2
    return l, r, hole


def add_grains(h, sites):
    """Apply the finite-volume toppling map once for every index in ``sites``.

    ``h`` holds the volume ``[-n, n]``; sites beyond both ends are fixed
    ones, so sand reaching them is lost.
    """
    buf = h.tolist()
    w = len(buf)
    for j in sites.tolist():
        if buf[j] == 1:
            buf[j] = 2
            continue
        r = j + 1
        while r < w and buf[r] == 2:
            r += 1
        l = j - 1
        while l >= 0 and buf[l] == 2:
            l -= 1
        buf[l + r - j] = 1
        if r < w:
            buf[r] = 2
        if l >= 0:
            buf[l] = 2
    h[:] = buf


def run_chain(buf, base, wlo, whi, n_birth, t, horizon, max_events, rng, log=None):
    """Avalanches everywhere plus births on ``[-n_birth, n_birth]``.

    Every site of the hull carries a rate-one clock; a ring at a critical
    site is an avalanche, a ring at a height-one site of the birth window is
    a birth, any other ring is ignored.  ``n_birth < 0`` disables births.

    Returns ``(status, t, events, wlo, whi)``.
    """
    h = buf.tolist()
    nbuf = len(h)
    rand = rng.random
    events = 0
    status = DONE
    while True:
        if wlo > whi:
            t = horizon
            break
        if wlo - base < 1 or whi - base > nbuf - 2:
            status = GROW
            break
        size = whi - wlo + 1
        dt = -math.log1p(-rand()) / size
        if t + dt > horizon:
            t = horizon
            break
        t += dt
        k = int(rand() * size)
        if k >= size:
            k = size - 1
        i = wlo + k
        j = i - base
        if h[j] == 2:
            l, r, hole = _topple(h, j)
            if l + base < wlo:
                wlo = l + base
            if r + base > whi:
                whi = r + base
            if log is not None:
                log.append((t, i, AVALANCHE, [(l + base, 2), (r + base, 2), (hole + base, 1)]))
        elif -n_birth <= i <= n_birth:
            h[j] = 2
            if log is not None:
                log.append((t, i, BIRTH, [(i, 2)]))
        else:
            continue
        events += 1
        if 0 <= max_events <= events:
            status = MAX_EVENTS
            break
    buf[:] = h
    return status, t, events, wlo, whi


def avalanche_jumps(buf, base, wlo, whi, steps, rng, out, check):
    """Embedded jump chain of the avalanche-only process.

    Each step picks a critical site uniformly (rejection over the hull) and
    topples it.  ``out[s]`` receives 1 when site 0 has height 1 after step
    ``s + 1``.  With ``check`` set, counts the steps after which the critical
    set is not an interval minus at most one point.  The buffer must be large
    enough for ``steps`` jumps (the hull grows by at most one site per side
    per jump).
    """
    h = buf.tolist()
    rand = rng.random
    zero = -base
    violations = 0
    for s in range(steps):
        size = whi - wlo + 1
        while True:
            k = int(rand() * size)
            if k >= size:
                k = size - 1
            j = wlo + k - base
            if h[j] == 2:
                break
        l, r, _ = _topple(h, j)
        if l + base < wlo:
            wlo = l + base
        if r + base > whi:
            whi = r + base
        out[s] = 1 if h[zero] == 1 else 0
        if check:
            a, b = wlo - base, whi - base
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
    buf[:] = h
    return violations


def _apply(h, j, base):
    """Toppling map at index ``j`` on a chain buffer; returns the delta."""
    if h[j] == 1:
        h[j] = 2
        return [(j + base, 2)], None
    l, r, hole = _topple(h, j)
    return [(l + base, 2), (r + base, 2), (hole + base, 1)], (l, r)


def run_coupled(up, lo, base, wlo, whi, mode, n, t, horizon, max_events, rng, log=None):
    """Order-preserving coupling of two chains with ``lo <= up``.

    ``mode`` 0: avalanche-only pair.  ``mode`` 1: both chains have births on
    ``[-n, n]``.  ``mode`` 2: the upper chain has births on ``[-n-1, n+1]``,
    the lower on ``[-n, n]``.  Each hull site carries an avalanche clock C
    and (modes 1, 2) a birth clock C'.

    C at i with ``up(i) = 2``: the upper chain topples at i, creating a one at
    ``h``; if ``lo(h) = 2`` the lower chain topples at the unique site whose
    avalanche also creates a one at ``h``, otherwise the lower chain stays.

    C' at i in ``[-n, n]``: ``up(i) = 1`` adds at i in both; ``up(i) = 2`` and
    ``lo(i) = 1`` adds in the lower chain only.  C' at ``+-(n+1)`` (mode 2)
    with ``up(i) = 1`` adds in the upper chain only.

    Returns ``(status, t, events, violations, wlo, whi)`` where
    ``violations`` counts events after which ``lo <= up`` fails somewhere.
    """
    U = up.tolist()
    D = lo.tolist()
    nbuf = len(U)
    rand = rng.random
    nclk = 1 if mode == 0 else 2
    events = 0
    violations = 0
    status = DONE
    while True:
        if wlo > whi:
            t = horizon
            break
        if wlo - base < 1 or whi - base > nbuf - 2:
            status = GROW
            break
        size = whi - wlo + 1
        slots = size * nclk
        dt = -math.log1p(-rand()) / slots
        if t + dt > horizon:
            t = horizon
            break
        t += dt
        k = int(rand() * slots)
        if k >= slots:
            k = slots - 1
        i = wlo + k // nclk
        j = i - base
        du = dl = None
        if k % nclk == 0:
            if U[j] != 2:
                continue
            l, r, hole = _topple(U, j)
            du = [(l + base, 2), (r + base, 2), (hole + base, 1)]
            if D[hole] == 2:
                r2 = hole + 1
                while D[r2] == 2:
                    r2 += 1
                l2 = hole - 1
                while D[l2] == 2:
                    l2 -= 1
                # the lower chain topples at l2 + r2 - hole, whose hole is `hole`
                D[hole] = 1
                D[l2] = 2
                D[r2] = 2
                dl = [(l2 + base, 2), (r2 + base, 2), (hole + base, 1)]
            if l + base < wlo:
                wlo = l + base
            if r + base > whi:
                whi = r + base
        else:
            if -n <= i <= n:
                if U[j] == 1:
                    du, _ = _apply(U, j, base)
                    dl, span = _apply(D, j, base)
                    if span is not None:
                        # only reachable when the pair is already out of order
                        wlo = min(wlo, span[0] + base)
                        whi = max(whi, span[1] + base)
                elif D[j] == 1:
                    D[j] = 2
                    dl = [(i, 2)]
                else:
                    continue
            elif mode == 2 and (i == n + 1 or i == -n - 1) and U[j] == 1:
                U[j] = 2
                du = [(i, 2)]
            else:
                continue
        events += 1
        # outside the buffer both chains are all ones
        a, b = max(wlo - base - 1, 0), min(whi - base + 1, nbuf - 1)
        for x in range(a, b + 1):
            if D[x] > U[x]:
                violations += 1
                break
        if log is not None:
            log.append((t, i, COUPLED, {"upper": du or [], "lower": dl or []}))
        if 0 <= max_events <= events:
            status = MAX_EVENTS
            break
    up[:] = U
    lo[:] = D
    return status, t, events, violations, wlo, whi
