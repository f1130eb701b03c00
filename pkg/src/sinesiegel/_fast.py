"""Jitted orbit kernels for circle restrictions of the model maps.

The exact circle lift of the rotated model map (and of its quotient through
the square map) is evaluated from the Laurent-plus-corner coefficient blocks;
a tabulated displacement anchors the branch of the argument.  The map
parameter enters additively: lifts shift by m*(t - t_anchor) where m is 1 for
the model map itself and 2 for the quotient.  Falls back to pure Python when
numba is missing (same arithmetic, much slower).
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:   # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def lift_eval(x, table, nt, plain, corner, anchor_turns, halfangle):
    """Exact lift at x: angle of sin(psi(w))^b with w on the unit circle.

    halfangle=True evaluates the quotient map (w = e^{i pi x}, squared);
    otherwise the model map itself (w = e^{2 i pi x}).  ``table`` holds the
    displacement at nt+1 wrapped nodes and only fixes the branch.
    """
    xf = x - math.floor(x)
    pos = xf * nt
    i = int(pos)
    if i >= nt:
        i = nt - 1
    wgt = pos - i
    approx = (1.0 - wgt) * table[i] + wgt * table[i + 1]
    if halfangle:
        ang = math.pi * xf
    else:
        ang = 2.0 * math.pi * xf
    u = complex(math.cos(2.0 * ang), -math.sin(2.0 * ang))   # w^-2
    p = complex(0.0, 0.0)
    for k in range(len(plain) - 1, -1, -1):
        p = p * u + plain[k]
    q = complex(0.0, 0.0)
    for k in range(len(corner) - 1, -1, -1):
        q = q * u + corner[k]
    w = complex(math.cos(ang), math.sin(ang))
    psi = w * (p + (1.0 - u) ** 1.5 * q)
    G = np.sin(psi)
    if halfangle:
        G = G * G
    raw = math.atan2(G.imag, G.real) / (2.0 * math.pi) + anchor_turns - xf
    diff = raw - approx
    diff -= math.floor(diff + 0.5)
    return x + approx + diff


@njit(cache=True)
def lift_orbit(x0, steps, shift, table, nt, plain, corner, anchor_turns,
               halfangle):
    """lift^steps(x0) with the additive parameter shift applied per step."""
    x = x0
    for _ in range(steps):
        x = lift_eval(x, table, nt, plain, corner, anchor_turns, halfangle) + shift
    return x


@njit(cache=True)
def chain_backward(count, lift_nodes, table, nt, plain, corner, anchor_turns,
                   halfangle):
    """Backward orbit of the critical point: out[i] solves f(out[i]) = out[i-1].

    Each step inverts the monotone lift by table-seeded bisection refined on
    the exact lift.
    """
    out = np.empty(count)
    out[0] = 0.0
    y = 0.0
    base = lift_nodes[0]
    for i in range(1, count):
        target = y - base - math.floor(y - base)
        j = np.searchsorted(lift_nodes, target + base) - 1
        if j < 0:
            j = 0
        if j >= nt:
            j = nt - 1
        lo = j / nt
        hi = (j + 1) / nt
        flo = lift_eval(lo, table, nt, plain, corner, anchor_turns, halfangle) - base
        fhi = lift_eval(hi, table, nt, plain, corner, anchor_turns, halfangle) - base
        grow = 0
        while flo > target and grow < 40:
            lo -= (hi - lo)
            flo = lift_eval(lo, table, nt, plain, corner, anchor_turns,
                            halfangle) - base
            grow += 1
        while fhi < target and grow < 40:
            hi += (hi - lo)
            fhi = lift_eval(hi, table, nt, plain, corner, anchor_turns,
                            halfangle) - base
            grow += 1
        for _ in range(54):
            mid = 0.5 * (lo + hi)
            fm = lift_eval(mid, table, nt, plain, corner, anchor_turns,
                           halfangle) - base
            if fm < target:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-16:
                break
        y = 0.5 * (lo + hi)
        y -= math.floor(y)
        out[i] = y
    return out


@njit(cache=True)
def chain_forward(count, table, nt, plain, corner, anchor_turns, halfangle):
    """Forward orbit of the critical point: out[i] = f^i(1) as angles."""
    out = np.empty(count)
    x = 0.0
    for i in range(count):
        x = lift_eval(x, table, nt, plain, corner, anchor_turns, halfangle)
        x -= math.floor(x)
        out[i] = x
    return out


@njit(cache=True)
def table_orbit(x0, steps, table, nt, add):
    """Orbit sum of the interpolated displacement table plus a constant."""
    x = x0
    total = 0.0
    for _ in range(steps):
        xf = x - math.floor(x)
        pos = xf * nt
        i = int(pos)
        if i >= nt:
            i = nt - 1
        wgt = pos - i
        step = (1.0 - wgt) * table[i] + wgt * table[i + 1] + add
        total += step
        x += step
    return total
