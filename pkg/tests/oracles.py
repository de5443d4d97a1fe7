"""Independent reference values computed with scipy quadrature or by hand.

Nothing here imports the package under test.
"""

import math

from scipy import integrate


def pair_integral_1d(a, b, c, d, s):
    """int_a^b int_c^d |x - y|^(-1-2s) dy dx for disjoint or touching intervals (b <= c)."""
    val, _ = integrate.dblquad(lambda y, x: (y - x) ** (-1.0 - 2.0 * s), a, b,
                               lambda x: c, lambda x: d, epsabs=1e-13, epsrel=1e-11)
    return val


def tent_weight_2d(d, s):
    """Pair integral of two unit squares at integer offset ``d`` (n = 2), in polar form.

    Equals int_{R^2} T(z1 - d1) T(z2 - d2) |z|^(-2-2s) dz with the tent
    T(t) = max(0, 1 - |t|); polar coordinates absorb the singularity at z = 0.
    """
    lo = (d[0] - 1.0, d[1] - 1.0)
    hi = (d[0] + 1.0, d[1] + 1.0)

    def tent(t):
        return max(0.0, 1.0 - abs(t))

    def rmax(th):
        c, sn = math.cos(th), math.sin(th)
        r = math.inf
        for comp, lo_k, hi_k in ((c, lo[0], hi[0]), (sn, lo[1], hi[1])):
            if comp > 1e-15:
                r = min(r, hi_k / comp)
            elif comp < -1e-15:
                r = min(r, lo_k / comp)
        return max(r, 0.0)

    def f(r, th):
        if r <= 0:
            return 0.0
        return tent(r * math.cos(th) - d[0]) * tent(r * math.sin(th) - d[1]) * r ** (-1 - 2 * s)

    cuts = {math.atan2(y, x) for x in (lo[0], hi[0]) for y in (lo[1], hi[1])}
    cuts |= {-math.pi, math.pi, math.atan2(d[1], d[0])}
    cuts = sorted(cuts)
    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        v, _ = integrate.dblquad(f, a, b, lambda th: 0.0, rmax, epsabs=1e-12, epsrel=1e-10)
        total += v
    return total


def fraclap_chi_interval(x, s):
    """(-Delta)^s chi_[0,1] at x in (0, 1) with the raw kernel."""
    return (x ** (-2 * s) + (1 - x) ** (-2 * s)) / (2 * s)


def fraclap_chi_interval_cell_mean(a, b, s):
    """Mean of :func:`fraclap_chi_interval` over [a, b] inside (0, 1)."""
    e = 1 - 2 * s

    def F(x):
        return (x ** e - (1 - x) ** e) / (e * 2 * s)

    return (F(b) - F(a)) / (b - a)


def gagliardo_chi_interval(s):
    """[chi_[0,1]]^2 = 2 int_0^1 (-Delta)^s chi(x) dx, by quadrature."""
    v, _ = integrate.quad(lambda x: fraclap_chi_interval(x, s), 0, 1, epsabs=1e-12, limit=200)
    return 2.0 * v


def complement_centered_ball_1d(r, s):
    """int_{|y| > r} |y|^(-1-2s) dy."""
    v, _ = integrate.quad(lambda y: y ** (-1 - 2 * s), r, math.inf)
    return 2 * v


def sign_layer_energy(R, s):
    """K(sign x; [-R, R]) for the half-space exterior sign(x), by quadrature.

    The difference |u(x) - u(y)|^2 = 4 only across 0; ordered pairs count
    once with the factor 1/2, so K = 4 * (pairs x < 0 < y with x or y in the box).
    """
    a = integrate.quad(lambda x: (-x) ** (-2 * s) / (2 * s), -R, 0)[0]
    b = integrate.quad(lambda y: (y + R) ** (-2 * s) / (2 * s), 0, R)[0]
    return 4.0 * (a + b)
