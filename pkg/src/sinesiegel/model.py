"""The Ghys-like model map: the sine-preimage domain D, its exterior Riemann
map, the circle-reflected map G, the rotation parameter t, and the quotient
map g obtained through the square map.

The boundary of D is known in closed form: |sin(x+iy)| = 1 is equivalent to
sin^2 x + sinh^2 y = 1, so the component through +/- pi/2 is the curve
y = +/- asinh(cos x), x in [-pi/2, pi/2].  It is a Jordan curve, starlike
about 0, with right-angle corners at +/- pi/2.  The exterior map psi is
computed in two stages: Theodorsen's conjugate-function iteration for the
boundary correspondence, then a least-squares projection onto an odd Laurent
basis augmented with a (1 - w^-2)^{3/2} corner block that carries the
half-integer exponents forced by the 3*pi/2 exterior corner angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import ndimage

from .arithmetic import ThetaSpec, double_mod1, double_theta_spec, parse_theta
from .circlemaps import TabulatedCircleMap, rotation_number

TWO_PI = 2.0 * math.pi


class ContinuationBreak(RuntimeError):
    pass


class FitDiverged(RuntimeError):
    pass


class OriginPole(ValueError):
    pass


class BracketFailure(RuntimeError):
    pass


class ComponentMismatch(RuntimeError):
    pass


# --- the domain D -------------------------------------------------------------


def _upper_branch(x):
    return x + 1j * np.arcsinh(np.cos(x))


def boundary_point(s):
    """Point of the sine-preimage boundary with sin(b(s)) = exp(2*pi*i*s)."""
    s = np.asarray(s, dtype=float)
    sf = frac = s - np.floor(s)
    upper = sf < 0.5
    su = np.where(upper, sf, sf - 0.5)
    # cos^2 x = sin(2 pi s); sign(x) = sign(cos 2 pi s)
    c2 = np.clip(np.sin(TWO_PI * su), 0.0, 1.0)
    xabs = np.arccos(np.sqrt(c2))
    x = np.where(np.cos(TWO_PI * su) >= 0, xabs, -xabs)
    z = _upper_branch(x)
    out = np.where(upper, z, -z)
    return out if out.ndim else complex(out)


@dataclass
class DomainD:
    """Traced boundary of D with the two critical points marked."""

    boundary: np.ndarray
    critical_markers: tuple[int, int]
    exact_sine_trace: bool = True
    _radius_table: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    @property
    def resolution(self) -> int:
        return len(self.boundary)

    def arc_length(self) -> float:
        b = self.boundary
        return float(np.sum(np.abs(np.roll(b, -1) - b)))

    def radius_table(self, n: int = 2 ** 20):
        """(phi, R) table on [0, pi]; R is pi-periodic and even in phi."""
        if self._radius_table is None:
            if self.exact_sine_trace:
                x = np.linspace(np.pi / 2, -np.pi / 2, n)
                z = _upper_branch(x)
                phi = np.angle(z)
                phi[0], phi[-1] = 0.0, np.pi
            else:
                z = self.boundary
                phi_all = np.mod(np.angle(z), np.pi)
                order = np.argsort(phi_all)
                phi = phi_all[order]
                z = z[order]
                phi = np.concatenate([[0.0], phi, [np.pi]])
                z = np.concatenate([z[:1], z, z[-1:]])
            self._radius_table = (phi, np.abs(z))
        return self._radius_table

    def radius_of_angle(self, phi):
        tab_phi, tab_r = self.radius_table()
        p = np.mod(phi, np.pi)
        return np.interp(p, tab_phi, tab_r)


def trace_domain_D(resolution: int = 2048) -> DomainD:
    """Trace the boundary of D at parameters s_j = j/M, sin(b(s)) = e^{2 pi i s}."""
    if resolution < 256 or resolution % 2:
        raise ValueError("resolution must be an even integer >= 256")
    s = np.arange(resolution) / resolution
    b = boundary_point(s)
    # Newton polish against sin(z) = w away from the two fold points
    w = np.exp(2j * np.pi * s)
    for _ in range(2):
        cz = np.cos(b)
        safe = np.abs(cz) > 1e-6
        b = np.where(safe, b - (np.sin(b) - w) / np.where(safe, cz, 1.0), b)
    resid = np.max(np.abs(np.sin(b) - w))
    if resid > 1e-10:
        raise ContinuationBreak(f"boundary trace residual {resid:.2e}")
    return DomainD(boundary=b, critical_markers=(0, resolution // 2))


# --- exterior Riemann map -----------------------------------------------------


@dataclass
class ExteriorRiemannMap:
    """Odd exterior map as w*P(w^-2) + w*(1-w^-2)^{3/2}*Q(w^-2), real blocks.

    ``plain`` holds the Laurent coefficients of w^{1-2k}; ``corner`` the
    coefficients of the corner block carrying the (w -+ 1)^{m+3/2} behavior.
    """

    plain: np.ndarray
    corner: np.ndarray
    degree: int
    fit_residual: float
    circle_deviation: float = float("nan")
    theodorsen_iters: int = 0

    @property
    def leading(self) -> float:
        """Coefficient of w at infinity (the capacity of D)."""
        return float(self.plain[0] + self.corner[0])

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        if np.any(w == 0):
            raise OriginPole("psi is singular at w = 0")
        u = w ** -2.0
        p = np.zeros_like(u)
        for c in self.plain[::-1]:
            p = p * u + c
        q = np.zeros_like(u)
        for c in self.corner[::-1]:
            q = q * u + c
        out = w * (p + (1.0 - u) ** 1.5 * q)
        return out if out.ndim else complex(out)

    def derivative(self, w):
        w = np.asarray(w, dtype=complex)
        u = w ** -2.0
        p = np.zeros_like(u)
        dp = np.zeros_like(u)
        for c in self.plain[::-1]:
            dp = dp * u + p
            p = p * u + c
        q = np.zeros_like(u)
        dq = np.zeros_like(u)
        for c in self.corner[::-1]:
            dq = dq * u + q
            q = q * u + c
        root = (1.0 - u) ** 0.5
        out = (p - 2.0 * u * dp
               + root * ((1.0 - u) * q + 3.0 * u * q - 2.0 * u * (1.0 - u) * dq))
        return out if out.ndim else complex(out)


def _basis(w, k_max):
    u = w ** -2.0
    cols = []
    term = w.astype(complex).copy()
    for _ in range(k_max + 1):
        cols.append(term.copy())
        term = term * u
    f = (1.0 - u) ** 1.5
    term = w * f
    for _ in range(k_max + 1):
        cols.append(term.copy())
        term = term * u
    return np.stack(cols, axis=1)


def _conjugate_exterior(u):
    # boundary conjugate for functions analytic outside the disk, zero at inf
    n = len(u)
    spec = np.fft.rfft(u)
    spec[0] = 0.0
    spec[1:] *= 1j
    if n % 2 == 0:
        spec[-1] = 0.0
    return np.fft.irfft(spec, n)


def fit_exterior_map(domain: DomainD, degree: int = 64, tol: float = 1e-6,
                     theodorsen_n: int = 2 ** 17, fit_samples: int = 4096,
                     polish_iters: int = 0, max_theodorsen_iters: int = 400
                     ) -> ExteriorRiemannMap:
    """Fit the exterior Riemann map with psi(inf) = inf and psi(1) = pi/2.

    Raises FitDiverged when the boundary is traversed clockwise or the final
    boundary mismatch exceeds ``tol``.
    """
    if degree < 16:
        raise ValueError("degree must be >= 16")
    b = domain.boundary
    signed_area = 0.5 * float(np.sum(
        b.real * np.roll(b.imag, -1) - np.roll(b.real, -1) * b.imag))
    if signed_area <= 0:
        raise FitDiverged("boundary polyline is not counterclockwise")

    # Theodorsen iteration for the boundary correspondence phi(tau)
    n = theodorsen_n
    tau = TWO_PI * np.arange(n) / n
    phi = tau.copy()
    iters_used = 0
    omega = 0.8
    for it in range(max_theodorsen_iters):
        u = np.log(domain.radius_of_angle(phi))
        v = _conjugate_exterior(u - u.mean())
        phi_new = tau + v
        delta = float(np.max(np.abs(phi_new - phi)))
        phi = (1.0 - omega) * phi + omega * phi_new
        iters_used = it + 1
        if delta < 1e-14:
            break
    else:
        if delta > 1e-8:
            raise FitDiverged(f"Theodorsen iteration stalled at delta={delta:.2e}")

    targets = domain.radius_of_angle(phi) * np.exp(1j * phi)

    k_max = (degree - 1) // 2
    sel = np.arange(1, n // 2, max(1, (n // 2) // fit_samples))
    w = np.exp(1j * tau[sel])
    A = _basis(w, k_max)
    t = targets[sel]

    # psi(1) = pi/2 enforced by eliminating the leading plain coefficient:
    # the plain columns all equal 1 at w = 1 and the corner block vanishes,
    # so c_0 = pi/2 - sum(c_k, k >= 1).
    def reduce_columns(mat):
        lead = mat[:, 0]
        shifted = mat[:, 1:k_max + 1] - lead[:, None]
        return np.concatenate([shifted, mat[:, k_max + 1:]], axis=1), lead

    Ar, lead = reduce_columns(A)
    rhs_c = t - (np.pi / 2) * lead
    M = np.concatenate([Ar.real, Ar.imag], axis=0)
    rhs = np.concatenate([rhs_c.real, rhs_c.imag])
    red, *_ = np.linalg.lstsq(M, rhs, rcond=None)

    def expand(red_coef):
        full = np.empty(2 * (k_max + 1))
        full[1:k_max + 1] = red_coef[:k_max]
        full[0] = np.pi / 2 - red_coef[:k_max].sum()
        full[k_max + 1:] = red_coef[k_max:]
        return full

    coef = expand(red)

    if domain.exact_sine_trace and polish_iters:
        # Gauss-Newton on log|sin psi| = 0: insensitive to tangential error;
        # steps stay in the constraint's null space via the same elimination
        tg = np.arange(1, 2 ** 13) * np.pi / 2 ** 13
        Ag = _basis(np.exp(1j * tg), k_max)
        Agr, lead_g = reduce_columns(Ag)
        for _ in range(polish_iters):
            psi_b = Ag @ coef
            s = np.sin(psi_b)
            r = np.log(np.abs(s))
            J = ((np.cos(psi_b) / s)[:, None] * Agr).real
            step, *_ = np.linalg.lstsq(J, -r, rcond=None)
            red = red + step
            coef = expand(red)

    psi = ExteriorRiemannMap(plain=coef[:k_max + 1].copy(),
                             corner=coef[k_max + 1:].copy(),
                             degree=2 * k_max + 1, fit_residual=float("nan"),
                             theodorsen_iters=iters_used)

    # boundary mismatch: radial distance to the curve plus the normalization
    tq = (np.arange(20001) + 0.37) * np.pi / 20001
    vals = psi(np.exp(1j * tq))
    radial = np.abs(np.abs(vals) - domain.radius_of_angle(np.angle(vals)))
    mismatch = float(radial.max())
    mismatch = max(mismatch, abs(complex(psi(np.array([1.0 + 0j]))[0]) - np.pi / 2))
    psi.fit_residual = mismatch
    if domain.exact_sine_trace:
        psi.circle_deviation = float(np.max(np.abs(np.abs(np.sin(vals)) - 1.0)))
    if mismatch > tol:
        raise FitDiverged(f"boundary mismatch {mismatch:.3e} exceeds tol {tol:g}")
    return psi


# --- the conformal model ------------------------------------------------------


def _centered_mod(x):
    return (np.asarray(x) + 0.5) % 1.0 - 0.5


@dataclass
class ConformalModel:
    """Fitted model: domain, exterior map, rotation parameter, evaluators."""

    domain: DomainD
    psi: ExteriorRiemannMap
    theta: ThetaSpec
    alpha: ThetaSpec
    t: float
    table_size: int
    diagnostics: dict = field(default_factory=dict)
    _g_disp: np.ndarray | None = field(default=None, repr=False)    # base G on T
    _gg_disp: np.ndarray | None = field(default=None, repr=False)   # g_theta on T

    # -- raw evaluators ---------------------------------------------------

    def eval_G(self, z, rotated: bool = True):
        """The circle-symmetric model map; ``rotated`` applies e^{2 pi i t}."""
        z = np.asarray(z, dtype=complex)
        scalar = z.ndim == 0
        z = np.atleast_1d(z)
        if np.any(z == 0):
            raise OriginPole("G has an essential singularity at 0")
        out = np.empty_like(z)
        outside = np.abs(z) >= 1.0
        if np.any(outside):
            out[outside] = np.sin(self.psi(z[outside]))
        if np.any(~outside):
            zin = z[~outside]
            refl = np.sin(self.psi(1.0 / np.conj(zin)))
            out[~outside] = 1.0 / np.conj(refl)
        if rotated:
            out = out * np.exp(2j * np.pi * self.t)
        return complex(out[0]) if scalar else out

    def eval_g(self, z):
        """g_theta(z) = (G_theta(sqrt z))^2; branch-independent by oddness."""
        z = np.asarray(z, dtype=complex)
        scalar = z.ndim == 0
        z = np.atleast_1d(z)
        if np.any(z == 0):
            raise OriginPole("g has an essential singularity at 0")
        w = np.sqrt(z)
        gw = self.eval_G(w, rotated=False)
        out = gw * gw * np.exp(4j * np.pi * self.t)
        return complex(out[0]) if scalar else out

    # -- circle restrictions ------------------------------------------------

    def _base_angle_lift(self, x):
        """Lift of angle(G(e^{2 pi i x})), anchored to the base table."""
        x = np.asarray(x, dtype=float)
        xf = x - np.floor(x)
        pos = xf * self.table_size
        i = np.minimum(pos.astype(np.int64), self.table_size - 1)
        wgt = pos - i
        d = self._g_disp_ext
        approx = (1.0 - wgt) * d[i] + wgt * d[i + 1]
        w = np.exp(2j * np.pi * xf)
        raw = np.angle(np.sin(self.psi(w))) / TWO_PI - xf
        return x + approx + _centered_mod(raw - approx)

    def _g_angle_lift(self, x):
        x = np.asarray(x, dtype=float)
        xf = x - np.floor(x)
        pos = xf * self.table_size
        i = np.minimum(pos.astype(np.int64), self.table_size - 1)
        wgt = pos - i
        d = self._gg_disp_ext
        approx = (1.0 - wgt) * d[i] + wgt * d[i + 1]
        w = np.exp(1j * np.pi * xf)
        gg = np.sin(self.psi(w)) ** 2 * np.exp(4j * np.pi * self.t)
        raw = np.angle(gg) / TWO_PI - xf
        return x + approx + _centered_mod(raw - approx)

    def circle_map(self, exact: bool = True) -> TabulatedCircleMap:
        """G_theta restricted to the unit circle (rotation number theta)."""
        disp = self._g_disp + self.t
        lift = (lambda x: self._base_angle_lift(x) + self.t) if exact else None
        handle = TabulatedCircleMap(disp, exact_lift=lift,
                                    rotation_value=self.theta.exact or self.theta.value,
                                    rotation_quotients=self._quotients(self.theta))
        if exact:
            handle.fast_spec = {
                "table": self._g_disp_ext + self.t, "nt": self.table_size,
                "plain": np.asarray(self.psi.plain, float),
                "corner": np.asarray(self.psi.corner, float),
                "anchor": self.t, "halfangle": False}
        return handle

    def doubled_circle_map(self, exact: bool = True) -> TabulatedCircleMap:
        """g_theta restricted to the unit circle (rotation number 2*theta mod 1)."""
        lift = self._g_angle_lift if exact else None
        handle = TabulatedCircleMap(self._gg_disp, exact_lift=lift,
                                    rotation_value=self.alpha.exact or self.alpha.value,
                                    rotation_quotients=self._quotients(self.alpha))
        if exact:
            handle.fast_spec = {
                "table": self._gg_disp_ext.copy(), "nt": self.table_size,
                "plain": np.asarray(self.psi.plain, float),
                "corner": np.asarray(self.psi.corner, float),
                "anchor": 2.0 * self.t, "halfangle": True}
        return handle

    @staticmethod
    def _quotients(spec: ThetaSpec, depth: int = 40):
        for d in (depth, 30, 24, 18, 12):
            try:
                return tuple(spec.continued_fraction(d).quotients)
            except Exception:
                continue
        return None

    # -- construction -------------------------------------------------------

    @classmethod
    def build(cls, theta_spec, degree: int = 64, resolution: int = 2048,
              table_size: int = 2 ** 16, t_tol: float = 1e-10,
              rho_iters: int = 200_000, fit_tol: float = 1e-6,
              lock_return_budget: int = 2_500_000) -> "ConformalModel":
        theta = parse_theta(theta_spec)
        domain = trace_domain_D(resolution)
        psi = fit_exterior_map(domain, degree=degree, tol=fit_tol)
        model = cls(domain=domain, psi=psi, theta=theta,
                    alpha=double_theta_spec(theta), t=0.0, table_size=table_size)
        model._build_tables()
        t, solve_diag = solve_rotation_parameter(model, theta.value, t_tol,
                                                 iters=rho_iters)
        model.t = t
        model._build_g_table()
        lock_diag = model._refine_t_to_plateau(lock_return_budget)
        model.diagnostics = {
            "fit_residual": psi.fit_residual,
            "circle_deviation": psi.circle_deviation,
            "leading_coefficient": psi.leading,
            "theodorsen_iters": psi.theodorsen_iters,
            "monotone_clips": model.diagnostics.get("monotone_clips", 0),
            **solve_diag, **lock_diag,
        }
        return model

    def _g_return_gap(self, t: float, q: int, p: int) -> float:
        """lift_{g_t}^{q}(0) - p, evaluated with the exact circle lift."""
        from ._fast import lift_orbit
        shift = 2.0 * (t - self.t)
        end = lift_orbit(0.0, q, shift, self._gg_disp_ext, self.table_size,
                         np.asarray(self.psi.plain, dtype=float),
                         np.asarray(self.psi.corner, dtype=float),
                         2.0 * self.t, True)
        return float(end - p)

    def _refine_t_to_plateau(self, budget: int) -> dict:
        """Sharpen t so that the circle quotient's closest returns match the
        target rotation number's convergents through a deep level.

        The orbit-average solve pins the rotation number only to O(1/iters),
        which scrambles return combinatorics beyond level ~4.  The signed gap
        of the q_k-th return, R_k(t) = lift^{q_k}(0) - p_k, is strictly
        increasing in t, and driving R_K to zero lands t in the p_K/q_K
        mode-locking plateau, whose convergents agree with the target through
        level K-1.  Levels are locked in ascending order, each solve seeding
        the next bracket.
        """
        qts = self._quotients(self.alpha)
        if qts is None:
            return {"locked_level": None}
        from .arithmetic import cf_from_quotients
        cf = cf_from_quotients(list(qts))
        denoms = [1] + [qn for _, qn in cf.convergents]
        numers = [0] + [pn for pn, _ in cf.convergents]
        usable = [k for k in range(2, len(denoms) - 1) if denoms[k] <= budget]
        if not usable:
            return {"locked_level": None}
        # every other level suffices for homing in; always finish on the top
        levels = usable[::2] if usable[-1] in usable[::2] else usable[::2] + [usable[-1]]

        t_lo, t_hi = self.t - 2e-5, self.t + 2e-5
        evals = 0
        for k in levels:
            q, p = denoms[k], numers[k]

            def gap(t):
                nonlocal evals
                evals += 1
                return self._g_return_gap(t, q, p)

            g_lo, g_hi = gap(t_lo), gap(t_hi)
            grow = 0
            while g_lo > 0 and grow < 60:
                t_lo -= (t_hi - t_lo)
                g_lo = gap(t_lo)
                grow += 1
            while g_hi < 0 and grow < 60:
                t_hi += (t_hi - t_lo)
                g_hi = gap(t_hi)
                grow += 1
            if not (g_lo <= 0 <= g_hi):
                raise BracketFailure(f"return-gap bracket failed at level {k}")
            for it in range(90):
                if t_hi - t_lo < 1e-16 * max(1.0, abs(t_lo)):
                    break
                if it % 4 == 3 or g_hi == g_lo:
                    mid = 0.5 * (t_lo + t_hi)     # guard against falsi stalls
                else:
                    mid = t_lo + (0.0 - g_lo) * (t_hi - t_lo) / (g_hi - g_lo)
                    if not (t_lo < mid < t_hi):
                        mid = 0.5 * (t_lo + t_hi)
                g_mid = gap(mid)
                if g_mid < 0:
                    t_lo, g_lo = mid, g_mid
                else:
                    t_hi, g_hi = mid, g_mid
            # re-open the bracket to the scale of the next level's plateau
            pad = max(4.0 * (t_hi - t_lo), 0.5 / (q * denoms[min(k + 1, len(denoms) - 1)]))
            t_lo -= pad
            t_hi += pad

        t_star = 0.5 * (t_lo + t_hi)
        # verify the alternating return pattern on the levels where binary64
        # can resolve it: the gap's t-derivative scales like q_k^2, so signs
        # are meaningful only while q_k^2 q_{k+1} stays well under 1/ulp
        signs_ok = True
        checked = 0
        for k in range(2, len(denoms) - 1):
            if denoms[k] > denoms[levels[-1]]:
                break
            if denoms[k] ** 2 * denoms[k + 1] > 4e15:
                break
            gk = self._g_return_gap(t_star, denoms[k], numers[k])
            checked = k
            if abs(gk) > 1e-12 and (gk > 0) != (k % 2 == 0):
                signs_ok = False
        self.t = t_star
        self._build_g_table()
        return {"locked_level": levels[-1] - 1, "lock_evals": evals,
                "lock_signs_ok": signs_ok, "lock_signs_through": checked}

    def _build_tables(self):
        n = self.table_size
        x = np.arange(n) / n
        g_vals = np.sin(self.psi(np.exp(2j * np.pi * x)))
        ang = np.unwrap(np.angle(g_vals)) / TWO_PI
        ang -= ang[0]  # G(1) = 1 anchors the lift
        disp = ang - x
        # suppress sub-fit-error dips so the tabulated lift is monotone
        lifts = x + disp
        clipped = np.maximum.accumulate(lifts)
        self.diagnostics["monotone_clips"] = int(np.sum(clipped > lifts))
        self._g_disp = clipped - x
        self._g_disp_ext = np.concatenate([self._g_disp, self._g_disp[:1]])

    def _build_g_table(self):
        n = self.table_size
        x = np.arange(n) / n
        gg = np.sin(self.psi(np.exp(1j * np.pi * x))) ** 2 * np.exp(4j * np.pi * self.t)
        ang = np.unwrap(np.angle(gg)) / TWO_PI
        ang -= np.floor(ang[0])
        disp = ang - x
        lifts = x + disp
        clipped = np.maximum.accumulate(lifts)
        self._gg_disp = clipped - x
        self._gg_disp_ext = np.concatenate([self._gg_disp, self._gg_disp[:1]])

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "theta": {"value": self.theta.value, "name": self.theta.name,
                      "quotients": list(self.theta.quotients) if self.theta.quotients else None},
            "t": self.t,
            "degree": self.psi.degree,
            "psi_plain": self.psi.plain.tolist(),
            "psi_corner": self.psi.corner.tolist(),
            "fit_residual": self.psi.fit_residual,
            "circle_deviation": self.psi.circle_deviation,
            "resolution": self.domain.resolution,
            "table_size": self.table_size,
            "boundary_real": self.domain.boundary.real.tolist(),
            "boundary_imag": self.domain.boundary.imag.tolist(),
            "diagnostics": {k: (v if not isinstance(v, np.generic) else v.item())
                            for k, v in self.diagnostics.items()},
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ConformalModel":
        if payload.get("schema_version") != 1:
            raise ValueError("unsupported model schema version")
        th = payload["theta"]
        theta = parse_theta(th["quotients"] or th["name"] or th["value"])
        boundary = (np.asarray(payload["boundary_real"])
                    + 1j * np.asarray(payload["boundary_imag"]))
        domain = DomainD(boundary=boundary,
                         critical_markers=(0, len(boundary) // 2))
        psi = ExteriorRiemannMap(
            plain=np.asarray(payload["psi_plain"]),
            corner=np.asarray(payload["psi_corner"]),
            degree=payload["degree"],
            fit_residual=payload["fit_residual"],
            circle_deviation=payload["circle_deviation"])
        model = cls(domain=domain, psi=psi, theta=theta,
                    alpha=double_theta_spec(theta), t=payload["t"],
                    table_size=payload["table_size"],
                    diagnostics=payload.get("diagnostics", {}))
        model._build_tables()
        model._build_g_table()
        return model


def solve_rotation_parameter(model: ConformalModel, theta: float, tol: float,
                             iters: int = 200_000):
    """Bisection in t for rotation number theta of e^{2 pi i t} G restricted
    to the circle.  The measured rotation number is strictly increasing in t,
    so bisection against the measurement function is exact.
    """
    if tol >= 1.0:
        return 0.5, {"t_bracket": 1.0, "t_warning": "degenerate tolerance",
                     "rho_certified": float("nan")}
    if not (0 < theta < 1):
        raise ValueError("theta must lie in (0,1)")
    disp = model._g_disp

    def measured(t, n_iters):
        handle = TabulatedCircleMap(disp + t)
        rho, _ = rotation_number(handle, n_iters)
        return rho

    lo, hi = 0.0, 1.0
    m_lo = measured(1e-12, iters)
    if not (m_lo <= theta):
        raise BracketFailure(
            f"rho(0)={m_lo:.6f} does not sit below theta={theta:.6f}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if measured(mid, iters) < theta:
            lo = mid
        else:
            hi = mid
    t_star = 0.5 * (lo + hi)
    rho_cert = measured(t_star, 4 * iters)
    return t_star, {"t_bracket": hi - lo, "rho_certified": rho_cert,
                    "rho_error_bound": 1.0 / (4 * iters),
                    "solve_iters": iters}


# --- roundness of sine preimages ----------------------------------------------


@dataclass(frozen=True)
class RoundnessResult:
    tau: float
    components: int
    witnesses: tuple[tuple[complex, float, float], ...]  # (center, r_in, tau_i)


def sine_preimage_roundness(a: complex, r: float, M: float,
                            samples: int = 512) -> RoundnessResult:
    """Roundness constant of preimage component pairs of sin over
    B_r(a) inside B_{Mr}(a).

    For each component U of sin^{-1}(B_{Mr}(a)) containing a component V of
    sin^{-1}(B_r(a)), searches a witness disk pair B_{r'}(a') in V and
    B_{tau r'}(a') around U, and returns the largest tau over components.
    Each preimage is examined in its own window (sized by the local branch
    derivative or the square-root fold scale, whichever dominates), grown
    until the component is fully enclosed.
    """
    if M <= 1:
        raise ValueError("M must exceed 1")
    if abs(a) + M * r > 2.0:
        raise ValueError("B_{Mr}(a) must lie inside B_2(0)")
    z0 = complex(np.arcsin(complex(a)))
    witnesses = []
    for seed in (z0, np.pi - z0):
        scale = max(abs(np.cos(seed)), math.sqrt(M * r))
        half = 3.0 * M * r / scale
        for _ in range(6):
            xs = np.linspace(seed.real - half, seed.real + half, samples)
            ys = np.linspace(seed.imag - half, seed.imag + half, samples)
            px = xs[1] - xs[0]
            Z = xs[None, :] + 1j * ys[:, None]
            F = np.sin(Z)
            in_u = np.abs(F - a) < M * r
            labels_u, n_u = ndimage.label(in_u)
            centre = labels_u[samples // 2, samples // 2]
            if centre == 0:
                nz = np.nonzero(in_u)
                if len(nz[0]) == 0:
                    half *= 2.0
                    continue
                k = np.argmin((nz[0] - samples // 2) ** 2
                              + (nz[1] - samples // 2) ** 2)
                centre = labels_u[nz[0][k], nz[1][k]]
            mask_u = labels_u == centre
            touches = (mask_u[0].any() or mask_u[-1].any()
                       or mask_u[:, 0].any() or mask_u[:, -1].any())
            if touches:
                half *= 2.0
                continue
            break
        else:
            raise ComponentMismatch("preimage component does not close up")
        in_v = (np.abs(F - a) < r) & mask_u
        labels_v, n_v = ndimage.label(in_v)
        if n_v == 0:
            continue
        pu = Z[mask_u]
        for vi in range(1, n_v + 1):
            mask_v = labels_v == vi
            dist_in = ndimage.distance_transform_edt(mask_v) * px
            order = np.argsort(dist_in, axis=None)[::-1][:8]
            best = None
            for flat in order:
                iy, ix = np.unravel_index(flat, dist_in.shape)
                r_in = dist_in[iy, ix]
                if r_in <= 0:
                    break
                center = Z[iy, ix]
                r_out = float(np.max(np.abs(pu - center))) + px
                tau_c = r_out / r_in
                if best is None or tau_c < best[2]:
                    best = (complex(center), float(r_in), float(tau_c))
            if best is not None:
                witnesses.append(best)
    if not witnesses:
        raise ComponentMismatch("no V component nests inside a U component")
    tau = max(wt[2] for wt in witnesses)
    return RoundnessResult(tau=float(tau), components=len(witnesses),
                           witnesses=tuple(witnesses))
