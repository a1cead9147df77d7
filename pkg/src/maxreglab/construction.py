"""Space-time counterexample fields built from a profile pair.

Given a pair (w, a) with exponent mu, the module assembles vectorized
samplers for

    B(t, x)    = a(x / (1-t)^{1/2})
    zeta(t, x) = (1-t)^{-mu/2} e^{-(i/2) log(1-t)} w(x / (1-t)^{1/2})
    u(t, x)    = t zeta(t, x) eta(x)
    f(t, x)    = eta zeta - t sum_{k,l} [B_{kl} + B_{lk}] d_k zeta d_l eta
                 - t zeta div(B grad eta)

where eta is the fixed smooth bump equal to 1 on B_1 and 0 outside B_2.
The time derivative of zeta follows from the chain rule,

    d_t zeta = (1-t)^{-mu/2-1} e^{-(i/2) log(1-t)}
               [ ((mu+i)/2) w(y) + (1/2) y . grad w(y) ],   y = x (1-t)^{-1/2},

and is cross-checked against centered time differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .profiles import ProfilePair

__all__ = [
    "CoefficientField",
    "Cutoff",
    "SolutionBundle",
    "FieldTriple",
    "SingularTimeError",
    "build_coefficients",
    "build_cutoff",
    "build_bundle",
    "pde_residual",
]


class SingularTimeError(ValueError):
    """Evaluation requested at or beyond the blow-up time t = 1."""


def _check_time(t):
    t = float(t)
    if t >= 1.0:
        raise SingularTimeError(f"coefficients are singular at t >= 1 (got t={t})")
    return t


def _points(X, d):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[-1] != d:
        raise ValueError(f"points have dimension {X.shape[-1]}, expected {d}")
    return X


@dataclass
class CoefficientField:
    """Sampler for B(t, x) = a(x / (1-t)^{1/2}) with inherited ellipticity."""

    source: ProfilePair

    def __post_init__(self):
        self.bounds = self.source.bounds
        self.d = self.source.d
        self.time_independent = False

    def scale(self, t):
        return np.sqrt(1.0 - _check_time(t))

    def B(self, t, X):
        X = _points(X, self.d)
        return self.source.a.a(X / self.scale(t))

    __call__ = B

    def grad_B(self, t, X, fd_step=None):
        """d_k B_{ij}(t, x); chain rule on a's derivative access.

        Falls back to central differences with step 1e-4 * (1-t)^{1/2}
        (B varies on the self-similar scale) when a has no derivative data.
        """
        X = _points(X, self.d)
        s = self.scale(t)
        ga = getattr(self.source.a, "grad_a", None)
        G = ga(X / s) if ga is not None else None
        if G is not None:
            return G / s
        h = fd_step if fd_step is not None else 1e-4 * s
        n, d = X.shape
        out = np.empty((n, d, d, d), dtype=complex)
        for k in range(d):
            e = np.zeros(d)
            e[k] = h
            out[:, k] = (self.B(t, X + e) - self.B(t, X - e)) / (2 * h)
        return out


class Cutoff:
    """The fixed smooth bump eta(x) = G(2-|x|) / (G(2-|x|) + G(|x|-1)).

    G(tau) = exp(-1/tau) for tau > 0 and 0 otherwise, so eta == 1 on B_1,
    eta == 0 outside B_2, and 0 <= eta <= 1 with gradient supported in the
    closed annulus 1 <= |x| <= 2.  Chosen once and for all so golden tests
    are bit-stable.
    """

    def __init__(self, d):
        if d < 1:
            raise ValueError(f"dimension must be >= 1, got {d}")
        self.d = d

    @staticmethod
    def _g_parts(rho):
        """g(rho), g'(rho), g''(rho) of the radial transition profile."""
        rho = np.asarray(rho, dtype=float)
        val = np.ones_like(rho)
        gp = np.zeros_like(rho)
        gpp = np.zeros_like(rho)
        val[rho >= 2.0] = 0.0
        mid = (rho > 1.0) & (rho < 2.0)
        r = rho[mid]
        tA = 2.0 - r
        tB = r - 1.0
        A = np.exp(-1.0 / tA)
        B = np.exp(-1.0 / tB)
        Ap = -A / tA**2               # d/drho of exp(-1/(2-rho))
        Bp = B / tB**2
        App = A * (1.0 / tA**4 - 2.0 / tA**3)
        Bpp = B * (1.0 / tB**4 - 2.0 / tB**3)
        S = A + B
        Sp = Ap + Bp
        val[mid] = A / S
        gp[mid] = (Ap * B - A * Bp) / S**2
        gpp[mid] = (App * B - A * Bpp) / S**2 - 2 * (Ap * B - A * Bp) * Sp / S**3
        return val, gp, gpp

    def eta(self, X):
        X = _points(X, self.d)
        rho = np.linalg.norm(X, axis=-1)
        return self._g_parts(rho)[0]

    __call__ = eta

    def grad_eta(self, X):
        X = _points(X, self.d)
        rho = np.linalg.norm(X, axis=-1)
        _, gp, _ = self._g_parts(rho)
        unit = np.zeros_like(X)
        m = rho > 0
        unit[m] = X[m] / rho[m, None]
        return gp[:, None] * unit

    def hess_eta(self, X):
        X = _points(X, self.d)
        n, d = X.shape
        rho = np.linalg.norm(X, axis=-1)
        _, gp, gpp = self._g_parts(rho)
        out = np.zeros((n, d, d))
        m = rho > 0
        unit = np.zeros_like(X)
        unit[m] = X[m] / rho[m, None]
        yy = unit[:, :, None] * unit[:, None, :]
        eye = np.eye(d)
        ratio = np.zeros_like(rho)
        ratio[m] = gp[m] / rho[m]
        out[:] = gpp[:, None, None] * yy + ratio[:, None, None] * (eye - yy)
        return out


def build_coefficients(p: ProfilePair) -> CoefficientField:
    """Coefficient sampler B(t, x) = a(x/(1-t)^{1/2}) for a (possibly
    unvalidated) pair; validation is the caller's responsibility."""
    return CoefficientField(source=p)


def build_cutoff(d: int) -> Cutoff:
    return Cutoff(d)


@dataclass
class SolutionBundle:
    """Samplers for zeta, u = t zeta eta and the forcing f."""

    pair: ProfilePair
    coefficients: CoefficientField
    cutoff: Cutoff

    def __post_init__(self):
        self.d = self.pair.d
        self.mu = self.pair.mu

    # -- scalar prefactors -------------------------------------------------
    def _prefactor(self, t):
        tau = 1.0 - _check_time(t)
        return tau ** (-self.mu / 2) * np.exp(-0.5j * np.log(tau))

    def _scale(self, t):
        return np.sqrt(1.0 - _check_time(t))

    # -- zeta --------------------------------------------------------------
    def zeta(self, t, X):
        X = _points(X, self.d)
        return self._prefactor(t) * self.pair.w.w(X / self._scale(t))

    def grad_zeta(self, t, X):
        X = _points(X, self.d)
        s = self._scale(t)
        return self._prefactor(t) / s * self.pair.w.grad_w(X / s)

    def dzeta_dt(self, t, X):
        """Analytic time derivative (chain rule on the self-similar form)."""
        X = _points(X, self.d)
        tau = 1.0 - _check_time(t)
        s = self._scale(t)
        Y = X / s
        w = self.pair.w.w(Y)
        gw = self.pair.w.grad_w(Y)
        ydot = np.einsum("nk,nk->n", Y.astype(complex), gw)
        pref = tau ** (-self.mu / 2 - 1) * np.exp(-0.5j * np.log(tau))
        return pref * ((self.mu + 1j) / 2 * w + 0.5 * ydot)

    # -- u = t zeta eta ------------------------------------------------------
    def u(self, t, X):
        X = _points(X, self.d)
        if t == 0.0:
            return np.zeros(X.shape[0], dtype=complex)
        return t * self.zeta(t, X) * self.cutoff.eta(X)

    def grad_u(self, t, X):
        X = _points(X, self.d)
        if t == 0.0:
            return np.zeros(X.shape, dtype=complex)
        eta = self.cutoff.eta(X)
        geta = self.cutoff.grad_eta(X)
        return t * (
            eta[:, None] * self.grad_zeta(t, X)
            + self.zeta(t, X)[:, None] * geta
        )

    def du_dt(self, t, X):
        X = _points(X, self.d)
        eta = self.cutoff.eta(X)
        return eta * (self.zeta(t, X) + t * self.dzeta_dt(t, X))

    # -- forcing -------------------------------------------------------------
    def f(self, t, X):
        """Three-term forcing; equals d_t u - div(B grad u) wherever the
        profile equation holds exactly."""
        X = _points(X, self.d)
        eta = self.cutoff.eta(X)
        zeta = self.zeta(t, X)
        out = eta * zeta
        if t == 0.0:
            return out
        # the remaining two terms carry grad eta, supported in 1 <= |x| <= 2
        rho = np.linalg.norm(X, axis=-1)
        ann = (rho > 1.0) & (rho < 2.0)
        if not np.any(ann):
            return out
        Xa = X[ann]
        B = self.coefficients.B(t, Xa)
        gz = self.grad_zeta(t, Xa)
        geta = self.cutoff.grad_eta(Xa)
        heta = self.cutoff.hess_eta(Xa)
        sym = np.einsum("nkl,nk,nl->n", B + np.transpose(B, (0, 2, 1)), gz, geta)
        gB = self.coefficients.grad_B(t, Xa)
        div_B_geta = np.einsum("nkkl,nl->n", gB, geta) + np.einsum(
            "nkl,nkl->n", B, heta.astype(complex)
        )
        out[ann] = out[ann] - t * sym - t * zeta[ann] * div_B_geta
        return out


def build_bundle(p: ProfilePair) -> SolutionBundle:
    """Assemble the (zeta, u, f) samplers for a pair."""
    coeff = build_coefficients(p)
    return SolutionBundle(pair=p, coefficients=coeff, cutoff=build_cutoff(p.d))


@dataclass
class FieldTriple:
    """Duck-typed (u, B, f) samplers for manufactured residual checks."""

    d: int
    u: object         # u(t, X) -> (n,) complex
    B: object         # B(t, X) -> (n, d, d) complex
    f: object         # f(t, X) -> (n,) complex
    du_dt: object = None
    grad_u: object = None


def _fd_time(u, t, X, dt):
    return (u(t + dt, X) - u(t - dt, X)) / (2 * dt)


def _fd_div_B_grad(u, B, t, X, h):
    """Nested central differences of the flux, O(h^2), values only."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape

    def grad(Z):
        out = np.empty((n, d), dtype=complex)
        for k in range(d):
            e = np.zeros(d)
            e[k] = h
            out[:, k] = (u(t, Z + e) - u(t, Z - e)) / (2 * h)
        return out

    out = np.zeros(n, dtype=complex)
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        Fp = np.einsum("nkl,nl->nk", B(t, X + e), grad(X + e))[:, k]
        Fm = np.einsum("nkl,nl->nk", B(t, X - e), grad(X - e))[:, k]
        out += (Fp - Fm) / (2 * h)
    return out


def pde_residual(bundle, times, points, mode="auto", fd_space=1e-3, fd_time=1e-5):
    """Statistics of |d_t u - div(B grad u) - f| over a space-time sample set.

    Parameters
    ----------
    bundle : SolutionBundle or FieldTriple
    times : iterable of t in (0, 1)
    points : (n, d) spatial samples avoiding x = 0
    mode : "auto" uses analytic derivative access when the bundle has it,
        "fd" forces centered finite differences of sampled values only.

    Returns
    -------
    dict with keys ``sup``, ``l2``, ``per_time`` (sup per time slice).
    """
    X = np.asarray(points, dtype=float)
    if np.any(np.linalg.norm(X, axis=-1) == 0.0):
        raise ValueError("points must avoid x = 0 (w is only Lipschitz there)")
    sups = []
    all_vals = []
    analytic = mode == "auto" and getattr(bundle, "du_dt", None) is not None
    for t in times:
        t = float(t)
        if t <= 0.0 or t >= 1.0:
            raise ValueError(f"times must lie strictly inside (0, 1), got {t}")
        if analytic and not isinstance(bundle, FieldTriple):
            dudt = bundle.du_dt(t, X)
            # analytic spatial part: div(B grad u) with u = t zeta eta expanded
            # via the product rule; reuse the f-assembly identity
            eta = bundle.cutoff.eta(X)
            B = bundle.coefficients.B(t, X)
            gz = bundle.grad_zeta(t, X)
            geta = bundle.cutoff.grad_eta(X)
            heta = bundle.cutoff.hess_eta(X)
            zeta = bundle.zeta(t, X)
            gB = bundle.coefficients.grad_B(t, X)
            # div(B grad zeta) via the profile samplers (chain rule to y vars)
            s = np.sqrt(1 - t)
            Y = X / s
            from .profiles import _div_a_grad_w  # shared derivative machinery

            div_b_gz = bundle._prefactor(t) / s**2 * _div_a_grad_w(
                bundle.pair, Y, 1e-4, "auto"
            )
            sym = np.einsum(
                "nkl,nk,nl->n", B + np.transpose(B, (0, 2, 1)), gz, geta
            )
            div_B_geta = np.einsum("nkkl,nl->n", gB, geta) + np.einsum(
                "nkl,nkl->n", B, heta.astype(complex)
            )
            div_term = t * (eta * div_b_gz + sym + zeta * div_B_geta)
            fval = bundle.f(t, X)
            res = dudt - div_term - fval
        else:
            if analytic and isinstance(bundle, FieldTriple) and bundle.du_dt is not None:
                dudt = bundle.du_dt(t, X)
            else:
                dudt = _fd_time(bundle.u, t, X, fd_time)
            div_term = _fd_div_B_grad(bundle.u, bundle.B, t, X, fd_space)
            res = dudt - div_term - bundle.f(t, X)
        vals = np.abs(res)
        sups.append(float(vals.max()))
        all_vals.append(vals)
    all_vals = np.concatenate(all_vals)
    return {
        "sup": float(all_vals.max()),
        "l2": float(np.sqrt(np.mean(all_vals**2))),
        "per_time": sups,
    }
