"""Self-similar profile pairs (w, a) and their validation.

A profile pair consists of a complex amplitude profile w : R^d -> C and an
elliptic coefficient field a : R^d -> C^{d x d} such that

    zeta(t, x) = (1-t)^(-mu/2) e^{-(i/2) log(1-t)} w(x / (1-t)^{1/2})

solves d_t zeta = div(a(x/(1-t)^{1/2}) grad zeta).  Equivalently w satisfies
the profile equation

    R(y) := div(a grad w)(y) - (1/2) y . grad w(y) - ((mu + i)/2) w(y) = 0.

Pairs are first-class input data: they are loaded from files or synthesized
experimentally, and always pass through :func:`validate_profile`, which
measures the residual R on a sample set together with ellipticity, decay and
boundedness constants.  Nothing downstream trusts a pair that has not been
gated.

Profile file format (version 1)
-------------------------------
Two-part file, documented byte layout:

* line 1: magic ``MAXREGLAB-PROFILE 1\\n`` (ASCII);
* line 2: a single-line JSON header with fields ``format_version, d, mu,
  lambda, Lambda, C0, C1, C2, lipschitz_at_zero, grid_kind, grid_shape,
  provenance, has_grad_w, has_grad_a, tail_model``;
* remainder: raw little-endian float64 payload, row-major in the declared
  grid order, one record per grid node.

Record columns by grid kind:

* ``radial`` (grid_shape = [n]): ``rho, Re w, Im w, [Re w', Im w'],
  Re a_rr, Im a_rr, Re a_tt, Im a_tt, [Re a_rr', Im a_rr', Re a_tt',
  Im a_tt']`` where the coefficient field is the radial matrix
  a(y) = a_tt(rho) I + (a_rr(rho) - a_tt(rho)) yhat yhat^T.
* ``cartesian`` (grid_shape = [n_1..n_d]): ``y_1..y_d, Re w, Im w,
  [2d gradient components], 2*d^2 matrix entries (row-major),
  [2*d^3 derivative entries, index order (k, i, j) for d_k a_{ij}]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator

__all__ = [
    "EllipticityBounds",
    "DecayConstants",
    "ProfilePair",
    "ValidationReport",
    "ValidationTolerances",
    "ProfileFormatError",
    "DomainError",
    "RadialGridData",
    "CartesianGridData",
    "RadialW",
    "RadialMatrixA",
    "CallableW",
    "CallableA",
    "load_profile",
    "save_profile",
    "validate_profile",
    "default_sampleset",
    "unit_ball_volume",
]

MAGIC = b"MAXREGLAB-PROFILE 1\n"


class ProfileFormatError(ValueError):
    """Malformed profile file (bad magic, header, or payload)."""


class DomainError(ValueError):
    """Sampler evaluated outside its stored domain."""


def unit_ball_volume(d):
    """Volume of the unit ball in R^d."""
    from math import gamma, pi

    return pi ** (d / 2) / gamma(d / 2 + 1)


@dataclass(frozen=True)
class EllipticityBounds:
    """Coercivity and boundedness constants of the coefficient field."""

    lam: float
    Lam: float

    def __post_init__(self):
        if not (0 < self.lam <= self.Lam):
            raise ValueError(
                f"ellipticity bounds need 0 < lambda <= Lambda, "
                f"got lambda={self.lam}, Lambda={self.Lam}"
            )


@dataclass(frozen=True)
class DecayConstants:
    """Constants C_alpha in the far-field decay bounds, |alpha| <= 2."""

    C: dict
    lipschitz_at_zero: float = 0.0

    def __post_init__(self):
        for k, v in self.C.items():
            if k not in (0, 1, 2):
                raise ValueError(f"decay constant order must be 0, 1 or 2, got {k}")
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"decay constant C_{k}={v} must be finite and >= 0")
        if not np.isfinite(self.lipschitz_at_zero) or self.lipschitz_at_zero < 0:
            raise ValueError("lipschitz_at_zero must be finite and >= 0")


# --------------------------------------------------------------------------
# samplers
# --------------------------------------------------------------------------


def _as_points(Y, d):
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[None, :]
    if Y.shape[-1] != d:
        raise ValueError(f"points have dimension {Y.shape[-1]}, expected {d}")
    return Y


class RadialW:
    """Radial amplitude profile w(y) = w(|y|) backed by splines on a rho grid.

    Stores samples of w and (optionally) w'; the gradient and Hessian come
    from spline derivatives, which keeps the second derivative one order
    more accurate when w' samples are present.
    """

    def __init__(self, rho, w, dw=None, mu=None, tail_model="none"):
        rho = np.asarray(rho, dtype=float)
        if rho.ndim != 1 or np.any(np.diff(rho) <= 0):
            raise ValueError("rho grid must be 1-d strictly increasing")
        self.rho = rho
        self.w_samples = np.asarray(w, dtype=complex)
        self.dw_samples = None if dw is None else np.asarray(dw, dtype=complex)
        self.mu = mu
        self.tail_model = tail_model
        self._sp_w = CubicSpline(rho, self.w_samples)
        if self.dw_samples is not None:
            self._sp_dw = CubicSpline(rho, self.dw_samples)
        else:
            self._sp_dw = self._sp_w.derivative()
        self._sp_ddw = self._sp_dw.derivative()
        if tail_model == "spiral-power":
            if mu is None:
                raise ValueError("tail_model='spiral-power' requires mu")
            self._tail_exp = -(mu + 1j)
            self._tail_coef = self.w_samples[-1] / rho[-1] ** self._tail_exp
        elif tail_model != "none":
            raise ValueError(f"unknown tail model {tail_model!r}")

    @property
    def domain(self):
        return float(self.rho[0]), float(self.rho[-1])

    def _check_inside(self, r):
        lo = self.rho[0]
        if np.any(r < lo - 1e-12):
            raise DomainError(
                f"radial sampler evaluated at rho={r.min():.3g} below stored "
                f"range [{lo:.3g}, {self.rho[-1]:.3g}]"
            )
        if self.tail_model == "none" and np.any(r > self.rho[-1] * (1 + 1e-12)):
            raise DomainError(
                f"radial sampler evaluated at rho={r.max():.3g} beyond stored "
                f"range [{lo:.3g}, {self.rho[-1]:.3g}] and no tail model is set"
            )

    def _radial(self, r, order):
        """w, w' or w'' of the radial function at radii r."""
        self._check_inside(r)
        out = np.empty(r.shape, dtype=complex)
        inside = r <= self.rho[-1]
        rin = np.clip(r[inside], self.rho[0], None)
        sp = (self._sp_w, self._sp_dw, self._sp_ddw)[order]
        out[inside] = sp(rin)
        if not np.all(inside):
            rt = r[~inside]
            e = self._tail_exp
            c = self._tail_coef
            if order == 0:
                out[~inside] = c * rt**e
            elif order == 1:
                out[~inside] = c * e * rt ** (e - 1)
            else:
                out[~inside] = c * e * (e - 1) * rt ** (e - 2)
        return out

    def w(self, Y):
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[None, :]
        r = np.linalg.norm(Y, axis=-1)
        return self._radial(r, 0)

    def grad_w(self, Y):
        Y = np.asarray(Y, dtype=float)
        r = np.linalg.norm(Y, axis=-1)
        dw = self._radial(r, 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = Y / r[..., None]
        unit[r == 0] = 0.0  # w'(0) = 0 for smooth radial profiles
        return dw[..., None] * unit

    def hess_w(self, Y):
        Y = np.asarray(Y, dtype=float)
        n, d = Y.shape
        r = np.linalg.norm(Y, axis=-1)
        dw = self._radial(r, 1)
        ddw = self._radial(r, 2)
        eye = np.eye(d)
        out = np.empty((n, d, d), dtype=complex)
        small = r < 1e-12
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = Y / r[:, None]
        unit[small] = 0.0
        yy = unit[:, :, None] * unit[:, None, :]
        ratio = np.where(small, ddw, dw / np.where(small, 1.0, r))
        out[:] = ddw[:, None, None] * yy + ratio[:, None, None] * (eye - yy)
        out[small] = ddw[small, None, None] * eye
        return out


class RadialMatrixA:
    """Radial coefficient matrix a(y) = a_tt I + (a_rr - a_tt) yhat yhat^T."""

    def __init__(self, rho, a_rr, a_tt, da_rr=None, da_tt=None, tail_constant=None):
        self.rho = np.asarray(rho, dtype=float)
        self.a_rr_samples = np.asarray(a_rr, dtype=complex)
        self.a_tt_samples = np.asarray(a_tt, dtype=complex)
        self.da_rr_samples = None if da_rr is None else np.asarray(da_rr, dtype=complex)
        self.da_tt_samples = None if da_tt is None else np.asarray(da_tt, dtype=complex)
        self._sp_rr = CubicSpline(self.rho, self.a_rr_samples)
        self._sp_tt = CubicSpline(self.rho, self.a_tt_samples)
        self._sp_drr = (
            CubicSpline(self.rho, self.da_rr_samples)
            if self.da_rr_samples is not None
            else self._sp_rr.derivative()
        )
        self._sp_dtt = (
            CubicSpline(self.rho, self.da_tt_samples)
            if self.da_tt_samples is not None
            else self._sp_tt.derivative()
        )
        # constant continuation beyond the grid (fields that settle to a limit)
        self.tail_constant = tail_constant

    def _coeffs(self, r, order):
        out_rr = np.empty(r.shape, dtype=complex)
        out_tt = np.empty(r.shape, dtype=complex)
        inside = r <= self.rho[-1]
        if not np.all(inside) and self.tail_constant is None:
            raise DomainError(
                f"matrix sampler evaluated at rho={r.max():.3g} beyond stored "
                f"range and no tail constant is set"
            )
        rin = np.clip(r[inside], self.rho[0], None)
        if order == 0:
            out_rr[inside] = self._sp_rr(rin)
            out_tt[inside] = self._sp_tt(rin)
            if not np.all(inside):
                out_rr[~inside] = self.tail_constant
                out_tt[~inside] = self.tail_constant
        else:
            out_rr[inside] = self._sp_drr(rin)
            out_tt[inside] = self._sp_dtt(rin)
            if not np.all(inside):
                out_rr[~inside] = 0.0
                out_tt[~inside] = 0.0
        return out_rr, out_tt

    def a(self, Y):
        Y = np.asarray(Y, dtype=float)
        n, d = Y.shape
        r = np.linalg.norm(Y, axis=-1)
        rr, tt = self._coeffs(r, 0)
        small = r < 1e-12
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = Y / r[:, None]
        unit[small] = 0.0
        yy = unit[:, :, None] * unit[:, None, :]
        out = tt[:, None, None] * np.eye(d) + (rr - tt)[:, None, None] * yy
        out[small] = rr[small, None, None] * np.eye(d)
        return out

    def grad_a(self, Y):
        """d_k a_{ij}, returned with index order (point, k, i, j)."""
        Y = np.asarray(Y, dtype=float)
        n, d = Y.shape
        r = np.linalg.norm(Y, axis=-1)
        rr, tt = self._coeffs(r, 0)
        drr, dtt = self._coeffs(r, 1)
        small = r < 1e-12
        rsafe = np.where(small, 1.0, r)
        unit = Y / rsafe[:, None]
        unit[small] = 0.0
        eye = np.eye(d)
        yy = unit[:, :, None] * unit[:, None, :]
        # d_k (yhat_i yhat_j) = (delta_ik yhat_j + delta_jk yhat_i - 2 yhat_i yhat_j yhat_k)/r
        dyy = (
            eye[None, :, :, None] * unit[:, None, None, :]
            + eye[None, :, None, :] * unit[:, None, :, None]
        )
        dyy = np.transpose(dyy, (0, 3, 1, 2))  # -> (n, k, i, j) with delta terms
        dyy = dyy - 2 * yy[:, None, :, :] * unit[:, :, None, None]
        dyy /= rsafe[:, None, None, None]
        out = (
            dtt[:, None, None, None] * unit[:, :, None, None] * eye[None, None, :, :]
            + (drr - dtt)[:, None, None, None] * unit[:, :, None, None] * yy[:, None, :, :]
            + (rr - tt)[:, None, None, None] * dyy
        )
        out[small] = 0.0  # Lipschitz fields: bounded; exact value immaterial at 0
        return out


class CallableW:
    """Amplitude profile from closed-form callables (analytic test pairs)."""

    def __init__(self, w, grad_w=None, hess_w=None):
        self._w = w
        self._grad = grad_w
        self._hess = hess_w

    def w(self, Y):
        return np.asarray(self._w(np.asarray(Y, dtype=float)), dtype=complex)

    def grad_w(self, Y):
        if self._grad is None:
            return None
        return np.asarray(self._grad(np.asarray(Y, dtype=float)), dtype=complex)

    def hess_w(self, Y):
        if self._hess is None:
            return None
        return np.asarray(self._hess(np.asarray(Y, dtype=float)), dtype=complex)

    @property
    def has_grad(self):
        return self._grad is not None

    @property
    def has_hess(self):
        return self._hess is not None


class CallableA:
    """Coefficient matrix from closed-form callables."""

    def __init__(self, a, grad_a=None):
        self._a = a
        self._grad = grad_a

    def a(self, Y):
        return np.asarray(self._a(np.asarray(Y, dtype=float)), dtype=complex)

    def grad_a(self, Y):
        if self._grad is None:
            return None
        return np.asarray(self._grad(np.asarray(Y, dtype=float)), dtype=complex)

    @property
    def has_grad(self):
        return self._grad is not None


class CartesianW:
    """Amplitude profile interpolated from a cartesian grid (cubic)."""

    def __init__(self, axes, w, grad_w=None):
        self.axes = [np.asarray(ax, dtype=float) for ax in axes]
        self.w_samples = np.asarray(w, dtype=complex)
        self.grad_samples = None if grad_w is None else np.asarray(grad_w, dtype=complex)
        method = "cubic"
        self._ip_re = RegularGridInterpolator(self.axes, self.w_samples.real, method=method)
        self._ip_im = RegularGridInterpolator(self.axes, self.w_samples.imag, method=method)
        self._ip_grad = None
        if self.grad_samples is not None:
            self._ip_grad = [
                (
                    RegularGridInterpolator(self.axes, g.real, method=method),
                    RegularGridInterpolator(self.axes, g.imag, method=method),
                )
                for g in self.grad_samples
            ]

    def w(self, Y):
        Y = np.asarray(Y, dtype=float)
        try:
            return self._ip_re(Y) + 1j * self._ip_im(Y)
        except ValueError as exc:
            raise DomainError(f"cartesian sampler out of range: {exc}") from exc

    def grad_w(self, Y):
        if self._ip_grad is None:
            return None
        Y = np.asarray(Y, dtype=float)
        cols = [re(Y) + 1j * im(Y) for re, im in self._ip_grad]
        return np.stack(cols, axis=-1)

    def hess_w(self, Y):
        return None


class CartesianA:
    """Coefficient matrix interpolated entrywise from a cartesian grid."""

    def __init__(self, axes, a, grad_a=None):
        self.axes = [np.asarray(ax, dtype=float) for ax in axes]
        self.a_samples = np.asarray(a, dtype=complex)  # (d, d) + grid
        self.grad_samples = None if grad_a is None else np.asarray(grad_a, dtype=complex)
        d = self.a_samples.shape[0]
        self._ips = [
            [
                (
                    RegularGridInterpolator(self.axes, self.a_samples[i, j].real, method="cubic"),
                    RegularGridInterpolator(self.axes, self.a_samples[i, j].imag, method="cubic"),
                )
                for j in range(d)
            ]
            for i in range(d)
        ]
        self.d = d

    def a(self, Y):
        Y = np.asarray(Y, dtype=float)
        n = Y.shape[0]
        out = np.empty((n, self.d, self.d), dtype=complex)
        try:
            for i in range(self.d):
                for j in range(self.d):
                    re, im = self._ips[i][j]
                    out[:, i, j] = re(Y) + 1j * im(Y)
        except ValueError as exc:
            raise DomainError(f"cartesian sampler out of range: {exc}") from exc
        return out

    def grad_a(self, Y):
        return None


# --------------------------------------------------------------------------
# grid payloads and the pair type
# --------------------------------------------------------------------------


@dataclass
class RadialGridData:
    rho: np.ndarray
    w: np.ndarray
    a_rr: np.ndarray
    a_tt: np.ndarray
    dw: np.ndarray | None = None
    da_rr: np.ndarray | None = None
    da_tt: np.ndarray | None = None
    tail_model: str = "none"


@dataclass
class CartesianGridData:
    axes: list
    w: np.ndarray
    a: np.ndarray
    grad_w: np.ndarray | None = None
    grad_a: np.ndarray | None = None


@dataclass
class ProfilePair:
    """A profile pair (w, a) with its exponent and declared constants.

    ``w`` and ``a`` are sampler objects (see module docstring); ``grid`` is
    the backing payload for grid-based pairs and enables bit-exact
    serialization.
    """

    d: int
    mu: float
    w: object
    a: object
    bounds: EllipticityBounds
    decay: DecayConstants
    provenance: str = "analytic-test"
    grid: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.d < 2:
            raise ValueError(f"dimension must be >= 2, got {self.d}")
        if not (0 < self.mu < self.d / 2):
            raise ValueError(
                f"exponent must satisfy 0 < mu < d/2 = {self.d / 2}, got mu={self.mu}"
            )
        if self.provenance not in ("imported", "synthesized", "analytic-test"):
            raise ValueError(f"unknown provenance {self.provenance!r}")


# --------------------------------------------------------------------------
# file io
# --------------------------------------------------------------------------


def _radial_columns(has_grad_w, has_grad_a):
    cols = ["rho", "w_re", "w_im"]
    if has_grad_w:
        cols += ["dw_re", "dw_im"]
    cols += ["a_rr_re", "a_rr_im", "a_tt_re", "a_tt_im"]
    if has_grad_a:
        cols += ["da_rr_re", "da_rr_im", "da_tt_re", "da_tt_im"]
    return cols


def _cartesian_ncols(d, has_grad_w, has_grad_a):
    return d + 2 + (2 * d if has_grad_w else 0) + 2 * d * d + (2 * d * d * d if has_grad_a else 0)


def save_profile(pair, path):
    """Serialize a grid-backed pair to the documented two-part format."""
    if pair.grid is None:
        raise ValueError("only grid-backed pairs can be saved (pair.grid is None)")
    g = pair.grid
    header = {
        "format_version": 1,
        "d": pair.d,
        "mu": pair.mu,
        "lambda": pair.bounds.lam,
        "Lambda": pair.bounds.Lam,
        "C0": pair.decay.C.get(0, 0.0),
        "C1": pair.decay.C.get(1, 0.0),
        "C2": pair.decay.C.get(2, 0.0),
        "lipschitz_at_zero": pair.decay.lipschitz_at_zero,
        "provenance": pair.provenance,
    }
    if isinstance(g, RadialGridData):
        has_gw = g.dw is not None
        has_ga = g.da_rr is not None
        header.update(
            grid_kind="radial",
            grid_shape=[int(g.rho.size)],
            has_grad_w=has_gw,
            has_grad_a=has_ga,
            tail_model=g.tail_model,
        )
        cols = [g.rho, g.w.real, g.w.imag]
        if has_gw:
            cols += [g.dw.real, g.dw.imag]
        cols += [g.a_rr.real, g.a_rr.imag, g.a_tt.real, g.a_tt.imag]
        if has_ga:
            cols += [g.da_rr.real, g.da_rr.imag, g.da_tt.real, g.da_tt.imag]
        payload = np.stack(cols, axis=1)
    elif isinstance(g, CartesianGridData):
        d = pair.d
        has_gw = g.grad_w is not None
        has_ga = g.grad_a is not None
        shape = [len(ax) for ax in g.axes]
        header.update(
            grid_kind="cartesian",
            grid_shape=shape,
            has_grad_w=has_gw,
            has_grad_a=has_ga,
            tail_model="none",
            axes=[ax.tolist() for ax in g.axes],
        )
        n = int(np.prod(shape))
        mesh = np.meshgrid(*g.axes, indexing="ij")
        cols = [m.reshape(n) for m in mesh]
        cols += [g.w.real.reshape(n), g.w.imag.reshape(n)]
        if has_gw:
            for k in range(d):
                cols += [g.grad_w[k].real.reshape(n), g.grad_w[k].imag.reshape(n)]
        for i in range(d):
            for j in range(d):
                cols += [g.a[i, j].real.reshape(n), g.a[i, j].imag.reshape(n)]
        if has_ga:
            for k in range(d):
                for i in range(d):
                    for j in range(d):
                        cols += [
                            g.grad_a[k, i, j].real.reshape(n),
                            g.grad_a[k, i, j].imag.reshape(n),
                        ]
        payload = np.stack(cols, axis=1)
    else:
        raise TypeError(f"unsupported grid payload {type(g).__name__}")

    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())


def load_profile(path):
    """Load a profile pair, validating format, ranges and finiteness.

    Raises
    ------
    ProfileFormatError
        On bad magic, malformed header, grid/metadata mismatch, or
        non-finite samples; the message names the byte offset or record.
    """
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ProfileFormatError(
                f"{path}: bad magic at offset 0 (expected {MAGIC!r})"
            )
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise ProfileFormatError(
                f"{path}: malformed JSON header at offset {len(MAGIC)}: {exc}"
            ) from exc
        raw = fh.read()

    if header.get("format_version") != 1:
        raise ProfileFormatError(
            f"{path}: unsupported format_version {header.get('format_version')!r}"
        )
    try:
        d = int(header["d"])
        mu = float(header["mu"])
        lam = float(header["lambda"])
        Lam = float(header["Lambda"])
        kind = header["grid_kind"]
        shape = [int(s) for s in header["grid_shape"]]
        has_gw = bool(header["has_grad_w"])
        has_ga = bool(header["has_grad_a"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProfileFormatError(f"{path}: header field error: {exc}") from exc

    if not (0 < mu < d / 2):
        raise ProfileFormatError(
            f"{path}: header range error: mu={mu} violates 0 < mu < d/2 = {d / 2}"
        )

    data = np.frombuffer(raw, dtype="<f8")
    if kind == "radial":
        ncols = len(_radial_columns(has_gw, has_ga))
        n = shape[0]
    elif kind == "cartesian":
        ncols = _cartesian_ncols(d, has_gw, has_ga)
        n = int(np.prod(shape))
    else:
        raise ProfileFormatError(f"{path}: unknown grid_kind {kind!r}")
    if data.size != n * ncols:
        raise ProfileFormatError(
            f"{path}: grid/metadata mismatch: payload has {data.size} floats, "
            f"header implies {n} records x {ncols} columns = {n * ncols}"
        )
    data = data.reshape(n, ncols)
    bad = ~np.isfinite(data)
    if np.any(bad):
        rec, col = np.argwhere(bad)[0]
        raise ProfileFormatError(
            f"{path}: non-finite sample in record {rec}, column {col}"
        )

    bounds = EllipticityBounds(lam=lam, Lam=Lam)
    decay = DecayConstants(
        C={0: float(header["C0"]), 1: float(header["C1"]), 2: float(header["C2"])},
        lipschitz_at_zero=float(header["lipschitz_at_zero"]),
    )

    if kind == "radial":
        c = 0
        rho = data[:, c]; c += 1
        w = data[:, c] + 1j * data[:, c + 1]; c += 2
        dw = None
        if has_gw:
            dw = data[:, c] + 1j * data[:, c + 1]; c += 2
        a_rr = data[:, c] + 1j * data[:, c + 1]; c += 2
        a_tt = data[:, c] + 1j * data[:, c + 1]; c += 2
        da_rr = da_tt = None
        if has_ga:
            da_rr = data[:, c] + 1j * data[:, c + 1]; c += 2
            da_tt = data[:, c] + 1j * data[:, c + 1]; c += 2
        if np.any(np.diff(rho) <= 0):
            raise ProfileFormatError(f"{path}: radial grid not strictly increasing")
        tail = header.get("tail_model", "none")
        grid = RadialGridData(rho=rho, w=w, a_rr=a_rr, a_tt=a_tt, dw=dw,
                              da_rr=da_rr, da_tt=da_tt, tail_model=tail)
        wsamp = RadialW(rho, w, dw=dw, mu=mu, tail_model=tail)
        tail_const = complex(a_rr[-1]) if tail != "none" else None
        asamp = RadialMatrixA(rho, a_rr, a_tt, da_rr=da_rr, da_tt=da_tt,
                              tail_constant=tail_const)
    else:
        axes = [np.asarray(ax, dtype=float) for ax in header["axes"]]
        if [len(ax) for ax in axes] != shape:
            raise ProfileFormatError(f"{path}: axes do not match grid_shape")
        c = d
        w = (data[:, c] + 1j * data[:, c + 1]).reshape(shape); c += 2
        grad_w = None
        if has_gw:
            grad_w = np.empty((d, *shape), dtype=complex)
            for k in range(d):
                grad_w[k] = (data[:, c] + 1j * data[:, c + 1]).reshape(shape); c += 2
        a = np.empty((d, d, *shape), dtype=complex)
        for i in range(d):
            for j in range(d):
                a[i, j] = (data[:, c] + 1j * data[:, c + 1]).reshape(shape); c += 2
        grad_a = None
        if has_ga:
            grad_a = np.empty((d, d, d, *shape), dtype=complex)
            for k in range(d):
                for i in range(d):
                    for j in range(d):
                        grad_a[k, i, j] = (data[:, c] + 1j * data[:, c + 1]).reshape(shape)
                        c += 2
        grid = CartesianGridData(axes=axes, w=w, a=a, grad_w=grad_w, grad_a=grad_a)
        wsamp = CartesianW(axes, w, grad_w=grad_w)
        asamp = CartesianA(axes, a, grad_a=grad_a)

    return ProfilePair(
        d=d, mu=mu, w=wsamp, a=asamp, bounds=bounds, decay=decay,
        provenance=header.get("provenance", "imported"), grid=grid,
        meta={"path": str(path)},
    )


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


@dataclass
class ValidationTolerances:
    """Knobs of the profile validator."""

    fd_step: float = 1e-4          # central-difference step for derivatives
    origin_radius: float = 1e-3    # excluded ball around y = 0
    residual_gate: float = 1e-4    # relative gate: residual_sup <= gate * sup|w|
    bound_slack: float = 1.05      # measured <= declared * slack passes

    def __post_init__(self):
        if self.fd_step <= 0 or self.origin_radius <= 0 or self.residual_gate <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class ValidationReport:
    """Measured constants and checks for one profile pair."""

    residual_sup: float
    residual_l2: float
    ellipticity_ok: bool
    ellipticity_witness: dict
    decay_ok: bool
    decay_witness: dict
    C_dw: float
    sup_w: float
    measured: dict
    notes: list

    def passes_residual_gate(self, rel_gate=1e-4):
        """Residual gate relative to sup|w|; degenerate pairs never pass."""
        if self.sup_w == 0.0:
            return False
        return self.residual_sup <= rel_gate * self.sup_w

    @property
    def validated(self):
        return (
            self.ellipticity_ok and self.decay_ok and self.passes_residual_gate()
        )

    def summary(self):
        return (
            f"residual_sup={self.residual_sup:.3e} (sup|w|={self.sup_w:.3e}), "
            f"residual_l2={self.residual_l2:.3e}, "
            f"ellipticity_ok={self.ellipticity_ok}, decay_ok={self.decay_ok}, "
            f"C_dw={self.C_dw:.3e}"
        )


def default_sampleset(d, r_min=1e-3, r_max=8.0, n_radial=60, n_angular=24, seed=0):
    """Radial shells of sample points avoiding the origin ball.

    Shells are log-spaced in [r_min, 1] and linearly spaced in [1, r_max];
    directions are equispaced (2D) or seeded-random unit vectors (3D).
    """
    radii = np.concatenate(
        [
            np.geomspace(r_min, 1.0, n_radial // 2, endpoint=False),
            np.linspace(1.0, r_max, n_radial - n_radial // 2),
        ]
    )
    if d == 2:
        th = 2 * np.pi * np.arange(n_angular) / n_angular
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
    else:
        rng = np.random.default_rng(seed)
        v = rng.normal(size=(n_angular, d))
        dirs = v / np.linalg.norm(v, axis=1, keepdims=True)
    pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    return pts


def _grad_w_of(pair, Y, h):
    gw = getattr(pair.w, "grad_w", None)
    if gw is not None:
        out = gw(Y)
        if out is not None:
            return out
    n, d = Y.shape
    out = np.empty((n, d), dtype=complex)
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        out[:, k] = (pair.w.w(Y + e) - pair.w.w(Y - e)) / (2 * h)
    return out


def _div_a_grad_w(pair, Y, h, mode):
    """div(a grad w) at points Y, analytic when accessible else central FD."""
    n, d = Y.shape
    analytic = False
    if mode in ("auto", "analytic"):
        hw = getattr(pair.w, "hess_w", None)
        ga = getattr(pair.a, "grad_a", None)
        if hw is not None and ga is not None:
            H = hw(Y)
            G = ga(Y)
            analytic = H is not None and G is not None
        if mode == "analytic" and not analytic:
            raise ValueError("pair lacks analytic second-derivative access")
    if analytic:
        A = pair.a.a(Y)
        gw = _grad_w_of(pair, Y, h)
        # G[n, k, i, j] = d_k a_{ij}; need sum_{k,l} (d_k a_{kl}) (d_l w)
        term1 = np.einsum("nkkl,nl->n", G, gw)
        term2 = np.einsum("nkl,nkl->n", A, H)
        return term1 + term2

    def flux(Z):
        gw = _grad_w_of(pair, Z, h)
        return np.einsum("nkl,nl->nk", pair.a.a(Z), gw)

    out = np.zeros(n, dtype=complex)
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        out += (flux(Y + e)[:, k] - flux(Y - e)[:, k]) / (2 * h)
    return out


def profile_residual(pair, Y, tolerances=None, mode="auto"):
    """Residual R(y) = div(a grad w) - (1/2) y.grad w - ((mu+i)/2) w."""
    tol = tolerances or ValidationTolerances()
    Y = _as_points(Y, pair.d)
    h = tol.fd_step
    div_term = _div_a_grad_w(pair, Y, h, mode)
    gw = _grad_w_of(pair, Y, h)
    transport = 0.5 * np.einsum("nk,nk->n", Y.astype(complex), gw)
    reaction = (pair.mu + 1j) / 2 * pair.w.w(Y)
    return div_term - transport - reaction


def _hermitian_min_eig(A):
    """Smallest eigenvalue and eigenvector of the Hermitian part, per point."""
    H = 0.5 * (A + np.conjugate(np.transpose(A, (0, 2, 1))))
    vals, vecs = np.linalg.eigh(H)
    return vals[:, 0], vecs[:, :, 0]


def validate_profile(pair, sampleset=None, tolerances=None, mode="auto"):
    """Measure the profile-equation residual and the standing constants.

    Parameters
    ----------
    pair : ProfilePair
    sampleset : (n, d) points avoiding |y| < tolerances.origin_radius;
        defaults to :func:`default_sampleset`.
    mode : "auto" | "analytic" | "fd" derivative handling for div(a grad w)

    Returns
    -------
    ValidationReport
    """
    tol = tolerances or ValidationTolerances()
    if sampleset is None:
        sampleset = default_sampleset(pair.d)
    Y = _as_points(sampleset, pair.d)
    r = np.linalg.norm(Y, axis=1)
    if np.any(r < tol.origin_radius):
        raise ValueError(
            f"sampleset contains points inside the excluded origin ball "
            f"(|y| < {tol.origin_radius}); w is only Lipschitz at 0"
        )
    notes = []

    R = profile_residual(pair, Y, tolerances=tol, mode=mode)
    residual_sup = float(np.max(np.abs(R)))
    residual_l2 = float(np.sqrt(np.mean(np.abs(R) ** 2)))

    wvals = pair.w.w(Y)
    sup_w = float(np.max(np.abs(wvals)))
    if sup_w == 0.0:
        notes.append("degenerate: zero profile (w == 0 on the sample set)")

    # ellipticity: exact pointwise coercivity via the Hermitian part
    A = pair.a.a(Y)
    coer, vecs = _hermitian_min_eig(A)
    iworst = int(np.argmin(coer))
    opnorm = np.linalg.norm(A, ord=2, axis=(1, 2))
    ibound = int(np.argmax(opnorm))
    ellipticity_ok = bool(
        coer[iworst] >= pair.bounds.lam / tol.bound_slack
        and opnorm[ibound] <= pair.bounds.Lam * tol.bound_slack
    )
    ellipticity_witness = {
        "y": Y[iworst].tolist(),
        "xi": vecs[iworst].tolist(),
        "coercivity": float(coer[iworst]),
        "max_opnorm": float(opnorm[ibound]),
        "y_opnorm": Y[ibound].tolist(),
    }

    # decay bounds on |y| >= 1 (vectorized; must agree with a brute scan)
    gw = _grad_w_of(pair, Y, tol.fd_step)
    ga = getattr(pair.a, "grad_a", None)
    Ga = ga(Y) if ga is not None else None
    far = r >= 1.0
    measured = {
        "lambda_min": float(coer[iworst]),
        "Lambda_max": float(opnorm[ibound]),
        "C0": sup_w,
    }
    decay_ok = True
    decay_witness = {}
    if np.any(far):
        c1w = np.abs(gw[far]).max(axis=1) * r[far] ** (1.0 + pair.mu)
        c0w = np.abs(wvals[far]) * r[far] ** pair.mu
        measured["C0_far_w"] = float(c0w.max())
        measured["C1_w"] = float(c1w.max())
        j = int(np.argmax(c1w))
        decay_witness["w_grad"] = {
            "y": Y[far][j].tolist(),
            "measured": float(c1w[j]),
            "declared": pair.decay.C.get(1, np.inf),
        }
        decl0 = pair.decay.C.get(0, np.inf)
        decl1 = pair.decay.C.get(1, np.inf)
        decay_ok = decay_ok and bool(c0w.max() <= decl0 * tol.bound_slack)
        decay_ok = decay_ok and bool(c1w.max() <= decl1 * tol.bound_slack)
        if Ga is not None:
            c1a = np.abs(Ga[far]).reshape(far.sum(), -1).max(axis=1) * r[far]
            measured["C1_a"] = float(c1a.max())
            decay_ok = decay_ok and bool(c1a.max() <= decl1 * tol.bound_slack)
    decay_ok = decay_ok and bool(sup_w <= pair.decay.C.get(0, np.inf) * tol.bound_slack)

    # Lipschitz constant at 0 from difference quotients on the r0 sphere
    r0 = tol.origin_radius
    m = 16
    if pair.d == 2:
        th = 2 * np.pi * np.arange(m) / m
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
    else:
        rng = np.random.default_rng(1)
        v = rng.normal(size=(m, pair.d))
        dirs = v / np.linalg.norm(v, axis=1, keepdims=True)
    try:
        w_in = pair.w.w(r0 * dirs)
        w_out = pair.w.w(2 * r0 * dirs)
        radial_q = np.abs(w_out - w_in) / r0
        tang_q = np.abs(np.diff(np.concatenate([w_in, w_in[:1]]))) / (
            r0 * np.linalg.norm(dirs[1] - dirs[0])
        )
        measured["lipschitz_at_zero"] = float(max(radial_q.max(), tang_q.max()))
    except DomainError:
        notes.append("origin sphere outside sampler domain; Lipschitz estimate skipped")

    # C_dw = |B_1|^{1/2} sup_{B_1}(|w| + |grad w|), on samples with |y| <= 1
    near = r <= 1.0
    if np.any(near):
        C_dw = float(
            np.sqrt(unit_ball_volume(pair.d))
            * np.max(np.abs(wvals[near]) + np.linalg.norm(np.abs(gw[near]), axis=1))
        )
    else:
        C_dw = float("nan")
        notes.append("no samples inside the unit ball; C_dw not measured")

    return ValidationReport(
        residual_sup=residual_sup,
        residual_l2=residual_l2,
        ellipticity_ok=ellipticity_ok,
        ellipticity_witness=ellipticity_witness,
        decay_ok=decay_ok,
        decay_witness=decay_witness,
        C_dw=C_dw,
        sup_w=sup_w,
        measured=measured,
        notes=notes,
    )
