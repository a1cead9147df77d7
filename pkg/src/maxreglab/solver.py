"""Variational theta-scheme solver for u' - div(B grad u) = f, u(0) = 0.

Spatial discretization: flux-form finite differences on a uniform Cartesian
grid over [-L, L]^d with homogeneous Dirichlet walls.  Diagonal coefficients
B_kk are evaluated at cell faces; mixed terms d_k(B_kl d_l u), k != l, use
nodal coefficients with centered differences.  With this assembly the
stiffness matrix satisfies K(B)^H = K(B^*) exactly, so the backward dual
stepping operator is the exact adjoint of the forward one at theta = 1 and
identical midpoint sampling -- the discrete counterpart of the time-reflected
adjoint-coefficient problem.

Time stepping: theta in [1/2, 1] (implicit Euler by default) on a mesh that
is either uniform or dyadically graded toward t = 1 with a fixed number of
steps per block [1 - 2^-j, 1 - 2^-j-1]; B and f are sampled at step
midpoints.  Linear systems are solved by sparse LU on the moderate desk-scale
grids this package targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "Discretization",
    "DiscreteField",
    "DualBundle",
    "build_discretization",
    "assemble_stiffness",
    "solve_forward",
    "solve_dual",
    "energy_check",
    "discrete_l2",
    "discrete_h1",
    "discrete_hminus1",
]


@dataclass
class Discretization:
    """Grid, graded time mesh and scheme parameters.

    The abstract triple is V = H^1, H = L^2, V* = H^-1 on the truncated box;
    the operator is v -> -div(B grad v) with Dirichlet walls.
    """

    d: int
    L: float
    h: float
    time_mesh: np.ndarray
    theta: float = 1.0
    spaces: dict = field(default_factory=lambda: {"V": "H1", "H": "L2", "V*": "H-1"})

    def __post_init__(self):
        if self.h <= 0 or self.L <= 0:
            raise ValueError("box half-width and spacing must be positive")
        if not (0.5 <= self.theta <= 1.0):
            raise ValueError(f"theta must lie in [1/2, 1], got {self.theta}")
        t = np.asarray(self.time_mesh, dtype=float)
        if t.ndim != 1 or t.size < 2 or t[0] != 0.0:
            raise ValueError("time mesh must start at 0 and have >= 1 step")
        if np.any(np.diff(t) <= 0):
            raise ValueError("time mesh must be strictly increasing")
        if t[-1] >= 1.0:
            raise ValueError(f"T_max must satisfy T_max < 1, got {t[-1]}")
        self.time_mesh = t
        n_side = int(round(2 * self.L / self.h)) - 1
        if n_side < 1:
            raise ValueError("grid has no interior nodes")
        self.n_side = n_side
        self.axis = -self.L + self.h * np.arange(1, n_side + 1)
        self.n_nodes = n_side**self.d
        mesh = np.meshgrid(*([self.axis] * self.d), indexing="ij")
        self.nodes = np.stack([m.ravel() for m in mesh], axis=1)

    @property
    def T_max(self):
        return float(self.time_mesh[-1])

    @property
    def n_steps(self):
        return len(self.time_mesh) - 1

    def dt(self):
        return np.diff(self.time_mesh)

    def midpoints(self):
        return 0.5 * (self.time_mesh[:-1] + self.time_mesh[1:])

    def face_points(self, k):
        """Face centers shifted by +h/2 along axis k, including the boundary
        face below the first node; shape (n_side+1)^... per-axis layout."""
        ax_f = np.concatenate([[self.axis[0] - self.h], self.axis]) + self.h / 2
        axes = [self.axis] * self.d
        axes[k] = ax_f
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass
class DiscreteField:
    """Complex nodal values per time level on a Discretization."""

    disc: Discretization
    values: np.ndarray  # (n_levels, n_nodes)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (len(self.disc.time_mesh), self.disc.n_nodes):
            raise ValueError(
                f"values shape {self.values.shape} does not match mesh "
                f"({len(self.disc.time_mesh)}, {self.disc.n_nodes})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("discrete field contains non-finite entries")

    def at_level(self, k):
        return self.values[k]


@dataclass
class DualBundle:
    """Dual solve result with its transformation record."""

    g_loads: np.ndarray       # (n_steps, n_nodes) loads paired with steps
    v: DiscreteField          # v[k] at time t_k; v at the terminal time is 0
    transformation: dict


def build_discretization(
    d, L=3.0, h=1.0 / 32, theta=1.0, T_max=None, blocks=None, steps_per_block=8,
    n_steps=None, resolution_guard=True,
):
    """Build box grid and time mesh.

    Either a dyadic graded mesh (``blocks`` J and ``steps_per_block`` M:
    each block [1-2^-j, 1-2^(-j-1)], j < J, gets M uniform steps, ending at
    T_max = 1 - 2^-J) or a uniform mesh (``T_max`` and ``n_steps``).

    The guard 1 - T_max >= h^2 refuses runs whose final collapse scale
    (1-t)^{1/2} falls below the grid resolution.
    """
    if blocks is not None:
        edges = [0.0]
        for j in range(blocks):
            lo, hi = 1 - 2.0 ** (-j), 1 - 2.0 ** (-j - 1)
            step = (hi - lo) / steps_per_block
            edges.extend(lo + step * (i + 1) for i in range(steps_per_block))
        mesh = np.array(edges)
    else:
        if T_max is None or n_steps is None:
            raise ValueError("need either blocks or (T_max, n_steps)")
        if T_max >= 1.0:
            raise ValueError(f"T_max must satisfy T_max < 1, got {T_max}")
        mesh = np.linspace(0.0, T_max, n_steps + 1)
    if resolution_guard and 1.0 - mesh[-1] < h**2 * (1 - 1e-12):
        raise ValueError(
            f"resolution guard: 1 - T_max = {1 - mesh[-1]:.3e} < h^2 = {h**2:.3e}; "
            f"the grid cannot resolve the (1-t)^(1/2) collapse scale"
        )
    return Discretization(d=d, L=L, h=h, time_mesh=mesh, theta=theta)


def _shift_matrix(n, offset):
    """1-d shift with zero (Dirichlet) padding."""
    return sp.diags([np.ones(n - abs(offset))], [offset], shape=(n, n), format="csr")


def _identity_factors(disc, k):
    """Kronecker factors placing a 1-d operator on axis k."""
    n = disc.n_side
    mats = [sp.identity(n, format="csr")] * disc.d
    return mats, n


def _kron_axis(disc, op1d, k):
    mats, _ = _identity_factors(disc, k)
    mats = list(mats)
    mats[k] = op1d
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out


def centered_difference(disc, k):
    """Centered difference matrix D_k^c with Dirichlet padding (antisymmetric)."""
    n = disc.n_side
    D = (_shift_matrix(n, 1) - _shift_matrix(n, -1)) / (2 * disc.h)
    return _kron_axis(disc, D, k)


def _face_values(B_sampler, t_star, disc, k):
    """B(t*, .)_kk at the (n_side+1) faces along axis k, reshaped per node."""
    pts = disc.face_points(k)
    vals = B_sampler(t_star, pts)[:, k, k]
    shape = [disc.n_side] * disc.d
    shape[k] += 1
    return vals.reshape(shape)


def assemble_stiffness(B_sampler, t_star, disc):
    """Sparse matrix of v -> -div(B(t*) grad v) on interior nodes.

    ``B_sampler(t, X)`` must return (n, d, d) complex matrices.  The assembly
    satisfies assemble(B)^H == assemble(x -> B(x)^*) exactly.
    """
    d, n, h = disc.d, disc.n_side, disc.h
    shape_nodes = [n] * d
    rows = []
    # diagonal flux part, face-evaluated coefficients
    diag_total = np.zeros(disc.n_nodes, dtype=complex)
    mats = []
    for k in range(d):
        F = _face_values(B_sampler, t_star, disc, k)  # faces along axis k
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[k] = slice(0, n)      # face below node i (i-1/2)
        hi[k] = slice(1, n + 1)  # face above node i (i+1/2)
        Blo = F[tuple(lo)].reshape(-1)
        Bhi = F[tuple(hi)].reshape(-1)
        diag_total += (Blo + Bhi) / h**2
        # off-diagonal couplings along axis k: -B_{i+1/2}/h^2 to the upper
        # neighbor, -B_{i-1/2}/h^2 to the lower one
        stride = int(np.prod(shape_nodes[k + 1:]))
        idx = np.arange(disc.n_nodes)
        multi = np.unravel_index(idx, shape_nodes)
        has_up = multi[k] < n - 1
        r = idx[has_up]
        c = r + stride
        vals_up = -Bhi[has_up] / h**2
        vals_dn = -Bhi[has_up] / h**2  # B at face i+1/2 == face (i+1)-1/2
        mats.append(sp.coo_matrix((vals_up, (r, c)), shape=(disc.n_nodes,) * 2))
        mats.append(sp.coo_matrix((vals_dn, (c, r)), shape=(disc.n_nodes,) * 2))
    K = sp.diags(diag_total, format="csr")
    for m in mats:
        K = K + m.tocsr()
    # mixed terms: -D_k^c diag(B_kl) D_l^c, k != l, nodal coefficients
    if d > 1:
        Bn = B_sampler(t_star, disc.nodes)
        for k in range(d):
            Dk = centered_difference(disc, k)
            for l in range(d):
                if l == k:
                    continue
                coef = Bn[:, k, l]
                if np.max(np.abs(coef)) == 0.0:
                    continue
                Dl = centered_difference(disc, l)
                K = K - Dk @ sp.diags(coef) @ Dl
    return K.tocsr()


def _load_vector(f, t_star, disc):
    """Midpoint-sampled load; accepts a sampler f(t, X), an array of per-step
    loads handled by the caller, or None."""
    if f is None:
        return np.zeros(disc.n_nodes, dtype=complex)
    return np.asarray(f(t_star, disc.nodes), dtype=complex)


def _step_loads(f, disc):
    mids = disc.midpoints()
    if f is None:
        return np.zeros((disc.n_steps, disc.n_nodes), dtype=complex)
    if isinstance(f, np.ndarray):
        F = np.asarray(f, dtype=complex)
        if F.shape != (disc.n_steps, disc.n_nodes):
            raise ValueError(
                f"per-step load array must have shape ({disc.n_steps}, "
                f"{disc.n_nodes}), got {F.shape}"
            )
        return F
    return np.stack([_load_vector(f, t, disc) for t in mids])


def _coerce_B(B):
    """Accept a CoefficientField, a sampler B(t, X), or a constant matrix."""
    if hasattr(B, "B"):
        sampler = B.B
        time_independent = getattr(B, "time_independent", False)
        return sampler, time_independent
    if isinstance(B, np.ndarray):
        mat = np.asarray(B, dtype=complex)

        def sampler(t, X):
            return np.broadcast_to(mat, (X.shape[0], *mat.shape)).copy()

        return sampler, True
    return B, getattr(B, "time_independent", False)


def solve_forward(B, f, disc, return_loads=False):
    """Theta-scheme solve of the discrete weak form.

    Each step solves (M + theta dt K(t*)) u_{k+1} =
    (M - (1-theta) dt K(t*)) u_k + dt F(t*) with the mass matrix M = I
    (lumped, nodal basis), K assembled from B at the step midpoint and F the
    midpoint-sampled load.  Sparse LU; raises on non-finite solutions.
    """
    sampler, time_indep = _coerce_B(B)
    loads = _step_loads(f, disc)
    mids = disc.midpoints()
    dts = disc.dt()
    n = disc.n_nodes
    u = np.zeros((disc.n_steps + 1, n), dtype=complex)
    lu = None
    K = None
    last_dt = None
    for k in range(disc.n_steps):
        if K is None or not time_indep:
            K = assemble_stiffness(sampler, mids[k], disc)
            lu = None
        if lu is None or dts[k] != last_dt:
            A = sp.identity(n, format="csr", dtype=complex) + disc.theta * dts[k] * K
            lu = spla.splu(A.tocsc())
            last_dt = dts[k]
        rhs = u[k] + dts[k] * loads[k]
        if disc.theta < 1.0:
            rhs = rhs - (1 - disc.theta) * dts[k] * (K @ u[k])
        u[k + 1] = lu.solve(rhs)
        if not np.all(np.isfinite(u[k + 1])):
            raise RuntimeError(
                f"forward solve produced non-finite values at step {k + 1} "
                f"(t = {disc.time_mesh[k + 1]:.6f})"
            )
    fld = DiscreteField(disc=disc, values=u)
    if return_loads:
        return fld, loads
    return fld


def solve_dual(B, g, disc, return_loads=False):
    """Backward adjoint solve: the exact discrete adjoint of solve_forward.

    Continuous picture: reflect time, take A = (B reflected)^*, solve with
    zero value at the reflected start, map back.  Discretely (theta = 1),
    v_j solves (I + dt_j K_j^H) v_j = v_{j+1} + dt_j G_j backward from
    j = N with v_{N+1} = 0, where K_j is the forward midpoint stiffness; the
    identity sum_k dt_k <u_k, G_k> = sum_j dt_j <F_j, v_j> then holds to
    solver precision.  Returned v is indexed by time level with v[j-1] = v_j
    (left-endpoint association) and v at the final time equal to zero.
    """
    if disc.theta != 1.0:
        raise ValueError("exact adjoint stepping requires theta = 1")
    sampler, time_indep = _coerce_B(B)
    loads = _step_loads(g, disc)
    mids = disc.midpoints()
    dts = disc.dt()
    n = disc.n_nodes
    v_levels = np.zeros((disc.n_steps + 1, n), dtype=complex)
    v_next = np.zeros(n, dtype=complex)
    lu = None
    last_dt = None
    for j in range(disc.n_steps - 1, -1, -1):
        if lu is None or not time_indep or dts[j] != last_dt:
            K = assemble_stiffness(sampler, mids[j], disc)
            A = sp.identity(n, format="csr", dtype=complex) + dts[j] * K
            lu = spla.splu(A.tocsc().conjugate().transpose().tocsc())
            last_dt = dts[j]
        v_j = lu.solve(v_next + dts[j] * loads[j])
        if not np.all(np.isfinite(v_j)):
            raise RuntimeError(f"dual solve produced non-finite values at step {j}")
        v_levels[j] = v_j
        v_next = v_j
    v = DiscreteField(disc=disc, values=v_levels)
    bundle = DualBundle(
        g_loads=loads,
        v=v,
        transformation={
            "time_reflection": "t <-> -t, translated back to (0, T)",
            "coefficient": "A = (B~)^*, conjugate transpose of time-reversed B",
            "terminal_condition": "v(T) = 0",
            "midpoint_sampling": "same step midpoints as the forward scheme",
        },
    )
    if return_loads:
        return bundle, loads
    return bundle


# --------------------------------------------------------------------------
# discrete norms (shared with the analysis module)
# --------------------------------------------------------------------------


def discrete_l2(values, disc):
    """Discrete L^2 norm: (h^d sum |v_i|^2)^(1/2)."""
    return float(np.sqrt(disc.h**disc.d * np.sum(np.abs(values) ** 2)))


def face_gradient_sq(values, disc):
    """h^d sum over faces |difference quotient|^2, boundary faces included.

    Chosen so that (K_Laplace v, v)_h == ||grad_h v||_h^2 exactly.
    """
    d, n, h = disc.d, disc.n_side, disc.h
    v = np.asarray(values).reshape([n] * d)
    total = 0.0
    for k in range(d):
        pad_shape = list(v.shape)
        pad_shape[k] = 1
        z = np.zeros(pad_shape, dtype=v.dtype)
        ext = np.concatenate([z, v, z], axis=k)
        diff = np.diff(ext, axis=k) / h
        total += np.sum(np.abs(diff) ** 2)
    return h**d * total


def discrete_h1(values, disc):
    """(||v||_L2^2 + ||grad_h v||^2)^(1/2) with face gradients."""
    return float(np.sqrt(disc.h**disc.d * np.sum(np.abs(values) ** 2)
                         + face_gradient_sq(values, disc)))


class _RieszCache:
    """Factorization of (-Laplace_h + I) per discretization."""

    def __init__(self):
        self._cache = {}

    def __call__(self, disc):
        key = (disc.d, disc.n_side, disc.h)
        if key not in self._cache:
            eye = np.eye(disc.d)

            def identity_sampler(t, X):
                return np.broadcast_to(eye, (X.shape[0], disc.d, disc.d)).copy()

            K = assemble_stiffness(identity_sampler, 0.0, disc)
            A = (K + sp.identity(disc.n_nodes, format="csr")).real
            self._cache[key] = spla.splu(sp.csc_matrix(A))
        return self._cache[key]


_riesz = _RieszCache()


def discrete_hminus1(values, disc):
    """Riesz-map H^-1 norm: ||phi||_H1 where (-Laplace_h + 1) phi = values."""
    lu = _riesz(disc)
    phi = lu.solve(np.asarray(values, dtype=complex))
    # ||phi||_H1^2 = ((-Lap+1) phi, phi) = (values, phi), kept in that form
    val = disc.h**disc.d * np.vdot(phi, np.asarray(values, dtype=complex)).real
    return float(np.sqrt(max(val, 0.0)))


def energy_check(u, B, f, disc, lam=None):
    """Discrete energy inequality lambda ||u||^2_{L2 H1} <= ||f||_{L2 H-1} ||u||_{L2 H1}.

    Obtained by testing the theta = 1 scheme with u_{k+1}; both sides use
    right-endpoint time quadrature with the graded steps.  Returns both
    sides and the margin.
    """
    if disc.theta != 1.0:
        raise ValueError("energy check requires a theta = 1 solve")
    if u.disc is not disc and u.disc.time_mesh.shape != disc.time_mesh.shape:
        raise ValueError("field and discretization meshes do not match")
    if lam is None:
        lam = getattr(B, "bounds", None)
        lam = lam.lam if lam is not None else None
    if lam is None:
        raise ValueError("coercivity constant lambda unavailable; pass lam=")
    loads = _step_loads(f, disc)
    dts = disc.dt()
    h1_sq = np.array([discrete_h1(u.values[k + 1], disc) ** 2 for k in range(disc.n_steps)])
    hm1_sq = np.array([discrete_hminus1(loads[k], disc) ** 2 for k in range(disc.n_steps)])
    u_l2h1 = float(np.sqrt(np.sum(dts * h1_sq)))
    f_l2hm1 = float(np.sqrt(np.sum(dts * hm1_sq)))
    lhs = lam * u_l2h1**2
    rhs = f_l2hm1 * u_l2h1
    return {
        "lambda": float(lam),
        "u_L2H1": u_l2h1,
        "f_L2Hm1": f_l2hm1,
        "lhs": lhs,
        "rhs": rhs,
        "margin": rhs - lhs,
        "holds": bool(lhs <= rhs * (1 + 1e-12)),
    }
