"""Tensor-product Q1 finite elements on the truncated cylinder ``(0, l) x (0, Y)``.

Degrees of freedom are the mesh nodes off the Dirichlet boundary (lateral
sides and the top ``y = Y``). Node ``(x_i, y_k)`` with ``1 <= i <= Mx - 1``
and ``0 <= k <= M - 1`` has index ``k (Mx - 1) + (i - 1)``, so the first
``Mx - 1`` indices are the trace nodes on ``y = 0``.

The bilinear form is
``a_Y(w, v) = (1/d_s) int y^alpha (grad w . grad v + c w v)``.
Every matrix is a Kronecker product of 1D matrices, and the weighted 1D
matrices are integrated in closed form.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, TextIO

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from fracheat.quadrature import gauss_jacobi, tensor_gauss
from fracheat.spectral import FractionalParams, SpectralData, hs_norm_from_lambdas, profile_arrays

logger = logging.getLogger(__name__)

#: relative step h/a below which shifted moments switch to the binomial series
_SERIES_SWITCH = 0.5


class GradingWarning(UserWarning):
    """The y-grading exponent violates ``mu > 3 / (1 - alpha)``."""


# {{{ mesh


def grading_threshold(alpha: float) -> float:
    return 3.0 / (1.0 - alpha)


def default_grading(alpha: float) -> float:
    return max(grading_threshold(alpha) + 0.5, 2.0)


def graded_nodes(M: int, mu: float, Y: float, alpha: float | None = None) -> np.ndarray:
    """``y_k = (k / M)^mu Y`` for ``k = 0..M``.

    When ``alpha`` is given, a :class:`GradingWarning` is issued if ``mu``
    does not exceed ``3 / (1 - alpha)``.
    """
    if M < 1:
        raise ValueError(f"M must be positive: got {M}")
    if mu < 1.0:
        raise ValueError(f"grading exponent must be >= 1: got {mu}")
    if Y <= 0.0:
        raise ValueError(f"Y must be positive: got {Y}")
    if alpha is not None and mu <= grading_threshold(alpha):
        warnings.warn(
            f"grading exponent {mu:g} <= 3/(1-alpha) = {grading_threshold(alpha):g}",
            GradingWarning,
            stacklevel=2,
        )
    nodes = (np.arange(M + 1) / M) ** mu * Y
    nodes[-1] = Y
    return nodes


@dataclass(frozen=True, eq=False)
class GradedTensorMesh:
    """Uniform partition in ``x`` times a graded partition in ``y``."""

    x_nodes: np.ndarray = field(repr=False)
    y_nodes: np.ndarray = field(repr=False)
    mu: float
    Y: float

    @classmethod
    def build(
        cls,
        M: int,
        Y: float,
        mu: float,
        *,
        length: float = 1.0,
        Mx: int | None = None,
        alpha: float | None = None,
    ) -> GradedTensorMesh:
        Mx = M if Mx is None else Mx
        if Mx < 2:
            raise ValueError(f"need at least two x-intervals: got {Mx}")
        x = np.linspace(0.0, length, Mx + 1)
        y = graded_nodes(M, mu, Y, alpha)
        return cls(x, y, float(mu), float(Y))

    @classmethod
    def for_params(
        cls, M: int, Y: float, params: FractionalParams, mu: float | None = None, Mx: int | None = None
    ) -> GradedTensorMesh:
        mu = default_grading(params.alpha) if mu is None else mu
        return cls.build(M, Y, mu, length=params.domain_length, Mx=Mx, alpha=params.alpha)

    @property
    def Mx(self) -> int:
        return self.x_nodes.size - 1

    @property
    def M(self) -> int:
        return self.y_nodes.size - 1

    @property
    def length(self) -> float:
        return float(self.x_nodes[-1])

    @property
    def hx(self) -> float:
        return self.length / self.Mx

    @property
    def n_trace(self) -> int:
        return self.Mx - 1

    @property
    def n_free(self) -> int:
        return (self.Mx - 1) * self.M

    @property
    def trace_dofs(self) -> np.ndarray:
        return np.arange(self.n_trace)

    @property
    def trace_nodes(self) -> np.ndarray:
        return self.x_nodes[1:-1]

    def dof(self, i: int, k: int) -> int:
        """Index of node ``(x_i, y_k)``; raises for Dirichlet nodes."""
        if not (1 <= i <= self.Mx - 1 and 0 <= k <= self.M - 1):
            raise IndexError(f"node ({i}, {k}) is not a free node")
        return k * (self.Mx - 1) + (i - 1)

    def y_ratio(self) -> float:
        """Largest ratio between neighboring y-interval lengths."""
        h = np.diff(self.y_nodes)
        r = h[1:] / h[:-1]
        return float(np.max(np.maximum(r, 1.0 / r)))

    def full_field(self, vec: np.ndarray) -> np.ndarray:
        """Nodal values on all nodes, shape ``(M + 1, Mx + 1)``, zero on the Dirichlet boundary."""
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.n_free,):
            raise ValueError(f"expected {self.n_free} coefficients, got shape {vec.shape}")
        full = np.zeros((self.M + 1, self.Mx + 1))
        full[: self.M, 1 : self.Mx] = vec.reshape(self.M, self.Mx - 1)
        return full

    def dump_nodes(self, out: TextIO) -> None:
        """Write the free nodes as ``dof x y`` lines."""
        xs, ys = self.x_nodes[1:-1], self.y_nodes[:-1]
        for k, y in enumerate(ys):
            for i, x in enumerate(xs):
                out.write(f"{k * xs.size + i} {x:.17g} {y:.17g}\n")


# }}}


# {{{ exact weighted 1D integrals


def weighted_moments(exponent: float, a: float, b: float, degree: int = 2) -> np.ndarray:
    """``int_a^b y^(exponent + m) dy`` for ``m = 0..degree``."""
    if exponent <= -1.0:
        raise ValueError(f"exponent must be > -1: got {exponent}")
    if not 0.0 <= a < b:
        raise ValueError(f"need 0 <= a < b: got ({a}, {b})")
    p = exponent + np.arange(degree + 1) + 1.0
    return (b**p - a**p) / p


def shifted_moments(alpha: float, a: float, b: float, degree: int = 2) -> np.ndarray:
    """``int_a^b y^alpha ((y - a) / h)^m dy``, ``h = b - a``, for ``m = 0..degree``.

    Monomial moments cancel badly when ``h << a``; there the integrand is
    expanded as ``a^alpha h (1 + rho t)^alpha t^m`` with ``rho = h / a`` and
    the binomial series is summed term by term.
    """
    h = b - a
    m = np.arange(degree + 1)
    if a == 0.0:
        return h ** (alpha + 1.0) / (alpha + m + 1.0)

    rho = h / a
    if rho >= _SERIES_SWITCH:
        raw = weighted_moments(alpha, a, b, degree)
        out = np.empty(degree + 1)
        for deg in m:
            # (y - a)^deg = sum_j C(deg, j) y^j (-a)^(deg - j)
            out[deg] = sum(
                math.comb(int(deg), j) * (-a) ** (deg - j) * raw[j] for j in range(deg + 1)
            ) / h**deg
        return out

    total = np.zeros(degree + 1)
    coef = 1.0
    n = 0
    while True:
        term = coef * rho**n / (n + m + 1.0)
        total += term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)) or n > 200:
            break
        coef *= (alpha - n) / (n + 1.0)
        n += 1
        if coef == 0.0:
            break
    return a**alpha * h * total


def weighted_element_matrices(alpha: float, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact 2x2 mass and stiffness of linear elements against ``y^alpha`` on ``(a, b)``."""
    S0, S1, S2 = shifted_moments(alpha, a, b, 2)
    h = b - a
    mass = np.array([[S0 - 2.0 * S1 + S2, S1 - S2], [S1 - S2, S2]])
    stiff = S0 / h**2 * np.array([[1.0, -1.0], [-1.0, 1.0]])
    return mass, stiff


def _assemble_1d(nodes: np.ndarray, alpha: float) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    n = nodes.size
    rows, cols, mvals, kvals = [], [], [], []
    for e in range(n - 1):
        mass, stiff = weighted_element_matrices(alpha, nodes[e], nodes[e + 1])
        for r in range(2):
            for c in range(2):
                rows.append(e + r)
                cols.append(e + c)
                mvals.append(mass[r, c])
                kvals.append(stiff[r, c])
    shape = (n, n)
    mass = sp.coo_matrix((mvals, (rows, cols)), shape=shape).tocsr()
    stiff = sp.coo_matrix((kvals, (rows, cols)), shape=shape).tocsr()
    return mass, stiff


def _uniform_1d(Mx: int, h: float) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """P1 mass and stiffness on the interior nodes of a uniform partition."""
    n = Mx - 1
    ones = np.ones(n)
    mass = sp.diags([ones[1:] * h / 6.0, ones * 2.0 * h / 3.0, ones[1:] * h / 6.0], [-1, 0, 1])
    stiff = sp.diags([-ones[1:] / h, 2.0 * ones / h, -ones[1:] / h], [-1, 0, 1])
    return mass.tocsr(), stiff.tocsr()


def cell_stiffness(mesh: GradedTensorMesh, params: FractionalParams, i: int, k: int) -> np.ndarray:
    """Local 4x4 matrix of ``a_Y`` on cell ``(x_i, x_{i+1}) x (y_k, y_{k+1})``.

    Local node order: ``(i, k), (i+1, k), (i, k+1), (i+1, k+1)``.
    """
    h = mesh.hx
    mx = h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    kx = 1.0 / h * np.array([[1.0, -1.0], [-1.0, 1.0]])
    my, ky = weighted_element_matrices(params.alpha, mesh.y_nodes[k], mesh.y_nodes[k + 1])
    local = np.kron(my, kx) + np.kron(ky, mx) + params.c_coeff * np.kron(my, mx)
    return local / params.d_s


# }}}


# {{{ global operators


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Symmetric sparse matrix with a lazily computed direct factorization."""

    matrix: sp.csc_matrix

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @cached_property
    def factorization(self):
        logger.debug("factorizing %d x %d operator", *self.shape)
        return spla.splu(self.matrix.tocsc(), permc_spec="MMD_AT_PLUS_A")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.factorization.solve(np.asarray(rhs, dtype=np.float64))

    def quadratic(self, vec: np.ndarray) -> float:
        return float(vec @ (self.matrix @ vec))

    def __matmul__(self, other):
        return self.matrix @ other

    def dump(self, out: TextIO) -> None:
        """Write nonzeros as ``row col value`` triplets."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            out.write(f"{r} {c} {v:.17g}\n")


def _y_blocks(mesh: GradedTensorMesh, alpha: float) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    my, ky = _assemble_1d(mesh.y_nodes, alpha)
    keep = slice(0, mesh.M)
    return my[keep, keep], ky[keep, keep]


def assemble_stiffness(mesh: GradedTensorMesh, params: FractionalParams) -> SparseOperator:
    """Galerkin matrix of ``a_Y`` on the free nodes."""
    if not math.isclose(mesh.length, params.domain_length, rel_tol=1e-14):
        raise ValueError("mesh and problem disagree on the domain length")
    my, ky = _y_blocks(mesh, params.alpha)
    mx, kx = _uniform_1d(mesh.Mx, mesh.hx)
    A = sp.kron(my, kx) + sp.kron(ky, mx)
    if params.c_coeff != 0.0:
        A = A + params.c_coeff * sp.kron(my, mx)
    return SparseOperator((A / params.d_s).tocsc())


def trace_mass_1d(mesh: GradedTensorMesh) -> sp.csr_matrix:
    return _uniform_1d(mesh.Mx, mesh.hx)[0]


def trace_embedding(mesh: GradedTensorMesh) -> sp.csr_matrix:
    """``n_free x n_trace`` injection of trace values."""
    n = mesh.n_trace
    return sp.csr_matrix((np.ones(n), (np.arange(n), np.arange(n))), shape=(mesh.n_free, n))


def assemble_trace_mass(mesh: GradedTensorMesh) -> SparseOperator:
    """1D P1 mass on ``y = 0`` embedded into the free-node numbering."""
    E = trace_embedding(mesh)
    return SparseOperator((E @ trace_mass_1d(mesh) @ E.T).tocsc())


# }}}


# {{{ solves


def harmonic_extension_solve(
    mesh: GradedTensorMesh,
    params: FractionalParams,
    trace_data: np.ndarray,
    stiffness: SparseOperator | None = None,
) -> np.ndarray:
    """Discrete ``a_Y``-harmonic function with the given values on the trace nodes."""
    g = np.asarray(trace_data, dtype=np.float64)
    if g.shape != (mesh.n_trace,):
        raise ValueError(f"expected {mesh.n_trace} trace values, got shape {g.shape}")
    A = (stiffness or assemble_stiffness(mesh, params)).matrix.tocsr()
    nt = mesh.n_trace
    out = np.zeros(mesh.n_free)
    out[:nt] = g
    if mesh.M == 1 or not np.any(g):
        return out
    A_ii = A[nt:, nt:].tocsc()
    A_ib = A[nt:, :nt]
    out[nt:] = spla.spsolve(A_ii, -(A_ib @ g))
    return out


def sine_hat_integrals(mesh: GradedTensorMesh, frequencies: np.ndarray) -> np.ndarray:
    r"""``int_0^l sqrt(2/l) sin(w x) hat_i(x) dx`` for every frequency and trace node.

    Shape ``(nfreq, n_trace)``; exact on the uniform partition.
    """
    w = np.atleast_1d(np.asarray(frequencies, dtype=np.float64))[:, None]
    h = mesh.hx
    xi = mesh.trace_nodes[None, :]
    half = 0.5 * w * h
    # 2 (1 - cos(w h)) / (w^2 h) = h (sin(w h / 2) / (w h / 2))^2
    factor = h * np.sinc(half / np.pi) ** 2
    return math.sqrt(2.0 / mesh.length) * np.sin(w * xi) * factor


def harmonic_load(
    mesh: GradedTensorMesh, data: SpectralData, coeffs: np.ndarray, rates: np.ndarray
) -> np.ndarray:
    r"""``a_Y(w, W_j)`` for ``w = sum_k coeffs_k phi_k chi_k`` with ``chi_k`` the exact profiles.

    The profiles solve the extension ODE, so integration by parts leaves only
    the conormal flux on ``y = 0``: the load is ``rate_k coeffs_k (phi_k, tr W_j)``.
    """
    S = sine_hat_integrals(mesh, data.frequencies)
    out = np.zeros(mesh.n_free)
    out[: mesh.n_trace] = (np.asarray(rates) * np.asarray(coeffs)) @ S
    return out


def project_harmonic(
    mesh: GradedTensorMesh,
    data: SpectralData,
    coeffs: np.ndarray,
    rates: np.ndarray,
    stiffness: SparseOperator,
) -> np.ndarray:
    """Elliptic projection of a finite sum of exact extension modes."""
    return stiffness.solve(harmonic_load(mesh, data, coeffs, rates))


def _layer_rules(mesh: GradedTensorMesh, alpha: float, order: int):
    """Per y-layer quadrature points and weights for the ``y^alpha`` weighted integrals."""
    ref, wref = tensor_gauss(order)
    layers = []
    for k in range(mesh.M):
        a, b = mesh.y_nodes[k], mesh.y_nodes[k + 1]
        if a == 0.0:
            yw, ww = gauss_jacobi(order, 0.0, b, left_exp=alpha)
            ym, wm = gauss_jacobi(order, 0.0, b, left_exp=-alpha)
            yp, wp = gauss_jacobi(order, 0.0, b)
            layers.append(("singular", a, b, (yw, ww), (ym, wm), (yp, wp)))
        else:
            y = a + (b - a) * ref
            layers.append(("regular", a, b, (y, (b - a) * wref * y**alpha)))
    return layers


def _bilinear_on_layer(full: np.ndarray, mesh: GradedTensorMesh, k: int, xq: np.ndarray, yq: np.ndarray):
    """Values and gradient of the Q1 field at points ``x`` (per x-cell) times ``y`` in layer ``k``.

    ``xq`` has shape ``(Mx, nx)`` (points per x-cell); ``yq`` has shape ``(ny,)``.
    Returns arrays of shape ``(Mx, nx, ny)``.
    """
    h = mesh.hx
    a, b = mesh.y_nodes[k], mesh.y_nodes[k + 1]
    hy = b - a
    s = (xq - mesh.x_nodes[:-1, None]) / h
    t = (yq - a) / hy
    v00 = full[k, :-1][:, None, None]
    v10 = full[k, 1:][:, None, None]
    v01 = full[k + 1, :-1][:, None, None]
    v11 = full[k + 1, 1:][:, None, None]
    S = s[:, :, None]
    T = t[None, None, :]
    val = v00 * (1 - S) * (1 - T) + v10 * S * (1 - T) + v01 * (1 - S) * T + v11 * S * T
    dx = ((v10 - v00) * (1 - T) + (v11 - v01) * T) / h
    dy = ((v01 - v00) * (1 - S) + (v11 - v10) * S) / hy
    return val, dx * np.ones_like(S), dy * np.ones_like(T)


TargetFunction = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]
"""Vectorized ``(x, y) -> (w, w_x, w_y)`` on broadcast arrays."""


def energy_error(
    mesh: GradedTensorMesh,
    params: FractionalParams,
    vec: np.ndarray,
    target: TargetFunction | None,
    *,
    order: int = 5,
) -> float:
    r"""``a_Y(w - V, w - V)^{1/2}`` by tensor quadrature against the target's gradient.

    Away from ``y = 0`` the rule is Gauss in both directions. On the first
    layer the weight ``y^alpha`` is carried by Gauss-Jacobi, and the
    ``y``-derivative term is split as
    ``y^-alpha F^2 - 2 F V_y + y^alpha V_y^2`` with the bounded flux
    ``F = y^alpha w_y`` so that every piece is integrated against its own
    Jacobi weight.
    """
    full = mesh.full_field(vec)
    alpha, c = params.alpha, params.c_coeff
    xref, wxref = tensor_gauss(order)
    h = mesh.hx
    xq = mesh.x_nodes[:-1, None] + h * xref[None, :]
    wx = (h * wxref)[None, :, None]

    def target_values(y):
        if target is None:
            z = np.zeros(xq.shape + y.shape)
            return z, z, z
        X = xq[:, :, None]
        Yy = y[None, None, :]
        w, wx_, wy_ = target(X, Yy)
        shape = xq.shape + y.shape
        return (np.broadcast_to(w, shape), np.broadcast_to(wx_, shape), np.broadcast_to(wy_, shape))

    total = 0.0
    for layer in _layer_rules(mesh, alpha, order):
        kind = layer[0]
        k = int(np.searchsorted(mesh.y_nodes, layer[1]))
        if kind == "regular":
            y, wy = layer[3]
            val, dx, dy = _bilinear_on_layer(full, mesh, k, xq, y)
            w, gx, gy = target_values(y)
            dens = (gx - dx) ** 2 + (gy - dy) ** 2 + c * (w - val) ** 2
            total += float(np.sum(dens * wx * wy[None, None, :]))
            continue

        (yw, ww), (ym, wm), (yp, wp) = layer[3], layer[4], layer[5]
        val, dx, dy = _bilinear_on_layer(full, mesh, k, xq, yw)
        w, gx, _ = target_values(yw)
        dens = (gx - dx) ** 2 + c * (w - val) ** 2
        total += float(np.sum(dens * wx * ww[None, None, :]))

        # y-derivative: (F y^-alpha - V_y)^2 y^alpha with F = y^alpha w_y
        _, _, Vy = _bilinear_on_layer(full, mesh, k, xq, ym)
        _, _, gy = target_values(ym)
        F = gy * ym[None, None, :] ** alpha
        total += float(np.sum(F**2 * wx * wm[None, None, :]))
        _, _, Vy_p = _bilinear_on_layer(full, mesh, k, xq, yp)
        _, _, gy_p = target_values(yp)
        Fp = gy_p * yp[None, None, :] ** alpha
        total -= 2.0 * float(np.sum(Fp * Vy_p * wx * wp[None, None, :]))
        _, _, Vy_w = _bilinear_on_layer(full, mesh, k, xq, yw)
        total += float(np.sum(Vy_w**2 * wx * ww[None, None, :]))
    return math.sqrt(max(total, 0.0) / params.d_s)


def elliptic_project(
    mesh: GradedTensorMesh,
    params: FractionalParams,
    target: TargetFunction,
    stiffness: SparseOperator | None = None,
    *,
    order: int = 5,
) -> np.ndarray:
    """Weighted elliptic projection: ``a_Y(G w, W) = a_Y(w, W)`` for every discrete ``W``.

    The load ``a_Y(w, W_j)`` is integrated per cell with the same mixed
    Gauss / Gauss-Jacobi rule as :func:`energy_error`; on the first layer
    the flux ``y^alpha w_y`` is treated as smooth.
    """
    A = stiffness or assemble_stiffness(mesh, params)
    alpha, c = params.alpha, params.c_coeff
    xref, wxref = tensor_gauss(order)
    h = mesh.hx
    xq = mesh.x_nodes[:-1, None] + h * xref[None, :]
    S = xref[None, :, None]
    wx = (h * wxref)[None, :, None]
    X = xq[:, :, None]

    load = np.zeros((mesh.M + 1, mesh.Mx + 1))
    for layer in _layer_rules(mesh, alpha, order):
        k = int(np.searchsorted(mesh.y_nodes, layer[1]))
        a, b = layer[1], layer[2]
        hy = b - a
        if layer[0] == "regular":
            y, wyw = layer[3]
            w, gx, gy = (np.broadcast_to(v, xq.shape + y.shape) for v in target(X, y[None, None, :]))
            flux, wflux = gy * y[None, None, :] ** alpha, wyw / y**alpha
            yflux = y
        else:
            y, wyw = layer[3]
            w, gx, _ = (np.broadcast_to(v, xq.shape + y.shape) for v in target(X, y[None, None, :]))
            yflux, wflux = layer[5]
            _, _, gyf = (
                np.broadcast_to(v, xq.shape + yflux.shape) for v in target(X, yflux[None, None, :])
            )
            flux = gyf * yflux[None, None, :] ** alpha
        T = ((y - a) / hy)[None, None, :]
        Tf = ((yflux - a) / hy)[None, None, :]
        wy = wyw[None, None, :]
        wf = wflux[None, None, :]
        # shape functions of the four corners and their derivatives
        for di, dj, phx, dphx, phy, phyf, dphy in (
            (0, 0, 1 - S, -1.0 / h, 1 - T, 1 - Tf, -1.0 / hy),
            (1, 0, S, 1.0 / h, 1 - T, 1 - Tf, -1.0 / hy),
            (0, 1, 1 - S, -1.0 / h, T, Tf, 1.0 / hy),
            (1, 1, S, 1.0 / h, T, Tf, 1.0 / hy),
        ):
            contrib = np.sum((gx * dphx * phy + c * w * phx * phy) * wx * wy, axis=(1, 2))
            contrib += np.sum(flux * phx * dphy * wx * wf, axis=(1, 2))
            load[k + dj, di : di + mesh.Mx] += contrib
    rhs = load[: mesh.M, 1 : mesh.Mx].ravel() / params.d_s
    return A.solve(rhs)


def energy_norm(stiffness: SparseOperator, vec: np.ndarray) -> float:
    return math.sqrt(max(stiffness.quadratic(vec), 0.0))


def harmonic_energy_error(
    mesh: GradedTensorMesh,
    data: SpectralData,
    coeffs: np.ndarray,
    rates: np.ndarray,
    vec: np.ndarray,
    stiffness: SparseOperator,
) -> float:
    r"""Exact ``a_Y(w - V, w - V)^{1/2}`` for ``w = sum_k coeffs_k phi_k chi_k``.

    Uses ``a_Y(w, w) = sum rate_k coeffs_k^2`` and the conormal form of
    ``a_Y(w, V)``; no quadrature is involved.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    rates = np.asarray(rates, dtype=np.float64)
    ww = float(np.sum(rates * coeffs**2))
    wv = float(harmonic_load(mesh, data, coeffs, rates) @ vec)
    vv = stiffness.quadratic(vec)
    return math.sqrt(max(ww - 2.0 * wv + vv, 0.0))


# }}}


# {{{ trace errors


def trace_l2_error(mesh: GradedTensorMesh, vec: np.ndarray, data: SpectralData, coeffs: np.ndarray) -> float:
    r"""``|| tr V - sum_k coeffs_k phi_k ||_{L^2}`` in closed form."""
    tr = np.asarray(vec, dtype=np.float64)[: mesh.n_trace]
    coeffs = np.asarray(coeffs, dtype=np.float64)
    S = sine_hat_integrals(mesh, data.frequencies)
    uu = float(coeffs @ coeffs)
    uv = float(coeffs @ (S @ tr))
    vv = float(tr @ (trace_mass_1d(mesh) @ tr))
    return math.sqrt(max(uu - 2.0 * uv + vv, 0.0))


def trace_hs_error(
    mesh: GradedTensorMesh,
    vec: np.ndarray,
    data: SpectralData,
    coeffs: np.ndarray,
    s_signed: float,
    n_modes: int | None = None,
) -> float:
    r"""Spectral ``H^s`` norm of ``tr V - u``, truncated to the first ``n_modes`` sines.

    Coefficients of ``tr V`` are exact integrals of the piecewise linear trace
    against each sine. ``n_modes`` defaults to ``4 Mx`` (and at least the
    largest data mode). With ``s_signed = 0`` prefer :func:`trace_l2_error`,
    which has no spectral truncation.
    """
    params = data.params
    kmax = max(4 * mesh.Mx, max((m.k for m in data.modes), default=1))
    kmax = kmax if n_modes is None else n_modes
    ks = np.arange(1, kmax + 1)
    freq = ks * math.pi / params.domain_length
    lam = freq**2 + params.c_coeff
    tr = np.asarray(vec, dtype=np.float64)[: mesh.n_trace]
    diff = sine_hat_integrals(mesh, freq) @ tr
    for m, u in zip(data.modes, coeffs):
        if m.k <= kmax:
            diff[m.k - 1] -= u
    return hs_norm_from_lambdas(lam, diff, s_signed)


def mode_target(data: SpectralData, coeffs: np.ndarray, Y: float | None) -> TargetFunction:
    """Vectorized exact extension ``sum_k coeffs_k phi_k(x) chi_k(y)`` and its gradient."""
    params = data.params

    def target(x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        ys, inverse = np.unique(y, return_inverse=True)
        inverse = inverse.reshape(y.shape)
        w = wx = wy = 0.0
        phi = data.phi(x)
        dphi = data.dphi(x)
        for idx, (m, u) in enumerate(zip(data.modes, coeffs)):
            prof, dprof = profile_arrays(params, m.lambda_k, ys, Y)
            pv, pd = prof[inverse], dprof[inverse]
            w = w + u * phi[idx] * pv
            wx = wx + u * dphi[idx] * pv
            wy = wy + u * phi[idx] * pd
        return w, wx, wy

    return target


# }}}
