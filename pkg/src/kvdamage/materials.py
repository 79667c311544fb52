"""Constitutive laws and convexity certificates.

The material is a Kelvin-Voigt solid whose elastic stiffness is degraded by
a scalar damage field alpha (alpha = 1 pristine, alpha = 0 broken):

    C(alpha) = gamma(alpha) * C1,      D(alpha) = D0 + chi_r * C(alpha)

Fourth order tensors are stored as matrices in the scaled Voigt (Mandel)
convention, with sqrt(2) on the off diagonal strain components, so that the
matrix inner product equals the tensor Frobenius product and operator norms
are plain eigenvalue extremes.

The module also provides the quantitative convexity results for the coupled
incremental problem: the semiconvexity constant of the stored energy, the
critical time step below which each implicit step is a convex program, and
the witness construction showing that moving the damage dependence into the
viscous term destroys convexity for large strains.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .errors import DegenerateLawError, NoWitnessFoundError, NotPositiveDefiniteError

# number of strain components of the Mandel representation per dimension
_MANDEL_SIZE = {1: 1, 2: 3, 3: 6}

# guard added inside |grad alpha|^(p-2) to keep the p-Laplacian smooth at 0
GRADIENT_GUARD = 1.0e-12

_VALIDATION_GRID = 2001


# ---------------------------------------------------------------------------
# degradation laws gamma(alpha)
# ---------------------------------------------------------------------------


class DegradationLaw:
    """Smooth convex degradation profile gamma on [0, 1].

    Requirements checked at construction by dense sampling: gamma >= 0,
    gamma'' > 0 and gamma'(0) = 0 (so the degraded stiffness has zero slope
    in the fully broken state).  Evaluation clamps alpha to [0, 1]; the
    solver keeps alpha inside the box anyway, the clamp only guards
    round-off at the bounds.
    """

    name = "base"

    def value(self, alpha):
        raise NotImplementedError

    def deriv(self, alpha):
        raise NotImplementedError

    def second_deriv(self, alpha):
        raise NotImplementedError

    # subclasses call this at the end of __init__
    def _validate(self):
        a = np.linspace(0.0, 1.0, _VALIDATION_GRID)
        g = np.asarray(self.value(a), dtype=float)
        gpp = np.asarray(self.second_deriv(a), dtype=float)
        scale = max(float(np.max(np.abs(g))), 1e-300)
        if np.min(g) < -1e-12 * scale:
            raise DegenerateLawError(
                f"{self.name}: gamma takes negative values (min {np.min(g):.3e})"
            )
        if np.min(gpp) <= 0.0:
            raise DegenerateLawError(
                f"{self.name}: gamma'' must be strictly positive on [0,1] "
                f"(min {np.min(gpp):.3e})"
            )
        gp0 = float(self.deriv(0.0))
        gp_scale = max(float(np.max(np.abs(self.deriv(a)))), 1e-300)
        if abs(gp0) > 1e-6 * gp_scale:
            raise DegenerateLawError(
                f"{self.name}: gamma'(0) = {gp0:.3e} is not zero"
            )
        # gamma(0) = 0 is tolerated (used by fully degrading laws) but noted:
        # the underlying well-posedness theory assumes gamma > 0
        self.touches_zero = bool(np.min(g) <= 1e-12 * scale)

    @staticmethod
    def _clamp(alpha):
        return np.clip(alpha, 0.0, 1.0)


class ATDegradation(DegradationLaw):
    """Ambrosio-Tortorelli profile gamma(alpha) = ((eps_ratio)^2 + alpha^2) / 2.

    eps_ratio is the ratio of the phase field length to the reference length
    that keeps the residual stiffness of the broken state positive; 0 is
    allowed and gives a fully degrading law.
    """

    name = "at"

    def __init__(self, eps_ratio: float):
        if eps_ratio < 0.0:
            raise DegenerateLawError("at: eps_ratio must be >= 0")
        self.eps_ratio = float(eps_ratio)
        self._validate()

    def value(self, alpha):
        a = self._clamp(alpha)
        return 0.5 * (self.eps_ratio**2 + a * a)

    def deriv(self, alpha):
        return self._clamp(alpha) * 1.0

    def second_deriv(self, alpha):
        return np.ones_like(np.asarray(alpha, dtype=float))


class QuadraticDegradation(DegradationLaw):
    """gamma(alpha) = (c0 + alpha^2) / 2 with dimensionless offset c0 > 0."""

    name = "quadratic"

    def __init__(self, c0: float):
        if c0 <= 0.0:
            raise DegenerateLawError("quadratic: c0 must be > 0")
        self.c0 = float(c0)
        self._validate()

    def value(self, alpha):
        a = self._clamp(alpha)
        return 0.5 * (self.c0 + a * a)

    def deriv(self, alpha):
        return self._clamp(alpha) * 1.0

    def second_deriv(self, alpha):
        return np.ones_like(np.asarray(alpha, dtype=float))


class TabulatedDegradation(DegradationLaw):
    """Degradation law given by samples on [0, 1], cubic interpolated.

    Parameters
    ----------
    values : array_like
        gamma sampled at `alphas` (uniform grid on [0, 1] when omitted).
    alphas : array_like, optional
        Strictly increasing sample locations covering [0, 1].
    """

    name = "tabulated"

    def __init__(self, values, alphas=None):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 4:
            raise DegenerateLawError("tabulated: need at least 4 samples")
        if alphas is None:
            alphas = np.linspace(0.0, 1.0, values.size)
        else:
            alphas = np.asarray(alphas, dtype=float)
            if alphas.shape != values.shape or np.any(np.diff(alphas) <= 0):
                raise DegenerateLawError("tabulated: alphas must be increasing and match values")
            if abs(alphas[0]) > 1e-14 or abs(alphas[-1] - 1.0) > 1e-14:
                raise DegenerateLawError("tabulated: samples must cover [0, 1]")
        self._spline = CubicSpline(alphas, values)
        self._d1 = self._spline.derivative(1)
        self._d2 = self._spline.derivative(2)
        self._validate()

    def value(self, alpha):
        return self._spline(self._clamp(alpha))

    def deriv(self, alpha):
        return self._d1(self._clamp(alpha))

    def second_deriv(self, alpha):
        return self._d2(self._clamp(alpha))


def gamma_extrema(law: DegradationLaw, tol: float = 1e-8):
    """Extremes of the degradation law entering the convexity constants.

    Returns
    -------
    (gpp_min, gp_sq_max) : tuple of float
        min of gamma'' and max of gamma'^2 over [0, 1], located by dense
        sampling (1001 points) refined with a bounded scalar minimization
        to relative tolerance `tol`.
    """
    grid = np.linspace(0.0, 1.0, 1001)

    def refine(fun, imin):
        lo = grid[max(imin - 1, 0)]
        hi = grid[min(imin + 1, grid.size - 1)]
        if hi <= lo:
            return fun(grid[imin])
        res = minimize_scalar(fun, bounds=(lo, hi), method="bounded",
                              options={"xatol": tol * max(hi - lo, 1e-3)})
        return min(float(res.fun), float(fun(grid[imin])))

    gpp = np.asarray(law.second_deriv(grid), dtype=float)
    gpp_min = refine(lambda a: float(law.second_deriv(a)), int(np.argmin(gpp)))

    gp_sq = np.asarray(law.deriv(grid), dtype=float) ** 2
    neg_max = refine(lambda a: -float(law.deriv(a)) ** 2, int(np.argmax(gp_sq)))
    gp_sq_max = -neg_max

    if gpp_min <= 0.0:
        raise DegenerateLawError("gamma'' is not strictly positive on [0,1]")
    return gpp_min, gp_sq_max


# ---------------------------------------------------------------------------
# elastic tensor in Mandel convention
# ---------------------------------------------------------------------------


def sym_tensor_to_mandel(t):
    """Flatten a symmetric d x d tensor to its Mandel vector."""
    t = np.asarray(t, dtype=float)
    d = t.shape[0]
    s = np.sqrt(2.0)
    if d == 1:
        return np.array([t[0, 0]])
    if d == 2:
        return np.array([t[0, 0], t[1, 1], s * t[0, 1]])
    if d == 3:
        return np.array([t[0, 0], t[1, 1], t[2, 2],
                         s * t[1, 2], s * t[0, 2], s * t[0, 1]])
    raise ValueError("dimension must be 1, 2 or 3")


def mandel_to_sym_tensor(v):
    """Inverse of sym_tensor_to_mandel."""
    v = np.asarray(v, dtype=float)
    s = 1.0 / np.sqrt(2.0)
    if v.size == 1:
        return np.array([[v[0]]])
    if v.size == 3:
        return np.array([[v[0], s * v[2]], [s * v[2], v[1]]])
    if v.size == 6:
        return np.array([[v[0], s * v[5], s * v[4]],
                         [s * v[5], v[1], s * v[3]],
                         [s * v[4], s * v[3], v[2]]])
    raise ValueError("Mandel vector must have 1, 3 or 6 components")


@dataclass(frozen=True)
class ElasticTensor:
    """Symmetric positive definite fourth order tensor (Mandel matrix).

    Parameters
    ----------
    matrix : ndarray
        (n_s, n_s) symmetric positive definite matrix acting on Mandel
        strain vectors, n_s in {1, 3, 6}.
    dim : int
        Spatial dimension, 1, 2 or 3.
    """

    matrix: np.ndarray
    dim: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        ns = _MANDEL_SIZE.get(self.dim)
        if ns is None:
            raise NotPositiveDefiniteError("dim must be 1, 2 or 3")
        if m.shape != (ns, ns):
            raise NotPositiveDefiniteError(
                f"matrix shape {m.shape} does not match dim {self.dim}"
            )
        if not np.allclose(m, m.T, rtol=0.0, atol=1e-12 * max(np.abs(m).max(), 1.0)):
            raise NotPositiveDefiniteError("tensor matrix must be symmetric")
        m = 0.5 * (m + m.T)
        if np.linalg.eigvalsh(m)[0] <= 0.0:
            raise NotPositiveDefiniteError("tensor matrix must be positive definite")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def isotropic(cls, lam: float, mu: float, dim: int) -> "ElasticTensor":
        """Isotropic tensor from Lame parameters."""
        ns = _MANDEL_SIZE.get(dim)
        if ns is None:
            raise NotPositiveDefiniteError("dim must be 1, 2 or 3")
        m = np.zeros((ns, ns))
        if dim == 1:
            m[0, 0] = lam + 2.0 * mu
        else:
            m[:dim, :dim] = lam
            m[:dim, :dim] += 2.0 * mu * np.eye(dim)
            for i in range(dim, ns):
                m[i, i] = 2.0 * mu
        return cls(m, dim)

    def scaled(self, factor: float) -> "ElasticTensor":
        return ElasticTensor(factor * self.matrix, self.dim)

    def apply(self, strain):
        """Mandel stress from Mandel strain (last axis are components)."""
        return np.asarray(strain, dtype=float) @ self.matrix.T

    def contract(self, strain):
        """Quadratic form C e : e for one or a batch of Mandel strains."""
        e = np.asarray(strain, dtype=float)
        return np.einsum("...i,ij,...j->...", e, self.matrix, e)


def tensor_norms(tensor: ElasticTensor):
    """Operator norm of the tensor and of its inverse.

    With the Mandel convention these are the extreme eigenvalues of the
    matrix: returns (max_eig, 1 / min_eig).
    """
    eigs = np.linalg.eigvalsh(tensor.matrix)
    if eigs[0] <= 0.0:
        raise NotPositiveDefiniteError("tensor is not positive definite")
    return float(eigs[-1]), float(1.0 / eigs[0])


# ---------------------------------------------------------------------------
# remaining constitutive pieces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ViscosityModel:
    """Viscous stress D(alpha) e(v) with D(alpha) = D0 + chi_r * gamma(alpha) * C1.

    D0 is the damage independent bulk contribution (None means absent, which
    degrades the model to purely rate independent viscosity through chi_r or
    to the elastodynamic limit; the convexity certificate then does not
    apply).  chi_r >= 0 is the relaxation time weighting the degraded part.
    """

    D0: ElasticTensor | None
    chi_r: float = 0.0

    def __post_init__(self):
        if self.chi_r < 0.0:
            raise DegenerateLawError("viscosity: chi_r must be >= 0")


class DamageEnergy:
    """Concave stored damage energy phi(alpha), nondecreasing on [0, 1]."""

    def value(self, alpha):
        raise NotImplementedError

    def deriv(self, alpha):
        raise NotImplementedError

    def second_deriv(self, alpha):
        raise NotImplementedError

    concave = True

    def _validate(self, allow_nonconcave=False):
        a = np.linspace(0.0, 1.0, _VALIDATION_GRID)
        dp = np.asarray(self.deriv(a), dtype=float)
        d2 = np.asarray(self.second_deriv(a), dtype=float)
        scale = max(float(np.max(np.abs(dp))), 1.0)
        if np.min(dp) < -1e-9 * scale:
            raise DegenerateLawError("phi must be nondecreasing on [0,1]")
        self.concave = bool(np.max(d2) <= 1e-9 * scale)
        if not self.concave and not allow_nonconcave:
            raise DegenerateLawError(
                "phi is not concave; pass allow_nonconcave=True and solve with "
                "the difference quotient residual mode"
            )


class ATQuadraticDamage(DamageEnergy):
    """phi(alpha) = -gc (1 - alpha)^2 / (2 eps).

    The standard quadratic well: phi(1) = 0 in the pristine state and the
    release -phi grows as damage develops; gc is the toughness, eps the
    phase field length.
    """

    def __init__(self, gc: float, eps: float):
        if gc <= 0.0 or eps <= 0.0:
            raise DegenerateLawError("at damage energy: gc and eps must be > 0")
        self.gc = float(gc)
        self.eps = float(eps)
        self._validate()

    def value(self, alpha):
        return -self.gc * (1.0 - np.asarray(alpha, dtype=float)) ** 2 / (2.0 * self.eps)

    def deriv(self, alpha):
        return self.gc * (1.0 - np.asarray(alpha, dtype=float)) / self.eps

    def second_deriv(self, alpha):
        return np.full_like(np.asarray(alpha, dtype=float), -self.gc / self.eps)


class CustomDamageEnergy(DamageEnergy):
    """Damage energy from user callables (second derivative optional).

    When `d2fun` is omitted it is approximated by a central difference of
    `dfun`.  Non concave energies are rejected unless `allow_nonconcave`
    is set, in which case the step problem must run in difference quotient
    mode (the incremental problem is no longer a convex minimization).
    """

    def __init__(self, fun, dfun, d2fun=None, allow_nonconcave=False):
        self._fun = fun
        self._dfun = dfun
        self._d2fun = d2fun
        self._validate(allow_nonconcave=allow_nonconcave)

    def value(self, alpha):
        return self._fun(np.asarray(alpha, dtype=float))

    def deriv(self, alpha):
        return self._dfun(np.asarray(alpha, dtype=float))

    def second_deriv(self, alpha):
        if self._d2fun is not None:
            return self._d2fun(np.asarray(alpha, dtype=float))
        a = np.asarray(alpha, dtype=float)
        h = 1e-6
        return (self._dfun(a + h) - self._dfun(a - h)) / (2.0 * h)


@dataclass(frozen=True)
class DissipationLaw:
    """Rate dependent damage dissipation zeta(rate).

    zeta(r) = eta/2 r^2 for r <= 0 and +inf otherwise; the infinite branch
    enforces unidirectionality and becomes the box constraint of the step
    problem.  eta = 0 (pure rate independent damage) is admitted only behind
    `allow_zero` because it leaves the damage rate without coercivity.
    """

    eta: float
    allow_zero: bool = False

    def __post_init__(self):
        if self.eta < 0.0:
            raise DegenerateLawError("dissipation: eta must be >= 0")
        if self.eta == 0.0 and not self.allow_zero:
            raise DegenerateLawError(
                "dissipation: eta = 0 requires allow_zero=True"
            )

    def zeta(self, rate):
        r = np.asarray(rate, dtype=float)
        return np.where(r <= 0.0, 0.5 * self.eta * r * r, np.inf)


@dataclass(frozen=True)
class GradientTerm:
    """Damage gradient energy kappa/p |grad alpha|^p.

    With eps_g > 0 the regularized variant kappa (1/2 |g|^2 + eps_g/p |g|^p)
    is used instead.  p >= 2; the evaluation guards |g|^(p-2) with
    GRADIENT_GUARD so residual and Jacobian stay finite at g = 0.
    """

    kappa: float
    p: float = 2.0
    eps_g: float = 0.0

    def __post_init__(self):
        if self.kappa <= 0.0:
            raise DegenerateLawError("gradient: kappa must be > 0")
        if self.p < 2.0:
            raise DegenerateLawError("gradient: p must be >= 2")
        if self.eps_g < 0.0:
            raise DegenerateLawError("gradient: eps_g must be >= 0")


@dataclass(frozen=True)
class MaterialParams:
    """Complete material description for one body."""

    degradation: DegradationLaw
    elastic: ElasticTensor
    viscosity: ViscosityModel
    damage_energy: DamageEnergy
    gradient: GradientTerm
    rho: float = 1.0
    dissipation: DissipationLaw | None = None

    def __post_init__(self):
        if self.rho < 0.0:
            raise DegenerateLawError("rho must be >= 0 (0 selects quasistatic)")
        if self.viscosity.D0 is not None and self.viscosity.D0.dim != self.elastic.dim:
            raise DegenerateLawError("D0 and C1 live in different dimensions")
        if self.dissipation is None:
            # default damage rate viscosity: a small fraction of the bulk one,
            # zero (flagged) when there is no bulk viscosity to set the scale
            if self.viscosity.D0 is not None:
                eta = 1e-3 * tensor_norms(self.viscosity.D0)[0]
                object.__setattr__(self, "dissipation", DissipationLaw(eta))
            else:
                object.__setattr__(
                    self, "dissipation", DissipationLaw(0.0, allow_zero=True)
                )

    @property
    def dim(self) -> int:
        return self.elastic.dim

    def viscous_matrix(self, alpha):
        """Mandel matrix of D(alpha) for scalar alpha."""
        g = float(self.degradation.value(alpha))
        m = self.viscosity.chi_r * g * self.elastic.matrix
        if self.viscosity.D0 is not None:
            m = m + self.viscosity.D0.matrix
        return m

    @property
    def quasistatic(self) -> bool:
        return self.rho == 0.0


def stress(mat: MaterialParams, strain, strain_rate, alpha, alpha_old):
    """Total Mandel stress gamma(alpha) C1 e + D(alpha_old) e_dot.

    The viscous tensor is evaluated at the previous damage state, matching
    the semi-implicit time discretization.
    """
    g = mat.degradation.value(alpha)
    elastic = np.asarray(g)[..., None] * mat.elastic.apply(strain)
    dmat = mat.viscous_matrix(alpha_old)
    return elastic + np.asarray(strain_rate, dtype=float) @ dmat.T


def driving_force(mat: MaterialParams, strain, alpha):
    """Damage driving force 1/2 gamma'(alpha) C1 e : e."""
    return 0.5 * np.asarray(mat.degradation.deriv(alpha)) * mat.elastic.contract(strain)


# ---------------------------------------------------------------------------
# convexity constants and certificates
# ---------------------------------------------------------------------------


def semiconvexity_constant(mat: MaterialParams) -> float:
    """Smallest K such that (e, alpha) -> 1/2 gamma(alpha) C1 e:e + K/2 |e|^2
    is convex, from the quantified curvature bound

        K = 2 |C1|^2 |C1^-1| max(gamma'^2) / min(gamma'')
    """
    opn, inv_opn = tensor_norms(mat.elastic)
    gpp_min, gp_sq_max = gamma_extrema(mat.degradation)
    return 2.0 * opn * opn * inv_opn * gp_sq_max / gpp_min


def critical_timestep(mat: MaterialParams) -> float:
    """Largest time step for which the incremental problem is certified convex.

    tau0 = min(gamma'') / (2 |D0^-1| |C1|^2 |C1^-1| max(gamma'^2)); the
    viscous quadratic term then dominates the indefinite elastic-damage
    coupling.  Raises NotPositiveDefiniteError when D0 is absent.
    """
    if mat.viscosity.D0 is None:
        raise NotPositiveDefiniteError(
            "critical_timestep requires a positive definite D0"
        )
    _, inv_d0 = tensor_norms(mat.viscosity.D0)
    return 1.0 / (inv_d0 * semiconvexity_constant(mat))


def _coupled_hessians(mat, K_diag_e, K_diag_a, alphas, strains):
    """Stack of Hessians of 1/2 gamma(a) C e:e + K_e/2 |e|^2 + K_a/2 a^2
    over all (alpha, strain) sample pairs."""
    cm = mat.elastic.matrix
    ns = cm.shape[0]
    na, ne = len(alphas), len(strains)
    g = np.asarray(mat.degradation.value(alphas), dtype=float)
    gp = np.asarray(mat.degradation.deriv(alphas), dtype=float)
    gpp = np.asarray(mat.degradation.second_deriv(alphas), dtype=float)
    ce = strains @ cm.T                       # (ne, ns)
    q = np.einsum("es,es->e", strains, ce)    # C e : e
    H = np.zeros((na, ne, ns + 1, ns + 1))
    H[:, :, :ns, :ns] = g[:, None, None, None] * cm + K_diag_e * np.eye(ns)
    H[:, :, :ns, ns] = gp[:, None, None] * ce[None, :, :]
    H[:, :, ns, :ns] = H[:, :, :ns, ns]
    H[:, :, ns, ns] = 0.5 * gpp[:, None] * q[None, :] + K_diag_a
    return H.reshape(na * ne, ns + 1, ns + 1)


@dataclass
class PSDCheckReport:
    passed: bool
    min_eig: float
    tol: float
    worst_alpha: float
    worst_strain: np.ndarray
    n_samples: int


def stored_hessian_psd_check(
    mat: MaterialParams,
    K: float,
    strain_cap: float = 1e3,
    n_alpha: int = 41,
    n_dirs: int = 8,
    n_mags: int = 25,
    tol_rel: float = 1e-10,
    seed: int = 0,
) -> PSDCheckReport:
    """Sampled PSD certificate for the K-regularized stored energy density.

    Scans the (alpha, strain) Hessian of
    1/2 gamma(alpha) C1 e:e + K/2 |e|^2 over alpha in [0, 1] and strains up
    to |e| = strain_cap (canonical plus seeded random directions, log spaced
    magnitudes).  Passes iff the smallest eigenvalue stays above
    -tol_rel * scale where scale is the largest Hessian entry encountered.
    """
    ns = mat.elastic.matrix.shape[0]
    rng = np.random.default_rng(seed)
    dirs = [np.eye(ns)[i] for i in range(ns)]
    extra = rng.standard_normal((n_dirs, ns))
    extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    dirs = np.vstack([dirs, extra])
    mags = np.concatenate([[0.0], np.logspace(-2, np.log10(strain_cap), n_mags)])
    strains = (mags[:, None, None] * dirs[None, :, :]).reshape(-1, ns)
    alphas = np.linspace(0.0, 1.0, n_alpha)

    H = _coupled_hessians(mat, K_diag_e=K, K_diag_a=0.0,
                          alphas=alphas, strains=strains)
    scale = float(np.max(np.abs(H)))
    eigs = np.linalg.eigvalsh(H)[:, 0]
    imin = int(np.argmin(eigs))
    min_eig = float(eigs[imin])
    ia, ie = divmod(imin, strains.shape[0])
    tol = tol_rel * max(scale, 1.0)
    return PSDCheckReport(
        passed=bool(min_eig >= -tol),
        min_eig=min_eig,
        tol=tol,
        worst_alpha=float(alphas[ia]),
        worst_strain=strains[ie].copy(),
        n_samples=H.shape[0],
    )


@dataclass
class NonconvexityWitness:
    alpha: float
    strain: np.ndarray
    min_eig: float
    schur_margin: float


def visco_damage_nonconvexity_witness(
    mat: MaterialParams,
    K: float,
    n_alpha: int = 41,
    growth: float = 2.0,
    max_strain: float = 1e12,
) -> NonconvexityWitness:
    """Witness that a damage dependent viscosity penalty is not convexifiable.

    Searches for (alpha, e) making the Hessian of
    1/2 gamma(alpha) C1 e:e + K/2 alpha^2 indefinite.  The Schur complement
    is gamma K + (1/2 gamma gamma'' - gamma'^2) C1 e:e, so whenever
    gamma'^2 / gamma > gamma''/2 somewhere, growing |e| geometrically along
    the stiffest strain direction produces a negative eigenvalue; the search
    keeps growing while the eigenvalue still improves and returns the most
    negative one found.  Raises NoWitnessFoundError with the best Schur
    margin when the curvature condition fails everywhere.
    """
    alphas = np.linspace(0.0, 1.0, n_alpha)
    g = np.asarray(mat.degradation.value(alphas), dtype=float)
    gp = np.asarray(mat.degradation.deriv(alphas), dtype=float)
    gpp = np.asarray(mat.degradation.second_deriv(alphas), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        margin = np.where(g > 0.0, gp * gp / g - 0.5 * gpp, -np.inf)
    ia = int(np.argmax(margin))
    if not np.isfinite(margin[ia]) or margin[ia] <= 0.0:
        raise NoWitnessFoundError(
            "gamma'^2/gamma <= gamma''/2 on [0,1]; the coupled density stays "
            "convexifiable at this K",
            margin=float(np.max(margin[np.isfinite(margin)], initial=-np.inf)),
        )
    a_star = float(alphas[ia])

    eigw, eigv = np.linalg.eigh(mat.elastic.matrix)
    direction = eigv[:, -1]  # maximizes C e : e at fixed |e|

    best = None
    prev = np.inf
    mag = 1.0
    while mag <= max_strain:
        e = mag * direction
        H = _coupled_hessians(mat, K_diag_e=0.0, K_diag_a=K,
                              alphas=[a_star], strains=e[None, :])[0]
        lam = float(np.linalg.eigvalsh(H)[0])
        if best is None or lam < best[0]:
            best = (lam, e)
        # keep growing until negative and saturated (improvement under 1%)
        if lam < 0.0 and prev - lam <= 1e-2 * abs(lam):
            break
        prev = lam
        mag *= growth
    if best is None or best[0] >= 0.0:
        raise NoWitnessFoundError(
            f"no indefinite Hessian found up to |e| = {max_strain:g}",
            margin=float(margin[ia]),
        )
    return NonconvexityWitness(
        alpha=a_star,
        strain=best[1],
        min_eig=best[0],
        schur_margin=float(margin[ia]),
    )
