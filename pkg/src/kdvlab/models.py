"""Concrete model geometries and the assembly of their long-wave limits.

Each preset packages the constant geometric data of one microscopic model at
its reference point (Hessian constant ``lam``, first-order constant ``mu``,
sound speed ``c = sqrt(lam - mu)``, and the coefficient tensors feeding the
limit nonlinearity) together with a descriptor of the microscopic equation
itself.  ``limit_equation`` turns the geometry into the limit model

    2c dA/dt = (1/4) dxxx A + M . ii_perp(dxA, A) - (1/(2 lam)) f1(dxA, A),
    M = (3/2 - 2 mu/lam) Id - (2c/lam) i0B0,

wrapped in a :class:`~kdvlab.kdv.LimitModel` that also carries the canonical
rescaling whenever the nonlinearity admits one.

The chart helpers (:func:`chart_assemble` / :func:`chart_extract`) realize the
generalized Madelung parameterization u = Psi(Phi(eps*phi), eps^2 n) of each
model as plain array maps; the microscopic and hydrodynamic layers build on
them.
"""

from __future__ import annotations

import numpy as np

from .kdv import LimitModel, QTensor, symmetrize_bilinear

__all__ = [
    "GeometryData",
    "MicroModelSpec",
    "KINDS",
    "preset",
    "limit_equation",
    "coupled_gp_limit",
    "chart_assemble",
    "chart_extract",
    "chart_radius",
    "normal_coupling",
    "dphi_matrix",
]

KINDS = ("GP_SCALAR", "GP_COUPLED", "LL_EASY_PLANE", "LL_EASY_CONE", "AF_CHAIN")

_SYM_TOL = 1e-12


class GeometryData:
    """Constant geometric data of a model at its reference point.

    Parameters
    ----------
    dim : int
        dimension d of the tangent space the limit profile lives in.
    lam : float
        Hessian constant of the confining potential (> 0).
    mu : float
        first-order coupling constant, 0 <= mu < lam.
    i0b0 : (d,d) array, optional
        matrix of i0.B0 acting on tangent coordinates (zero if omitted).
    ii_perp : (d,d,d) array, optional
        coordinates of i0.II_perp(e_i, e_j) in the tangent basis;
        must be symmetric in (i,j) and, for each fixed j, in (i,k).
    f1 : (d,d,d) array, optional
        coordinates of i0.F1(i0 e_i, i0 e_j) in the tangent basis;
        must be symmetric in (i,j).
    label : str
        human-readable tag for reports.

    The sound speed ``c = sqrt(lam - mu)`` is derived, never supplied.
    """

    def __init__(self, dim, lam, mu=0.0, i0b0=None, ii_perp=None, f1=None, label="custom"):
        self.dim = int(dim)
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.lam = float(lam)
        self.mu = float(mu)
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {lam}")
        if self.mu < 0 or self.mu >= self.lam:
            raise ValueError(f"mu must satisfy 0 <= mu < lam, got mu={mu}, lam={lam}")
        self.c = float(np.sqrt(self.lam - self.mu))
        d = self.dim
        self.i0b0 = self._as_array(i0b0, (d, d), "i0b0")
        self.ii_perp = self._as_array(ii_perp, (d, d, d), "ii_perp")
        self.f1 = self._as_array(f1, (d, d, d), "f1")
        self.label = str(label)
        self._validate_tensors()

    @staticmethod
    def _as_array(value, shape, name):
        if value is None:
            return np.zeros(shape)
        arr = np.asarray(value, dtype=float)
        if arr.shape != shape:
            raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError(f"{name} must be finite")
        return arr

    def _validate_tensors(self):
        ii = self.ii_perp
        defect = np.max(np.abs(ii - ii.transpose(1, 0, 2)))
        if defect > _SYM_TOL:
            raise ValueError(f"ii_perp must be symmetric in its two arguments (defect {defect:.3g})")
        # the composed map i0.II_perp(., e_j) is a symmetric matrix for each j
        defect = np.max(np.abs(ii - ii.transpose(2, 1, 0)))
        if defect > _SYM_TOL:
            raise ValueError(
                f"ii_perp must give a symmetric matrix (i,k) for each fixed argument (defect {defect:.3g})"
            )
        defect = np.max(np.abs(self.f1 - self.f1.transpose(1, 0, 2)))
        if defect > _SYM_TOL:
            raise ValueError(f"f1 must be symmetric in its two arguments (defect {defect:.3g})")

    def __repr__(self):
        return (
            f"GeometryData({self.label!r}, dim={self.dim}, lam={self.lam}, "
            f"mu={self.mu}, c={self.c})"
        )


class MicroModelSpec:
    """Descriptor of a microscopic model: which equation, with which parameters."""

    def __init__(self, kind: str, params: dict | None = None):
        kind = str(kind).upper()
        if kind not in KINDS:
            raise ValueError(f"unknown model kind {kind!r}; expected one of {KINDS}")
        self.kind = kind
        self.params = dict(params or {})

    @property
    def is_complex(self) -> bool:
        return self.kind in ("GP_SCALAR", "GP_COUPLED")

    @property
    def n_components(self) -> int:
        """Number of state rows in the microscopic field array."""
        return {
            "GP_SCALAR": 1,
            "GP_COUPLED": 2,
            "LL_EASY_PLANE": 3,
            "LL_EASY_CONE": 3,
            "AF_CHAIN": 6,
        }[self.kind]

    @property
    def dim(self) -> int:
        """Dimension of the limit profile (tangent coordinates)."""
        return {"GP_SCALAR": 1, "GP_COUPLED": 2, "LL_EASY_PLANE": 1, "LL_EASY_CONE": 1, "AF_CHAIN": 2}[
            self.kind
        ]

    def __repr__(self):
        return f"MicroModelSpec({self.kind}, {self.params})"


def _coupled_f1(lam: float, gamma: float) -> np.ndarray:
    """Cubic-potential tensor of the two-component condensate with well depths
    lam and cross-coupling gamma: the potential

        V(u) = (lam/4) * sum_k (1-|u_k|^2)^2 + gamma * (1-|u_1|^2)^2 (1-|u_2|^2)

    expands along the minimum torus as lam|n|^2 + V1(n) + O(|n|^4) with
    V1(n) = lam(n_1^3+n_2^3) - 8 gamma n_1^2 n_2, and f1 is the symmetric
    bilinear with f1(n,n) = grad V1(n)."""
    f1 = np.zeros((2, 2, 2))
    f1[0, 0, 0] = 3.0 * lam
    f1[1, 1, 1] = 3.0 * lam
    f1[0, 0, 1] = f1[0, 1, 0] = f1[1, 0, 0] = -8.0 * gamma
    return f1


def preset(kind: str, params: dict | None = None):
    """Build (GeometryData, MicroModelSpec) for a named model.

    Kinds and parameters:
      - GP_SCALAR: no parameters.
      - GP_COUPLED: lam > 0 (default 1), gamma (default 0).
      - LL_EASY_PLANE: k > 0 (default 1), the easy-plane anisotropy constant.
      - LL_EASY_CONE: alpha > 0, theta0 in (0, pi) required; beta (default 0).
      - AF_CHAIN: no parameters.
    """
    spec = MicroModelSpec(kind, params)
    p = spec.params
    kind = spec.kind

    if kind == "GP_SCALAR":
        _reject_unknown(p, ())
        geom = GeometryData(
            1, lam=1.0, mu=0.0, ii_perp=[[[-1.0]]], f1=[[[3.0]]], label="gp_scalar"
        )
    elif kind == "GP_COUPLED":
        _reject_unknown(p, ("lam", "gamma"))
        lam = float(p.setdefault("lam", 1.0))
        gamma = float(p.setdefault("gamma", 0.0))
        if lam <= 0:
            raise ValueError(f"GP_COUPLED requires lam > 0, got {lam}")
        ii = np.zeros((2, 2, 2))
        for k in range(2):
            ii[k, k, k] = -1.0
        geom = GeometryData(
            2, lam=lam, mu=0.0, ii_perp=ii, f1=_coupled_f1(lam, gamma), label="gp_coupled"
        )
    elif kind == "LL_EASY_PLANE":
        _reject_unknown(p, ("k",))
        k = float(p.setdefault("k", 1.0))
        if k <= 0:
            raise ValueError(f"LL_EASY_PLANE requires k > 0, got {k}")
        geom = GeometryData(1, lam=k, mu=0.0, label="ll_easy_plane")
    elif kind == "LL_EASY_CONE":
        _reject_unknown(p, ("alpha", "beta", "theta0"))
        try:
            alpha = float(p["alpha"])
            theta0 = float(p["theta0"])
        except KeyError as exc:
            raise ValueError(f"LL_EASY_CONE requires parameter {exc.args[0]!r}") from None
        beta = float(p.setdefault("beta", 0.0))
        if alpha <= 0:
            raise ValueError(f"LL_EASY_CONE requires alpha > 0, got {alpha}")
        if not 0.0 < theta0 < np.pi:
            raise ValueError(f"LL_EASY_CONE requires theta0 in (0, pi), got {theta0}")
        s, co = np.sin(theta0), np.cos(theta0)
        lam = alpha * s * s
        b = alpha * s * co + beta * s**3
        geom = GeometryData(
            1,
            lam=lam,
            mu=0.0,
            ii_perp=[[[co / s]]],
            f1=[[[-3.0 * b]]],
            label="ll_easy_cone",
        )
        geom.cone_b = b
    elif kind == "AF_CHAIN":
        _reject_unknown(p, ())
        geom = GeometryData(
            2, lam=2.0, mu=1.0, i0b0=[[0.0, -1.0], [1.0, 0.0]], label="af_chain"
        )
    else:  # pragma: no cover - guarded by MicroModelSpec
        raise ValueError(kind)
    return geom, spec


def _reject_unknown(params: dict, allowed):
    unknown = set(params) - set(allowed)
    if unknown:
        raise ValueError(f"unknown parameters {sorted(unknown)}; allowed: {sorted(allowed)}")


def limit_equation(geom: GeometryData) -> LimitModel:
    """Assemble the limit model of a geometry, in raw form.

    The bilinear tensor is G(dxA, A) with

        G[i,j,k] = sum_m M[k,m] ii_perp[i,j,m] - f1[i,j,k] / (2 lam),
        M = (3/2 - 2 mu/lam) Id - (2c/lam) i0B0,

    so that the equation reads 2c dA/dt = (1/4) dxxxA + G(dxA, A).  A
    canonical form u(tau,x) = s*A(8c tau, x) with Q = -(2/s) sym(G) is attached
    when G is symmetric enough for the conservative rewrite: the part of G
    antisymmetric in (i,j) must vanish (else G(dxA,A) is not a total
    x-derivative) and the resulting Q must be fully symmetric (else the
    Hamiltonian tooling does not apply).  Otherwise the model is raw-only and
    ``symmetry_report`` explains why.
    """
    lam, mu, c, d = geom.lam, geom.mu, geom.c, geom.dim
    M = (1.5 - 2.0 * mu / lam) * np.eye(d) - (2.0 * c / lam) * geom.i0b0
    G = np.einsum("km,ijm->ijk", M, geom.ii_perp) - geom.f1 / (2.0 * lam)

    sym_ij, anti_defect = symmetrize_bilinear(G)
    smax = float(np.max(np.abs(sym_ij)))
    s = -2.0 * smax if smax > 0 else 1.0
    report = {"ij_antisymmetry": anti_defect, "canonical": False, "reason": ""}
    canonical_q = None
    if anti_defect > _SYM_TOL:
        report["reason"] = (
            f"nonlinearity has an antisymmetric part (defect {anti_defect:.3g}); "
            "it cannot be written as dx Q(A,A)"
        )
    else:
        candidate = QTensor(-(2.0 / s) * sym_ij)
        report["full_symmetry_defect"] = candidate.symmetry_defect
        if candidate.symmetry_defect > _SYM_TOL:
            report["reason"] = (
                f"rescaled tensor is not fully symmetric (defect {candidate.symmetry_defect:.3g}); "
                "Hamiltonian/Miura tooling disabled, raw form kept"
            )
        else:
            canonical_q = candidate
            report["canonical"] = True

    model = LimitModel(
        dim=d,
        dispersion=1.0 / (8.0 * c),
        advection=0.0,
        raw_nonlinearity=G,
        canonical_q=canonical_q,
        scale={"time_factor": 8.0 * c, "amplitude": s, "sound_speed": c},
        form="raw",
    )
    model.symmetry_report = report
    return model


def coupled_gp_limit(lam: float, f1=None, dim: int | None = None) -> LimitModel:
    """Limit model of a d-component condensate from its Hessian constant and
    cubic tensor: diagonal -(3/2) rho_k dx rho_k part plus the f1 coupling.

    ``f1`` must be symmetric in its first two indices; ``dim`` is inferred
    from it (or must be given when f1 is omitted).
    """
    if f1 is None:
        if dim is None:
            raise ValueError("either f1 or dim must be given")
        f1 = np.zeros((dim, dim, dim))
    f1 = np.asarray(f1, dtype=float)
    if f1.ndim != 3 or len(set(f1.shape)) != 1:
        raise ValueError(f"f1 must be (d,d,d), got {f1.shape}")
    d = f1.shape[0]
    if dim is not None and dim != d:
        raise ValueError(f"dim={dim} inconsistent with f1 shape {f1.shape}")
    defect = float(np.max(np.abs(f1 - f1.transpose(1, 0, 2)))) if f1.size else 0.0
    if defect > _SYM_TOL:
        raise ValueError(f"f1 must be symmetric in its two arguments (defect {defect:.3g})")
    ii = np.zeros((d, d, d))
    for k in range(d):
        ii[k, k, k] = -1.0
    geom = GeometryData(d, lam=lam, mu=0.0, ii_perp=ii, f1=f1, label="coupled_condensate")
    return limit_equation(geom)


# ---------------------------------------------------------------------------
# charts: u = Psi(Phi(eps*phi), eps^2 n) as plain array maps
# ---------------------------------------------------------------------------


def chart_radius(spec: MicroModelSpec) -> float:
    """Sup-norm bound on eps*phi within which the phase chart stays injective."""
    if spec.kind == "LL_EASY_CONE":
        return float(np.pi * np.sin(float(spec.params["theta0"])))
    if spec.kind == "AF_CHAIN":
        return float(np.pi * np.sqrt(2.0))
    return float(np.pi)


def normal_coupling(spec: MicroModelSpec) -> np.ndarray:
    """Matrix C with i0 tau_a = sum_b C[b,a] nu_b for the chart's frames.

    tau is the tangent frame underlying the phase coordinates and nu the
    normal frame underlying n; C converts between the two bookkeepings
    (e.g. the profile observable is A = -2 lam C^T n in tangent coordinates).
    """
    d = spec.dim
    if spec.kind in ("GP_SCALAR", "GP_COUPLED"):
        return -np.eye(d)
    return np.eye(d)


def _unwrap_periodic(raw: np.ndarray):
    """Unwrap angles along the last axis and report the winding number of the
    periodic closure (nonzero winding means the state is not chart-valued)."""
    unwrapped = np.unwrap(raw, axis=-1)
    closure = unwrapped[..., -1] - unwrapped[..., 0]
    seam = np.angle(np.exp(1j * (raw[..., 0] - raw[..., -1])))
    winding = np.rint((closure + seam) / (2.0 * np.pi)).astype(int)
    return unwrapped, winding


def _apply_phase_ref(eps_phi: np.ndarray, phase_ref, eps: float, period: float):
    """Shift each component of eps*phi by the multiple of ``period`` that
    brings its mean closest to the reference phase's mean."""
    if phase_ref is None:
        return eps_phi
    ref = np.asarray(phase_ref, dtype=float) * eps
    ref_mean = np.mean(np.atleast_2d(ref), axis=-1)
    cur_mean = np.mean(eps_phi, axis=-1)
    shift = period * np.rint((ref_mean - cur_mean) / period)
    return eps_phi + shift[..., None]


def chart_assemble(spec: MicroModelSpec, phi: np.ndarray, n: np.ndarray, eps: float) -> np.ndarray:
    """Microscopic state from chart coordinates phi, n of shape (dim, N)."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    n = np.atleast_2d(np.asarray(n, dtype=float))
    d = spec.dim
    if phi.shape != n.shape or phi.shape[0] != d:
        raise ValueError(f"phi and n must both have shape ({d}, N), got {phi.shape}, {n.shape}")
    kind = spec.kind
    if kind in ("GP_SCALAR", "GP_COUPLED"):
        return (1.0 + eps**2 * n) * np.exp(1j * eps * phi)
    if kind == "LL_EASY_PLANE":
        az = eps * phi[0]
        tilt = eps**2 * n[0]
        return np.stack([np.cos(tilt) * np.cos(az), np.cos(tilt) * np.sin(az), np.sin(tilt)])
    if kind == "LL_EASY_CONE":
        theta0 = float(spec.params["theta0"])
        az = -eps * phi[0] / np.sin(theta0)
        theta = theta0 + eps**2 * n[0]
        return np.stack([np.sin(theta) * np.cos(az), np.sin(theta) * np.sin(az), np.cos(theta)])
    if kind == "AF_CHAIN":
        return _af_assemble(phi, n, eps)
    raise ValueError(kind)  # pragma: no cover


def chart_extract(spec: MicroModelSpec, state: np.ndarray, eps: float, phase_ref=None):
    """Chart coordinates (phi, n, info) of a microscopic state.

    ``info`` reports ``in_chart`` plus diagnostic extremes; ``phase_ref``
    (a previous phi array) selects the branch of the multivalued phase that
    stays closest to it, for continuity across snapshots.
    """
    state = np.asarray(state)
    kind = spec.kind
    if kind in ("GP_SCALAR", "GP_COUPLED"):
        r = np.abs(state)
        n = (r - 1.0) / eps**2
        eps_phi, winding = _unwrap_periodic(np.angle(state))
        eps_phi = _apply_phase_ref(eps_phi, phase_ref, eps, 2.0 * np.pi)
        in_chart = bool(np.all(r >= 0.5) and np.all(r <= 1.5) and np.all(winding == 0))
        info = {
            "in_chart": in_chart,
            "winding": winding,
            "radial_range": (float(r.min()), float(r.max())),
            "max_phase": float(np.max(np.abs(eps_phi))),
        }
        return eps_phi / eps, n, info
    if kind == "LL_EASY_PLANE":
        tilt = np.arcsin(np.clip(state[2], -1.0, 1.0))
        n = tilt / eps**2
        eps_phi, winding = _unwrap_periodic(np.arctan2(state[1], state[0]))
        eps_phi = _apply_phase_ref(eps_phi[None, :], phase_ref, eps, 2.0 * np.pi)[0]
        in_chart = bool(np.max(np.abs(tilt)) < 0.5 * np.pi * (1.0 - 1e-9) and winding == 0)
        info = {
            "in_chart": in_chart,
            "winding": winding,
            "max_normal": float(np.max(np.abs(tilt))),
            "max_phase": float(np.max(np.abs(eps_phi))),
        }
        return (eps_phi / eps)[None, :], n[None, :], info
    if kind == "LL_EASY_CONE":
        theta0 = float(spec.params["theta0"])
        theta = np.arccos(np.clip(state[2], -1.0, 1.0))
        n = (theta - theta0) / eps**2
        az, winding = _unwrap_periodic(np.arctan2(state[1], state[0]))
        eps_phi = -np.sin(theta0) * az
        eps_phi = _apply_phase_ref(eps_phi[None, :], phase_ref, eps, 2.0 * np.pi * np.sin(theta0))[0]
        in_chart = bool(
            np.min(theta) > 1e-9 and np.max(theta) < np.pi * (1.0 - 1e-9) and winding == 0
        )
        info = {
            "in_chart": in_chart,
            "winding": winding,
            "max_normal": float(np.max(np.abs(theta - theta0))),
            "max_phase": float(np.max(np.abs(eps_phi))),
        }
        return (eps_phi / eps)[None, :], n[None, :], info
    if kind == "AF_CHAIN":
        return _af_extract(state, eps)
    raise ValueError(kind)  # pragma: no cover


def dphi_matrix(spec: MicroModelSpec, phi: np.ndarray, eps: float) -> np.ndarray:
    """Coordinate matrix of D(Phi) at eps*phi in the transported frames, shape
    (d, d, N).  Identity for the circle-valued charts; the two-sphere chart of
    the antiferromagnet picks up the radial Jacobi factor sin(r)/r."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    d = spec.dim
    N = phi.shape[-1]
    out = np.broadcast_to(np.eye(d)[:, :, None], (d, d, N)).copy()
    if spec.kind != "AF_CHAIN":
        return out
    norm = np.sqrt(np.sum(phi**2, axis=0))
    r = eps * norm / np.sqrt(2.0)
    jac = np.sinc(r / np.pi)
    safe = np.where(norm > 0, norm, 1.0)
    hat = phi / safe
    outer = hat[:, None, :] * hat[None, :, :]
    eye = np.eye(d)[:, :, None]
    return outer + jac * (eye - outer)


# -- sphere helpers (vectorized over the trailing axis) ----------------------


def _sph_exp(base: np.ndarray, tan: np.ndarray) -> np.ndarray:
    r = np.sqrt(np.sum(tan**2, axis=0))
    return np.cos(r) * base + np.sinc(r / np.pi) * tan


def _sph_log(base: np.ndarray, point: np.ndarray) -> np.ndarray:
    ct = np.clip(np.sum(base * point, axis=0), -1.0, 1.0)
    perp = point - ct * base
    s = np.sqrt(np.sum(perp**2, axis=0))
    # atan2 keeps the geodesic distance at full precision near zero
    # separation, where arccos(ct) would lose half the digits
    theta = np.arctan2(s, ct)
    scale = np.where(s > 1e-14, theta / np.where(s > 1e-14, s, 1.0), 1.0)
    return scale * perp


def _sph_transport(a: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Parallel transport of tangent vector w from a to b along the geodesic."""
    denom = 1.0 + np.sum(a * b, axis=0)
    coef = np.sum(w * b, axis=0) / denom
    return w - coef * (a + b)


_AF_BASE = np.array([1.0, 0.0, 0.0])
_AF_E2 = np.array([0.0, 1.0, 0.0])
_AF_E3 = np.array([0.0, 0.0, 1.0])


def _af_assemble(phi: np.ndarray, n: np.ndarray, eps: float) -> np.ndarray:
    N = phi.shape[-1]
    base = np.broadcast_to(_AF_BASE[:, None], (3, N))
    Z = (eps / np.sqrt(2.0)) * (phi[0] * _AF_E2[:, None] + phi[1] * _AF_E3[:, None])
    omega = _sph_exp(base, Z)
    f2 = _sph_transport(base, omega, np.broadcast_to(_AF_E2[:, None], (3, N)))
    f3 = _sph_transport(base, omega, np.broadcast_to(_AF_E3[:, None], (3, N)))
    Y = (eps**2 / np.sqrt(2.0)) * (n[0] * f3 - n[1] * f2)
    u = _sph_exp(omega, Y)
    v = -_sph_exp(omega, -Y)
    return np.concatenate([u, v], axis=0)


def _af_extract(state: np.ndarray, eps: float):
    u, v = state[:3], state[3:]
    m = -v
    mid = u + m
    mid_norm = np.sqrt(np.sum(mid**2, axis=0))
    in_chart = bool(np.min(mid_norm) > 1e-6)
    omega = mid / np.where(mid_norm > 1e-14, mid_norm, 1.0)
    N = state.shape[-1]
    base = np.broadcast_to(_AF_BASE[:, None], (3, N))
    Z = _sph_log(base, omega)
    eps_phi = np.sqrt(2.0) * np.stack([np.sum(Z * _AF_E2[:, None], axis=0), np.sum(Z * _AF_E3[:, None], axis=0)])
    f2 = _sph_transport(base, omega, np.broadcast_to(_AF_E2[:, None], (3, N)))
    f3 = _sph_transport(base, omega, np.broadcast_to(_AF_E3[:, None], (3, N)))
    Y = _sph_log(omega, u)
    n = (np.sqrt(2.0) / eps**2) * np.stack([np.sum(Y * f3, axis=0), -np.sum(Y * f2, axis=0)])
    dist = np.sqrt(np.sum(Z**2, axis=0))
    in_chart = in_chart and bool(np.max(dist) < np.pi * (1.0 - 1e-9))
    info = {
        "in_chart": in_chart,
        "max_normal": float(np.max(np.sqrt(np.sum(Y**2, axis=0)))),
        "max_phase": float(np.max(np.abs(eps_phi))),
    }
    return eps_phi / eps, n, info
