"""Task implementations behind the command line (one function per task)."""

from __future__ import annotations

import time

import numpy as np

from .errors import ConfigurationError
from .loops import make_family
from .oracles import build_split_oracle


def _timed(ctx, key):
    class _T:
        def __enter__(self):
            self.t = time.perf_counter()

        def __exit__(self, *exc):
            ctx.report.timing[key] = round(time.perf_counter() - self.t, 3)
    return _T()


# --------------------------------------------------------------------------
# verify-splitting
# --------------------------------------------------------------------------

def verify_splitting(ctx):
    """Reconstruction, membership, idempotence, linearity and oracle agreement.

    ``params``: ``families`` (list of ``[name, n]``), ``samples``, ``band``
    (``[lo, hi]``), ``xi0_eta0`` (also test the degree-zero projection
    identities of the twisted ``U/K`` splitting) and ``xi0_samples``.
    """
    sc = ctx.scenario
    p = sc.params
    fams = p.get("families") or [[sc.family, sc.n]]
    samples = int(p.get("samples", 500))
    lo, hi = p.get("band", [-3, 3])
    rep = ctx.report
    for name, n in fams:
        label = f"{name}[n={n}]"
        with _timed(ctx, label):
            fam = make_family(name, int(n))
            oracle = build_split_oracle(name, int(n), max(abs(lo), abs(hi)))
            worst = dict.fromkeys(["reconstruction", "membership", "idempotence", "linearity", "oracle"], 0.0)
            for _ in range(samples):
                xi = fam.random_member(ctx.rng, lo, hi)
                xi = xi * (1.0 / xi.norm())
                eta = fam.random_member(ctx.rng, lo, hi)
                eta = eta * (1.0 / eta.norm())
                xp, xm = fam.project_split(xi)
                worst["reconstruction"] = max(worst["reconstruction"], (xp + xm - xi).norm())
                worst["membership"] = max(worst["membership"], fam.membership("L+", xp), fam.membership("L-", xm))
                pp, pm = fam.project_split(xp)
                mp, mm = fam.project_split(xm)
                worst["idempotence"] = max(worst["idempotence"], (pp - xp).norm(), pm.norm(), mp.norm(),
                                           (mm - xm).norm())
                a, b = ctx.rng.standard_normal(2)
                sp, sm = fam.project_split(xi * a + eta * b)
                ep, em = fam.project_split(eta)
                worst["linearity"] = max(worst["linearity"], (sp - (xp * a + ep * b)).norm(),
                                         (sm - (xm * a + em * b)).norm())
                op, om, res = oracle.split(xi)
                worst["oracle"] = max(worst["oracle"], (op - xp).norm(), (om - xm).norm(), res)
            for key, v in worst.items():
                rep.check_max(f"{label}.{key}", v, ctx.tol(key))
            rep.check_max(f"{label}.oracle_intersection_dim", oracle.intersection_dim, 0.5)
            if p.get("xi0_eta0") and name == "twisted-U/K":
                _xi0_eta0_checks(ctx, fam, oracle, label, lo, hi, int(p.get("xi0_samples", 200)))


def _xi0_eta0_checks(ctx, fam, oracle, label, lo, hi, count):
    S = fam.nested.sum
    worst = {"pi_S1(xi0)": 0.0, "pi_S2(xi0)": 0.0, "pi_S2(eta0)": 0.0, "pi_Q1(eta0)": 0.0}
    for _ in range(count):
        xi = fam.random_member(ctx.rng, lo, hi)
        xi = xi * (1.0 / xi.norm())
        xi0, eta0 = fam.xi0_eta0(xi)
        op, om, _ = oracle.split(xi)
        o_xi0, o_eta0 = op.coeff(0), om.coeff(0)
        pairs = {"pi_S1(xi0)": ("s1", xi0, o_xi0), "pi_S2(xi0)": ("s2", xi0, o_xi0),
                 "pi_S2(eta0)": ("s2", eta0, o_eta0), "pi_Q1(eta0)": ("q1", eta0, o_eta0)}
        for key, (part, mine, theirs) in pairs.items():
            d = np.linalg.norm(S.component(mine, part) - S.component(theirs, part))
            worst[key] = max(worst[key], float(d))
    for key, v in worst.items():
        ctx.report.check_max(f"{label}.{key}", v, ctx.tol("xi0_eta0"))


TASK_FUNCTIONS = {"verify-splitting": verify_splitting}


def _register(name):
    def deco(fn):
        TASK_FUNCTIONS[name] = fn
        return fn
    return deco


def _require(params, key):
    if key not in params:
        raise ConfigurationError(f"params.{key} is required")
    return params[key]


# --------------------------------------------------------------------------
# derive-flow
# --------------------------------------------------------------------------

def gaussian_packet(x, amp, width, k, x0=0.0):
    """``amp exp(-(x-x0)^2/width) exp(i k x)`` and its exact second derivative."""
    q = amp * np.exp(-(x - x0) ** 2 / width) * np.exp(1j * k * x)
    s = -2 * (x - x0) / width + 1j * k
    return q, (s ** 2 - 2 / width) * q


def sech_profile(x, amp):
    """``amp sech x`` with exact first and third derivatives."""
    s, t = 1 / np.cosh(x), np.tanh(x)
    return amp * s, -amp * s * t, amp * (5 * s ** 3 * t - s * t ** 3)


def _rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


@_register("derive-flow")
def derive_flow(ctx):
    """Engine flow right-hand sides against closed forms.

    ``params.kind``: ``nls`` (``su(2)``, ``j = 2``, Gaussian packet),
    ``mkdv`` (``su(2)/so(2)``, ``j = 3``, sech profile) or ``first-flow``
    (``su(n)`` with random off-diagonal data, all ``i``).
    """
    from .grid import fd4_derivative
    from .hierarchy import HierarchyInstance, first_flow_closed_form, su2_field

    sc = ctx.scenario
    p = sc.params
    kind = _require(p, "kind")
    g = sc.grid()
    x = g.axes[0].points
    rep = ctx.report
    if kind == "nls":
        fam = make_family("tau", 2)
        h = HierarchyInstance(fam, g)
        q, qxx = gaussian_packet(x, p.get("amp", 0.8), p.get("width", 4.0), p.get("k", 1.0))
        t0 = time.perf_counter()
        P = h.make_P(su2_field(q))
        qt = h.flow_rhs(P, 1, 2).coeff(0)[:, 0, 1]
        elapsed = time.perf_counter() - t0
        expected = 0.5j * (qxx + 2 * np.abs(q) ** 2 * q)
        rep.check_max("nls.rel_l2", _rel(qt, expected), ctx.tol("nls"))
        rep.check_max("nls.runtime_s", elapsed, ctx.tol("runtime_s"))
        ctx.emit("nls_rhs", ["x", "re_qt", "im_qt", "re_expected", "im_expected"],
                 zip(x, qt.real, qt.imag, expected.real, expected.imag))
    elif kind == "mkdv":
        fam = make_family("tau-sigma")
        h = HierarchyInstance(fam, g)
        q, qx_exact, qxxx_exact = sech_profile(x, p.get("amp", 0.9))
        t0 = time.perf_counter()
        P = h.make_P(su2_field(q, real=True))
        qt = h.flow_rhs(P, 1, 3).coeff(0)[:, 0, 1]
        elapsed = time.perf_counter() - t0
        step = g.axes[0].step
        qx = fd4_derivative(q, step)
        qxxx = fd4_derivative(fd4_derivative(qx, step), step)
        shape = qxxx + 6 * q ** 2 * qx
        expected = shape / 3.0
        coeff = float(np.real(np.vdot(shape, qt) / np.vdot(shape, shape)))
        rep.data["mkdv_fitted_coefficient"] = coeff
        rep.check_max("mkdv.rel_err_one_third", _rel(qt, expected), ctx.tol("mkdv"))
        exact_shape = qxxx_exact + 6 * q ** 2 * qx_exact
        rep.check_max("mkdv.rel_err_minus_quarter", _rel(qt, -0.25 * exact_shape), ctx.tol("mkdv_engine"))
        rep.check_max("mkdv.runtime_s", elapsed, ctx.tol("runtime_s"))
        ctx.emit("mkdv_rhs", ["x", "qt", "one_third_form", "minus_quarter_form"],
                 zip(x, qt.real, expected.real, -0.25 * exact_shape))
    elif kind == "first-flow":
        n = sc.n
        fam = make_family("tau", n)
        h = HierarchyInstance(fam, g)
        u = np.zeros((len(x), n, n), complex)
        for a in range(n):
            for b in range(a + 1, n):
                c = ctx.rng.standard_normal(2) @ [1, 1j]
                z = c * np.exp(-(x - ctx.rng.standard_normal()) ** 2 / 3) * np.exp(1j * x * ctx.rng.standard_normal())
                u[:, a, b] = z
                u[:, b, a] = -np.conj(z)
        P = h.make_P(u)
        ux = g.d(u, 0)
        for i in range(1, n):
            got = h.flow_rhs(P, i, 1).coeff(0)
            ref = first_flow_closed_form(h.cartan, i, u, ux)
            rep.check_max(f"first_flow.i{i}.max_abs", float(np.max(np.abs(got - ref))), ctx.tol("first_flow"))
    else:
        raise ConfigurationError(f"unknown derive-flow kind {kind!r}")


# --------------------------------------------------------------------------
# evolve
# --------------------------------------------------------------------------

def sech_soliton(x, eta, carrier, x0=0.0):
    """``eta sech(eta (x - x0)) exp(i carrier x)``."""
    return eta / np.cosh(eta * (x - x0)) * np.exp(1j * carrier * x)


@_register("evolve")
def evolve_task(ctx):
    """Time evolution of the ``su(2)`` hierarchy.

    ``params.mode``:

    * ``zero-curvature``: evolve a soliton by the ``(1, j)`` flow up to ``T``
      with step ``dt``; the Lax connection ``(P, pi_+(Q))`` on the ``(x, t)``
      grid must be flat at every probe ``lambda`` and the conserved
      quantities must not drift.
    * ``commutativity``: apply the ``j`` and ``k`` flows in both orders for
      each step in ``dts``; the gap must shrink at least like ``dt^order``.
    """
    from .grid import Axis, Grid
    from .hierarchy import HierarchyInstance, su2_field
    from .loops import LoopElement
    from .zero_curvature import ConnectionForm, curvature_norm

    sc = ctx.scenario
    p = sc.params
    mode = _require(p, "mode")
    g = sc.grid()
    x = g.axes[0].points
    fam = make_family("tau", 2)
    h = HierarchyInstance(fam, g)
    q0 = sech_soliton(x, p.get("eta", 1.0), p.get("carrier", 0.5))
    P0 = h.make_P(su2_field(q0))
    rep = ctx.report
    if mode == "zero-curvature":
        j = int(p.get("j", 2))
        T, dt = float(_require(p, "T")), float(_require(p, "dt"))
        with _timed(ctx, "evolve_s"):
            tr = h.evolve(P0, 1, j, T, dt, conserved=int(p.get("conserved", 3)))
        with _timed(ctx, "curvature_s"):
            taxis = Axis("t", 0.0, dt, len(tr.states), "decaying")
            G2 = Grid((g.axes[0], taxis), g.boundary)
            Px = np.stack([s.coeffs for s in tr.states], axis=2)
            Qt = np.stack([h.Q_plus(s, 1, j).coeffs for s in tr.states], axis=2)
            theta = ConnectionForm(G2, [LoopElement(Px, tr.states[0].lo, fam.algebra),
                                        LoopElement(Qt, 0, fam.algebra)])
            for lam in ctx.lambdas:
                rep.check_max(f"curvature[lambda={lam:g}]", curvature_norm(theta, [lam], trim=2),
                              ctx.tol("curvature"))
        rep.check_max("conserved_drift", tr.meta["conserved_drift"], ctx.tol("conserved"))
        rep.data["conserved_initial"] = tr.meta["conserved_initial"]
        rep.data["conserved_final"] = tr.meta["conserved_final"]
        every = max(1, len(tr.states) // int(p.get("snapshots", 11)))
        rows = []
        for t, s in list(zip(tr.times, tr.states))[::every]:
            amp = np.abs(s.coeff(0)[:, 0, 1])
            rows += [(float(t), float(xx), float(a)) for xx, a in zip(x, amp)]
        ctx.emit("amplitude", ["t", "x", "abs_q"], rows,
                 {"abs_q": "modulus of the off-diagonal entry q(x, t)"})
    elif mode == "commutativity":
        j, k = p.get("flows", [2, 3])
        dts = [float(v) for v in _require(p, "dts")]
        gaps = []
        with _timed(ctx, "commutativity_s"):
            for dt in dts:
                A = h.rk4_step(h.rk4_step(P0, 1, k, dt), 1, j, dt)
                B = h.rk4_step(h.rk4_step(P0, 1, j, dt), 1, k, dt)
                gaps.append((A - B).norm())
        slopes = np.diff(np.log(gaps)) / np.diff(np.log(dts))
        rep.data["gaps"] = gaps
        rep.data["slopes"] = slopes
        rep.check_min("convergence_order", float(np.min(slopes)), ctx.tol("order"))
        ctx.emit("commutator_gap", ["dt", "gap"], zip(dts, gaps))
    else:
        raise ConfigurationError(f"unknown evolve mode {mode!r}")


# --------------------------------------------------------------------------
# gsge-check
# --------------------------------------------------------------------------

def random_orthogonal(rng, n, shape=()):
    """Haar-like orthogonal matrices from QR of Gaussian samples."""
    Z = rng.standard_normal(tuple(shape) + (n, n))
    Q, R = np.linalg.qr(Z)
    return Q * np.sign(np.diagonal(R, axis1=-2, axis2=-1))[..., None, :]


def _cross_validated(a, b, tol, factor):
    """``a < tol`` implies ``b < factor tol`` and vice versa."""
    return (a >= tol or b < factor * tol) and (b >= tol or a < factor * tol)


def dressed_gsge(p, grid=None):
    """GSGE data on a square grid from the twisted ``O(2,2)`` dressing of the vacuum.

    ``p``: ``pole`` (real, ``|z| != 1``), ``direction`` (a null vector for
    ``I_{2,2}``), ``radius`` and, when ``grid`` is not given, ``box``
    ``[lo, hi]`` and ``size``.
    """
    from .factorization import inverse_scattering, simple_element
    from .grid import Axis, Grid
    from .zero_curvature import gsge_from_connection

    n = 2
    fam = make_family("twisted-U/K", n)
    g = grid
    if g is None:
        lo, hi = p.get("box", [-0.3, 0.3])
        m = int(p.get("size", 21))
        g = Grid((Axis.closed("x1", lo, hi, m), Axis.closed("x2", lo, hi, m)), "decaying")
    coords = np.stack(g.mesh(), -1)
    f = simple_element("twisted-U/K", float(p.get("pole", 1.5)), p.get("direction", [1, 0.3, 1, -0.3]))
    gens = [fam.vacuum_generator(i, 1) for i in range(1, n + 1)]
    res = inverse_scattering(f, fam, gens, coords, radius=p.get("radius", 4.0),
                             samples=int(p.get("samples", 256)))
    return gsge_from_connection(res.components, g), res


@_register("gsge-check")
def gsge_check(ctx):
    """Block versus three-term Lax assembly, and Gauss-Codazzi residuals against curvature.

    ``params.mode``:

    * ``identity``: ``count`` random ``(A, F)`` for each ``n`` in ``ns``; the
      two assemblies must agree coefficient-wise.
    * ``dressed``: GSGE data from a dressed vacuum (see :func:`dressed_gsge`);
      the residuals and the Lax curvature must agree on flatness, and both
      must be large on a perturbation of the same data.
    """
    from .zero_curvature import GSGEData, assemble_gsge_lax, curvature_norm, gsge_connection, \
        gsge_lax_three_term, gsge_residual_norms

    p = ctx.scenario.params
    mode = _require(p, "mode")
    rep = ctx.report
    if mode == "identity":
        count = int(p.get("count", 100))
        for n in p.get("ns", [2, 3]):
            identical, worst = True, 0.0
            for _ in range(count):
                A = random_orthogonal(ctx.rng, n)
                F = ctx.rng.standard_normal((n, n))
                lam = complex(*ctx.rng.standard_normal(2))
                d = GSGEData(A, F)
                blocks, ok = assemble_gsge_lax(d, lam)
                diff = max(float(np.max(np.abs(b - t))) for b, t in zip(blocks, gsge_lax_three_term(d, lam)))
                identical &= ok
                worst = max(worst, diff)
            rep.check_true(f"n{n}.assembly_identical", identical)
            rep.check_max(f"n{n}.assembly_max_diff", worst, ctx.tol("identity"))
    elif mode == "dressed":
        tol, factor = ctx.tol("flat"), float(p.get("factor", 10.0))
        with _timed(ctx, "dressing_s"):
            d, res = dressed_gsge(p)
        rep.data["failed_nodes"] = len(res.failed)
        trim = int(p.get("trim", 2))
        for label, data in (("dressed", d), ("perturbed", _perturb(d, ctx.rng, float(p.get("perturbation", 1e-2))))):
            gauss, codazzi = gsge_residual_norms(data, trim=trim)
            bp = max(gauss, codazzi)
            curv = curvature_norm(gsge_connection(data), ctx.lambdas, trim=trim)
            rep.data[f"{label}.gauss"], rep.data[f"{label}.codazzi"] = gauss, codazzi
            rep.data[f"{label}.curvature"] = curv
            rep.check_true(f"{label}.cross_validated", _cross_validated(bp, curv, tol, factor))
            if label == "dressed":
                rep.check_max("dressed.gauss_codazzi", bp, tol)
                rep.check_max("dressed.curvature", curv, tol)
                rep.check_max("dressed.orthogonality", data.orthogonality_defect(), ctx.tol("orthogonality"))
            else:
                rep.check_min("perturbed.gauss_codazzi", bp, factor * tol)
                rep.check_min("perturbed.curvature", curv, factor * tol)
        theta = gsge_connection(d)
        lams = np.geomspace(0.25, 4.0, 17)
        ctx.emit("curvature_vs_lambda", ["lambda", "curvature"],
                 [(float(l), curvature_norm(theta, [l], trim=trim)) for l in lams])
    else:
        raise ConfigurationError(f"unknown gsge-check mode {mode!r}")


def _perturb(d, rng, eps):
    """Smooth perturbation of ``(A, F)`` keeping ``A`` orthogonal."""
    from .zero_curvature import GSGEData

    X1, X2 = d.grid.mesh()
    n = d.n
    K = rng.standard_normal((n, n))
    K = K - K.T
    bump = np.sin(3 * X1 + 1) * np.cos(2 * X2)
    R = np.linalg.matrix_power(np.eye(n) + eps * bump[..., None, None] * K / 8, 8)
    Q, Rr = np.linalg.qr(R)
    Q = Q * np.sign(np.diagonal(Rr, axis1=-2, axis2=-1))[..., None, :]
    F = d.F + eps * bump[..., None, None] * rng.standard_normal((n, n))
    return GSGEData(d.A @ Q, F, d.grid)


# --------------------------------------------------------------------------
# inverse-scattering and dress
# --------------------------------------------------------------------------

def _xt_grid(p, key, default):
    """A decaying ``(x, t)`` grid from ``params[key] = [x0, x1, nx, t0, t1, nt]``."""
    from .grid import Axis, Grid

    x0, x1, nx, t0, t1, nt = p.get(key, default)
    return Grid((Axis.closed("x", x0, x1, int(nx)), Axis.closed("t", t0, t1, int(nt))), "decaying")


def _pde_residual(components, grid, family):
    """Relative mismatch of ``P_t`` (fourth-order stencil in ``t``) against the engine
    flow right-hand side at the middle time of a five-node ``t`` axis."""
    from .grid import Grid
    from .hierarchy import HierarchyInstance
    from .loops import LoopElement

    P = components[0]
    mid = grid.axes[1].size // 2
    ut = grid.d(P.coeff(0), 1)[:, mid]
    h = HierarchyInstance(family, Grid((grid.axes[0],), grid.boundary))
    rhs = h.flow_rhs(LoopElement(P.coeffs[:, :, mid], P.lo, family.algebra), 1, 2)
    a, b = rhs.coeff(0)[2:-2], ut[2:-2]
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def _soliton_checks(ctx, components, grid, z, c, prefix):
    from .factorization import nls_soliton_closed_form

    X, T = grid.mesh()
    q = components[0].coeff(0)[..., 0, 1]
    ref = nls_soliton_closed_form(X, T, z, c)
    ctx.report.check_max(f"{prefix}.closed_form_max_abs", float(np.nanmax(np.abs(q - ref))), ctx.tol("closed_form"))
    return q


@_register("inverse-scattering")
def inverse_scattering_task(ctx):
    """``P_f`` from a rational loop ``f`` through Birkhoff factorization of ``f V``.

    ``family = tau``: a one-pole element dresses the NLS vacuum on the
    scenario's ``(x, t)`` grid (five ``t`` nodes); checks the NLS residual and the closed-form soliton.
    ``family = twisted-U/K``: a symmetry-closed pole quadruple on a square
    grid gives GSGE data whose Gauss and Codazzi residuals are checked.
    """
    from .factorization import formal_inverse_scattering, simple_element
    from .zero_curvature import build_F_from_metric, gsge_residual_norms, row_norm_defect

    sc = ctx.scenario
    p = sc.params
    rep = ctx.report
    if sc.family == "tau":
        fam = make_family("tau", 2)
        z = complex(*p.get("pole", [0.25, 0.5]))
        direction = p.get("direction", [1, 1])
        f = simple_element("tau", z, direction)
        g = sc.grid()
        with _timed(ctx, "pde_s"):
            res = formal_inverse_scattering(f, fam, g, radius=p.get("radius"))
        rep.check_max("pde_residual", _pde_residual(res.components, g, fam), ctx.tol("pde"))
        rep.check_max("failed_nodes", len(res.failed), 0)
        _soliton_checks(ctx, res.components, g, z, direction[1] / direction[0], "pde_grid")
    elif sc.family == "twisted-U/K":
        with _timed(ctx, "inverse_scattering_s"):
            d, res = dressed_gsge(p, sc.grid())
        gauss, codazzi = gsge_residual_norms(d, trim=int(p.get("trim", 2)))
        rep.check_max("gauss", gauss, ctx.tol("gsge"))
        rep.check_max("codazzi", codazzi, ctx.tol("gsge"))
        rep.check_max("orthogonality", d.orthogonality_defect(), ctx.tol("orthogonality"))
        rep.check_max("failed_nodes", len(res.failed), 0)
        rep.data["row_norm_defect"] = float(np.max(row_norm_defect(d.a_row)))
        rep.data["residual_max"] = float(np.max(res.factorization.residual))
        if "metric" in sc.tolerances:
            Fm = build_F_from_metric(d.a_row, d.grid)
            rep.check_max("F_vs_metric", float(np.max(np.abs(Fm - d.F)[2:-2, 2:-2])), ctx.tol("metric"))
        ctx.emit("gsge_fields", ["x1", "x2", "a11", "a12", "f12", "f21"],
                 _gsge_rows(d))
    else:
        raise ConfigurationError(f"inverse-scattering supports tau and twisted-U/K, not {sc.family!r}")


def _gsge_rows(d):
    from .runner import field_rows

    return field_rows(d.grid, {"a11": d.A[..., 0, 0], "a12": d.A[..., 0, 1],
                               "f12": d.F[..., 0, 1], "f21": d.F[..., 1, 0]})


def _expm_loop(rng, family, lo, hi, scale):
    """A random member of ``family`` on degrees ``lo..hi`` scaled to norm ``scale``."""
    xi = family.random_member(rng, lo, hi)
    return xi * (scale / xi.norm())


@_register("dress")
def dress_task(ctx):
    """Factorization and dressing checks for the ``su(2)`` family.

    * synthetic products ``G = E0 M0`` with ``E0 = exp(lambda X + lambda^2 Y)``
      and ``M0 = exp(m / lambda)`` are factored back into ``E0`` and ``M0``;
    * the NLS vacuum dressed by a one-pole element is tracked over the
      scenario's ``(x, t)`` grid (amplitude and velocity drift) and checked
      against the NLS equation on ``params.pde_grid``;
    * the action axiom ``(f2 f1) * P = f2 * (f1 * P)``;
    * a uniqueness probe: a second solve on another circle and depth.
    """
    import scipy.linalg

    from .factorization import birkhoff_factorize, dress, simple_element, track_soliton, \
        uniqueness_probe, vacuum_frame_function

    sc = ctx.scenario
    p = sc.params
    rep = ctx.report
    fam = make_family("tau", 2)

    # synthetic products
    count = int(p.get("products", 20))
    lams = np.exp(2j * np.pi * (np.arange(16) + 0.3) / 16) * 1.3
    Xs, Ys, ms = [], [], []
    for _ in range(count):
        Xs.append(_expm_loop(ctx.rng, fam, 0, 0, 0.5).coeff(0))
        Ys.append(_expm_loop(ctx.rng, fam, 0, 0, 0.3).coeff(0))
        ms.append(_expm_loop(ctx.rng, fam, 0, 0, 0.4).coeff(0))
    Xs, Ys, ms = map(np.array, (Xs, Ys, ms))
    E0 = lambda L: scipy.linalg.expm(L[:, None, None, None] * Xs + (L ** 2)[:, None, None, None] * Ys)
    M0 = lambda L: scipy.linalg.expm((1 / L)[:, None, None, None] * ms)
    G = lambda L: E0(np.atleast_1d(L)) @ M0(np.atleast_1d(L))
    with _timed(ctx, "products_s"):
        fac = birkhoff_factorize(G, fam, 1.0, samples=128)
    rep.check_max("product.plus_max_abs", float(np.max(np.abs(fac.plus(lams) - E0(lams)))), ctx.tol("product"))
    rep.check_max("product.minus_max_abs", float(np.max(np.abs(fac.minus(lams) - M0(lams)))), ctx.tol("product"))
    rep.check_max("product.uniqueness", uniqueness_probe(G, fam, 1.0, fac, lams, samples=128), ctx.tol("product"))

    # vacuum dressing
    z = complex(*p.get("pole", [0.25, 0.5]))
    direction = p.get("direction", [1, 1])
    f = simple_element("tau", z, direction)
    gens = [fam.vacuum_generator(1, 1), fam.vacuum_generator(1, 2)]

    def dressed_on(grid):
        coords = np.stack(grid.mesh(), -1)
        V = vacuum_frame_function(fam, gens, coords)
        comps, fac = dress(f, V, gens, fam, raise_on_failure=False)
        return comps, fac

    g = sc.grid()
    with _timed(ctx, "track_s"):
        comps, fac = dressed_on(g)
    rep.check_max("track.failed_nodes", len(fac.meta["failed"]), 0)
    q = _soliton_checks(ctx, comps, g, z, direction[1] / direction[0], "track")
    tr = track_soliton(q, g.axes[0].points, g.axes[1].points)
    amp, vel = tr.drift()
    rep.check_max("track.amplitude_drift", amp, ctx.tol("drift"))
    rep.check_max("track.velocity_drift", vel, ctx.tol("drift"))
    rep.data["amplitude_mean"] = float(tr.amplitudes.mean())
    rep.data["velocity_mean"] = float(tr.velocities.mean())
    ctx.emit("soliton_track", ["t", "center", "amplitude"], zip(tr.times, tr.centers, tr.amplitudes))
    gp = _xt_grid(p, "pde_grid", [-10, 10, 801, 0.48, 0.52, 5])
    with _timed(ctx, "pde_s"):
        comps_p, _ = dressed_on(gp)
    rep.check_max("pde_residual", _pde_residual(comps_p, gp, fam), ctx.tol("pde"))

    # action axiom on a short line at fixed t
    x = np.linspace(-2, 2, 9)
    coords = np.stack([x, 0.1 * np.ones_like(x)], -1)
    f1 = simple_element("tau", complex(*p.get("pole_1", [0.3, 0.6])), p.get("direction_1", [1, 0.5]))
    f2 = simple_element("tau", complex(*p.get("pole_2", [-0.4, 0.9])), p.get("direction_2", [1, -0.7]))
    V = vacuum_frame_function(fam, gens, coords)
    with _timed(ctx, "axiom_s"):
        both, _ = dress(f2 * f1, V, gens, fam)
        one, fac1 = dress(f1, V, gens, fam)
        two, _ = dress(f2, fac1.plus_direct, one, fam)
    diff = max(float(np.max(np.abs(a.coeffs - b.coeffs))) for a, b in zip(both, two))
    rep.check_max("action_axiom", diff, ctx.tol("axiom"))
