"""Reference values for the manufactured solution and the skeleton stress.

Derivatives are taken with high-precision numerical differentiation
(mpmath, 40 digits), so the only shared input with the Rust code is the
definition of the fields. Run with `python3 derive_mms.py`; the printed
numbers are frozen in `crates/core/tests/mms_oracle.rs` and the
`poro_form` unit tests.
"""
import mpmath as mp

mp.mp.dps = 40


def mat(a, b, c, d):
    return mp.matrix([[a, b], [c, d]])


def skeleton_stress(F, E, nu, p):
    c = E / (4 * (1 + nu))
    beta = nu / (1 - 2 * nu)
    C = F.T * F
    J = mp.det(F)
    Ci = C ** -1
    return 2 * c * mp.eye(2) - 2 * c * J ** (-2 * beta) * Ci - p * J * Ci


def case(prm, xv, Xv, tv, normal):
    AF, AP, APS, B, Cc = (prm[k] for k in ("AF", "AP", "APS", "B", "C"))
    mu, rho, K, phi = (prm[k] for k in ("mu", "rho", "K", "phi"))
    E, nu, rhos, alpha, beta_bj = (prm[k] for k in ("E", "nu", "rhos", "alpha", "beta_bj"))
    a = B * mp.pi
    lam = 2 * Cc**2 * mp.pi**2 * mu / rho

    def S(px, py, i):
        if i == 0:
            return -mp.cos(a * px) * mp.sin(a * py)
        return mp.sin(a * px) * mp.cos(a * py)

    gu = lambda t: mp.exp(-lam * t)
    gp = lambda t: mp.exp(-2 * lam * t)
    vF = lambda x, y, t, i: AF * S(x, y, i) * gu(t)
    vP = lambda x, y, t, i: AP * S(x, y, i) * gu(t)
    p = lambda x, y, t: -(mp.cos(2 * a * x) + mp.cos(2 * a * y)) * rho * gp(t) / 4
    u = lambda X, Y, t, i: APS * S(X, Y, i) * (1 - gu(t)) / lam

    def d(f, args, orders):
        return mp.diff(f, args, orders)

    x0, y0 = (mp.mpf(v) for v in xv)
    X0, Y0 = (mp.mpf(v) for v in Xv)
    t0 = mp.mpf(tv)

    def fluid_body(x, y, t):
        out = []
        for i in range(2):
            f = lambda x, y, t: vF(x, y, t, i)
            dt = d(f, (x, y, t), (0, 0, 1))
            conv = vF(x, y, t, 0) * d(f, (x, y, t), (1, 0, 0)) + vF(x, y, t, 1) * d(f, (x, y, t), (0, 1, 0))
            lap = d(f, (x, y, t), (2, 0, 0)) + d(f, (x, y, t), (0, 2, 0))
            gpi = d(p, (x, y, t), (1, 0, 0) if i == 0 else (0, 1, 0))
            out.append(rho * dt + rho * conv + gpi - mu * lap)
        return out

    def grad_u(X, Y, t):
        g = [[d(lambda X, Y: u(X, Y, t, i), (X, Y), (1, 0) if j == 0 else (0, 1)) for j in range(2)] for i in range(2)]
        return mat(g[0][0], g[0][1], g[1][0], g[1][1])

    def F_of(X, Y, t):
        return mp.eye(2) + grad_u(X, Y, t)

    def cur(X, Y, t):
        return X + u(X, Y, t, 0), Y + u(X, Y, t, 1)

    def ud(X, Y, t, i):
        return d(lambda t: u(X, Y, t, i), t, 1)

    def udd(X, Y, t, i):
        return d(lambda t: u(X, Y, t, i), t, 2)

    def kinv(F):
        J = mp.det(F)
        k = F * (K * mp.eye(2)) * F.T / J
        return k ** -1, k

    def poro_bodies(X, Y, t):
        F = F_of(X, Y, t)
        J = mp.det(F)
        ki, _ = kinv(F)
        x, y = cur(X, Y, t)
        w = mp.matrix([vP(x, y, t, i) - ud(X, Y, t, i) for i in range(2)])
        gvP = mat(*[d(lambda x, y: vP(x, y, t, i), (x, y), o) for i in range(2) for o in ((1, 0), (0, 1))])
        gpx = mp.matrix([d(lambda x, y: p(x, y, t), (x, y), o) for o in ((1, 0), (0, 1))])
        udv = mp.matrix([ud(X, Y, t, i) for i in range(2)])
        dvdt = mp.matrix([d(lambda t: vP(*cur(X, Y, t), t, i), t, 1) for i in range(2)])
        bPF = rho * dvdt - rho * gvP * udv + gpx + mu * phi * ki * w

        def Pcomp(i, j):
            return lambda X, Y: (F_of(X, Y, t) * skeleton_stress(F_of(X, Y, t), E, nu, 0))[i, j]

        div0 = mp.matrix([d(Pcomp(i, 0), (X, Y), (1, 0)) + d(Pcomp(i, 1), (X, Y), (0, 1)) for i in range(2)])
        rho0 = (1 - phi) * rhos
        acc = mp.matrix([udd(X, Y, t, i) for i in range(2)])
        bS = rho0 * acc - div0 + (1 - phi) * J * gpx - mu * J * phi**2 * ki * w
        return bPF, bS

    def jumps(X, Y, t, n):
        F = F_of(X, Y, t)
        J = mp.det(F)
        _, k = kinv(F)
        x, y = cur(X, Y, t)
        gvF = mat(*[d(lambda x, y: vF(x, y, t, i), (x, y), o) for i in range(2) for o in ((1, 0), (0, 1))])
        pv = p(x, y, t)
        sigF = -pv * mp.eye(2) + mu * (gvF + gvF.T)
        sigP = F * skeleton_stress(F, E, nu, 0) * F.T / J - pv * mp.eye(2)
        n = mp.matrix(n)
        g_sigma = (sigF - sigP) * n
        g_sigma_n = (n.T * sigF * n)[0] + pv
        trk3 = mp.mpf(3) / 2 * (k[0, 0] + k[1, 1])
        kappa = mp.sqrt(trk3) / (alpha * mu * mp.sqrt(3))
        sn = sigF * n
        g_n = [vF(x, y, t, i) - ud(X, Y, t, i) - phi * (vP(x, y, t, i) - ud(X, Y, t, i)) for i in range(2)]
        g_t = [vF(x, y, t, i) - ud(X, Y, t, i) - beta_bj * phi * (vP(x, y, t, i) - ud(X, Y, t, i)) + kappa * sn[i]
               for i in range(2)]
        return g_sigma, g_sigma_n, g_n, g_t

    s = lambda v: mp.nstr(v, 17)
    sl = lambda vs: "[" + ", ".join(s(v) for v in vs) + "]"
    print("  vF", sl([vF(x0, y0, t0, i) for i in range(2)]))
    print("  p", s(p(x0, y0, t0)))
    print("  rho_bF", sl(fluid_body(x0, y0, t0)))
    print("  u", sl([u(X0, Y0, t0, i) for i in range(2)]))
    print("  udot", sl([ud(X0, Y0, t0, i) for i in range(2)]))
    bPF, bS = poro_bodies(X0, Y0, t0)
    print("  rho_bPF", sl(bPF))
    print("  rho0_bS", sl(bS))
    print("  x(X)", sl(cur(X0, Y0, t0)))
    g_sigma, g_sigma_n, g_n, g_t = jumps(X0, Y0, t0, normal)
    print("  g_sigma", sl(g_sigma))
    print("  g_sigma_n", s(g_sigma_n))
    print("  g_n", sl(g_n))
    print("  g_t", sl(g_t))


base = dict(AF=mp.mpf("0.1"), AP=mp.mpf("0.21"), APS=mp.mpf("-0.01"), B=1, C=mp.mpf("0.01"), mu=1, rho=1,
            K=mp.mpf("0.1"), phi=mp.mpf("0.5"), E=1000, nu=mp.mpf("0.3"), rhos=1, alpha=1, beta_bj=1)
strong = dict(base, APS=mp.mpf("-0.5"), C=mp.mpf("0.3"), E=50, beta_bj=0)

nrm = [mp.cos(mp.pi / 6), mp.sin(mp.pi / 6)]
print("case default")
case(base, ("0.3", "0.15"), ("0.1", "-0.2"), "0.1", nrm)
print("case strong")
case(strong, ("0.3", "0.15"), ("0.1", "-0.2"), "0.1", nrm)

Fm = mat(mp.mpf("1.1"), mp.mpf("0.05"), mp.mpf("0.02"), mp.mpf("0.97"))
print("skeleton S", [mp.nstr(v, 17) for v in skeleton_stress(Fm, 1000, mp.mpf("0.3"), mp.mpf("0.3"))])
