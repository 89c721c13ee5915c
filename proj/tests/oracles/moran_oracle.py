"""High-precision reference values for the C++ test suite.

Everything here is evaluated with mpmath at 60 significant digits, directly
from the defining formulas (raw transition probabilities, first-step
linear system, explicit sums). The C++ code never calls into this file; its
printed values are frozen into the tests.

    python3 tests/oracles/moran_oracle.py
"""
import sys
from mpmath import mp, mpf, log, exp, loggamma, floor, sqrt, fsum, inf

mp.dps = 60


def probs(m, ell, kappa, sigma, q, theta):
    m, sigma, q = mpf(m), mpf(sigma), mpf(q)
    s = (1 - q) ** ell
    p = (1 - q) ** (ell - theta) * (q / (kappa - 1)) ** theta
    delta, gamma = {}, {}
    for k in range(0, int(m) + 1):
        x = k / m
        den = sigma * x + 1 - x
        if k < m:
            delta[k] = (sigma * x * (1 - x) * s + (1 - x) ** 2 * p) / den
        if k >= 1:
            gamma[k] = (sigma * x * x * (1 - s) + x * (1 - x) * (1 - p)) / den
    return delta, gamma


def exact_by_linear_system(m, ell, kappa, sigma, q, theta, start=1):
    """Dense Gaussian elimination on the first-step equations."""
    delta, gamma = probs(m, ell, kappa, sigma, q, theta)
    n = m
    a = mp.matrix(n, n)
    b = mp.matrix(n, 1)
    for k in range(1, m + 1):
        r = k - 1
        d = delta[k] if k < m else mpf(0)
        g = gamma[k]
        a[r, r] = d + g
        if k < m:
            a[r, r + 1] = -d
        if k > 1:
            a[r, r - 1] = -g
        b[r] = 1
    h = mp.lu_solve(a, b)
    return h[start - 1]


def lemma_sum(m, ell, kappa, sigma, q, theta):
    delta, gamma = probs(m, ell, kappa, sigma, q, theta)
    total = mpf(0)
    pi = mpf(1)
    for i in range(1, m + 1):
        if i < m:
            pi *= delta[i] / gamma[i]
            total += pi / delta[i]
        else:
            total += pi / gamma[m]
    return total


def varphi(x, sigma):
    x, sigma = mpf(x), mpf(sigma)
    t = sigma * (1 - x)
    num = (t * log(t / (sigma - 1)) if t != 0 else 0) + log(sigma * x)
    return num / (1 - t)


def pieces(m, ell, kappa, sigma, q, theta):
    m_, sigma, q = m, mpf(sigma), mpf(q)
    m = mpf(m)
    s = (1 - q) ** ell
    Q = q / ((1 - q) * (kappa - 1))
    Qt = Q ** theta
    L = sigma - 1 - sigma * s
    b = L + s * Qt

    def psi(x):
        return Qt / sigma + (1 - Qt / sigma) * x

    def phi(x):
        return 1 - s * Qt + b * x

    lnK = (-m * Qt / (sigma - Qt) - mpf(1) / 2) * log(psi(1 / m)) + m * phi(0) * log(phi(0)) / b

    def F(x):
        u = L * x
        return -(1 - x) * log(1 - x) + x * log(sigma * s) - (1 + u) * log(1 + u) / L

    def Ftilde(x):
        return (1 + L * x) * log(1 + L * x) / L - phi(x) * log(phi(x)) / b

    def G(x):
        return (log(((sigma - 1) * x + 1) / (sigma * s))
                + (m * Qt / (sigma - Qt) - mpf(1) / 2) * log(psi(x))
                + m * x * log(Qt / (sigma * x) + 1 - Qt / sigma)
                - log(m * x * (1 - x)) / 2 + m * Ftilde(x))

    terms = [m * F(mpf(i) / m) + G(mpf(i) / m) for i in range(1, m_)]
    lnSm = log(fsum(exp(t) for t in terms))
    rho = (sigma * s - 1) / (sigma - 1)
    delta = m ** (mpf(2) / 3)
    im = max(int(floor(m * rho - delta)), 0) + 1
    ip = int(floor(m * rho + delta))
    ipc = min(ip, m_ - 1)
    lnSmd = log(fsum(exp(terms[i - 1]) for i in range(im, ipc + 1)))
    F2 = -(sigma - 1) ** 2 / (sigma ** 2 * s * (1 - s))
    Tmd = fsum(exp(m * (mpf(i) / m - rho) ** 2 * F2 / 2) for i in range(im, ipc + 1))
    delta_p, gamma_p = probs(m_, ell, kappa, sigma, q, theta)
    lnT = fsum(log(delta_p[k]) for k in range(1, m_)) - fsum(log(gamma_p[k]) for k in range(1, m_ + 1))
    return dict(lnK=lnK, lnSm=lnSm, lnSmd=lnSmd, share=1 - exp(lnSmd - lnSm), Tmd=Tmd,
                window=(im, ip, delta), lnT=lnT, rho=rho, F2=F2, mphi=m * varphi(s, sigma),
                scale=(1 + m * Qt) * log(m), Frho=F(rho), phis=varphi(s, sigma))


def stirling(m, i):
    m, i = mpf(m), mpf(i)
    x = i / m
    return (loggamma(m + 1) - loggamma(i + 1) - loggamma(m - i + 1)
            + m * (1 - x) * log(1 - x) + i * log(x) + log(m * x * (1 - x)) / 2)


def show(label, value):
    print(f"{label} = {mp.nstr(value, 20)}")


if __name__ == "__main__":
    show("E m=1", lemma_sum(1, 1, 2, 2, 0.25, 1))
    show("E m=2 lemma", lemma_sum(2, 1, 2, 2, 0.25, 1))
    show("E m=2 linsys start1", exact_by_linear_system(2, 1, 2, 2, 0.25, 1, 1))
    show("E m=2 linsys start2", exact_by_linear_system(2, 1, 2, 2, 0.25, 1, 2))
    for args in [(20, 4, 2, 2, 0.05, 1), (20, 4, 2, 2, 0.05, 4), (60, 10, 4, 3, 0.01, 1)]:
        show(f"lnE lemma {args}", log(lemma_sum(*args)))
        show(f"lnE linsys {args}", log(exact_by_linear_system(*args)))
    show("S(2,1)", stirling(2, 1))
    show("S(100,50)", stirling(100, 50))
    show("varphi(0.75; 2)", varphi(mpf(3) / 4, 2))
    show("varphi(2/3; 3) limit", log(2) + mpf(1) / 2 - 1)
    for args in [(100, 10, 2, 2, 0.1, 1), (50, 10, 2, 2, 0.02, 1), (200, 20, 2, 2, 0.02, 1),
                 (500, 25, 2, 2, 0.02, 25)]:
        p = pieces(*args)
        lnE = log(lemma_sum(*args))
        print(f"--- {args}")
        show("  lnE", lnE)
        for key in ["lnK", "lnSm", "lnSmd", "share", "Tmd", "lnT", "rho", "F2", "mphi", "scale",
                    "Frho", "phis"]:
            show("  " + key, p[key])
        print("  window", p["window"])
        recon = log(exp(p["lnK"] + p["lnSm"]) + exp(p["lnT"]))
        show("  lnE - (lnK + ln(Sm) (+) lnT)", lnE - recon)
        show("  residual ratio", abs(lnE - p["mphi"]) / p["scale"])
