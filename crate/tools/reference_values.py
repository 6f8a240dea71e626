#!/usr/bin/env python3
"""Reference-value generator for the Rust test suites.

Computes high-precision constants that are frozen into the unit and
integration tests: normal CDF/quantile values, Gaussian cone (orthant)
probabilities, three-item ranking distributions, discrete KL values for
the covariance lower-bound pair, and closed-form expected-max values.

Every quantity here is computed by a route independent of the library
implementation (mpmath arbitrary-precision quadrature over Cartesian
coordinates, or closed forms), so agreement is evidence of correctness
rather than shared bugs.

Run: python3 tools/reference_values.py
"""

import mpmath as mp

mp.mp.dps = 30


def phi(x):
    return mp.exp(-x * x / 2) / mp.sqrt(2 * mp.pi)


def Phi(x):
    return mp.erfc(-x / mp.sqrt(2)) / 2


def Phi_inv(p):
    return -mp.sqrt(2) * mp.erfinv(1 - 2 * p)


def orthant2(mean, cov):
    """P{A >= 0, B >= 0} for (A,B) ~ N(mean, cov).

    Reduced to a 1D integral by conditioning B on A:
    P = int_0^inf pdf_A(a) * Phi((E[B|A=a]) / sd[B|A]) da.
    """
    ma, mb = mp.mpf(mean[0]), mp.mpf(mean[1])
    va, vb, cab = mp.mpf(cov[0][0]), mp.mpf(cov[1][1]), mp.mpf(cov[0][1])
    sa = mp.sqrt(va)
    s_cond = mp.sqrt(vb - cab * cab / va)

    def f(a):
        cond_mean = mb + (cab / va) * (a - ma)
        return phi((a - ma) / sa) / sa * Phi(cond_mean / s_cond)

    lo = max(mp.mpf(0), ma - 14 * sa)
    hi = ma + 14 * sa
    if hi <= 0:
        hi = 14 * sa
    return mp.quad(f, [lo, (lo + hi) / 2, hi])


def ordering_prob(mu, sigma, a, b, c):
    """P{X_a >= X_b >= X_c} via the difference pair (X_a-X_b, X_b-X_c)."""
    mean = [mu[a] - mu[b], mu[b] - mu[c]]
    v_ab = sigma[a][a] + sigma[b][b] - 2 * sigma[a][b]
    v_bc = sigma[b][b] + sigma[c][c] - 2 * sigma[b][c]
    cov_ab_bc = (
        sigma[a][b] + sigma[b][c] - sigma[a][c] - sigma[b][b]
    )  # Cov(X_a-X_b, X_b-X_c)
    return orthant2(mean, [[v_ab, cov_ab_bc], [cov_ab_bc, v_bc]])


def triple_distribution(mu, sigma):
    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    return [ordering_prob(mu, sigma, *p) for p in perms]


def show(label, value, digits=22):
    print(f"{label} = {mp.nstr(value, digits)}")


print("== standard normal CDF ==")
for x in ["0.5", "1", "2", "3", "-1", "-5", "-8", "8", "0.001", "-0.7071067811865475244"]:
    show(f"Phi({x})", Phi(mp.mpf(x)))

print("\n== standard normal quantile ==")
for p in ["1e-12", "1e-9", "0.025", "0.3", "0.75", "0.975"]:
    show(f"Phi_inv({p})", Phi_inv(mp.mpf(p)))

print("\n== isotropic cone probabilities, N(mu, I_2) ==")
# u1 at angle 0, u2 at angle 2.1 rad; correlation of (u1.X, u2.X) is cos(2.1).
mu2 = [mp.mpf("0.7"), mp.mpf("-0.3")]
u1 = [mp.mpf(1), mp.mpf(0)]
th = mp.mpf("2.1")
u2 = [mp.cos(th), mp.sin(th)]
mean = [u1[0] * mu2[0] + u1[1] * mu2[1], u2[0] * mu2[0] + u2[1] * mu2[1]]
rho = u1[0] * u2[0] + u1[1] * u2[1]
show("cone N((0.7,-0.3),I), u1=0rad, u2=2.1rad", orthant2(mean, [[1, rho], [rho, 1]]))

mu2b = [mp.mpf("1.2"), mp.mpf("0.4")]
thb = mp.mpf("0.9")
u2b = [mp.cos(thb), mp.sin(thb)]
meanb = [mu2b[0], u2b[0] * mu2b[0] + u2b[1] * mu2b[1]]
rhob = u2b[0]
show("cone N((1.2,0.4),I), u1=0rad, u2=0.9rad", orthant2(meanb, [[1, rhob], [rhob, 1]]))

print("\n== three-item ranking distribution, normalized model A ==")
# Model A: normalize(mu=(1,2,3), sigma=I): mu' = sqrt(3/2)*(-1,0,1),
# sigma' = (3/2)*(I - J/3).
s32 = mp.sqrt(mp.mpf(3) / 2)
muA = [-s32, mp.mpf(0), s32]
sigA = [
    [mp.mpf(1), mp.mpf(-1) / 2, mp.mpf(-1) / 2],
    [mp.mpf(-1) / 2, mp.mpf(1), mp.mpf(-1) / 2],
    [mp.mpf(-1) / 2, mp.mpf(-1) / 2, mp.mpf(1)],
]
probsA = triple_distribution(muA, sigA)
for code, p in zip(["abc", "acb", "bac", "bca", "cab", "cba"], probsA):
    show(f"P_A[{code}]", p)
show("sum", sum(probsA))

print("\n== three-item ranking distribution, zero-mean model B ==")
# Model B: mu = 0, a correlated normalized covariance (trace 3, rows sum 0).
muB = [mp.mpf(0)] * 3
sigB = [
    [mp.mpf("1.4"), mp.mpf("-1.0"), mp.mpf("-0.4")],
    [mp.mpf("-1.0"), mp.mpf("1.1"), mp.mpf("-0.1")],
    [mp.mpf("-0.4"), mp.mpf("-0.1"), mp.mpf("0.5")],
]
probsB = triple_distribution(muB, sigB)
for code, p in zip(["abc", "acb", "bac", "bca", "cab", "cba"], probsB):
    show(f"P_B[{code}]", p)
show("sum", sum(probsB))

print("\n== pairwise probabilities, model A ==")
show("P_A{X1>X2}", Phi((muA[0] - muA[1]) / mp.sqrt(3)))
show("P_A{X2>X3}", Phi((muA[1] - muA[2]) / mp.sqrt(3)))
show("P_A{X1>X3}", Phi((muA[0] - muA[2]) / mp.sqrt(6)))

print("\n== covariance lower-bound pair, n = 3, eps = 1/16 ==")
# Sigma1 = (n/(n-1)) M M = (n/(n-1)) M; Sigma2 = n/((n-1) - 2 eps/n) M(I+eps E)M.
n = 3
eps = mp.mpf(1) / 16
M = mp.eye(n) - mp.ones(n, n) / n
S1 = (mp.mpf(n) / (n - 1)) * M
E = mp.zeros(n, n)
E[0, 1] = eps
E[1, 0] = eps
S2 = (mp.mpf(n) / ((n - 1) - 2 * eps / n)) * (M * (mp.eye(n) + E) * M)
show("tr(S1)", sum(S1[i, i] for i in range(n)))
show("tr(S2)", sum(S2[i, i] for i in range(n)))
gap = max(abs(S1[i, j] - S2[i, j]) for i in range(n) for j in range(n))
show("linf gap", gap)

def mat_to_list(S):
    return [[S[i, j] for j in range(3)] for i in range(3)]

zero3 = [mp.mpf(0)] * 3
p1 = triple_distribution(zero3, mat_to_list(S1))
p2 = triple_distribution(zero3, mat_to_list(S2))
kl12 = sum(p * mp.log(p / q) for p, q in zip(p1, p2))
show("KL(P1||P2) triple (0,1,2)", kl12)
show("eps^2 bound", eps * eps)

print("\n== expected max of a bivariate normal pair ==")
# E[max(A,B)] = muA*Phi(d/s) + muB*Phi(-d/s) + s*phi(d/s), d = muA-muB,
# s^2 = Var(A-B). Pairs from the 4-item anticorrelated welfare model:
# mu = (1, 1, 0.9, -2.9), utilities on the sum-zero hyperplane; sigma below.
wmu = [mp.mpf(1), mp.mpf(1), mp.mpf("0.9"), mp.mpf("-2.9")]


def emax(mu_a, mu_b, var_a, var_b, cov_ab):
    d = mu_a - mu_b
    s = mp.sqrt(var_a + var_b - 2 * cov_ab)
    return mu_a * Phi(d / s) + mu_b * Phi(-d / s) + s * phi(d / s)


# items 0,1 strongly correlated; item 2 anticorrelated with both.
show("E[max] rho=+0.95 pair, means (1,1), var 1", emax(1, 1, 1, 1, mp.mpf("0.95")))
show("E[max] rho=-0.8 pair, means (1,0.9), var 1", emax(1, mp.mpf("0.9"), 1, 1, mp.mpf("-0.8")))

print("\n== Bradley-Terry closed form ==")
show("log 3", mp.log(3))
