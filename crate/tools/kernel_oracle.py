#!/usr/bin/env python3
"""One-shot high-precision oracle for the golden files under crates/core/tests/golden.

Routes used here are deliberately different from the Rust implementation:

* normalization constant: Gamma functions at 40 digits;
* kernel values: tanh-sinh quadrature with the substitution u = s + v^(2/a),
  cross-checked against the Gauss hypergeometric closed form;
* cell integrals: Fubini swap, the inner integral being a regularized
  incomplete Beta function;
* tail-bound optimum: exhaustive mesh search with mpmath series.

Run: python3 tools/kernel_oracle.py > crates/core/tests/golden/kernel.csv
"""
import sys
import mpmath as mp

mp.mp.dps = 40


def c_norm(h):
    h = mp.mpf(h)
    beta = mp.gamma(2 - 2 * h) * mp.gamma(h - mp.mpf(1) / 2) / mp.gamma(mp.mpf(3) / 2 - h)
    return mp.sqrt(h * (2 * h - 1) / beta)


def kernel_quad(h, t, s):
    h, t, s = mp.mpf(h), mp.mpf(t), mp.mpf(s)
    a = h - mp.mpf(1) / 2
    k = 2 / a
    f = lambda v: k * v * (s + v ** k) ** a
    inner = mp.quad(f, [0, (t - s) ** (1 / k)])
    return c_norm(h) * s ** (-a) * inner


def kernel_hyp(h, t, s):
    h, t, s = mp.mpf(h), mp.mpf(t), mp.mpf(s)
    a = h - mp.mpf(1) / 2
    inner = (t - s) ** a * s ** a / a * mp.hyp2f1(-a, a, a + 1, -(t - s) / s)
    return c_norm(h) * s ** (-a) * inner


def cumulative(h, t, x):
    """int_0^x K(t, r) dr via Fubini and the incomplete Beta function."""
    h, t, x = mp.mpf(h), mp.mpf(t), mp.mpf(x)
    a = h - mp.mpf(1) / 2
    if x == 0:
        return mp.mpf(0)
    full = mp.beta(1 - a, a)
    head = x ** (1 + a) / (1 + a)
    if x >= t:
        return c_norm(h) * full * t ** (1 + a) / (1 + a)
    tail = mp.quad(lambda u: u ** a * mp.betainc(1 - a, a, 0, x / u, regularized=True), [x, t])
    return c_norm(h) * full * (head + tail)


def exact_l2(h, t, cum, m):
    """(2^m/t) sum_i M_i^2 from cumulative values on the level-(m+1) knots."""
    n = 2 ** (m + 1)
    total = mp.mpf(0)
    for i in range(2 ** m):
        left = cum[2 * i + 1] - cum[2 * i]
        right = cum[2 * i + 2] - cum[2 * i + 1]
        total += (right - left) ** 2
    return mp.mpf(2) ** m / t * total


def c_theta_gamma(theta, gamma):
    z = mp.mpf(2) ** (-theta)
    return 1 / mp.nsum(lambda n: n ** gamma * z ** n, [1, mp.inf])


def tail_bound(h, m, lam, p, r, n, q, theta, gamma):
    c_qg = mp.mpf(1)
    c_tg = c_theta_gamma(theta, gamma)
    c_qt = 1 / (mp.mpf(2) ** (2 * (1 - (1 + theta) / q) - 1) - 1)
    c_nh = mp.mpf(2) ** (4 * n - 1) * (4 * n - 1) ** n * (1 + mp.mpf(2) ** (2 * n * (1 - h)))
    c_rpnh = (r + 1) * (2 * n + 1) * (p - 1) ** (mp.mpf(n) / 2) * (2 * n) ** (mp.mpf(r) / 2) * c_nh
    kappa = 2 * n * (h - (1 + theta) / q) - 1
    return (c_qg ** (2 * n / q) * c_tg ** (-2 * n / q) * c_qt * c_rpnh
            * lam ** (-2 * n) * mp.mpf(2) ** (-m * kappa))


def tail_search(h, m, lam, p, r):
    h = mp.mpf(h)
    q_min = 1 / (h - mp.mpf(1) / 2)
    q_max = mp.mpf(16)
    best = None
    for n in range(1, 9):
        if 2 * n < r:
            continue
        for j in range(1, 21):
            q = q_min + (q_max - q_min) * j / 20
            theta_hi = min(q * h - q / (2 * n) - 1, q / 2 - 1)
            if theta_hi <= 0:
                continue
            for i in range(1, 21):
                theta = theta_hi * i / 21
                alpha_hi = h - (1 + theta) / q - mp.mpf(1) / (2 * n)
                if alpha_hi <= 0:
                    continue
                for off in ("0.05", "0.1", "0.25", "0.5", "1.0"):
                    gamma = q - 1 + mp.mpf(off)
                    b = tail_bound(h, m, lam, p, r, n, q, theta, gamma)
                    if best is None or b < best[0]:
                        best = (b, n, q, theta, gamma)
    return best


def fmt(x):
    return format(float(x), ".16e")


def row(h, t, s, b, kind, value, tol):
    print(",".join([str(h), str(t), str(s), "" if b is None else str(b), kind, fmt(value), str(tol)]))


def main():
    print("hurst,t,s_or_a,b_or_blank,kind,value,tolerance")
    for h in ("0.6", "0.75", "0.9"):
        row(h, "", "", None, "c_norm", c_norm(h), "1e-12")
    for h, t, s in (("0.75", "1", "0.5"), ("0.6", "1", "0.5"), ("0.9", "0.7", "0.2"),
                    ("0.75", "1", "0.001"), ("0.75", "0.3", "0.29")):
        kq = kernel_quad(h, t, s)
        kh = kernel_hyp(h, t, s)
        assert abs(kq - kh) < mp.mpf("1e-20"), (h, t, s, kq, kh)
        row(h, t, s, None, "kernel", kq, "1e-8")
    for h, t, a, b in (("0.75", "1", "0", "1"), ("0.6", "1", "0", "0.25"),
                       ("0.9", "0.5", "0.125", "0.5"), ("0.75", "1", "0.25", "0.5")):
        v = cumulative(h, t, b) - cumulative(h, t, a)
        row(h, t, a, b, "cell_integral", v, "1e-8")
    levels = 8
    knots = 2 ** (levels + 1)
    cum = [cumulative("0.75", "1", mp.mpf(k) / knots) for k in range(knots + 1)]
    for m in range(1, levels + 1):
        stride = 2 ** (levels - m)
        sub = cum[::stride]
        row("0.75", "1", m, None, "exact_l2", exact_l2(mp.mpf("0.75"), mp.mpf(1), sub, m), "1e-8")
    best = tail_search("0.75", 10, mp.mpf("0.1"), 3, 2)
    print("# tail optimum N=%d q=%s theta=%s gamma=%s" % (best[1], mp.nstr(best[2], 17),
          mp.nstr(best[3], 17), mp.nstr(best[4], 17)), file=sys.stderr)
    row("0.75", "", "10", "0.1", "tail_bound_min", best[0], "1e-9")


if __name__ == "__main__":
    main()
