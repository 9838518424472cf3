"""Regenerate kernel_reference.csv with 50-digit mpmath evaluations.

Each function is evaluated from its integral or power-series definition
rather than from the closed forms used in the Rust code:

  wbb(nu, t)   = exp(t)                      (nu = 2)
               = (1 - t)^(-2/(nu-2))         (nu > 2)
  wb(nu, t)    = int_0^1 wbb(nu, s t) ds
  w(nu, t)     = int_0^1 s wb(nu, s t) ds
  klo(nu, t)   = int_0^1 1 / wbb(nu, s t) ds
  kup(nu, t)   = wb(nu, t)
  r(nu, t)     = sum_{k>=2} (r)_k / k! t^(k-2) / r,  r = (4-nu)/(nu-2)
               = (3/2 + t/3) exp(t)          (nu = 2)

Usage: python3 gen_kernel_reference.py > kernel_reference.csv
"""

import mpmath as mp

mp.mp.dps = 50

NUS = ["2", "2.5", "3", "4"]


def wbb(nu, t):
    if nu == 2:
        return mp.e ** t
    return (1 - t) ** (-2 / (nu - 2))


def wb(nu, t):
    return mp.quad(lambda s: wbb(nu, s * t), [0, 1])


def w(nu, t):
    return mp.quad(lambda s: (1 - s) * wbb(nu, s * t), [0, 1])


def klo(nu, t):
    return mp.quad(lambda s: 1 / wbb(nu, s * t), [0, 1])


def rnu(nu, t):
    if nu == 2:
        return (mp.mpf(3) / 2 + t / 3) * mp.e ** t
    r = (4 - nu) / (nu - 2)
    if t == 0:
        return (r + 1) / 2
    # Exact finite form, evaluated at 50 digits where cancellation is harmless.
    return ((1 - t) ** (-r) - 1 - r * t) / (r * t * t)


def grid():
    pts = []
    n_uniform = 799
    for i in range(n_uniform):
        pts.append(mp.mpf(-0.9) + mp.mpf(1.8) * i / (n_uniform - 1))
    for i in range(100):
        e = mp.mpf(-9) + mp.mpf(8) * i / 99
        pts.append(mp.mpf(10) ** e)
        pts.append(-(mp.mpf(10) ** e))
    pts.append(mp.mpf(0))
    return sorted(set(pts))


def main():
    print("func,nu,t,value")
    pts = grid()
    for nu_s in NUS:
        nu = mp.mpf(nu_s)
        for t in pts:
            ts = mp.nstr(t, 20, strip_zeros=False)
            t = mp.mpf(ts)
            print(f"omega_bar_bar,{nu_s},{ts},{mp.nstr(wbb(nu, t), 30)}")
            print(f"omega_bar,{nu_s},{ts},{mp.nstr(wb(nu, t), 30)}")
            print(f"omega,{nu_s},{ts},{mp.nstr(w(nu, t), 30)}")
            if t >= 0:
                print(f"kappa_lower,{nu_s},{ts},{mp.nstr(klo(nu, t), 30)}")
                print(f"kappa_upper,{nu_s},{ts},{mp.nstr(wb(nu, t), 30)}")
                if nu <= 3:
                    print(f"r_nu,{nu_s},{ts},{mp.nstr(rnu(nu, t), 30)}")


if __name__ == "__main__":
    main()
