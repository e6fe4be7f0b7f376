//! Modified Bessel function of the second kind and the Matérn correlation.

use std::f64::consts::PI;

use statrs::function::gamma::{gamma, ln_gamma};

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

// Taylor coefficients of 1/Γ(z) = Σ c_k z^k (k = 1, 2, ...).
const RECIP_GAMMA: [f64; 10] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
];

/// Exponentially scaled `e^x K_nu(x)` for `nu >= 0`, `x > 0`.
///
/// Temme's series below x = 2 and Steed's continued fraction above, followed
/// by forward recurrence in the order.
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    assert!(
        nu >= 0.0 && x > 0.0,
        "bessel_k_scaled domain: nu={nu}, x={x}"
    );
    BesselOrder::new(nu).k_scaled(x)
}

/// Everything in `bessel_k_scaled` that depends on the order alone.
#[derive(Clone, Copy, Debug)]
struct BesselOrder {
    nl: usize,
    mu: f64,
    fact: f64,
    gammas: (f64, f64, f64, f64),
}

impl BesselOrder {
    fn new(nu: f64) -> Self {
        let nl = (nu + 0.5).floor() as usize;
        let mu = nu - nl as f64;
        let pimu = PI * mu;
        let fact = if pimu.abs() < EPS {
            1.0
        } else {
            pimu / pimu.sin()
        };
        BesselOrder {
            nl,
            mu,
            fact,
            gammas: temme_gammas(mu),
        }
    }

    fn k_scaled(&self, x: f64) -> f64 {
        let (nl, mu, fact) = (self.nl, self.mu, self.fact);
        let mu2 = mu * mu;
        let xi = 1.0 / x;
        let xi2 = 2.0 * xi;

        let (mut k_mu, mut k_mu1) = if x < 2.0 {
            let x2 = 0.5 * x;
            let d = -x2.ln();
            let e = mu * d;
            let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
            let (gam1, gam2, gampl, gammi) = self.gammas;
            let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
            let mut sum = ff;
            let ee = e.exp();
            let mut p = 0.5 * ee / gampl;
            let mut q = 0.5 / (ee * gammi);
            let mut c = 1.0;
            let dd = x2 * x2;
            let mut sum1 = p;
            for i in 1..MAX_ITER {
                let fi = i as f64;
                ff = (fi * ff + p + q) / (fi * fi - mu2);
                c *= dd / fi;
                p /= fi - mu;
                q /= fi + mu;
                let del = c * ff;
                sum += del;
                sum1 += c * (p - fi * ff);
                if del.abs() < sum.abs() * EPS {
                    break;
                }
            }
            let scale = x.exp();
            (sum * scale, sum1 * xi2 * scale)
        } else {
            let mut b = 2.0 * (1.0 + x);
            let mut d = 1.0 / b;
            let mut delh = d;
            let mut h = d;
            let mut q1 = 0.0;
            let mut q2 = 1.0;
            let a1 = 0.25 - mu2;
            let mut q = a1;
            let mut c = a1;
            let mut a = -a1;
            let mut s = 1.0 + q * delh;
            for i in 2..MAX_ITER {
                let fi = i as f64;
                a -= 2.0 * (fi - 1.0);
                c = -a * c / fi;
                let qnew = (q1 - b * q2) / a;
                q1 = q2;
                q2 = qnew;
                q += c * qnew;
                b += 2.0;
                d = 1.0 / (b + a * d);
                delh = (b * d - 1.0) * delh;
                h += delh;
                let dels = q * delh;
                s += dels;
                if (dels / s).abs() < EPS {
                    break;
                }
            }
            h *= a1;
            let k = (PI / (2.0 * x)).sqrt() / s;
            (k, k * (mu + x + 0.5 - h) * xi)
        };

        for i in 0..nl {
            let next = (mu + i as f64 + 1.0) * xi2 * k_mu1 + k_mu;
            k_mu = k_mu1;
            k_mu1 = next;
        }
        k_mu
    }
}

/// (gam1, gam2, 1/Γ(1+mu), 1/Γ(1-mu)) for |mu| <= 1/2.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    if mu.abs() < 1e-3 {
        // 1/Γ(1+mu) = Σ c_{k+1} mu^k; split into even and odd parts to avoid 0/0
        let mu2 = mu * mu;
        let (mut even, mut odd) = (0.0, 0.0);
        let mut pw = 1.0;
        for pair in RECIP_GAMMA.chunks(2) {
            even += pair[0] * pw;
            odd += pair[1] * pw;
            pw *= mu2;
        }
        (-odd, even, even + mu * odd, even - mu * odd)
    } else {
        let gampl = 1.0 / gamma(1.0 + mu);
        let gammi = 1.0 / gamma(1.0 - mu);
        (
            (gammi - gampl) / (2.0 * mu),
            0.5 * (gammi + gampl),
            gampl,
            gammi,
        )
    }
}

/// Matérn correlation `2^{1-nu}/Γ(nu) (a h)^nu K_nu(a h)` with inverse range `a`.
pub fn matern_correlation(h: f64, a: f64, nu: f64) -> f64 {
    debug_assert!(h >= 0.0 && a > 0.0 && nu > 0.0);
    Matern::new(nu).correlation(a * h)
}

/// Matérn correlation of fixed smoothness, for evaluating many distances.
#[derive(Clone, Copy, Debug)]
pub struct Matern {
    nu: f64,
    ln_norm: f64,
    order: BesselOrder,
}

impl Matern {
    pub fn new(nu: f64) -> Self {
        Matern {
            nu,
            ln_norm: (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu),
            order: BesselOrder::new(nu),
        }
    }

    /// Correlation at scaled distance `x = a h`.
    pub fn correlation(&self, x: f64) -> f64 {
        if x < 1e-14 {
            return 1.0;
        }
        if self.nu == 0.5 {
            return (-x).exp();
        }
        let m = (self.ln_norm + self.nu * x.ln() + self.order.k_scaled(x).ln() - x).exp();
        if m < 1e-300 {
            0.0
        } else {
            m.min(1.0)
        }
    }
}
