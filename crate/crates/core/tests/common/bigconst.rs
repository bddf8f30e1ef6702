//! Extended-precision transliteration of the constants and the error bound,
//! written independently of the library with 256-bit floats.

use astro_float::{BigFloat, Consts, RoundingMode};

const P: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

pub struct Oracle {
    cc: Consts,
}

/// Everything the bound is made of, rounded to `f64` at the very end.
#[derive(Debug, Clone, Copy)]
pub struct OracleBound {
    pub sphere_area: f64,
    pub kappa: f64,
    pub c_theta: f64,
    pub b: [f64; 4],
    pub beta1: f64,
    pub beta2: f64,
    pub alpha: f64,
    pub r: f64,
    pub total: f64,
    /// The bound before optimizing over `alpha` and `r`, at the stated step sizes.
    pub unoptimized_total: f64,
    /// The same at the exact minimizer `alpha = (2 b1 / (b4 T))^{2/3}`, `r = sqrt(b2 / (b3 T m^2)) / alpha`.
    pub minimized_total: f64,
}

fn num(x: f64) -> BigFloat {
    BigFloat::from_f64(x, P)
}

pub fn to_f64(x: &BigFloat) -> f64 {
    x.to_string().parse().expect("decimal rendering parses")
}

impl Oracle {
    pub fn new() -> Self {
        Self { cc: Consts::new().expect("constant cache") }
    }

    fn pi(&mut self) -> BigFloat {
        self.cc.pi(P, RM)
    }

    fn exp(&mut self, x: &BigFloat) -> BigFloat {
        x.exp(P, RM, &mut self.cc)
    }

    fn ln(&mut self, x: &BigFloat) -> BigFloat {
        x.ln(P, RM, &mut self.cc)
    }

    fn pow(&mut self, x: &BigFloat, e: f64) -> BigFloat {
        x.pow(&num(e), P, RM, &mut self.cc)
    }

    /// `Gamma(k / 2)` from `Gamma(1) = 1`, `Gamma(1/2) = sqrt(pi)` and `Gamma(x + 1) = x Gamma(x)`.
    fn gamma_half(&mut self, k: u32) -> BigFloat {
        let (mut g, mut x) = if k % 2 == 0 { (num(1.0), 1.0) } else { (self.pi().sqrt(P, RM), 0.5) };
        while 2.0 * x < k as f64 {
            g = g.mul(&num(x), P, RM);
            x += 1.0;
        }
        g
    }

    /// `pi^(k / 2)`.
    fn pi_half_power(&mut self, k: u32) -> BigFloat {
        let pi = self.pi();
        let whole = pi.powi((k / 2) as usize, P, RM);
        if k % 2 == 1 {
            whole.mul(&pi.sqrt(P, RM), P, RM)
        } else {
            whole
        }
    }

    pub fn sphere_area(&mut self, n: u32) -> BigFloat {
        let top = num(2.0).mul(&self.pi_half_power(n), P, RM);
        top.div(&self.gamma_half(n), P, RM)
    }

    pub fn half_integral(&mut self, n: u32) -> BigFloat {
        let top = num(2.0).mul(&self.pi_half_power(n - 1), P, RM);
        top.div(&self.gamma_half(n + 1), P, RM)
    }

    fn dimension_factor(&mut self, n: u32) -> BigFloat {
        let two_pi = num(2.0).mul(&self.pi(), P, RM);
        num(2.0).mul(&self.sphere_area(n), P, RM).div(&two_pi.powi(n as usize, P, RM), P, RM)
    }

    pub fn kappa(&mut self, n: u32, radius: f64, rho: f64) -> BigFloat {
        let r = num(radius);
        let sn = num(n as f64).sqrt(P, RM);
        let poly = num(16.0)
            .mul(&r, P, RM)
            .mul(&r, P, RM)
            .add(&num(32.0).mul(&r, P, RM), P, RM)
            .add(&num(21.0).mul(&sn, P, RM).mul(&r, P, RM), P, RM)
            .add(&num(36.0), P, RM);
        poly.mul(&self.dimension_factor(n), P, RM).mul(&num(rho), P, RM)
    }

    pub fn c_theta(&mut self, n: u32, radius: f64, rho: f64) -> BigFloat {
        let r = num(radius);
        let sn = num(n as f64).sqrt(P, RM);
        let poly = num(2.0)
            .mul(&r, P, RM)
            .add(&num(4.0), P, RM)
            .add(&num(3.0).mul(&sn, P, RM), P, RM)
            .add(&num(4.0).div(&r, P, RM), P, RM);
        poly.mul(&self.dimension_factor(n), P, RM).mul(&num(rho), P, RM)
    }

    pub fn bound(&mut self, n: u32, m: u64, t: u64, radius: f64, rho: f64, delta: f64) -> OracleBound {
        let kappa = self.kappa(n, radius, rho);
        let c = self.c_theta(n, radius, rho);
        let r = num(radius);
        let rc = r.mul(&c, P, RM);
        let e = |o: &mut Self, k: f64| o.exp(&num(k).mul(&rc, P, RM));
        let (e4, e8, e10, e12) = (e(self, 4.0), e(self, 8.0), e(self, 10.0), e(self, 12.0));
        let two = num(2.0);
        let b1 = two.mul(&rc, P, RM).mul(&e8, P, RM);
        let b2 = c.mul(&c, P, RM).div(&two, P, RM);
        let one_e4 = num(1.0).add(&e4, P, RM);
        let b3 = num(8.0)
            .mul(&r.powi(3, P, RM), P, RM)
            .mul(&c, P, RM)
            .mul(&e8.add(&e12, P, RM), P, RM)
            .add(&two.mul(&r, P, RM).mul(&r, P, RM).mul(&one_e4, P, RM).mul(&one_e4, P, RM), P, RM);
        let b4 = two.mul(&rc, P, RM).mul(&e10, P, RM);
        let lead = self.pow(&two, -2.0 / 3.0).add(&self.pow(&two, 1.0 / 3.0), P, RM);
        let beta1 = lead.mul(&b1.cbrt(P, RM), P, RM).mul(&self.pow(&b4, 2.0 / 3.0), P, RM);
        let beta2 = two.mul(&b2.mul(&b3, P, RM).sqrt(P, RM), P, RM);

        let tb = num(t as f64);
        let mb = num(m as f64);
        let alpha = self.pow(&two, 2.0 / 3.0).mul(&self.pow(&tb, -2.0 / 3.0), P, RM);
        let rr = self
            .pow(&tb, 1.0 / 6.0)
            .mul(&self.pow(&two, -2.0 / 3.0), P, RM)
            .mul(&b2.div(&b3, P, RM).sqrt(P, RM), P, RM)
            .div(&mb, P, RM);

        let ln_inv_delta = self.ln(&num(1.0).div(&num(delta), P, RM));
        let conf = num(n as f64).sqrt(P, RM).add(&ln_inv_delta.sqrt(P, RM), P, RM).div(&mb.sqrt(P, RM), P, RM);
        let approx = two.mul(&kappa, P, RM).mul(&conf, P, RM);
        let opt = beta1.mul(&self.pow(&tb, -1.0 / 3.0), P, RM).add(&beta2.mul(&self.pow(&tb, -0.5), P, RM), P, RM);
        let total = approx.add(&opt, P, RM);

        let unopt = |alpha: &BigFloat, rr: &BigFloat| {
            let at = alpha.mul(&tb, P, RM);
            b1.div(&at, P, RM)
                .add(&b2.div(&at.mul(rr, P, RM).mul(&mb, P, RM), P, RM), P, RM)
                .add(&b3.mul(alpha, P, RM).mul(rr, P, RM).mul(&mb, P, RM), P, RM)
                .add(&b4.mul(&alpha.sqrt(P, RM), P, RM), P, RM)
                .add(&approx, P, RM)
        };
        let alpha_star = self.pow(&two.mul(&b1, P, RM).div(&b4.mul(&tb, P, RM), P, RM), 2.0 / 3.0);
        let r_star = b2
            .div(&b3.mul(&tb, P, RM).mul(&mb, P, RM).mul(&mb, P, RM), P, RM)
            .sqrt(P, RM)
            .div(&alpha_star, P, RM);

        OracleBound {
            sphere_area: to_f64(&self.sphere_area(n)),
            kappa: to_f64(&kappa),
            c_theta: to_f64(&c),
            b: [to_f64(&b1), to_f64(&b2), to_f64(&b3), to_f64(&b4)],
            beta1: to_f64(&beta1),
            beta2: to_f64(&beta2),
            alpha: to_f64(&alpha),
            r: to_f64(&rr),
            total: to_f64(&total),
            unoptimized_total: to_f64(&unopt(&alpha, &rr)),
            minimized_total: to_f64(&unopt(&alpha_star, &r_star)),
        }
    }
}
