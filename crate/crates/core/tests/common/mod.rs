//! Reference implementations used only by tests. Nothing here calls into the
//! library's numerical kernels.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1], by
/// Newton iteration on the Legendre recurrence.
pub fn gauss_legendre_rule(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Composite 20-point Gauss–Legendre, doubling the panel count until two
/// successive estimates agree to `tol` (absolute, or relative when larger).
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let rule = gauss_legendre_rule(20);
    let with_panels = |panels: usize| -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let mid = a + (k as f64 + 0.5) * h;
                rule.iter().map(|&(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
            })
            .sum()
    };
    let mut panels = 2;
    let mut prev = with_panels(panels);
    loop {
        panels *= 2;
        let cur = with_panels(panels);
        if (cur - prev).abs() <= tol * cur.abs().max(1.0) || panels >= 1 << 14 {
            return cur;
        }
        prev = cur;
    }
}

/// ln Γ by Stirling's series after shifting the argument to at least 30.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0);
    let mut z = x;
    let mut shift = 0.0;
    while z < 30.0 {
        shift += z.ln();
        z += 1.0;
    }
    let z2 = z * z;
    let series = 1.0 / (12.0 * z) - 1.0 / (360.0 * z * z2) + 1.0 / (1260.0 * z * z2 * z2)
        - 1.0 / (1680.0 * z * z2 * z2 * z2);
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series - shift
}

/// ψ by the asymptotic series after shifting the argument to at least 40.
pub fn digamma(x: f64) -> f64 {
    assert!(x > 0.0);
    let mut z = x;
    let mut acc = 0.0;
    while z < 40.0 {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let w = 1.0 / (z * z);
    acc + z.ln() - 0.5 / z - w * (1.0 / 12.0 - w * (1.0 / 120.0 - w * (1.0 / 252.0 - w / 240.0)))
}

/// Euler–Mascheroni constant from H_m − ln m with its asymptotic correction.
pub fn euler_gamma() -> f64 {
    let m = 1_000u32;
    let h: f64 = (1..=m).rev().map(|k| 1.0 / k as f64).sum();
    let mf = m as f64;
    h - mf.ln() - 1.0 / (2.0 * mf) + 1.0 / (12.0 * mf * mf) - 1.0 / (120.0 * mf.powi(4))
}

/// P(a, x) by quadrature of the gamma density.
pub fn lower_inc_gamma(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let lg = ln_gamma(a);
    if a < 1.0 {
        // t = u^{1/a} removes the t^{a−1} singularity.
        let f = |u: f64| (-u.powf(1.0 / a) - lg).exp() / a;
        return integrate(&f, 0.0, x.powf(a), 1e-15);
    }
    let dens = |t: f64| if t <= 0.0 { if a == 1.0 { (-lg).exp() } else { 0.0 } } else { ((a - 1.0) * t.ln() - t - lg).exp() };
    if x <= a {
        if a.fract() == 0.0 {
            return integrate(&dens, 0.0, x, 1e-15);
        }
        // t = u⁴ flattens the t^{a−1} cusp at zero.
        let f = |u: f64| if u <= 0.0 { 0.0 } else { ((4.0 * a - 1.0) * u.ln() - u.powi(4) - lg).exp() * 4.0 };
        integrate(&f, 0.0, x.powf(0.25), 1e-15)
    } else {
        let upper = x + 60.0 + 40.0 * a.sqrt();
        1.0 - integrate(&dens, x, upper, 1e-15)
    }
}

/// I_x(a, b) as A/(A+B) with A = ∫₀ˣ and B = ∫ₓ¹ of the unnormalized kernel.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    // Scale by the kernel's log-maximum on [0, 1] to stay in range.
    let mode = if a >= 1.0 && b >= 1.0 && a + b > 2.0 { (a - 1.0) / (a + b - 2.0) } else { 0.5 };
    let log_k = |t: f64| (a - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln();
    let m = log_k(mode.clamp(1e-12, 1.0 - 1e-12));
    let left = if a < 1.0 {
        let f = |u: f64| ((b - 1.0) * (1.0 - u.powf(1.0 / a)).ln() - m).exp() / a;
        integrate(&f, 0.0, x.powf(a), 1e-15)
    } else {
        let f = |t: f64| if t <= 0.0 { if a == 1.0 { (-m).exp() } else { 0.0 } } else { (log_k(t) - m).exp() };
        integrate(&f, 0.0, x, 1e-15)
    };
    let right = if b < 1.0 {
        let f = |v: f64| ((a - 1.0) * (1.0 - v.powf(1.0 / b)).ln() - m).exp() / b;
        integrate(&f, 0.0, (1.0 - x).powf(b), 1e-15)
    } else {
        let f = |t: f64| if t >= 1.0 { if b == 1.0 { (-m).exp() } else { 0.0 } } else { (log_k(t) - m).exp() };
        integrate(&f, x, 1.0, 1e-15)
    };
    left / (left + right)
}

/// Φ by quadrature of the density.
pub fn normal_cdf(z: f64) -> f64 {
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
    // Lower tails are integrated directly to keep their relative accuracy.
    if z < -1.0 {
        return integrate(&phi, z - 40.0, z, 1e-15);
    }
    0.5 + integrate(&phi, 0.0, z, 1e-15)
}

/// Φ⁻¹ by bisection on the quadrature Φ.
pub fn normal_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Erlang-C from the literal factorial-sum formula.
pub fn erlang_c_literal(r: f64, c: u32) -> f64 {
    let fact = |k: u32| (1..=k).map(|i| i as f64).product::<f64>();
    let rho = r / c as f64;
    let top = r.powi(c as i32) / (fact(c) * (1.0 - rho));
    let sum: f64 = (0..c).map(|t| r.powi(t as i32) / fact(t)).sum();
    top / (top + sum)
}

/// Unnormalized log posterior of the queue rates, written out term by term.
pub fn log_joint(n: f64, sum_t: f64, sum_s: f64, prior: [(f64, f64); 2], lambda: f64, mu: f64) -> f64 {
    let ig = |(al, be): (f64, f64), x: f64| al * be.ln() - ln_gamma(al) - (al + 1.0) * x.ln() - be / x;
    n * lambda.ln() - lambda * sum_t + n * mu.ln() - mu * sum_s + ig(prior[0], lambda) + ig(prior[1], mu)
}

/// Trapezoid grid over (ln λ, ln μ) of a smooth log density.
pub struct LogGrid {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub du: f64,
    pub dv: f64,
    /// Log of density × λμ (the Jacobian) at each node, row-major in v.
    pub log_w: Vec<f64>,
}

impl LogGrid {
    pub fn new(range_u: (f64, f64), range_v: (f64, f64), points: usize, log_density: impl Fn(f64, f64) -> f64) -> Self {
        let lin = |(lo, hi): (f64, f64)| (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect::<Vec<_>>();
        let (u, v) = (lin(range_u), lin(range_v));
        let du = u[1] - u[0];
        let dv = v[1] - v[0];
        let mut log_w = Vec::with_capacity(points * points);
        for &vv in &v {
            for &uu in &u {
                log_w.push(log_density(uu.exp(), vv.exp()) + uu + vv);
            }
        }
        Self { u, v, du, dv, log_w }
    }

    /// log ∫∫ density dλ dμ.
    pub fn log_integral(&self) -> f64 {
        let m = self.log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let n = self.u.len();
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                let wi = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                let wj = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                s += wi * wj * (self.log_w[j * n + i] - m).exp();
            }
        }
        m + (s * self.du * self.dv).ln()
    }

    /// Normalized node masses.
    pub fn masses(&self) -> Vec<f64> {
        let m = self.log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_w.iter().map(|l| (l - m).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }
}
