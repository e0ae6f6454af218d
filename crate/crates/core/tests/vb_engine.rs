mod common;

use ccopt_core::distributions::{GammaLaw, InvGammaLaw};
use ccopt_core::queue::{simulate_dataset, SuffStats, TrueParams};
use ccopt_core::vb::{baseline_bound, elbo, fit_vb, anchored_baseline, PriorSpec, ProductGammaPosterior, VbOptions};
use ccopt_core::Seed;

fn stats(n: usize, seed: u64) -> SuffStats {
    simulate_dataset(TrueParams::new(16.0, 1.0).unwrap(), n, Seed(seed))
        .unwrap()
        .suff_stats()
}

fn gamma_ln_pdf(a: f64, b: f64, x: f64) -> f64 {
    a * b.ln() - common::ln_gamma(a) + (a - 1.0) * x.ln() - b * x
}

/// ∫ Gamma(a, b)(x)·g(x) dx over a window wide enough for the density.
fn expect(a: f64, b: f64, g: impl Fn(f64) -> f64) -> f64 {
    let (m, sd) = (a / b, a.sqrt() / b);
    let lo = (m - 30.0 * sd).max(0.0);
    let hi = m + 30.0 * sd + 30.0 / b;
    if a >= 3.0 {
        let f = |x: f64| if x <= 0.0 { 0.0 } else { gamma_ln_pdf(a, b, x).exp() * g(x) };
        return common::integrate(&f, lo, hi, 1e-13);
    }
    // x = y^p smooths the x^(a−2) behaviour of E[1/x] terms near zero.
    let p = 2.0 / (a - 1.0);
    let f = |y: f64| {
        if y <= 0.0 {
            return 0.0;
        }
        let x = y.powf(p);
        gamma_ln_pdf(a, b, x).exp() * g(x) * p * y.powf(p - 1.0)
    };
    common::integrate(&f, 0.0, hi.powf(1.0 / p), 1e-13)
}

/// ELBO as a sum of one-dimensional quadratures, one per factor.
fn elbo_oracle(s: &SuffStats, prior: &PriorSpec, q: &ProductGammaPosterior) -> f64 {
    let n = s.n as f64;
    let ig = |p: &InvGammaLaw, x: f64| {
        let (al, be) = (p.shape(), p.scale());
        al * be.ln() - common::ln_gamma(al) - (al + 1.0) * x.ln() - be / x
    };
    let part = |law: &GammaLaw, sum: f64, p: &InvGammaLaw| {
        let (a, b) = (law.shape(), law.rate());
        expect(a, b, |x| n * x.ln() - x * sum + ig(p, x) - gamma_ln_pdf(a, b, x))
    };
    part(&q.q_lambda, s.sum_interarrival, &prior.prior_lambda) + part(&q.q_mu, s.sum_service, &prior.prior_mu)
}

fn q(a1: f64, b1: f64, a2: f64, b2: f64) -> ProductGammaPosterior {
    ProductGammaPosterior::new(GammaLaw::new(a1, b1).unwrap(), GammaLaw::new(a2, b2).unwrap())
}

#[test]
fn closed_form_elbo_matches_quadrature() {
    let prior = PriorSpec::default();
    let other = PriorSpec {
        prior_lambda: InvGammaLaw::new(3.0, 20.0).unwrap(),
        prior_mu: InvGammaLaw::new(1.5, 0.4).unwrap(),
    };
    for (s, p) in [(stats(5, 1), prior), (stats(40, 2), other), (stats(500, 3), prior)] {
        for qq in [q(4.0, 0.3, 6.0, 5.0), q(1.5, 0.1, 1.2, 1.0), q(60.0, 3.5, 40.0, 41.0)] {
            let closed = elbo(&s, &p, &qq).unwrap();
            let oracle = elbo_oracle(&s, &p, &qq);
            assert!((closed - oracle).abs() < 1e-8 * closed.abs().max(1.0), "{closed} vs {oracle}");
        }
    }
}

#[test]
fn elbo_needs_shapes_above_one() {
    let s = stats(5, 1);
    assert!(elbo(&s, &PriorSpec::default(), &q(1.0, 1.0, 2.0, 1.0)).is_err());
    assert!(elbo(&s, &PriorSpec::default(), &q(2.0, 1.0, 0.5, 1.0)).is_err());
}

#[test]
fn optimum_is_below_log_evidence() {
    let s = stats(5, 4);
    let prior = PriorSpec::default();
    let (qq, report) = fit_vb(&s, &prior, &VbOptions::default()).unwrap();
    assert!(report.converged);
    let pr = [(1.0, 1.0), (1.0, 1.0)];
    let n = s.n as f64;
    let (lh, mh) = s.mle();
    let grid = common::LogGrid::new(
        ((lh / 200.0).ln(), (lh * 30.0).ln()),
        ((mh / 200.0).ln(), (mh * 30.0).ln()),
        1201,
        |l, m| common::log_joint(n, s.sum_interarrival, s.sum_service, pr, l, m),
    );
    let evidence = grid.log_integral();
    assert!(report.value <= evidence + 1e-6, "elbo {} evidence {evidence}", report.value);
    // The gap is the KL from q to the posterior; it is small but not zero.
    assert!(evidence - report.value < 0.5);
    assert!((elbo(&s, &prior, &qq).unwrap() - report.value).abs() < 1e-12 * report.value.abs().max(1.0));
}

#[test]
fn fitted_point_is_a_local_maximum() {
    let s = stats(60, 5);
    let prior = PriorSpec::default();
    let (qq, report) = fit_vb(&s, &prior, &VbOptions::default()).unwrap();
    let (a1, b1, a2, b2) = (qq.q_lambda.shape(), qq.q_lambda.rate(), qq.q_mu.shape(), qq.q_mu.rate());
    for &f in &[0.98, 0.995, 1.005, 1.02] {
        for perturbed in [q(a1 * f, b1, a2, b2), q(a1, b1 * f, a2, b2), q(a1, b1, a2 * f, b2), q(a1, b1, a2, b2 * f)] {
            assert!(elbo(&s, &prior, &perturbed).unwrap() < report.value);
        }
    }
}

#[test]
fn swapping_data_and_priors_swaps_factors() {
    let s = stats(80, 6);
    let prior = PriorSpec {
        prior_lambda: InvGammaLaw::new(2.0, 3.0).unwrap(),
        prior_mu: InvGammaLaw::new(1.0, 0.5).unwrap(),
    };
    let swapped = SuffStats {
        n: s.n,
        sum_interarrival: s.sum_service,
        sum_service: s.sum_interarrival,
    };
    let prior_sw = PriorSpec {
        prior_lambda: prior.prior_mu,
        prior_mu: prior.prior_lambda,
    };
    let (q1, r1) = fit_vb(&s, &prior, &VbOptions::default()).unwrap();
    let (q2, r2) = fit_vb(&swapped, &prior_sw, &VbOptions::default()).unwrap();
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs();
    assert!(close(q1.q_lambda.shape(), q2.q_mu.shape()));
    assert!(close(q1.q_lambda.rate(), q2.q_mu.rate()));
    assert!(close(q1.q_mu.shape(), q2.q_lambda.shape()));
    assert!(close(r1.value, r2.value));
}

#[test]
fn large_sample_means_track_truth() {
    let s = stats(2000, 7);
    let (qq, report) = fit_vb(&s, &PriorSpec::default(), &VbOptions::default()).unwrap();
    assert!(report.converged);
    let rel = 3.0 / (2000f64).sqrt();
    assert!((qq.q_lambda.mean() / 16.0 - 1.0).abs() < rel, "{}", qq.q_lambda.mean());
    assert!((qq.q_mu.mean() - 1.0).abs() < rel, "{}", qq.q_mu.mean());
    let (lh, mh) = s.mle();
    assert!((qq.q_lambda.mean() / lh - 1.0).abs() < 2e-3);
    assert!((qq.q_mu.mean() / mh - 1.0).abs() < 2e-3);
}

#[test]
fn starts_agree() {
    for (n, seed) in [(5, 8), (125, 9), (2000, 10)] {
        let s = stats(n, seed);
        let prior = PriorSpec::default();
        let (qa, _) = fit_vb(&s, &prior, &VbOptions::default()).unwrap();
        let single = VbOptions {
            multi_start: false,
            ..VbOptions::default()
        };
        let (qb, _) = fit_vb(&s, &prior, &single).unwrap();
        for (x, y) in [
            (qa.q_lambda.shape(), qb.q_lambda.shape()),
            (qa.q_lambda.rate(), qb.q_lambda.rate()),
            (qa.q_mu.shape(), qb.q_mu.shape()),
            (qa.q_mu.rate(), qb.q_mu.rate()),
        ] {
            assert!((x - y).abs() <= 1e-6 * x.abs(), "n={n}: {x} vs {y}");
        }
    }
}

#[test]
fn single_observation_converges() {
    let s = stats(1, 11);
    let (qq, report) = fit_vb(&s, &PriorSpec::default(), &VbOptions::default()).unwrap();
    assert!(report.converged, "{report:?}");
    assert!(qq.q_lambda.shape() > 1.0 && qq.q_mu.shape() > 1.0);
    let empty = SuffStats {
        n: 0,
        sum_interarrival: 0.0,
        sum_service: 0.0,
    };
    assert!(fit_vb(&empty, &PriorSpec::default(), &VbOptions::default()).is_err());
}

#[test]
fn trace_is_nondecreasing() {
    for (n, seed) in [(3, 12), (125, 13), (2000, 14)] {
        let s = stats(n, seed);
        let (_, report) = fit_vb(&s, &PriorSpec::default(), &VbOptions::default()).unwrap();
        assert!(report.trace.len() >= 2);
        for w in report.trace.windows(2) {
            // Accepted steps may lose at most roundoff.
            assert!(w[1] >= w[0] - 1e-13 * (w[0].abs() + 1.0), "{} -> {}", w[0], w[1]);
        }
        assert_eq!(*report.trace.last().unwrap(), report.value);
    }
}

#[test]
fn baseline_has_anchor_moments() {
    let anchor = TrueParams::new(16.0, 1.0).unwrap();
    for n in [2usize, 125, 2000] {
        let b = anchored_baseline(n, anchor).unwrap();
        assert!((b.q_lambda.mean() - 16.0).abs() < 1e-12);
        assert!((b.q_mu.mean() - 1.0).abs() < 1e-12);
        assert!((b.q_lambda.variance() - 256.0 / n as f64).abs() < 1e-10);
    }
    assert!(anchored_baseline(1, anchor).is_err());
}

#[test]
fn baseline_bound_matches_quadrature_and_holds() {
    let truth = TrueParams::new(16.0, 1.0).unwrap();
    let prior = PriorSpec::default();
    for n in [2usize, 10, 125, 500, 2000, 10_000] {
        let bb = baseline_bound(n, truth, &prior).unwrap();
        let nf = n as f64;
        let mut kl_prior = 0.0;
        let mut data = 0.0;
        for (r0, p) in [(16.0, prior.prior_lambda), (1.0, prior.prior_mu)] {
            let (a, b) = (nf, nf / r0);
            let (al, be) = (p.shape(), p.scale());
            kl_prior += expect(a, b, |x| {
                gamma_ln_pdf(a, b, x) - (al * be.ln() - common::ln_gamma(al) - (al + 1.0) * x.ln() - be / x)
            });
            data += expect(a, b, |x| nf * ((r0 / x).ln() + x / r0 - 1.0));
        }
        assert!((bb.kl_to_prior - kl_prior).abs() < 1e-7 * kl_prior.abs().max(1.0), "n={n}");
        assert!((bb.expected_data_kl - data).abs() < 1e-7 * data.abs().max(1.0), "n={n}");
        assert!(bb.total() <= bb.bound(), "n={n}: {} > {}", bb.total(), bb.bound());
    }
}
