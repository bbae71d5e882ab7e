use dpmix::density::FnDensity;
use dpmix::divergences::hellinger;
use dpmix::index_calculus::{cd_coefficients_exact, enumerate_multiindices, gaussian_moment_exact, MultiIndex};
use dpmix::measure_discretization::{snap_to_grid, MixingMeasure};
use dpmix::prior_model::{sample_precision_eigenvalues, stick_tail_probability, stick_weights, CovariancePrior};
use dpmix::linalg::CovarianceSpec;
use dpmix::quadrature::{GridSpec, QuadratureRule};
use dpmix::rate_lab::{anisotropy_from_axis_smoothness, theoretical_rate, MixingPriorKind};
use dpmix::rng::stream_rng;
use dpmix::sieve_entropy::{build_net, SieveSpec};
use dpmix::special::normal_pdf;
use num_traits::Zero;
use proptest::prelude::*;

const DP: MixingPriorKind = MixingPriorKind::DirichletProcess;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moments_ignore_coordinate_order(k in proptest::collection::vec(0u32..7, 1..4), rot in 0usize..4) {
        let mut p = k.clone();
        p.rotate_left(rot % k.len());
        prop_assert_eq!(
            gaussian_moment_exact(&MultiIndex::new(k.clone()).unwrap()),
            gaussian_moment_exact(&MultiIndex::new(p).unwrap())
        );
        if k.iter().any(|e| e % 2 == 1) {
            prop_assert!(gaussian_moment_exact(&MultiIndex::new(k).unwrap()).is_zero());
        }
    }

    #[test]
    fn stick_weights_telescope(v in proptest::collection::vec(0.0f64..1.0, 1..30)) {
        let (w, rest) = stick_weights(&v);
        let prod: f64 = v.iter().map(|x| 1.0 - x).product();
        prop_assert!((w.iter().sum::<f64>() - (1.0 - prod)).abs() < 1e-12);
        prop_assert!((rest - prod).abs() < 1e-12);
        prop_assert!(w.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn stick_tail_below_stirling_bound(h in 1usize..60, alpha in 0.1f64..5.0, eps in 1e-6f64..0.5) {
        let t = stick_tail_probability(h, alpha, eps).unwrap();
        prop_assert!((0.0..=1.0).contains(&t.exact));
        if t.bound_applies {
            prop_assert!(t.exact <= t.stirling_bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn precision_eigenvalues_sorted(seed in any::<u64>(), d in 1usize..4, nu_extra in 0.0f64..4.0) {
        let prior = CovariancePrior::InverseWishart {
            nu: d as f64 + nu_extra,
            psi: CovarianceSpec::isotropic(d, 1.0).unwrap(),
        };
        let e = sample_precision_eigenvalues(&prior, d, &mut stream_rng(seed, 0));
        prop_assert_eq!(e.len(), d);
        prop_assert!(e.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(e.iter().all(|x| *x > 0.0));
    }

    #[test]
    fn rate_monotone(beta in 0.3f64..6.0, db in 0.01f64..2.0, tau in 0.5f64..4.0, dim in 1usize..5, kappa in 1u8..3) {
        let k = kappa as f64;
        let lo = theoretical_rate(beta, dim, k, tau, None, DP).unwrap();
        let hi = theoretical_rate(beta + db, dim, k, tau, None, DP).unwrap();
        prop_assert!(hi.exponent > lo.exponent);
        // t0 = {β(d*c + 1) + d*}/(2β + d*) with c = 1 + 1/τ, so
        // dt0/dβ = d*(d*c − 1)/(2β + d*)², positive because d*c > 1.
        let c = 1.0 + 1.0 / tau;
        let ds = lo.d_star;
        let slope = ds * (ds * c - 1.0) / (2.0 * beta + ds).powi(2);
        prop_assert!(slope > 0.0 && hi.t0 > lo.t0);
        let h = 1e-6;
        let fd = (theoretical_rate(beta + h, dim, k, tau, None, DP).unwrap().t0
            - theoretical_rate(beta - h.min(beta / 2.0), dim, k, tau, None, DP).unwrap().t0)
            / (h + h.min(beta / 2.0));
        prop_assert!((fd - slope).abs() <= 1e-5 * slope.max(1.0));
        prop_assert!(lo.exponent > 0.0 && lo.exponent < 0.5);
        let wider = theoretical_rate(beta, dim + 1, k, tau, None, DP).unwrap();
        prop_assert!(wider.d_star >= lo.d_star);
        if wider.d_star > lo.d_star {
            prop_assert!(wider.exponent < lo.exponent);
        } else {
            prop_assert_eq!(wider.exponent, lo.exponent);
        }
    }

    #[test]
    fn harmonic_mean_round_trip(axis in proptest::collection::vec(0.2f64..8.0, 1..5)) {
        let (beta, alpha) = anisotropy_from_axis_smoothness(&axis).unwrap();
        let r = theoretical_rate(beta, axis.len(), 2.0, 1.0, Some(&alpha), DP).unwrap();
        for (b, want) in r.axis_smoothness.unwrap().iter().zip(&axis) {
            prop_assert!((b - want).abs() < 1e-10 * want);
        }
        let hm = axis.len() as f64 / axis.iter().map(|b| 1.0 / b).sum::<f64>();
        prop_assert!((beta - hm).abs() < 1e-12 * hm);
    }

    #[test]
    fn snapping_keeps_weights(atoms in proptest::collection::vec(-2.0f64..2.0, 1..12), eps in 0.05f64..0.5) {
        let n = atoms.len();
        let w: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let f = MixingMeasure::normalized(atoms.iter().map(|a| vec![*a]).collect(), w).unwrap();
        let s = snap_to_grid(&f, 1.0, eps, 3.0).unwrap();
        prop_assert!(s.measure.len() <= f.len());
        prop_assert_eq!(s.measure.weights(), f.weights());
        prop_assert!(s.max_shift <= 0.5 * s.mesh * (1.0 + 1e-12));
    }

    #[test]
    fn hellinger_is_a_metric(m in proptest::collection::vec(-2.0f64..2.0, 3), s in proptest::collection::vec(0.5f64..2.0, 3)) {
        let grid = GridSpec::cube(1, 14.0, 4096, QuadratureRule::Midpoint).unwrap();
        let dens: Vec<_> = (0..3)
            .map(|i| {
                let (mu, sd) = (m[i], s[i]);
                FnDensity::new(1, move |x: &[f64]| normal_pdf((x[0] - mu) / sd) / sd)
            })
            .collect();
        let h = |i: usize, j: usize| hellinger(&dens[i], &dens[j], &grid).unwrap();
        prop_assert_eq!(h(0, 1), h(1, 0));
        prop_assert!(h(0, 2) <= h(0, 1) + h(1, 2) + 1e-9);
    }

    #[test]
    fn net_count_monotone(eps in 0.1f64..0.5, a in 0.5f64..3.0, h in 2usize..6, m in 2usize..12, s0 in 0.2f64..1.0) {
        let count = |e: f64, a: f64, h: usize, m: usize, s0: f64| {
            build_net(&SieveSpec::new(2, e, a, s0, h, m).unwrap()).unwrap().count.log_total
        };
        let base = count(eps, a, h, m, s0);
        prop_assert!(count(eps, a, h + 1, m, s0) >= base);
        prop_assert!(count(eps, a, h, m + 1, s0) >= base);
        prop_assert!(count(eps, a * 1.5, h, m, s0) >= base);
        prop_assert!(count(eps * 1.5, a, h, m, s0) <= base);
        prop_assert!(count(eps, a, h, m, s0 * 1.5) <= base);
    }
}

#[test]
fn axis_aligned_entries_match_one_dimension() {
    let one = cd_coefficients_exact(1, 8).unwrap();
    for d in 2..=3 {
        let table = cd_coefficients_exact(d, 8).unwrap();
        for k in enumerate_multiindices(d, 8) {
            let nonzero: Vec<usize> = (0..d).filter(|&i| k.entries()[i] > 0).collect();
            if nonzero.len() == 1 {
                let axial = MultiIndex::axial(1, 0, k.entries()[nonzero[0]]);
                assert_eq!(table.d(&k), one.d(&axial));
                assert_eq!(table.c(&k), one.c(&axial));
            }
            if k.has_odd_entry() && k.order() >= 2 {
                assert_eq!(table.d(&k), table.c(&k));
            }
        }
    }
}
