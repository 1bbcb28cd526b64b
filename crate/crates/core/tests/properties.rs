mod common;

use common::*;
use lowres_precoding::digital::waterfilling_powers;
use lowres_precoding::hybrid::{connectivity_mask, project_analog};
use lowres_precoding::metrics::approx_se;
use lowres_precoding::quantizer::{lloyd_max_codebook, quantize, BussgangModel};
use lowres_precoding::{Architecture, CMat, C64};
use proptest::prelude::*;

fn unitary(n: usize, seed: u64) -> CMat {
    randn(n, n, &mut rng(seed)).qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phase_projection_is_nearest_unit_modulus(re in -5.0f64..5.0, im in -5.0f64..5.0) {
        prop_assume!(re.abs() + im.abs() > 1e-6);
        let a = C64::new(re, im);
        let mask = connectivity_mask(1, 1, Architecture::FcHybrid);
        let u = project_analog(&CMat::from_element(1, 1, a), &mask)[(0, 0)];
        let d = (a - u).norm();
        for k in 0..3600 {
            let cand = C64::from_polar(1.0, k as f64 * std::f64::consts::TAU / 3600.0);
            prop_assert!(d <= (a - cand).norm() + 1e-12);
        }
    }

    #[test]
    fn projection_is_idempotent(seed in 0u64..1000, pc in any::<bool>()) {
        let arch = if pc { Architecture::PcHybrid } else { Architecture::FcHybrid };
        let mask = connectivity_mask(8, 4, arch);
        let once = project_analog(&randn(8, 4, &mut rng(seed)), &mask);
        prop_assert_eq!(project_analog(&once, &mask), once.clone());
        for (m, z) in mask.iter().zip(once.iter()) {
            if *m {
                prop_assert!((z.norm() - 1.0).abs() <= 1e-12);
            } else {
                prop_assert_eq!(*z, C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn quantizer_outputs_are_fixed_levels(bits in 1u32..=6, xs in prop::collection::vec((-4.0f64..4.0, -4.0f64..4.0), 1..8), s in 0.1f64..3.0) {
        let q = lloyd_max_codebook(bits, 1e-10).unwrap();
        let x: Vec<C64> = xs.iter().map(|(a, b)| C64::new(*a, *b)).collect();
        let scale = vec![s; x.len()];
        let y = quantize(&x, &scale, &q).unwrap();
        prop_assert_eq!(quantize(&y, &scale, &q).unwrap(), y.clone());
        for z in &y {
            prop_assert!(q.levels.iter().any(|l| (l * s - z.re).abs() <= 1e-12 * s));
            prop_assert!(q.levels.iter().any(|l| (l * s - z.im).abs() <= 1e-12 * s));
        }
        let unit = quantize(&x.iter().map(|z| z / s).collect::<Vec<_>>(), &vec![1.0; x.len()], &q).unwrap();
        for (a, b) in unit.iter().zip(&y) {
            prop_assert!((a * s - b).norm() <= 1e-12 * s);
        }
    }

    #[test]
    fn se_is_invariant_to_stream_rotation(seed in 0u64..500, gamma in 0.0f64..0.5) {
        let mut r = rng(seed);
        let h = randn(6, 8, &mut r);
        let f = randn(8, 3, &mut r);
        let g = BussgangModel::uniform(6, gamma);
        let a = approx_se(&h, &f, &g, 0.1).unwrap();
        let b = approx_se(&h, &(&f * unitary(3, seed + 1)), &g, 0.1).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn se_grows_with_common_power_scale(seed in 0u64..500, gamma in 0.0f64..0.6, c in 1.0f64..4.0) {
        let mut r = rng(seed);
        let h = randn(6, 8, &mut r);
        let f = randn(8, 3, &mut r);
        let g = BussgangModel::uniform(6, gamma);
        let a = approx_se(&h, &f, &g, 0.1).unwrap();
        let b = approx_se(&h, &f.map(|z| z * c.sqrt()), &g, 0.1).unwrap();
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn waterfilling_matches_active_set_oracle(
        sv in prop::collection::vec(0.05f64..5.0, 1..6),
        pt in 0.1f64..10.0,
        sigma2 in 0.01f64..2.0,
    ) {
        let mut sv = sv;
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let p = waterfilling_powers(&sv, pt, sigma2);
        let ora = waterfilling(&sv, pt, sigma2);
        prop_assert!((p.iter().sum::<f64>() - pt).abs() <= 1e-12 * pt);
        for (a, b) in p.iter().zip(&ora) {
            prop_assert!(*a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-10 * pt);
        }
    }
}
