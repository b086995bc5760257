use proptest::prelude::*;

use redist::field::{catalog_get, grid_points, norm, normalization_factor};
use redist::fmm::{band_from_samples, march, signed_from_samples, Order};
use redist::metrics::{error_l2, error_linf};
use redist::net::{
    decode_checkpoint, encode_checkpoint, forward, init_params, predict, NetworkParameters,
};
use redist::train::PlateauScheduler;

fn fields_2d() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec![
        "circle",
        "phi1",
        "phi_osc",
        "phi4_square",
        "phi6_dumbbell",
        "phi7_heart",
        "phi8_twocircle",
    ])
}

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..=1.0, dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn heads_are_unit_and_follow_the_sign_of_phi(
        seed in any::<u64>(),
        width in 1usize..12,
        depth in 1usize..4,
        name in fields_2d(),
        x in point(2),
        jitter in -3.0f64..3.0,
    ) {
        let field = catalog_get(name).unwrap();
        let mut p = init_params(2, width, depth, seed).unwrap();
        // push some weights far from their init range
        for (i, w) in p.as_mut_slice().iter_mut().enumerate() {
            if i % 3 == 0 {
                *w *= jitter;
            }
        }
        let phi = field.eval(&x);
        let out = forward(&p, &x, phi).unwrap();
        let v = norm(&out.v);
        prop_assert!(v == 0.0 || (v - 1.0).abs() <= 1e-9, "|V| = {v}");
        if out.psi.abs() > 1e-14 && phi != 0.0 {
            prop_assert_eq!(out.u.signum(), phi.signum());
        }
        if phi == 0.0 {
            prop_assert_eq!(out.u, 0.0);
        }
    }

    #[test]
    fn batched_prediction_matches_single_points(seed in any::<u64>(), pts in prop::collection::vec(point(3), 1..20)) {
        let field = catalog_get("phi10_sphere").unwrap();
        let p = init_params(3, 7, 2, seed).unwrap();
        let flat: Vec<f64> = pts.concat();
        let phi: Vec<f64> = pts.iter().map(|x| field.eval(x)).collect();
        let pred = predict(&p, &flat, &phi).unwrap();
        for (i, x) in pts.iter().enumerate() {
            let one = forward(&p, x, phi[i]).unwrap();
            prop_assert!((one.u - pred.u[i]).abs() <= 1e-12 * (1.0 + one.u.abs()));
        }
    }

    #[test]
    fn clipping_bounds_every_hidden_weight(seed in any::<u64>(), m in 1e-3f64..2.0, scale in 0.1f64..50.0) {
        let mut p = init_params(2, 9, 3, seed).unwrap();
        p.as_mut_slice().iter_mut().for_each(|w| *w *= scale);
        p.clip_weights(m, false);
        prop_assert!(p.max_hidden_weight() <= m);
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>(), width in 1usize..10, depth in 1usize..4, dim in 2usize..=3, scale in 1e-3f64..1e3) {
        let p = init_params(dim, width, depth, seed).unwrap();
        let bytes = encode_checkpoint(&p, scale);
        let ck = decode_checkpoint(&bytes).unwrap();
        prop_assert_eq!(&ck.params, &p);
        prop_assert_eq!(ck.phi_scale, scale);
        prop_assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn corrupted_checkpoints_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..200), flip in 0usize..52) {
        let _ = decode_checkpoint(&bytes);
        let p = init_params(2, 3, 1, 0).unwrap();
        let mut good = encode_checkpoint(&p, 1.0);
        good[flip] ^= 0xA5;
        if let Ok(ck) = decode_checkpoint(&good) {
            prop_assert_eq!(encode_checkpoint(&ck.params, ck.phi_scale), good);
        }
    }

    #[test]
    fn error_norms_are_nonnegative_symmetric_and_order_free(a in prop::collection::vec(-5.0f64..5.0, 1..50), shift in -1.0f64..1.0) {
        let b: Vec<f64> = a.iter().map(|v| v + shift * v.sin()).collect();
        let l2 = error_l2(&a, &b, 4.0).unwrap();
        prop_assert!(l2 >= 0.0);
        prop_assert!((l2 - error_l2(&b, &a, 4.0).unwrap()).abs() <= 1e-15);
        let mut ra = a.clone();
        let mut rb = b.clone();
        ra.reverse();
        rb.reverse();
        prop_assert!((l2 - error_l2(&ra, &rb, 4.0).unwrap()).abs() <= 1e-12 * (1.0 + l2));
        prop_assert_eq!(error_linf(&a, &b).unwrap(), error_linf(&ra, &rb).unwrap());
        prop_assert_eq!(error_l2(&a, &a, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn normalization_preserves_sign_and_is_idempotent(name in fields_2d()) {
        let field = catalog_get(name).unwrap();
        let probe = grid_points(2, 33).unwrap();
        let values: Vec<f64> = probe.iter().map(|p| field.eval(p)).collect();
        let k = normalization_factor(&values).unwrap();
        prop_assert!(k > 0.0);
        let scaled: Vec<f64> = values.iter().map(|v| v * k).collect();
        prop_assert!((normalization_factor(&scaled).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lr_only_ever_drops_by_the_factor(losses in prop::collection::vec(0.0f64..1.0, 0..400)) {
        let mut s = PlateauScheduler::new(1e-3, 0.9, 30, 1e-12);
        let mut prev = s.lr();
        for l in losses {
            s.step(l);
            let lr = s.lr();
            prop_assert!(lr == prev || lr == prev * 0.9);
            prev = lr;
        }
    }

    #[test]
    fn marching_keeps_the_sign_pattern_and_accepts_in_order(
        cx in -0.3f64..0.3, cy in -0.3f64..0.3, r in 0.15f64..0.5, n in 9usize..40,
    ) {
        let h = 2.0 / (n - 1) as f64;
        let phi: Vec<f64> = (0..n * n)
            .map(|i| {
                let x = -1.0 + (i / n) as f64 * h;
                let y = -1.0 + (i % n) as f64 * h;
                (x - cx).hypot(y - cy) - r
            })
            .collect();
        let Ok(band) = band_from_samples(2, n, h, -1.0, &phi) else {
            return Ok(());
        };
        let g = march(band, Order::First).unwrap();
        prop_assert!(g.is_complete());
        for w in g.acceptance_order().windows(2) {
            prop_assert!(g.values()[w[1]] >= g.values()[w[0]]);
        }
        let signed = signed_from_samples(2, n, h, -1.0, &phi, Order::Second).unwrap();
        for (u, p) in signed.values().iter().zip(&phi) {
            if *p != 0.0 {
                prop_assert_eq!(u.signum(), p.signum());
            }
        }
    }

    #[test]
    fn exact_cone_gradient_is_constant_along_rays(x in point(2), t in 0.0f64..0.99) {
        let cone = catalog_get("cone").unwrap();
        let u = cone.exact_sdf(&x).unwrap();
        prop_assume!(norm(&x) > 1e-3);
        let mut g = [0.0; 2];
        cone.exact_sdf_grad(&x, &mut g);
        let y = [x[0] - t * u * g[0], x[1] - t * u * g[1]];
        let mut gy = [0.0; 2];
        cone.exact_sdf_grad(&y, &mut gy);
        prop_assert!((g[0] - gy[0]).abs() <= 1e-12 && (g[1] - gy[1]).abs() <= 1e-12);
    }
}

#[test]
fn from_flat_rejects_wrong_lengths() {
    let p = init_params(2, 4, 1, 0).unwrap();
    let mut data = p.as_slice().to_vec();
    data.pop();
    assert!(NetworkParameters::from_flat(p.shape(), 0, data).is_err());
}
