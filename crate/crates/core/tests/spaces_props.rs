use std::f64::consts::PI;

use morrey_lab::expr::Expr;
use morrey_lab::geometry::{Region, SpaceTimePoint};
use morrey_lab::spaces::{
    bmo_norm, lp_norm, mean_oscillation, morrey_norm, Centering, GridField, Lattice, MorreyDomain, Quadrature,
    ScalarField, SupSampler,
};
use morrey_lab::weights::WeightFunction;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

/// Fixed seed so every run explores the same cases.
fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x6d6f_7272),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

/// Test fields in `x1, t` with a bounded mean oscillation: smooth, kinked, logarithmic, plateau.
fn bmo_field() -> impl Strategy<Value = (String, ScalarField)> {
    let src = prop_oneof![
        (0.5..6.0f64, 0.5..6.0f64).prop_map(|(k, m)| format!("sin({k}*x1)*cos({m}*t)")),
        (-0.5..0.5f64).prop_map(|c| format!("abs(x1-{c})^0.5")),
        (-0.5..0.5f64, 1e-3..1e-1f64).prop_map(|(c, e)| format!("log(abs(x1-{c})+{e})")),
        (1.0..20.0f64).prop_map(|k| format!("min(max({k}*x1,-1),1)")),
        (-0.5..0.5f64).prop_map(|c| format!("log(abs(t-{c})+0.01)")),
    ];
    src.prop_map(|s| {
        let f = ScalarField::from_expr(1, &Expr::parse(&s).unwrap()).unwrap();
        (s, f)
    })
}

fn smooth_field(n: usize) -> impl Strategy<Value = ScalarField> {
    (-2.0..2.0f64, -2.0..2.0f64, 0.5..4.0f64, -2.0..2.0f64).prop_map(move |(a, b, k, c)| {
        let s = format!("{a} + {b}*x1*t + sin({k}*x1) + {c}*t^2");
        ScalarField::from_expr(n, &Expr::parse(&s).unwrap()).unwrap()
    })
}

fn unit_box(n: usize) -> Region {
    Region::box_cylinder(&vec![-1.0; n], &vec![1.0; n], -1.0, 1.0).unwrap()
}

proptest! {
    #![proptest_config(config(16))]

    /// With `‖a‖_*` taken over the same balls, `sup osc_p / ‖a‖_*` is 1 at `p = 1`,
    /// nondecreasing in `p` and stays bounded.
    #[test]
    fn john_nirenberg_growth((label, a) in bmo_field()) {
        let sampler = SupSampler::lattice(&unit_box(1), 3, vec![0.125, 0.25, 0.5]).unwrap();
        let q = Quadrature::default();
        let whole = MorreyDomain::whole_space();
        let bmo = bmo_norm(&a, &sampler, &whole, &q).unwrap().value;
        prop_assume!(bmo > 1e-8);
        let mut bounds = Vec::new();
        for p in [1.0, 2.0, 4.0] {
            let mut worst = 0.0f64;
            for (x, r) in sampler.samples() {
                let e = Region::ellipsoid(x, r).unwrap();
                worst = worst.max(mean_oscillation(&a, &e, p, &q).unwrap() / bmo);
            }
            bounds.push(worst);
        }
        prop_assert!((bounds[0] - 1.0).abs() < 1e-12, "{label}: {bounds:?}");
        prop_assert!(bounds[0] <= bounds[1] * (1.0 + 1e-12) && bounds[1] <= bounds[2] * (1.0 + 1e-12), "{label}: {bounds:?}");
        prop_assert!(bounds[2] <= 4.0, "{label}: {bounds:?}");
    }

    /// Oscillations over one ball are nondecreasing in `p` (Hölder for a probability measure).
    #[test]
    fn oscillation_is_nondecreasing_in_p((label, a) in bmo_field(), x in -0.8..0.8f64, t in -0.8..0.8f64, r in 0.05..0.6f64) {
        let e = Region::ellipsoid(SpaceTimePoint::new(&[x], t).unwrap(), r).unwrap();
        let q = Quadrature::default();
        let o: Vec<f64> = [1.0, 1.5, 2.0, 4.0].iter().map(|&p| mean_oscillation(&a, &e, p, &q).unwrap()).collect();
        for w in o.windows(2) {
            prop_assert!(w[0] <= w[1] * (1.0 + 1e-12) + 1e-15, "{label}: {o:?}");
        }
    }

    #[test]
    fn morrey_norm_grows_with_the_sample_set(f in smooth_field(1), s1 in 0u64..1000, s2 in 0u64..1000, p in 1.0..4.0f64) {
        let dom = unit_box(1);
        let phi = WeightFunction::power(1, p, 0.5).unwrap();
        let a = SupSampler::random(&dom, 6, vec![0.25, 0.5], s1).unwrap();
        let b = SupSampler::random(&dom, 6, vec![0.125, 0.5], s2).unwrap();
        let whole = MorreyDomain::whole_space();
        let q = Quadrature::with_h(0.05);
        let na = morrey_norm(&f, p, &phi, &whole, &a, &q).unwrap();
        let nab = morrey_norm(&f, p, &phi, &whole, &a.merged(&b), &q).unwrap();
        prop_assert!(nab.value >= na.value, "{} < {}", nab.value, na.value);
        let again = morrey_norm(&f, p, &phi, &whole, &SupSampler::random(&dom, 6, vec![0.25, 0.5], s1).unwrap(), &q).unwrap();
        prop_assert_eq!(again, na);
    }

    /// `‖f(·/r, ·/r²)‖_{L_p(E_r)} = r^{(n+2)/p} ‖f‖_{L_p(E_1)}`.
    #[test]
    fn lp_norm_is_dilation_covariant(n in 1usize..=2, f in smooth_field(2), r in 0.1..3.0f64, p in 1.0..4.0f64) {
        let f1 = ScalarField::new(n, "f", {
            let f = f.clone();
            move |y: &SpaceTimePoint| f.eval(&SpaceTimePoint::new(&pad(y.space()), y.time()).unwrap())
        });
        let fr = ScalarField::new(n, "f_r", {
            let f = f.clone();
            move |y: &SpaceTimePoint| {
                let d = y.dilate(1.0 / r);
                f.eval(&SpaceTimePoint::new(&pad(d.space()), d.time()).unwrap())
            }
        });
        // Spacing r/8 on both balls: the grids are exact dilates of each other.
        let q = Quadrature { h: 1e3, cells_per_radius: 8.0 };
        let o = SpaceTimePoint::origin(n);
        let unit = lp_norm(&f1, &Region::ellipsoid(o, 1.0).unwrap(), p, &q).unwrap();
        let scaled = lp_norm(&fr, &Region::ellipsoid(o, r).unwrap(), p, &q).unwrap();
        let expect = r.powf((n as f64 + 2.0) / p) * unit;
        prop_assert!((scaled - expect).abs() <= 1e-9 * expect, "{scaled} vs {expect}");
    }

    #[test]
    fn grid_fields_interpolate_their_nodes_and_round_trip(f in smooth_field(2), h in prop_oneof![Just(0.5), Just(0.25), Just(0.125)], cell in any::<bool>()) {
        let centering = if cell { Centering::Cell } else { Centering::Vertex };
        let lat = Lattice::parabolic(centering, &[-1.0, 0.0, 0.0], &[1.0, 1.0, 0.5], h).unwrap();
        let g = lat.sample(|p| f.eval(p));
        for i in 0..lat.len() {
            prop_assert_eq!(g.interpolate(&lat.point_of(i)), g.values()[i]);
        }
        let mut bin = Vec::new();
        g.write_binary(&mut bin).unwrap();
        prop_assert_eq!(&GridField::read_binary(bin.as_slice()).unwrap(), &g);
        let mut csv = Vec::new();
        g.write_csv(&mut csv).unwrap();
        let back = GridField::read_csv(csv.as_slice()).unwrap();
        prop_assert_eq!(back.values(), g.values());
    }
}

/// Pads a 1-D or 2-D space point to the two variables the test fields use.
fn pad(x: &[f64]) -> Vec<f64> {
    vec![x[0], x.get(1).copied().unwrap_or(0.0)]
}

/// `L_2(E_1)` norms in `n = 1`, where `E_1` is the unit disc `x² + t² < 1`:
/// `∫ (a + b x + c t²)² = π (a² + b²/4 + c²/8 + a c / 2)`.
#[test]
fn lp_norm_converges_with_order_at_least_one() {
    let e = Region::ellipsoid(SpaceTimePoint::origin(1), 1.0).unwrap();
    for (a, b, c) in [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.5, -1.0, 2.0), (0.0, 0.0, 1.0)] {
        let exact = (PI * (a * a + b * b / 4.0 + c * c / 8.0 + a * c / 2.0)).sqrt();
        let f = ScalarField::new(1, "poly", move |p: &SpaceTimePoint| a + b * p.space()[0] + c * p.time().powi(2));
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| {
                let q = Quadrature { h, cells_per_radius: 1.0 };
                (lp_norm(&f, &e, 2.0, &q).unwrap() - exact).abs()
            })
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "({a}, {b}, {c}): {errs:?}");
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order >= 1.0, "({a}, {b}, {c}): order {order}, errors {errs:?}");
    }
}
