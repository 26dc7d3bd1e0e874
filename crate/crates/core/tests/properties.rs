use fklab::cli::config::{ConfigFile, ModelInput};
use fklab::geometry::DomainGeometry;
use fklab::harness::{ppp_constant, ppp_ln_ratio, RegionSplit};
use fklab::kato::{kato_norm_measure_with, KatoOpts};
use fklab::kernel::{clip, psi_gamma, q_eval, q_mass, q_radial, surrogate_band, KernelParams};
use fklab::measure::{derive_f1, DensityFn, JumpFunctionalSpec, MeasureSpec};
use fklab::models::{preset, PresetOverrides, PRESET_NAMES};
use fklab::report::{BinaryTable, Csv};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = KernelParams> {
    (1usize..=3, prop::sample::select(vec![0.5, 1.0, 1.5, 1.9])).prop_map(|(d, a)| KernelParams::new(d, a, 0.0, 2.0).unwrap())
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, d)
}

fn log_t() -> impl Strategy<Value = f64> {
    (-9.0f64..1.0).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn q_is_exactly_symmetric(p in params(), t in log_t(), seed in point(3), other in point(3)) {
        let (x, y) = (&seed[..p.d], &other[..p.d]);
        prop_assert_eq!(q_eval(&p, t, x, y).unwrap(), q_eval(&p, t, y, x).unwrap());
    }

    #[test]
    fn q_sits_in_its_sandwich(p in params(), t in log_t(), r in 0.0f64..50.0) {
        let da = p.d as f64 + p.alpha;
        let base = t * (t.powf(1.0 / p.alpha) + r).powf(-da);
        let q = q_radial(p.d, p.alpha, t, r);
        prop_assert!(base <= q * (1.0 + 1e-12));
        prop_assert!(q <= 2f64.powf(da) * base * (1.0 + 1e-12));
    }

    #[test]
    fn clip_ratio_inequality(a in 1e-8f64..1e8, b in 1e-8f64..1e8) {
        let mid = (a / b).min(1.0);
        prop_assert!(a / (a + b) <= mid * (1.0 + 1e-15));
        prop_assert!(mid <= 2.0 * a / (a + b) * (1.0 + 1e-15));
    }

    #[test]
    fn clip_is_a_fraction(delta in 0.0f64..10.0, t in log_t(), a in 0.2f64..2.0) {
        let c = clip(delta, t, a);
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert_eq!(clip(f64::INFINITY, t, a), 1.0);
    }

    #[test]
    fn psi_and_band_on_the_half_line(t in (-6.0f64..0.0).prop_map(|e| 10f64.powf(e)), x in 1e-6f64..4.0, y in 1e-6f64..4.0, g in 0.0f64..0.9) {
        let p = KernelParams::new(1, 1.0, g, 4.0).unwrap();
        let geom = DomainGeometry::HalfSpace;
        let s = psi_gamma(&p, &geom, t, &[x], &[y]).unwrap();
        prop_assert!(s > 0.0 && s <= 1.0);
        prop_assert_eq!(s, psi_gamma(&p, &geom, t, &[y], &[x]).unwrap());
        let (lo, hi) = surrogate_band(&p, &geom, t, &[x], &[y]).unwrap();
        let mid = s * q_eval(&p, t, &[x], &[y]).unwrap();
        prop_assert!(lo <= mid && mid <= hi);
        prop_assert!((hi / lo - 16.0).abs() < 1e-9);
    }

    #[test]
    fn q_mass_does_not_depend_on_time(p in params(), t in log_t()) {
        let m1 = q_mass(&p, 1.0).unwrap();
        prop_assert!(((q_mass(&p, t).unwrap() - m1) / m1).abs() < 1e-6);
    }

    #[test]
    fn ppp_ratio_stays_below_its_constant(p in params(), u in 0.001f64..0.999, t in log_t(), a in point(3), b in point(3), c in point(3)) {
        let d = p.d;
        let (x, y, z) = (&a[..d], &b[..d], &c[..d]);
        let dist = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let lr = ppp_ln_ratio(d, p.alpha, u * t, t, dist(x, z), dist(z, y), dist(x, y));
        prop_assert!(lr <= ppp_constant(d, p.alpha).ln() + 1e-12);
    }

    #[test]
    fn region_split_covers_the_complement(pts in prop::collection::vec(point(2), 4)) {
        let s = RegionSplit::classify(&pts[0], &pts[1], &pts[2], &pts[3]);
        prop_assert!(!s.in_u() || s.in_u1 || s.in_u2);
    }

    #[test]
    fn f1_inverts_the_log_transform(a in 0.01f64..3.0, beta in 1.01f64..3.0, rho in 1e-6f64..5.0) {
        let f = JumpFunctionalSpec::power_cap(a, beta);
        let f1 = derive_f1(&f);
        let back = f1.eval_radial(rho).ln_1p();
        prop_assert!((back - f.eval_radial(rho)).abs() <= 1e-12 * (1.0 + f.eval_radial(rho).abs()));
    }

    #[test]
    fn csv_and_table_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e300f64..1e300, 3), 0..20)) {
        let mut c = Csv::new(&["a", "b", "c"]);
        for r in &rows {
            c.push(r.clone());
        }
        prop_assert_eq!(&Csv::parse(&c.render()).unwrap().rows, &rows);
        let t = BinaryTable { meta: serde_json::json!({"n": rows.len()}), blocks: vec![("flat".into(), rows.concat())] };
        prop_assert_eq!(BinaryTable::from_bytes(&t.to_bytes()).unwrap(), t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn kato_norm_is_monotone_and_subadditive(t1 in (-4.0f64..-0.5).prop_map(|e| 10f64.powf(e)), k in 1.5f64..8.0, v in 0.1f64..2.0) {
        let p = KernelParams::new(1, 1.5, 0.0, 10.0).unwrap();
        let geom = DomainGeometry::WholeSpace;
        let opts = KatoOpts::fast();
        let a = DensityFn::Box { value: v, lo: vec![-1.0], hi: vec![0.0] };
        let b = DensityFn::Box { value: 1.0, lo: vec![0.2], hi: vec![1.0] };
        let n = |mu: &MeasureSpec, t: f64| kato_norm_measure_with(&p, &geom, mu, t, &opts).unwrap().value;
        let mu_a = MeasureSpec::density(a.clone());
        let mu_b = MeasureSpec::density(b.clone());
        let sum = MeasureSpec::density(DensityFn::Sum { terms: vec![a, b] });
        let t2 = (t1 * k).min(1.0);
        prop_assert!(n(&mu_a, t1) <= n(&mu_a, t2) * (1.0 + 1e-6));
        prop_assert!(n(&sum, t1) <= (n(&mu_a, t1) + n(&mu_b, t1)) * (1.0 + 1e-6));
    }
}

#[test]
fn presets_round_trip_through_the_config_schema() {
    for name in PRESET_NAMES {
        let p = preset(name, &PresetOverrides::default()).unwrap();
        let json = serde_json::json!({
            "d": p.params.d, "alpha": p.params.alpha, "gamma": p.params.gamma, "c0": p.params.c0,
            "geometry": p.geometry, "mu": p.mu, "jump": p.jump,
        });
        let cfg = ConfigFile::parse(&json.to_string()).unwrap();
        let m = ModelInput::from_file(&cfg).resolve().unwrap();
        assert_eq!(m.params, p.params, "{name}");
        assert_eq!(m.geometry, p.geometry, "{name}");
        assert_eq!(m.mu, p.mu, "{name}");
        assert_eq!(m.jump, p.jump, "{name}");
    }
}
