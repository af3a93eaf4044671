//! Property tests over the public API.

use proptest::prelude::*;

use starflow::flow::{Flow, FlowConfig};
use starflow::geometry::assemble;
use starflow::speed::{
    g_eval, radius_root, validate_barrier_radii, validate_barrier_radii_sampled, PsiMode, SpeedSpec,
    DIRECTION_SAMPLES,
};
use starflow::spheregrid::{Grid, GridSpec, ScalarField};
use starflow::symfunc::{CurvatureFunctionSpec, WeightedFactor};

fn functions(n: usize) -> Vec<CurvatureFunctionSpec> {
    let mut out = vec![CurvatureFunctionSpec::PowerMean { p: -1.5 }];
    for k in 1..=n {
        out.push(CurvatureFunctionSpec::SigmaKRoot { k });
        for l in 0..k {
            out.push(CurvatureFunctionSpec::QuotientRoot { k, l });
        }
    }
    out.push(CurvatureFunctionSpec::Product {
        factors: vec![
            WeightedFactor { weight: 0.25, f: CurvatureFunctionSpec::SigmaKRoot { k: 1 } },
            WeightedFactor { weight: 0.75, f: CurvatureFunctionSpec::SigmaKRoot { k: n } },
        ],
    });
    out
}

// Positive vectors lie in every cone used above.
fn positive_kappa() -> impl Strategy<Value = Vec<f64>> {
    (1usize..=6).prop_flat_map(|n| prop::collection::vec(0.05f64..5.0, n))
}

fn unit_vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim)
        .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
        .prop_map(|v| {
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / r).collect()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn f_is_one_homogeneous(kappa in positive_kappa(), t in 0.1f64..10.0) {
        let scaled: Vec<f64> = kappa.iter().map(|v| v * t).collect();
        for f in functions(kappa.len()) {
            let a = f.eval(&scaled).unwrap();
            let b = t * f.eval(&kappa).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{f:?}: {a} vs {b}");
        }
    }

    #[test]
    fn f_is_symmetric(kappa in positive_kappa(), seed in any::<u64>()) {
        let mut perm = kappa.clone();
        let n = perm.len();
        for i in (1..n).rev() {
            perm.swap(i, (seed as usize).wrapping_mul(i + 7) % (i + 1));
        }
        for f in functions(n) {
            let a = f.eval(&kappa).unwrap();
            let b = f.eval(&perm).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{f:?}");
        }
    }

    #[test]
    fn gradient_is_positive_and_satisfies_euler(kappa in positive_kappa()) {
        for f in functions(kappa.len()) {
            let grad = f.grad(&kappa).unwrap();
            prop_assert!(grad.iter().all(|g| *g > 0.0), "{f:?}: {grad:?}");
            let euler: f64 = grad.iter().zip(&kappa).map(|(g, k)| g * k).sum();
            let value = f.eval(&kappa).unwrap();
            prop_assert!((euler - value).abs() <= 1e-10 * value.max(1.0), "{f:?}: {euler} vs {value}");
        }
    }

    #[test]
    fn g_is_positive(
        c in 0.1f64..5.0, a in -2.0f64..2.0, b in -3.0f64..3.0, s in -1.0f64..1.0,
        xi in unit_vector(3), v in unit_vector(3), nu in unit_vector(3),
        u in 0.01f64..3.0, rho in 0.01f64..3.0,
    ) {
        let spec = SpeedSpec { c, a, b, psi: vec![] }.with_psi(s, v);
        let x: Vec<f64> = xi.iter().map(|t| t * rho).collect();
        let g = g_eval(&spec, &x, &nu, u, rho).unwrap();
        prop_assert!(g > 0.0 && g.is_finite());
    }

    #[test]
    fn support_never_exceeds_radius(
        r0 in 0.3f64..3.0,
        coeffs in prop::collection::vec(-0.3f64..0.3, 4),
    ) {
        let grid = Grid::build(GridSpec::FullS2 { m_theta: 16, m_phi: 32 }).unwrap();
        let gamma = grid.field_from_fn(|t, p| {
            r0.ln() + coeffs[0] * t.cos() + coeffs[1] * t.sin() * p.cos()
                + coeffs[2] * (2.0 * t).cos() + coeffs[3] * t.sin() * (2.0 * p).sin()
        });
        let geo = assemble(&grid, &gamma).unwrap();
        for node in 0..grid.node_count() {
            prop_assert!(geo.u[node] > 0.0 && geo.u[node] <= geo.rho[node] * (1.0 + 1e-15));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn barrier_radii_survive_denser_sampling(
        b in -4.0f64..-1.5, s in 0.0f64..0.4, v in unit_vector(3),
    ) {
        let spec = SpeedSpec::isotropic(1.0, 0.0, b).with_psi(s, v);
        let f = CurvatureFunctionSpec::SigmaKRoot { k: 2 };
        let coarse = validate_barrier_radii(&spec, &f, 2, 1.0).unwrap();
        let fine = validate_barrier_radii_sampled(&spec, &f, 2, 1.0, 10 * DIRECTION_SAMPLES).unwrap();
        // the extremes of psi lie on the sampled axis, so both agree closely
        prop_assert!((coarse.r1 - fine.r1).abs() <= 1e-9 * fine.r1);
        prop_assert!((coarse.r2 - fine.r2).abs() <= 1e-9 * fine.r2);
        prop_assert!(coarse.r1 <= coarse.r2);
    }

    #[test]
    fn radius_root_is_stationary(
        c in 0.3f64..3.0, a in -1.0f64..0.0, b in -3.0f64..-1.2, beta in 0.5f64..2.5,
        neg in any::<bool>(), k in 1usize..=3,
    ) {
        let n = 3;
        let spec = SpeedSpec { c, a, b, psi: vec![] };
        let f = CurvatureFunctionSpec::SigmaKRoot { k };
        let mode = if neg { PsiMode::NegReciprocal } else { PsiMode::Identity };
        let r = radius_root(&spec, &f, n, beta, mode).unwrap();
        let cfg = FlowConfig::new(mode, beta, f, spec, GridSpec::Axisym { n, m_theta: 24 });
        let flow = Flow::new(cfg).unwrap();
        let gamma = ScalarField::constant(&flow.grid, r.ln());
        let field = flow.speed_field(&gamma.values).unwrap();
        prop_assert!(field.residual() < 1e-10, "R = {r}, residual {}", field.residual());
    }
}
