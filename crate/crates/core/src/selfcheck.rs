//! Property suites runnable from the command line: symmetric polynomials,
//! grid operators and radial-graph geometry.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::geometry::{assemble, spheroid_radius, support_gradient_identity_residual};
use crate::spheregrid::{Grid, GridSpec, ScalarField};
use crate::symfunc::{
    newton_maclaurin_margin, sigma, sigma_deleted, sigma_second_partial, ConeSpec,
    CurvatureFunctionSpec, WeightedFactor,
};

pub const SUITES: [&str; 4] = ["sympoly", "grid", "geometry", "all"];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}.{} {}", self.suite, self.name, self.detail)
    }
}

fn line(suite: &'static str, name: &'static str, passed: bool, detail: String) -> CheckLine {
    CheckLine { suite, name, passed, detail }
}

pub fn run_suite(name: &str, seed: u64) -> Result<Vec<CheckLine>> {
    match name {
        "sympoly" => Ok(sympoly(seed)),
        "grid" => Ok(grid()),
        "geometry" => Ok(geometry()),
        "all" => {
            let mut out = sympoly(seed);
            out.extend(grid());
            out.extend(geometry());
            Ok(out)
        }
        other => Err(Error::Argument(format!(
            "unknown suite '{other}' (expected one of {})",
            SUITES.join(", ")
        ))),
    }
}

/// σ_k by summing products over all k-subsets.
pub fn sigma_by_subsets(kappa: &[f64], k: usize) -> f64 {
    let n = kappa.len();
    if k == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize == k {
            total += (0..n).filter(|i| mask & (1 << i) != 0).map(|i| kappa[i]).product::<f64>();
        }
    }
    total
}

fn random_positive(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.05..3.0)).collect()
}

/// Rejection sample from Γ_m^+ with entries in (−1, 3).
pub fn random_in_cone(rng: &mut StdRng, n: usize, cone: ConeSpec) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..3.0)).collect();
        if cone.contains(&v) {
            return v;
        }
    }
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.abs().max(f64::MIN_POSITIVE)
}

fn sympoly(seed: u64) -> Vec<CheckLine> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=8);
        let kappa = random_positive(&mut rng, n);
        for k in 0..=n {
            let fast = sigma(&kappa, k).unwrap();
            worst = worst.max(rel(fast, sigma_by_subsets(&kappa, k), sigma_by_subsets(&kappa, k)));
        }
    }
    out.push(line("sympoly", "subset_oracle", worst <= 1e-12, format!("max_rel_err={worst:e}")));

    // mixed signs: error measured against σ_k(|κ|), the size of the summed terms
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=8);
        let kappa: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let abs: Vec<f64> = kappa.iter().map(|x| x.abs()).collect();
        for k in 0..=n {
            let scale = sigma_by_subsets(&abs, k);
            worst = worst.max(rel(sigma(&kappa, k).unwrap(), sigma_by_subsets(&kappa, k), scale));
        }
    }
    out.push(line("sympoly", "subset_oracle_mixed_sign", worst <= 1e-12, format!("max_scaled_err={worst:e}")));

    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.gen_range(2..=8);
        let kappa = random_positive(&mut rng, n);
        let s = |k: isize| if k < 0 || k as usize > n { 0.0 } else { sigma(&kappa, k as usize).unwrap() };
        let sd = |k: isize, i: usize| sigma_deleted(&kappa, k, i).unwrap();
        for k in 0..n as isize {
            for i in 0..n {
                worst = worst.max(rel(s(k + 1), sd(k + 1, i) + kappa[i] * sd(k, i), s(k + 1)));
            }
            let sum: f64 = (0..n).map(|i| sd(k, i)).sum();
            worst = worst.max(rel(sum, (n as f64 - k as f64) * s(k), s(k)));
            let sum: f64 = (0..n).map(|i| kappa[i] * sd(k, i)).sum();
            worst = worst.max(rel(sum, (k + 1) as f64 * s(k + 1), s(k + 1)));
            let sum: f64 = (0..n).map(|i| kappa[i] * kappa[i] * sd(k, i)).sum();
            let rhs = s(1) * s(k + 1) - (k + 2) as f64 * s(k + 2);
            worst = worst.max(rel(sum, rhs, s(1) * s(k + 1)));
        }
    }
    out.push(line("sympoly", "deletion_identities", worst <= 1e-10, format!("max_rel_err={worst:e}")));

    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=8);
        let m = rng.gen_range(2..=n);
        let kappa = random_in_cone(&mut rng, n, ConeSpec::GammaKPlus { k: m });
        worst = worst.min(newton_maclaurin_margin(&kappa, m).unwrap());
    }
    out.push(line("sympoly", "newton_maclaurin", worst >= -1e-12, format!("min_margin={worst:e}")));

    let specs = |n: usize| -> Vec<CurvatureFunctionSpec> {
        let mut v = vec![
            CurvatureFunctionSpec::SigmaKRoot { k: 1 },
            CurvatureFunctionSpec::SigmaKRoot { k: n },
            CurvatureFunctionSpec::PowerMean { p: -1.0 },
            CurvatureFunctionSpec::PowerMean { p: -3.0 },
        ];
        if n >= 2 {
            v.push(CurvatureFunctionSpec::SigmaKRoot { k: 2 });
            v.push(CurvatureFunctionSpec::QuotientRoot { k: 2, l: 1 });
            v.push(CurvatureFunctionSpec::Product {
                factors: vec![
                    WeightedFactor { weight: 0.5, f: CurvatureFunctionSpec::SigmaKRoot { k: 2 } },
                    WeightedFactor { weight: 0.5, f: CurvatureFunctionSpec::PowerMean { p: -1.0 } },
                ],
            });
        }
        if n >= 3 {
            v.push(CurvatureFunctionSpec::QuotientRoot { k: n, l: n - 2 });
        }
        v
    };
    let mut worst = f64::INFINITY;
    for _ in 0..300 {
        let n = rng.gen_range(2..=6);
        for spec in specs(n) {
            let cone = spec.natural_cone();
            let a = random_in_cone(&mut rng, n, cone);
            let b = random_in_cone(&mut rng, n, cone);
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let fa = spec.eval(&a).unwrap();
            let fb = spec.eval(&b).unwrap();
            worst = worst.min(spec.eval(&mid).unwrap() - 0.5 * (fa + fb));
        }
    }
    out.push(line("sympoly", "midpoint_concavity", worst >= -1e-12, format!("min_gap={worst:e}")));

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..500 {
        let n = rng.gen_range(3..=7);
        let k = rng.gen_range(2..n);
        let kappa = random_in_cone(&mut rng, n, ConeSpec::GammaKPlus { k });
        let mut b = vec![vec![0.0; n]; n];
        for p in 0..n {
            for q in p..n {
                let v = rng.gen_range(-1.0..1.0);
                b[p][q] = v;
                b[q][p] = v;
            }
        }
        worst = worst.max(quotient_concavity_gap(&kappa, k, &b));
    }
    out.push(line("sympoly", "quotient_concavity_form", worst <= 1e-8, format!("max_excess={worst:e}")));

    // B = diag(κ) is the scaling direction, where the inequality is an equality
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(3..=7);
        let k = rng.gen_range(2..n);
        let kappa = random_in_cone(&mut rng, n, ConeSpec::GammaKPlus { k });
        let b: Vec<Vec<f64>> = (0..n)
            .map(|p| (0..n).map(|q| if p == q { kappa[p] } else { 0.0 }).collect())
            .collect();
        let scale = sigma(&kappa, k).unwrap();
        worst = worst.max(quotient_concavity_gap(&kappa, k, &b).abs() / scale);
    }
    out.push(line("sympoly", "quotient_concavity_equality", worst <= 1e-10, format!("max_rel_gap={worst:e}")));
    out
}

/// Left side minus right side of the second-derivative inequality behind
/// the concavity of (σ_k/σ_1)^{1/(k−1)}, at a diagonal κ and symmetric B:
/// Σ_{p≠q} σ_k^{pp,qq}(B_pp B_qq − B_pq²) ≤ −σ_k(x − y)(((2−k)/(k−1))x − (k/(k−1))y)
/// with x = Σ_p σ_k^{pp}B_pp/σ_k and y = tr B/σ_1.
pub fn quotient_concavity_gap(kappa: &[f64], k: usize, b: &[Vec<f64>]) -> f64 {
    let n = kappa.len();
    let sk = sigma(kappa, k).unwrap();
    let s1 = sigma(kappa, 1).unwrap();
    let mut form = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                let d2 = sigma_second_partial(kappa, k, p, q).unwrap();
                form += d2 * (b[p][p] * b[q][q] - b[p][q] * b[p][q]);
            }
        }
    }
    let x: f64 = (0..n).map(|p| sigma_deleted(kappa, k as isize - 1, p).unwrap() * b[p][p]).sum::<f64>() / sk;
    let y: f64 = (0..n).map(|p| b[p][p]).sum::<f64>() / s1;
    let kf = k as f64;
    let rhs = -sk * (x - y) * ((2.0 - kf) / (kf - 1.0) * x - kf / (kf - 1.0) * y);
    form - rhs
}

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Max errors of (gradient, covariant Hessian) chart components for a test
/// function with known derivatives on a FullS2 grid.
fn operator_errors(m_theta: usize, which: usize) -> (f64, f64) {
    let g = Grid::build(GridSpec::FullS2 { m_theta, m_phi: 2 * m_theta }).unwrap();
    // (f, f_θ, f_φ, f_;θθ, f_;θφ, f_;φφ)
    let exact = |th: f64, ph: f64| -> [f64; 6] {
        let (s, c) = th.sin_cos();
        let (sp, cp) = ph.sin_cos();
        if which == 0 {
            [c, -s, 0.0, -c, 0.0, -c * s * s]
        } else {
            // sinθcosφ is a degree-1 harmonic: Hess f = −f·e
            let f = s * cp;
            [f, c * cp, -s * sp, -f, 0.0, -f * s * s]
        }
    };
    let field = g.field_from_fn(|th, ph| exact(th, ph)[0]);
    let grad = g.grad(&field);
    let hess = g.covariant_hessian(&field);
    let (mut eg, mut eh) = (0.0f64, 0.0f64);
    for node in 0..g.node_count() {
        let (th, ph) = (g.theta[g.ring_of(node)], g.phi[g.column_of(node)]);
        let e = exact(th, ph);
        eg = eg.max((grad[node][0] - e[1]).abs()).max((grad[node][1] - e[2]).abs());
        let h = hess[node];
        eh = eh.max((h.tt - e[3]).abs()).max((h.tp - e[4]).abs()).max((h.pp - e[5]).abs());
    }
    (eg, eh)
}

fn grid() -> Vec<CheckLine> {
    let mut out = Vec::new();
    for (which, name) in [(0usize, "order_cos_theta"), (1, "order_sin_theta_cos_phi")] {
        let (g1, h1) = operator_errors(32, which);
        let (g2, h2) = operator_errors(64, which);
        let (rg, rh) = (g1 / g2, h1 / h2);
        out.push(line(
            "grid",
            name,
            rg >= 3.5 && rh >= 3.5,
            format!("grad_ratio={rg:.3} hess_ratio={rh:.3}"),
        ));
    }

    let ax = Grid::build(GridSpec::Axisym { n: 2, m_theta: 48 }).unwrap();
    let full = Grid::build(GridSpec::FullS2 { m_theta: 48, m_phi: 32 }).unwrap();
    let f = |th: f64, _: f64| (2.0 * th).cos() + 0.3 * th.cos().powi(3);
    let (fa, ff) = (ax.field_from_fn(f), full.field_from_fn(f));
    let (ga, gf) = (ax.grad(&fa), full.grad(&ff));
    let (ha, hf) = (ax.covariant_hessian(&fa), full.covariant_hessian(&ff));
    let mut worst = 0.0f64;
    for node in 0..full.node_count() {
        let i = full.ring_of(node);
        worst = worst
            .max((ga[i][0] - gf[node][0]).abs())
            .max(gf[node][1].abs())
            .max((ha[i].tt - hf[node].tt).abs())
            .max(hf[node].tp.abs())
            .max((ha[i].pp - hf[node].pp).abs());
    }
    out.push(line("grid", "axisym_fullsphere_agreement", worst <= 1e-10, format!("max_diff={worst:e}")));

    let rough = full.field_from_fn(|th, ph| (5.0 * th).sin() * (3.0 * ph).cos() + th.cos());
    let min_sq = full.grad_norm_sq_field(&rough).into_iter().fold(f64::INFINITY, f64::min);
    out.push(line("grid", "grad_norm_nonnegative", min_sq >= 0.0, format!("min={min_sq:e}")));
    out
}

/// Exact principal curvatures (meridian, parallel) of the spheroid with
/// equatorial semi-axis a and polar semi-axis b at polar angle θ, from the
/// parametrization (a sin t, b cos t) of its meridian ellipse.
pub fn spheroid_curvatures(a: f64, b: f64, theta: f64) -> (f64, f64) {
    let t = (b / a * theta.tan()).atan();
    let t = if theta > std::f64::consts::FRAC_PI_2 { t + std::f64::consts::PI } else { t };
    let (st, ct) = t.sin_cos();
    let q = a * a * ct * ct + b * b * st * st;
    (a * b / q.powf(1.5), b / (a * q.sqrt()))
}

/// Max principal-curvature error of the axisymmetric spheroid graph.
pub fn spheroid_curvature_error(a: f64, b: f64, m_theta: usize) -> f64 {
    let g = Grid::build(GridSpec::Axisym { n: 2, m_theta }).unwrap();
    let gamma = g.field_from_fn(|th, _| spheroid_radius(a, b, th).ln());
    let st = assemble(&g, &gamma).unwrap();
    let mut worst = 0.0f64;
    for i in 0..m_theta {
        let (km, kp) = spheroid_curvatures(a, b, g.theta[i]);
        let mut exact = [km, kp];
        exact.sort_by(|x, y| y.partial_cmp(x).unwrap());
        worst = worst.max(max_err(st.kappa_at(i), &exact));
    }
    worst
}

fn geometry() -> Vec<CheckLine> {
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    for spec in [GridSpec::Axisym { n: 3, m_theta: 32 }, GridSpec::FullS2 { m_theta: 32, m_phi: 64 }] {
        let g = Grid::build(spec).unwrap();
        for r in [0.3, 1.0, 2.7] {
            let st = assemble(&g, &ScalarField::constant(&g, f64::ln(r))).unwrap();
            for node in 0..g.node_count() {
                for k in st.kappa_at(node) {
                    worst = worst.max((k - 1.0 / r).abs() * r);
                }
                let nu = st.normal_at(node);
                let x = st.position_at(node);
                let norm: f64 = nu.iter().map(|v| v * v).sum::<f64>().sqrt();
                let support: f64 = nu.iter().zip(x).map(|(a, b)| a * b).sum();
                worst = worst.max((norm - 1.0).abs()).max((support - r).abs() / r);
            }
        }
    }
    out.push(line("geometry", "sphere_exactness", worst <= 1e-12, format!("max_err={worst:e}")));

    let e1 = spheroid_curvature_error(1.5, 1.0, 64);
    let e2 = spheroid_curvature_error(1.5, 1.0, 128);
    let order = (e1 / e2).log2();
    out.push(line(
        "geometry",
        "spheroid_curvature_order",
        order >= 1.9,
        format!("err64={e1:e} err128={e2:e} order={order:.3}"),
    ));

    let support_residual = |m: usize| {
        let g = Grid::build(GridSpec::FullS2 { m_theta: m, m_phi: 2 * m }).unwrap();
        let gamma = g.field_from_fn(|th, ph| {
            spheroid_radius(1.2, 0.9, th).ln() + 0.05 * th.sin() * th.cos() * ph.cos()
        });
        support_gradient_identity_residual(&g, &assemble(&g, &gamma).unwrap())
    };
    let (r1, r2) = (support_residual(32), support_residual(64));
    out.push(line(
        "geometry",
        "support_gradient_identity",
        r1 / r2 >= 3.5,
        format!("res32={r1:e} res64={r2:e} ratio={:.3}", r1 / r2),
    ));

    let g = Grid::build(GridSpec::FullS2 { m_theta: 32, m_phi: 64 }).unwrap();
    let gamma = g.field_from_fn(|th, ph| 0.1 * (3.0 * th).cos() + 0.08 * th.sin() * (2.0 * ph).sin());
    let st = assemble(&g, &gamma).unwrap();
    let ok = st.u.iter().zip(&st.rho).all(|(u, r)| u <= r);
    out.push(line("geometry", "support_below_radius", ok, String::new()));
    out
}
