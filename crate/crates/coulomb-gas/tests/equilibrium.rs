//! Equilibrium-measure oracles: the closed forms are checked against direct
//! spherical quadrature of the ball convolution, with no shared code path.

use coulomb_gas::equilibrium::solve_quadratic_equilibrium;
use coulomb_gas::geom::norm;
use coulomb_gas::kernel::{GaussLegendre, KAPPA3};
use coulomb_gas::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// ∫ κ₃/|z − s·e₁| dμ_V(z) in spherical coordinates. The angular integral
/// is elementary (u = cos θ gives ∫₀^π sinθ dθ/√(s²+t²−2st·cosθ) =
/// ((s+t) − |s−t|)/(st) = 2/max(s,t)); the radial integral, which carries
/// the actual content, is Gauss-Legendre with a split at the kink t = s.
fn ball_convolution_quadrature(s: f64, radius: f64, density: f64) -> f64 {
    let gl = GaussLegendre::new(64);
    let f = |t: f64| t * t * 2.0 / t.max(s);
    let split = s.min(radius);
    density
        * 2.0
        * PI
        * KAPPA3
        * (gl.integrate(0.0, split, &f) + gl.integrate(split, radius, &f))
}

/// ⟨V, μ_V⟩ by radial quadrature for V = t²/2 + c₀.
fn v_average_quadrature(radius: f64, density: f64, c0: f64) -> f64 {
    let gl = GaussLegendre::new(64);
    density * 4.0 * PI * gl.integrate(0.0, radius, |t| (0.5 * t * t + c0) * t * t)
}

#[test]
fn stationarity_holds_on_twenty_interior_radii() {
    let eq = solve_quadratic_equilibrium(3).unwrap();
    let v = eq.potential();
    let mut values = Vec::new();
    for i in 0..20 {
        let s = eq.radius() * (i as f64 + 0.5) / 20.0;
        let conv = ball_convolution_quadrature(s, eq.radius(), eq.density());
        values.push(conv + v.eval([s, 0.0, 0.0]));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(hi - lo < 1e-6, "g∗μ + V varies by {}", hi - lo);
    // the constant itself: (3/2)R² + c₀
    let expect = 1.5 * eq.radius() * eq.radius() + eq.v_offset();
    assert!((values[0] - expect).abs() < 1e-8);
}

#[test]
fn exterior_field_matches_a_point_charge() {
    let eq = solve_quadratic_equilibrium(3).unwrap();
    for i in 1..=10 {
        let s = eq.radius() * (1.0 + 0.4 * i as f64);
        let conv = ball_convolution_quadrature(s, eq.radius(), eq.density());
        assert!(
            (conv - KAPPA3 / s).abs() < 1e-8,
            "at s = {s}: {conv} vs {}",
            KAPPA3 / s
        );
        // and the closed form agrees with its own quadrature
        assert!((eq.ball_potential(s) - conv).abs() < 1e-8);
    }
}

#[test]
fn interior_ball_potential_matches_quadrature() {
    let eq = solve_quadratic_equilibrium(3).unwrap();
    for i in 0..8 {
        let s = eq.radius() * (i as f64 + 0.5) / 8.0;
        let conv = ball_convolution_quadrature(s, eq.radius(), eq.density());
        assert!((eq.ball_potential(s) - conv).abs() < 1e-8);
    }
}

#[test]
fn v_average_closed_form_matches_quadrature() {
    let eq = solve_quadratic_equilibrium(3).unwrap();
    let quad = v_average_quadrature(eq.radius(), eq.density(), eq.v_offset());
    assert!((eq.v_average() - quad).abs() < 1e-10);
}

#[test]
fn zeta_vanishes_inside_and_never_goes_negative() {
    let eq = solve_quadratic_equilibrium(3).unwrap();
    assert_eq!(eq.zeta([0.0, 0.0, 0.0]), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut audited = 0usize;
    while audited < 10_000 {
        let p: Point3 = [
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        ];
        if norm(p) > 5.0 {
            continue;
        }
        audited += 1;
        let z = eq.zeta(p);
        assert!(z >= 0.0, "ζ < 0 at {p:?}: {z}");
        if norm(p) <= eq.radius() {
            assert_eq!(z, 0.0);
        }
    }
}

#[test]
fn zeta_reconstructed_from_quadrature_vanishes_on_the_support() {
    // Rebuild ζ = g∗μ_V + ⟨V,μ_V⟩ + V from quadrature alone: it must be 0
    // inside Σ and match the closed form outside.
    let eq = solve_quadratic_equilibrium(3).unwrap();
    let v = eq.potential();
    let v_avg = v_average_quadrature(eq.radius(), eq.density(), eq.v_offset());
    for i in 0..12 {
        let s = eq.radius() * (0.05 + 0.25 * i as f64);
        let zeta_q = ball_convolution_quadrature(s, eq.radius(), eq.density())
            + v_avg
            + v.eval([s, 0.0, 0.0]);
        let zeta_closed = eq.zeta_radial(s);
        assert!(
            (zeta_q - zeta_closed).abs() < 1e-7,
            "s = {s}: quadrature {zeta_q} vs closed {zeta_closed}"
        );
    }
}

#[test]
fn zeta_tracks_the_potential_with_the_closed_form_gap() {
    let eq = solve_quadratic_equilibrium(3).unwrap();
    let v = eq.potential();
    let mut sup: f64 = 0.0;
    let steps = 10_000;
    for i in 0..=steps {
        let s = 5.0 * i as f64 / steps as f64;
        sup = sup.max((eq.zeta_radial(s) - v.eval([s, 0.0, 0.0])).abs());
    }
    assert!(
        (sup - eq.sup_zeta_minus_v()).abs() < 1e-8,
        "sup |ζ−V| = {sup} vs {}",
        eq.sup_zeta_minus_v()
    );
}

#[test]
fn zeta_statistic_counts_only_escapees_and_grows_outward() {
    let eq = solve_quadratic_equilibrium(3).unwrap();
    let r = eq.radius();
    let inside = [
        [0.0, 0.0, 0.0],
        [0.5 * r, 0.0, 0.0],
        [0.0, -0.9 * r, 0.0],
    ];
    assert_eq!(eq.zeta_statistic(&inside), 0.0);

    let s = 2.0 * r;
    let single = [[s, 0.0, 0.0]];
    let v_avg = v_average_quadrature(r, eq.density(), eq.v_offset());
    let quad = ball_convolution_quadrature(s, r, eq.density())
        + v_avg
        + eq.potential().eval([s, 0.0, 0.0]);
    assert!((eq.zeta_statistic(&single) - quad).abs() < 1e-8);

    let mut last = 0.0;
    for k in 1..6 {
        let t = r * (1.0 + 0.3 * k as f64);
        let z = eq.zeta_statistic(&[[0.0, t, 0.0]]);
        assert!(z > last, "ζ not increasing at {t}");
        last = z;
    }
}

#[test]
fn field_pairing_with_the_equilibrium_measure_equals_the_zeta_statistic() {
    // ⟨Pμ_X, μ_V⟩ = ⟨ζ, μ_X⟩ at N = 4, everything on the left by quadrature.
    let eq = solve_quadratic_equilibrium(3).unwrap();
    let v = eq.potential();
    let r = eq.radius();
    let xs: Vec<Point3> = vec![
        [0.2 * r, 0.1 * r, -0.4 * r],
        [-0.6 * r, 0.3 * r, 0.2 * r],
        [1.4 * r, -0.2 * r, 0.5 * r],
        [0.0, 2.2 * r, 0.0],
    ];
    let n = xs.len() as f64;
    let v_avg = v_average_quadrature(r, eq.density(), eq.v_offset());
    let mut lhs = 0.0;
    for &x in &xs {
        lhs += ball_convolution_quadrature(norm(x), r, eq.density());
        lhs += v.eval(x); // ⟨V,μ_X⟩ term paired with ⟨1,μ_V⟩ = 1
    }
    lhs += n * v_avg; // N·V paired with μ_V
    let rhs = eq.zeta_statistic(&xs);
    assert!(
        (lhs - rhs).abs() < 1e-5,
        "⟨Pμ_X,μ_V⟩ = {lhs} vs ⟨ζ,μ_X⟩ = {rhs}"
    );
}

#[test]
fn sampled_points_land_uniformly_in_the_support() {
    let eq = solve_quadratic_equilibrium(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 20_000;
    let mut inside_half = 0usize;
    for _ in 0..n {
        let p = eq.sample(&mut rng);
        assert!(norm(p) <= eq.radius());
        if norm(p) <= eq.radius() * 0.5f64.powf(1.0 / 3.0) {
            inside_half = inside_half + 1;
        }
    }
    // radius scaled to enclose half the volume → half the draws
    let frac = inside_half as f64 / n as f64;
    assert!((frac - 0.5).abs() < 0.02, "fraction = {frac}");
}
