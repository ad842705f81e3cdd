//! Cross-construction consistency checks: constructions that must agree
//! pointwise, degenerate inputs that must be flagged, and the verifier's
//! refusal to bless non-conjugate structures.

use gaussrank::classify::verify_conjugate_structure;
use gaussrank::config::{random_point, rng_stream, RunConfig, Tolerances};
use gaussrank::error::Error;
use gaussrank::expr::Expr;
use gaussrank::frames::DirectionField;
use gaussrank::gauss::gauss_rank;
use gaussrank::jets::C;
use gaussrank::suite::curated_suite;
use gaussrank::variety::{random_surface, Variety};
use nalgebra::DVector;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

fn twisted_cubic() -> Variety {
    let t = Expr::param(0);
    Variety::from_polynomials(
        "twisted_cubic",
        1,
        3,
        vec![Expr::one(), t.clone(), Expr::pow(&t, 2), Expr::pow(&t, 3)],
    )
    .unwrap()
}

#[test]
fn line_union_of_tangent_field_matches_tangential_variety() {
    // The union of tangent lines along the unit tangent field of a curve
    // is its tangential variety: sampled points of each lie on the other.
    let y = twisted_cubic();
    let union = Variety::line_union(&y, DirectionField::User(vec![Expr::one()]), 1, &tol()).unwrap();
    let tau = Variety::tangential_variety(&y).unwrap();
    let mut rng = rng_stream(2, 0);
    for i in 0..5u64 {
        let u = random_point(&mut rng, 2);
        let p_union = union.values(&u).unwrap();
        let (_, d) = tau.nearest_point(&p_union, 100 + i, &tol()).unwrap();
        assert!(d < 1e-8, "union point off the tangential variety by {d:.3e}");
        let p_tau = tau.values(&u).unwrap();
        let (_, d) = union.nearest_point(&p_tau, 200 + i, &tol()).unwrap();
        assert!(d < 1e-8, "tangential point off the union by {d:.3e}");
    }
}

#[test]
fn plane_band_with_second_derivative_vector_is_the_osculating_variety() {
    let y = twisted_cubic();
    let coords = y.dag_coords().unwrap().to_vec();
    let g: Vec<Expr> = coords.iter().map(|e| e.diff(0).diff(0)).collect();
    let mut rng = rng_stream(3, 0);
    let band = Variety::plane_band(&y, &g, &mut rng, &tol()).unwrap();
    let osc = Variety::osculating_variety(&y, 2).unwrap();
    for _ in 0..5 {
        let u = random_point(&mut rng, 3);
        let a = band.values(&u).unwrap();
        let b = osc.values(&u).unwrap();
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn tangential_of_generic_surface_in_p5_has_degenerate_gauss_map() {
    let mut rng = rng_stream(4, 0);
    let y = random_surface("y", 5, 3, &mut rng).unwrap();
    let tau = Variety::tangential_variety(&y).unwrap();
    assert_eq!(tau.n(), 4);
    let a = gauss_rank(&tau, 11, 8, &tol()).unwrap();
    assert!(a.f >= 1, "tangential varieties have f >= 1, measured {}", a.f);
}

#[test]
fn hyperband_over_surface_in_p5_has_degenerate_gauss_map() {
    let mut rng = rng_stream(5, 0);
    let y = random_surface("y", 5, 2, &mut rng).unwrap();
    let frame: Vec<Vec<Expr>> = (0..2)
        .map(|_| {
            (0..6)
                .map(|_| {
                    Expr::add(
                        &Expr::constant(gaussrank::config::random_unit_complex(&mut rng)),
                        &Expr::scale(
                            gaussrank::config::random_unit_complex(&mut rng),
                            &Expr::param(0),
                        ),
                    )
                })
                .collect()
        })
        .collect();
    let x = Variety::hyperband(&y, &frame, &mut rng, &tol()).unwrap();
    assert_eq!(x.n(), 4, "hyperband over a surface in P^5 is a hypersurface");
    let a = gauss_rank(&x, 13, 8, &tol()).unwrap();
    assert!(a.f >= 1, "hyperbands have f >= 1, measured {}", a.f);
}

#[test]
fn double_dual_points_lie_on_the_original_surface() {
    let mut rng = rng_stream(6, 0);
    let s = random_surface("s", 4, 2, &mut rng).unwrap();
    let dual = Variety::dual_variety(&s, &mut rng, &tol()).unwrap();
    assert_eq!(dual.n(), 3);
    let double = Variety::dual_variety(&dual, &mut rng, &tol()).unwrap();
    // The bidual of a hypersurface-dimensional input has no spanning
    // block: a pure map y -> annihilating covector.
    assert_eq!(double.n(), 3);
    for i in 0..5u64 {
        let y = random_point(&mut rng, 3);
        let Ok(z) = double.values(&y) else { continue };
        let (_, d) = s.nearest_point(&z, 300 + i, &tol()).unwrap();
        assert!(d < 1e-6, "double-dual point misses the surface by {d:.3e}");
    }
}

#[test]
fn dual_of_a_linear_plane_is_flagged_non_immersive() {
    let plane = Variety::from_polynomials(
        "plane_p4",
        2,
        4,
        vec![
            Expr::one(),
            Expr::param(0),
            Expr::param(1),
            Expr::zero(),
            Expr::zero(),
        ],
    )
    .unwrap();
    let mut rng = rng_stream(7, 0);
    // The annihilator family is constant in y, so the dual is a line of
    // hyperplanes: the construction succeeds but the parametrization is
    // rank deficient.
    let dual = Variety::dual_variety(&plane, &mut rng, &tol()).unwrap();
    assert!(matches!(
        dual.sample_generic(&mut rng, &tol()),
        Err(Error::NonGeneric { .. })
    ));
}

#[test]
fn line_union_along_a_ruling_collapses_to_the_quadric() {
    // Lines in the ruling direction of (1, s, t, st) lie inside the
    // quadric, so the union adds nothing and the map is non-immersive.
    let s = Expr::param(0);
    let t = Expr::param(1);
    let quadric = Variety::from_polynomials(
        "ruled_quadric",
        2,
        3,
        vec![Expr::one(), s.clone(), t.clone(), Expr::mul(&s, &t)],
    )
    .unwrap();
    let field = DirectionField::User(vec![Expr::one(), Expr::zero()]);
    let union = Variety::line_union(&quadric, field, 1, &tol()).unwrap();
    let mut rng = rng_stream(8, 0);
    assert!(matches!(
        union.sample_generic(&mut rng, &tol()),
        Err(Error::NonGeneric { .. })
    ));
}

#[test]
fn cone_with_vertex_on_the_base_degenerates_to_a_plane() {
    let t = Expr::param(0);
    let conic = Variety::from_polynomials(
        "conic_p3",
        1,
        3,
        vec![Expr::one(), t.clone(), Expr::pow(&t, 2), Expr::zero()],
    )
    .unwrap();
    // Vertex at the t = 1 point of the conic: every secant line through it
    // stays inside the conic's plane.
    let vertex = DVector::from_column_slice(&[c(1.0), c(1.0), c(1.0), c(0.0)]);
    let cone = Variety::cone(&conic, std::slice::from_ref(&vertex)).unwrap();
    let a = gauss_rank(&cone, 9, 8, &tol()).unwrap();
    assert_eq!((a.r, a.f), (0, 2), "the degenerate cone is a linear plane");
}

#[test]
fn secant_of_the_quartic_normal_curve_is_a_degenerate_hypersurface() {
    let t = Expr::param(0);
    let rnc4 = Variety::from_polynomials(
        "rnc4",
        1,
        4,
        vec![
            Expr::one(),
            t.clone(),
            Expr::pow(&t, 2),
            Expr::pow(&t, 3),
            Expr::pow(&t, 4),
        ],
    )
    .unwrap();
    let sec = Variety::secant_variety(&rnc4, 2).unwrap();
    let mut rng = rng_stream(10, 0);
    assert_eq!(sec.effective_dimension(&mut rng, &tol()).unwrap(), 3);
    let a = gauss_rank(&sec, 15, 8, &tol()).unwrap();
    assert!(a.f >= 1);
}

#[test]
fn verifier_rejects_joins_and_cones() {
    let cfg = RunConfig::with_seed(0);
    let join_entry = curated_suite()
        .into_iter()
        .find(|e| e.name == "join_two_curves_p4")
        .unwrap();
    let join = (join_entry.build)(0, &cfg.tol).unwrap();
    assert!(
        matches!(
            verify_conjugate_structure(&join, 0, &cfg),
            Err(Error::ConjugatePrecondition { .. })
        ),
        "join foci sweep curves, not hypersurface-dimensional components"
    );

    let cone_entry = curated_suite()
        .into_iter()
        .find(|e| e.name == "cone_over_surface_p4")
        .unwrap();
    let cone = (cone_entry.build)(0, &cfg.tol).unwrap();
    assert!(
        matches!(
            verify_conjugate_structure(&cone, 0, &cfg),
            Err(Error::ConjugatePrecondition { .. })
        ),
        "a cone has a single (double) focal component"
    );
}
