use proptest::prelude::*;
use vemflux::adapt::mark;
use vemflux::mesh::samples::random_polygons;
use vemflux::mesh::PolygonalMesh;
use vemflux::mixed::FluxElement;
use vemflux::verify::projector_defects;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn marking_is_monotone_in_theta(eta in prop::collection::vec(0.0f64..10.0, 1..60), a in 0.05f64..3.0, b in 0.05f64..3.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let strict = mark(&eta, hi);
        let loose = mark(&eta, lo);
        prop_assert!(strict.iter().all(|k| loose.contains(k)));
        let mean = eta.iter().sum::<f64>() / eta.len() as f64;
        prop_assert!(strict.iter().all(|&k| eta[k] > hi * mean));
    }

    #[test]
    fn refinement_preserves_area_and_round_trips(n in 1usize..4, picks in prop::collection::vec(0usize..64, 1..6)) {
        let mesh = PolygonalMesh::lshape(n);
        let mut marked: Vec<usize> = picks.iter().map(|k| k % mesh.n_cells()).collect();
        marked.sort_unstable();
        marked.dedup();
        let (fine, _) = mesh.refine(&marked).unwrap();
        prop_assert!((fine.total_area() - mesh.total_area()).abs() < 1e-12);
        prop_assert_eq!(fine.n_cells(), mesh.n_cells() + 3 * marked.len());
        let back = PolygonalMesh::from_json(&fine.to_json()).unwrap();
        prop_assert_eq!(back.n_cells(), fine.n_cells());
        prop_assert!((back.total_area() - fine.total_area()).abs() < 1e-14);
    }

    #[test]
    fn projectors_reproduce_polynomials(seed in any::<u64>()) {
        let d = projector_defects(seed, 4, 1..=3).unwrap();
        prop_assert!(d.pi_nabla < 1e-10 && d.pi0 < 1e-10 && d.vector_pi0 < 1e-10 && d.divergence < 1e-10, "{:?}", d);
    }

    #[test]
    fn flux_mass_is_spd(seed in any::<u64>(), q in 0usize..4) {
        for poly in random_polygons(seed, 4) {
            let el = FluxElement::new(0, &poly, q).unwrap();
            prop_assert!(el.mass.clone().symmetric_eigen().eigenvalues.min() > 0.0);
        }
    }
}
