use std::f64::consts::PI;

use proptest::prelude::*;

use elastic_lens::analysis::{neumann_to_cauchy, pick_series, traction_from_cauchy, FlatSurface, ModeProjector, PickConfig, SurfaceGeometry};
use elastic_lens::inversion::{forward_travel_times, herglotz_invert, ray_parameter_fan};
use elastic_lens::model::{Domain, Grid2D, GridField, GridInterp, ScalarField};
use elastic_lens::ray::{scattering_relation, BoundaryDirection, LensStatus, RayConfig};
use elastic_lens::sim::{Ricker, VectorField};
use elastic_lens::vecn;

/// Entry angles kept off the normal for radial speeds, whose gradient jumps
/// at the centre.
fn off_centre() -> impl Strategy<Value = f64> {
    (0.1f64..1.3, any::<bool>()).prop_map(|(a, neg)| if neg { -a } else { a })
}

fn disk_entry(phi: f64, angle: f64) -> BoundaryDirection<2> {
    let x = [phi.cos(), phi.sin()];
    let n = [-x[0], -x[1]];
    let (s, c) = angle.sin_cos();
    BoundaryDirection::new(x, [c * n[0] - s * n[1], s * n[0] + c * n[1]])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constant_speed_rays_are_chords(phi in 0.0..2.0 * PI, angle in -1.4f64..1.4, c in 0.3f64..3.0) {
        let entry = disk_entry(phi, angle);
        let rec = scattering_relation(&ScalarField::constant(c), &Domain::disk(1.0), &entry, &RayConfig::new(1e-3, 20.0)).unwrap();
        let chord = -2.0 * vecn::dot(&entry.x, &entry.v);
        let exit = rec.exit.unwrap();
        prop_assert!(vecn::dist(&exit.x, &vecn::axpy(&entry.x, chord, &entry.v)) < 1e-9);
        prop_assert!(vecn::dist(&exit.v, &entry.v) < 1e-9);
        prop_assert!((rec.ell.unwrap() - chord / c).abs() < 1e-9);
    }

    #[test]
    fn reversed_exit_retraces_the_ray(phi in 0.0..2.0 * PI, angle in off_centre()) {
        let speed = ScalarField::radial_affine(2.0, -1.0);
        let cfg = RayConfig::new(1e-3, 20.0);
        let dom = Domain::disk(1.0);
        let fwd = scattering_relation(&speed, &dom, &disk_entry(phi, angle), &cfg).unwrap();
        let back = scattering_relation(&speed, &dom, &fwd.exit.unwrap().reversed(), &cfg).unwrap();
        prop_assert!(vecn::dist(&back.exit.unwrap().x, &fwd.entry.x) < 1e-7);
        prop_assert!((back.ell.unwrap() - fwd.ell.unwrap()).abs() < 1e-7);
    }

    #[test]
    fn scaling_the_speed_divides_travel_time(phi in 0.0..2.0 * PI, angle in off_centre(), k in 0.5f64..4.0) {
        let speed = ScalarField::radial_affine(2.0, -1.0);
        let cfg = RayConfig::new(1e-3, 40.0);
        let dom = Domain::disk(1.0);
        let entry = disk_entry(phi, angle);
        let a = scattering_relation(&speed, &dom, &entry, &cfg).unwrap();
        let b = scattering_relation(&speed.scaled(k), &dom, &entry, &cfg).unwrap();
        prop_assert_eq!(a.status, LensStatus::Exited);
        prop_assert!(vecn::dist(&a.exit.unwrap().x, &b.exit.unwrap().x) < 1e-7);
        prop_assert!((a.ell.unwrap() / k - b.ell.unwrap()).abs() < 1e-7);
    }

    #[test]
    fn hamiltonian_stays_on_the_cosphere(phi in 0.0..2.0 * PI, angle in off_centre()) {
        let rec = scattering_relation(
            &ScalarField::radial_affine(2.0, -1.0),
            &Domain::disk(1.0),
            &disk_entry(phi, angle),
            &RayConfig::new(1e-3, 20.0),
        )
        .unwrap();
        prop_assert!(rec.max_h_drift / rec.ell.unwrap() <= 1e-8, "{}", rec.max_h_drift);
    }

    #[test]
    fn box_boundary_parameter_round_trips(s in 0.0f64..5.2, w in 0.5f64..2.0) {
        let dom = Domain::new_box([0.0, 0.0], [w, 1.6]);
        let per = dom.perimeter().unwrap();
        let s = s * per / 5.2;
        let x = dom.boundary_point(s).unwrap();
        let back = dom.boundary_param(&x).unwrap();
        let d = (back - s).abs();
        prop_assert!(d < 1e-12 || (d - per).abs() < 1e-12, "{s} -> {x:?} -> {back}");
    }

    #[test]
    fn grid_interpolants_reproduce_nodes(seed in proptest::collection::vec(0.5f64..2.0, 100), i in 0usize..10, j in 0usize..10) {
        let grid = Grid2D::new([0.0, 0.0], 0.1, 10, 10).unwrap();
        for interp in [GridInterp::Bilinear, GridInterp::Bicubic] {
            let f = GridField::new(grid, seed.clone(), interp).unwrap();
            let field = ScalarField::Grid(f);
            let v = field.eval(&grid.node(i, j));
            if let Ok(v) = v {
                prop_assert!((v - seed[j * 10 + i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn neumann_and_cauchy_data_are_inverse(
        a in proptest::array::uniform4(-2.0f64..2.0),
        b in proptest::array::uniform2(-2.0f64..2.0),
        lambda in 0.1f64..3.0,
        mu in 0.1f64..3.0,
    ) {
        // u = (a0 x + a1 y + b0 y², a2 x + a3 y + b1 x²) on y = 0, normal -e_y
        let n = 9;
        let h = 0.125;
        let g = SurfaceGeometry::Flat(FlatSurface { axis: 1, sign: -1.0, h, shape: vec![n] });
        let u: Vec<[f64; 2]> = (0..n).map(|i| { let x = i as f64 * h; [a[0] * x, a[2] * x + b[1] * x * x] }).collect();
        let du = vec![[a[1], a[3]]; n];
        let tr = traction_from_cauchy::<2>(&g, &u, &du, &vec![lambda; n], &vec![mu; n]).unwrap();
        let back = neumann_to_cauchy::<2>(&g, &u, &tr, &vec![lambda; n], &vec![mu; n]).unwrap();
        for d in back {
            prop_assert!((d[0] - a[1]).abs() < 1e-11 && (d[1] - a[3]).abs() < 1e-11, "{d:?}");
        }
    }

    #[test]
    fn delayed_wavelet_delays_the_pick(shift in 0usize..400, f0 in 10.0f64..30.0) {
        let dt = 1e-3;
        let pulse = Ricker::new(f0);
        let trace = |k0: usize| -> Vec<f64> { (0..2000).map(|k| if k < k0 { 0.0 } else { pulse.value((k - k0) as f64 * dt) }).collect() };
        let cfg = PickConfig::new(f0, 0.05);
        let a = pick_series(&[trace(100)], dt, &cfg).unwrap().unwrap();
        let b = pick_series(&[trace(100 + shift)], dt, &cfg).unwrap().unwrap();
        prop_assert!((b.time - a.time - shift as f64 * dt).abs() < 1e-9, "{} {}", a.time, b.time);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn mode_parts_sum_to_the_field(kx in 1i32..4, ky in 1i32..4, pa in -1.0f64..1.0, pb in -1.0f64..1.0) {
        let grid = Grid2D::new([0.0, 0.0], 1.0 / 23.0, 24, 24).unwrap();
        let pr = ModeProjector::new(grid).unwrap();
        let k = [2.0 * PI * kx as f64, 2.0 * PI * ky as f64];
        let u = VectorField::from_fn(grid, |x| {
            let s = (k[0] * x[0] + k[1] * x[1]).sin();
            [pa * s + pb * x[1], pb * s - pa * x[0] * x[1]]
        });
        let m = pr.project(&u).unwrap();
        prop_assert!(m.p_part.add(&m.s_part).unwrap().sub(&u).unwrap().l2() <= 1e-10 * u.l2());
        let again = pr.project(&m.p_part).unwrap();
        prop_assert!(again.p_part.sub(&m.p_part).unwrap().l2() <= 1e-9 * m.p_part.l2().max(1e-300));
    }

    #[test]
    fn herglotz_recovers_affine_profiles(a in 1.5f64..3.0, b in 0.2f64..1.0) {
        // c = a − b r satisfies d(r/c)/dr = a / c² > 0
        let speed = ScalarField::radial_affine(a, -b);
        let params = ray_parameter_fan(&speed, 1.0, 48).unwrap();
        let curve = forward_travel_times(&speed, 1.0, &params, &RayConfig::new(1e-3, 4.0)).unwrap();
        let prof = herglotz_invert(&curve, 1.0).unwrap();
        for n in &prof.nodes {
            let c = a - b * n[0];
            prop_assert!((n[1] - c).abs() / c < 0.01, "{n:?} vs {c}");
        }
    }
}
