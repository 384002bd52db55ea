use susphom::fem::{MixedField, P2Space};
use susphom::forces::{
    ergodic_average, homogenized_force, surface_energy_micro, AmplitudeLaw, Profile, RandomCellField,
    SurfaceForceModel, Weight,
};
use susphom::geometry::{build_perforated_mesh, BoxDomain, InclusionShape};

#[test]
fn linear_profile_gives_constant_force() {
    let b = [0.3, -1.2];
    let m = SurfaceForceModel::new(Profile::Linear { b }, Weight::default(), AmplitudeLaw::default());
    let shape = InclusionShape::disk(0.1);
    let field = RandomCellField::new(11, m.law);
    let exact = m.homogenized_force_exact(&shape, [0.0, 0.0]);
    assert!((exact[0] + 1.12100 * 0.3).abs() < 1e-4 && (exact[1] - 1.12100 * 1.2).abs() < 1e-4);
    for z in [[0.0, 0.0], [2.0, -1.0], [-7.0, 3.0]] {
        let e = homogenized_force(&m, &shape, z, 4000, &field).unwrap();
        let d = (e.value[0] - exact[0]).hypot(e.value[1] - exact[1]);
        assert!(d <= 3.0 * e.half_width, "{d} {}", e.half_width);
    }
}

#[test]
fn zero_model_gives_zero_force() {
    let m = SurfaceForceModel::zero();
    let shape = InclusionShape::disk(0.1);
    let field = RandomCellField::new(1, m.law);
    let e = homogenized_force(&m, &shape, [0.4, 0.2], 10, &field).unwrap();
    assert_eq!(e.value, [0.0, 0.0]);
    assert!(homogenized_force(&m, &shape, [0.4, 0.2], 1, &field).is_err());
}

#[test]
fn sqrt1p_force_vanishes_at_rest_for_fourier_weights() {
    let w = Weight::Fourier {
        c0: 1.0,
        cos: vec![0.3, 0.1],
        sin: vec![-0.2],
    };
    let m = SurfaceForceModel::new(Profile::Sqrt1p, w, AmplitudeLaw::default());
    let field = RandomCellField::new(3, m.law);
    let e = homogenized_force(&m, &InclusionShape::disk(0.1), [0.0, 0.0], 50, &field).unwrap();
    assert_eq!(e.value, [0.0, 0.0]);
}

#[test]
fn amplitudes_are_stationary() {
    for law in [AmplitudeLaw::default(), AmplitudeLaw::LogNormal { mu_ln: -0.1, sigma_ln: 0.4 }] {
        let field = RandomCellField::new(2024, law);
        let m = 32;
        let samples: Vec<f64> = (0..m).flat_map(|j| (0..m).map(move |i| [i, j])).map(|k| field.amplitude(k)).collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        assert!((mean - law.mean()).abs() <= 4.0 * law.std() / (m as f64), "{law:?}: {mean}");
    }
}

#[test]
fn ergodic_average_of_constant_amplitude() {
    let law = AmplitudeLaw::default();
    let eps = 1.0 / 64.0;
    let passes = (0..20)
        .filter(|&s| {
            let field = RandomCellField::new(s, law);
            let v = ergodic_average(|_, a| a, |x| x, &BoxDomain::unit_square(), eps, &field);
            (v - 1.0).abs() <= 4.0 * law.std() * eps
        })
        .count();
    assert!(passes >= 19);
}

#[test]
fn deterministic_average_is_a_riemann_sum() {
    let field = RandomCellField::new(0, AmplitudeLaw::default());
    let h = |z: [f64; 2], _: f64| z[0] * z[0] + z[1];
    let u = |x: [f64; 2]| [x[0], x[1]];
    let exact = 1.0 / 3.0 + 0.5;
    let e1 = (ergodic_average(h, u, &BoxDomain::unit_square(), 1.0 / 8.0, &field) - exact).abs();
    let e2 = (ergodic_average(h, u, &BoxDomain::unit_square(), 1.0 / 16.0, &field) - exact).abs();
    assert!(e1 < 1.0 / 8.0 && e2 < 1.0 / 16.0 && e2 < e1);
}

#[test]
fn surface_energy_of_constant_field() {
    let b = [0.7, 0.2];
    let m = SurfaceForceModel::new(Profile::Linear { b }, Weight::default(), AmplitudeLaw::default());
    let field = RandomCellField::new(8, m.law);
    let eps = 0.125;
    let pm = build_perforated_mesh(&BoxDomain::unit_square(), &InclusionShape::disk(0.1), eps, 0.125).unwrap();
    let space = P2Space::new(&pm.mesh);
    let c = [1.5, -2.0];
    let v = MixedField::interpolate(&space, |_| c).velocity;
    let got = surface_energy_micro(&m, &field, &pm, &space, &v);
    let bc = b[0] * c[0] + b[1] * c[1];
    let expected: f64 = (0..pm.n_particles())
        .map(|p| eps * field.amplitude(pm.lattice[p]) * pm.mesh.particle_perimeter(p) * bc)
        .sum();
    assert!((got - expected).abs() < 1e-12 * expected.abs());
    let zero = vec![[0.0; 2]; space.n_nodes()];
    let s = SurfaceForceModel::new(Profile::Sqrt1p, Weight::default(), AmplitudeLaw::default());
    assert_eq!(surface_energy_micro(&s, &field, &pm, &space, &zero), 0.0);
}

#[test]
fn surface_energy_approaches_its_average() {
    let m = SurfaceForceModel::new(Profile::Sqrt1p, Weight::default(), AmplitudeLaw::default());
    let shape = InclusionShape::disk(0.1);
    let field = RandomCellField::new(17, m.law);
    let u = |x: [f64; 2]| [(3.0 * x[1]).sin(), x[0] * x[0]];
    // int_D E[a] |dT| rho(u) dx by tensor Gauss quadrature
    let (gx, gw) = susphom::quadrature::gauss_legendre(12);
    let mut limit = 0.0;
    for (xi, wi) in gx.iter().zip(&gw) {
        for (yj, wj) in gx.iter().zip(&gw) {
            let x = [0.5 * (xi + 1.0), 0.5 * (yj + 1.0)];
            limit += 0.25 * wi * wj * m.profile.value(u(x));
        }
    }
    limit *= m.expected_density(&shape);
    let gaps: Vec<f64> = [0.25, 0.125, 0.0625]
        .iter()
        .map(|&eps| {
            let pm = build_perforated_mesh(&BoxDomain::unit_square(), &shape, eps, 0.125).unwrap();
            let space = P2Space::new(&pm.mesh);
            let v = MixedField::interpolate(&space, u).velocity;
            (surface_energy_micro(&m, &field, &pm, &space, &v) - limit).abs()
        })
        .collect();
    // particle-free margins of width eps/2 leave an O(eps) boundary layer
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    assert!(gaps[2] < 0.1 * limit, "{gaps:?} {limit}");
}
