use std::sync::OnceLock;

use proptest::prelude::*;
use susphom::cell::{contract, deviatoric_basis, deviatoric_coords, effective_tensor, EffectiveTensor};
use susphom::forces::{
    ergodic_average, homogenized_force, AmplitudeLaw, ForceTable, Profile, RandomCellField, SurfaceForceModel, Weight,
};
use susphom::geometry::{build_cell_mesh, lattice_indices, BoxDomain, InclusionShape};

fn profiles() -> impl Strategy<Value = Profile> {
    prop_oneof![
        (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| Profile::Linear { b: [a, b] }),
        Just(Profile::Sqrt1p),
        (0.05..2.0f64).prop_map(|kappa| Profile::Huber { kappa }),
    ]
}

fn point() -> impl Strategy<Value = [f64; 2]> {
    (-5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y)| [x, y])
}

fn weight() -> impl Strategy<Value = Weight> {
    prop_oneof![
        (0.0..3.0f64).prop_map(|value| Weight::Constant { value }),
        (0.2..1.0f64, -0.1..0.1f64, -0.1..0.1f64).prop_map(|(c0, c, s)| Weight::Fourier {
            c0,
            cos: vec![c],
            sin: vec![s]
        }),
    ]
}

fn model() -> impl Strategy<Value = SurfaceForceModel> {
    (profiles(), weight()).prop_map(|(p, w)| SurfaceForceModel::new(p, w, AmplitudeLaw::default()))
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Indices `k` with `(k - 1/2)/n > lo` and `(k + 1/2)/n < hi` for `lo = p0/q`, `hi = p1/q`.
fn integer_enumeration(p0: i64, p1: i64, q: i64, n: i64, order: &[i64]) -> Vec<i64> {
    order
        .iter()
        .copied()
        .filter(|&k| q * (2 * k - 1) > 2 * p0 * n && q * (2 * k + 1) < 2 * p1 * n)
        .collect()
}

fn disk_tensor() -> &'static EffectiveTensor {
    static T: OnceLock<EffectiveTensor> = OnceLock::new();
    T.get_or_init(|| {
        let cell = build_cell_mesh(&InclusionShape::disk(0.1), 1.0 / 16.0).unwrap();
        effective_tensor(&cell, 1.0, 1e-10).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lattice_enumeration_ignores_scan_order(
        n in 2i64..24,
        q in prop::sample::select(vec![2i64, 4, 5, 8, 10]),
        p0 in -4i64..4,
        len in 1i64..12,
        seed in any::<u64>(),
    ) {
        let p1 = p0 + len;
        let domain = BoxDomain::new([p0 as f64 / q as f64; 2], [p1 as f64 / q as f64; 2]).unwrap();
        let eps = 1.0 / n as f64;
        let mut got = lattice_indices(&domain, eps).unwrap();
        got.sort();

        // scan candidate rows in a scrambled order
        let mut candidates: Vec<i64> = (-200..=200).collect();
        let mut s = seed;
        for i in (1..candidates.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            candidates.swap(i, (s >> 33) as usize % (i + 1));
        }
        let axis = integer_enumeration(p0, p1, q, n, &candidates);
        let mut expected: Vec<[i64; 2]> = axis.iter().flat_map(|&j| axis.iter().map(move |&i| [i, j])).collect();
        expected.sort();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn g_is_midpoint_convex(m in model(), s in 0.0..1.0f64, a in 0.0..3.0f64, z1 in point(), z2 in point()) {
        let mid = [0.5 * (z1[0] + z2[0]), 0.5 * (z1[1] + z2[1])];
        let lhs = m.g(s, mid, a);
        let rhs = 0.5 * (m.g(s, z1, a) + m.g(s, z2, a));
        prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn g_is_lipschitz(m in model(), s in 0.0..1.0f64, a in 0.0..3.0f64, z1 in point(), z2 in point()) {
        let d = (m.g(s, z1, a) - m.g(s, z2, a)).abs();
        let bound = a * m.weight.value(s) * m.profile.lipschitz() * norm([z1[0] - z2[0], z1[1] - z2[1]]);
        prop_assert!(d <= bound * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn grad_g_is_monotone(m in model(), s in 0.0..1.0f64, a in 0.0..3.0f64, z1 in point(), z2 in point()) {
        let (g1, g2) = (m.grad_g(s, z1, a), m.grad_g(s, z2, a));
        let ip = (g1[0] - g2[0]) * (z1[0] - z2[0]) + (g1[1] - g2[1]) * (z1[1] - z2[1]);
        prop_assert!(ip >= -1e-12);
    }

    #[test]
    fn grad_g_matches_central_differences(m in model(), s in 0.0..1.0f64, a in 0.1..3.0f64, z in point()) {
        if let Profile::Huber { kappa } = m.profile {
            // the kink of the second derivative at |z| = kappa is harmless, but stay off it
            prop_assume!((norm(z) - kappa).abs() > 1e-3);
        }
        let h = 1e-6;
        let g = m.grad_g(s, z, a);
        for c in 0..2 {
            let (mut zp, mut zm) = (z, z);
            zp[c] += h;
            zm[c] -= h;
            let fd = (m.g(s, zp, a) - m.g(s, zm, a)) / (2.0 * h);
            prop_assert!((fd - g[c]).abs() <= 1e-6 * (1.0 + g[c].abs()), "{} vs {}", fd, g[c]);
        }
    }

    #[test]
    fn homogenized_force_is_anti_monotone(m in model(), z1 in point(), z2 in point()) {
        let shape = InclusionShape::disk(0.1);
        let (f1, f2) = (m.homogenized_force_exact(&shape, z1), m.homogenized_force_exact(&shape, z2));
        let ip = (f1[0] - f2[0]) * (z1[0] - z2[0]) + (f1[1] - f2[1]) * (z1[1] - z2[1]);
        prop_assert!(ip <= 1e-12);
    }

    #[test]
    fn sampled_force_is_anti_monotone(p in profiles(), seed in any::<u64>(), z1 in point(), z2 in point()) {
        let m = SurfaceForceModel::new(p, Weight::default(), AmplitudeLaw::default());
        let shape = InclusionShape::disk(0.1);
        let field = RandomCellField::new(seed, m.law);
        let f1 = homogenized_force(&m, &shape, z1, 16, &field).unwrap().value;
        let f2 = homogenized_force(&m, &shape, z2, 16, &field).unwrap().value;
        let ip = (f1[0] - f2[0]) * (z1[0] - z2[0]) + (f1[1] - f2[1]) * (z1[1] - z2[1]);
        prop_assert!(ip <= 1e-12);
    }

    #[test]
    fn amplitudes_are_reproducible(seed in any::<u64>(), k in (-1000i64..1000, -1000i64..1000), lognormal in any::<bool>()) {
        let law = if lognormal {
            AmplitudeLaw::LogNormal { mu_ln: 0.0, sigma_ln: 0.5 }
        } else {
            AmplitudeLaw::default()
        };
        let a = RandomCellField::new(seed, law).amplitude([k.0, k.1]);
        let b = RandomCellField::new(seed, law).amplitude([k.0, k.1]);
        prop_assert_eq!(a.to_bits(), b.to_bits());
        if !lognormal {
            prop_assert!((0.5..1.5).contains(&a));
        }
    }

    #[test]
    fn shift_is_a_group_action(seed in any::<u64>(), k in (-50i64..50, -50i64..50), l in (-50i64..50, -50i64..50), m in (-50i64..50, -50i64..50)) {
        let f = RandomCellField::new(seed, AmplitudeLaw::default());
        let k = [k.0, k.1];
        prop_assert_eq!(f.shifted([l.0, l.1]).amplitude(k), f.amplitude([k[0] + l.0, k[1] + l.1]));
        prop_assert_eq!(
            f.shifted([l.0, l.1]).shifted([m.0, m.1]).amplitude(k),
            f.shifted([l.0 + m.0, l.1 + m.1]).amplitude(k)
        );
        prop_assert_eq!(f.shifted([0, 0]).amplitude(k), f.amplitude(k));
    }

    #[test]
    fn ergodic_average_of_zero_is_zero(seed in any::<u64>(), n in 2usize..20) {
        let field = RandomCellField::new(seed, AmplitudeLaw::default());
        let v = ergodic_average(|_, _| 0.0, |x| x, &BoxDomain::unit_square(), 1.0 / n as f64, &field);
        prop_assert_eq!(v, 0.0);
    }

    #[test]
    fn force_table_reproduces_affine_maps(c in (-3.0..3.0f64, -3.0..3.0f64), b in (-2.0..2.0f64, -2.0..2.0f64), z in (-0.9..0.9f64, -0.9..0.9f64)) {
        let f = |z: [f64; 2]| [c.0 + b.0 * z[0] - b.1 * z[1], c.1 + b.1 * z[0] + b.0 * z[1]];
        let t = ForceTable::build(f, 1.0, 8);
        let got = t.eval([z.0, z.1]);
        let want = f([z.0, z.1]);
        prop_assert!((got[0] - want[0]).abs() < 1e-12 && (got[1] - want[1]).abs() < 1e-12);
    }

    #[test]
    fn deviatoric_coordinates_round_trip(x in -5.0..5.0f64, y in -5.0..5.0f64) {
        let b = deviatoric_basis();
        let mut a = [[0.0; 2]; 2];
        for r in 0..2 {
            for s in 0..2 {
                a[r][s] = x * b[0][r][s] + y * b[1][r][s];
            }
        }
        let c = deviatoric_coords(&a);
        prop_assert!((c[0] - x).abs() < 1e-14 && (c[1] - y).abs() < 1e-14);
        prop_assert!((contract(&a, &a) - (x * x + y * y)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn effective_form_is_symmetric_and_dominates(x in (-1.0..1.0f64, -1.0..1.0f64), y in (-1.0..1.0f64, -1.0..1.0f64)) {
        let t = disk_tensor();
        let b = deviatoric_basis();
        let mk = |c: (f64, f64)| {
            let mut a = [[0.0; 2]; 2];
            for r in 0..2 {
                for s in 0..2 {
                    a[r][s] = c.0 * b[0][r][s] + c.1 * b[1][r][s];
                }
            }
            a
        };
        let (a, bb) = (mk(x), mk(y));
        let (ab, ba) = (t.c_form(&a, &bb), t.c_form(&bb, &a));
        let scale = contract(&a, &a).sqrt() * contract(&bb, &bb).sqrt();
        prop_assert!((ab - ba).abs() <= 1e-8 * scale.max(1e-300));
        prop_assert!(t.c_form(&a, &a) >= -1e-10 * (t.c_matrix[0][0] + t.c_matrix[1][1]));
        let ma = t.apply(&a).unwrap();
        prop_assert!(contract(&ma, &a) >= t.mu * contract(&a, &a) - 1e-14);
    }
}
