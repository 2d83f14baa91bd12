use hqip::fock::{moments, unitary_from_generator, FockDensity, FockSpace, FockState, ModeOperator};
use hqip::gaussian::{symplectic_form, GaussianOp, GaussianState, SymplecticTransform};
use hqip::measurement::{homodyne_project, photon_count_project, QuadratureGrid};
use hqip::metrics::{fidelity, qubit_population, trace_distance, QubitSubspace};
use hqip::teleport::{apply_loss, teleport_dv};
use hqip::C64;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use std::f64::consts::PI;

fn amplitudes(dim: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dim).prop_filter_map("zero vector", |v| {
        let n: f64 = v.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
        (n > 1e-3).then(|| v.iter().map(|&(a, b)| C64::new(a / n, b / n)).collect())
    })
}

fn pure_state(modes: usize, cutoff: usize) -> impl Strategy<Value = FockState> {
    let space = FockSpace::new(modes, cutoff).unwrap();
    amplitudes(space.dim()).prop_map(move |a| FockState::from_amplitudes(space, a).unwrap())
}

fn mixed_state(modes: usize, cutoff: usize) -> impl Strategy<Value = FockDensity> {
    let space = FockSpace::new(modes, cutoff).unwrap();
    (prop::collection::vec(pure_state(modes, cutoff), 1..4), prop::collection::vec(0.05..1.0f64, 3)).prop_map(move |(states, w)| {
        let total: f64 = w[..states.len()].iter().sum();
        let mut m = DMatrix::zeros(space.dim(), space.dim());
        for (s, &p) in states.iter().zip(&w) {
            m += s.to_density().matrix() * C64::new(p / total, 0.0);
        }
        FockDensity::from_matrix(space, m).unwrap()
    })
}

fn gaussian_op(modes: usize, r_max: f64, d_max: f64) -> BoxedStrategy<GaussianOp> {
    let mode = 0..modes;
    let single = prop_oneof![
        (mode.clone(), 0.0..r_max, 0.0..2.0 * PI).prop_map(|(mode, r, phi)| GaussianOp::Squeeze { mode, r, phi }),
        (mode.clone(), -PI..PI).prop_map(|(mode, theta)| GaussianOp::Phase { mode, theta }),
        (mode.clone(), -d_max..d_max, -d_max..d_max).prop_map(|(mode, re, im)| GaussianOp::Displace { mode, re, im }),
        (mode.clone(), -0.5..0.5f64).prop_map(|(mode, sigma)| GaussianOp::Shear { mode, sigma }),
        mode.clone().prop_map(|mode| GaussianOp::Fourier { mode }),
    ];
    if modes < 2 {
        return single.boxed();
    }
    let pair = (0..modes, 1..modes).prop_map(move |(a, k)| (a, (a + k) % modes));
    prop_oneof![
        single,
        (pair.clone(), 0.0..1.0f64).prop_map(|((m1, m2), t)| GaussianOp::BeamSplit { m1, m2, t }),
        (pair.clone(), 0.0..r_max / 2.0).prop_map(|((m1, m2), r)| GaussianOp::TwoModeSqueeze { m1, m2, r }),
        (pair, -0.5..0.5f64).prop_map(|((m1, m2), g)| GaussianOp::ControlledPhase { m1, m2, g }),
    ]
    .boxed()
}

fn circuit(r_max: f64, d_max: f64) -> impl Strategy<Value = (usize, Vec<GaussianOp>)> {
    (1..=3usize).prop_flat_map(move |m| (Just(m), prop::collection::vec(gaussian_op(m, r_max, d_max), 1..=6)))
}

fn run_fock(modes: usize, cutoff: usize, ops: &[GaussianOp]) -> FockState {
    let space = FockSpace::new(modes, cutoff).unwrap();
    ops.iter().fold(FockState::vacuum(space), |s, op| op.to_fock(space).unwrap().apply_state(&s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fuchs_van_de_graaf_ordering(a in pure_state(2, 3), b in pure_state(2, 3)) {
        let f = fidelity(&a, &b).unwrap();
        let d = trace_distance(&a, &b).unwrap();
        prop_assert!(1.0 - f.sqrt() <= d + 1e-8, "F={f} D={d}");
        prop_assert!(d <= (1.0 - f).max(0.0).sqrt() + 1e-8, "F={f} D={d}");
    }

    #[test]
    fn symplectic_maps_preserve_the_form((modes, ops) in circuit(1.2, 1.0)) {
        let t = SymplecticTransform::from_ops(modes, &ops).unwrap();
        let o = symplectic_form(modes);
        prop_assert!((&t.s * &o * t.s.transpose() - &o).amax() < 1e-10);
        prop_assert!(t.symplectic_error() < 1e-10);
    }

    #[test]
    fn pure_inputs_stay_pure((modes, ops) in circuit(1.2, 1.0), re in -1.0..1.0f64, im in -1.0..1.0f64) {
        let mut input = GaussianState::coherent(C64::new(re, im));
        for _ in 1..modes {
            input = input.tensor(&GaussianState::vacuum(1));
        }
        let out = input.evolve_all(&ops).unwrap();
        prop_assert!(((out.cov() * 2.0).determinant() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn dual_rail_sectors_partition_unity(rho in mixed_state(2, 4)) {
        let space = rho.space();
        let vacuum = rho.element(&[0, 0], &[0, 0]).unwrap().re;
        let higher: f64 = (0..space.dim()).filter(|&i| space.digits(i).iter().sum::<usize>() >= 2).map(|i| rho.matrix()[(i, i)].re).sum();
        let q = qubit_population(&rho, &QubitSubspace::dual_rail()).unwrap();
        prop_assert!((q + vacuum + higher - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_photon_teleport_succeeds_a_quarter_of_the_time(a in amplitudes(2)) {
        let out = teleport_dv(a[0], a[1]).unwrap();
        prop_assert!((out.probability - 0.25).abs() < 1e-10);
        prop_assert!((out.fidelity - 1.0).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn backends_agree_below_leakage_bound((modes, ops) in circuit(1.2, 0.4)) {
        let fock = run_fock(modes, 20, &ops);
        // the top level alone misses parity-structured tails, so the weight
        // the gates dropped past the cutoff is bounded as well
        prop_assume!(fock.leakage() < 1e-8 && 1.0 - fock.norm_sqr() < 1e-8);
        let m = moments(&fock).unwrap();
        let g = GaussianState::vacuum(modes).evolve_all(&ops).unwrap();
        prop_assert!((&m.mean - g.mean()).amax() < 1e-6, "{} vs {}", m.mean, g.mean());
        prop_assert!((&m.cov - g.cov()).amax() < 1e-6, "{} vs {}", m.cov, g.cov());
    }

    #[test]
    fn photon_count_probabilities_sum_to_one(psi in pure_state(2, 5), mode in 0..2usize) {
        let total: f64 = (0..5).map(|n| photon_count_project(&psi, mode, n).unwrap().density).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn homodyne_densities_integrate_to_one(psi in pure_state(2, 5), theta in 0.0..PI) {
        let grid = QuadratureGrid::new(8.0, 256).unwrap();
        let values = grid.values();
        let densities: Vec<f64> = values.iter().map(|&x| homodyne_project(&psi, 0, theta, x, &grid).unwrap().density).collect();
        prop_assert!(densities.iter().all(|&d| d >= -1e-12));
        let total: f64 = densities.iter().sum::<f64>() * grid.spacing();
        prop_assert!((total - 1.0).abs() < 1e-4, "{total}");
    }

    #[test]
    fn generated_unitaries_are_unitary(h in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 36), t in -2.0..2.0f64) {
        let m = DMatrix::from_fn(6, 6, |i, j| C64::new(h[6 * i + j].0, h[6 * i + j].1));
        let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let space = FockSpace::new(1, 6).unwrap();
        let u = unitary_from_generator(&ModeOperator::local(space, &[0], herm).unwrap(), t).unwrap();
        prop_assert!(u.unitarity_error() < 1e-8);
    }

    #[test]
    fn loss_keeps_densities_physical(rho in mixed_state(2, 4), eta in 0.0..1.0f64) {
        let out = apply_loss(&rho, eta).unwrap();
        prop_assert!(out.validate(1e-10).is_ok());
    }

    #[test]
    fn conditioning_mixes_back_to_marginal((_, ops) in circuit(1.2, 1.0).prop_filter("two modes", |(m, _)| *m == 2), theta in 0.0..PI) {
        let state = GaussianState::vacuum(2).evolve_all(&ops).unwrap();
        let grid = QuadratureGrid::covering(state.cov().amax().sqrt() * 4.0, 4096).unwrap();
        let mut w = 0.0;
        let mut mean = DVector::zeros(2);
        let mut second = DMatrix::zeros(2, 2);
        for q in grid.values() {
            let (cond, density) = state.condition_homodyne(0, theta, q + state.mean()[0] * theta.cos() + state.mean()[1] * theta.sin()).unwrap();
            w += density;
            mean += cond.mean() * density;
            second += (cond.cov() + cond.mean() * cond.mean().transpose()) * density;
        }
        let h = grid.spacing();
        let (w, mean, second) = (w * h, mean * h, second * h);
        let target = state.reduce(&[1]).unwrap();
        prop_assert!((w - 1.0).abs() < 1e-4);
        prop_assert!((&mean - target.mean()).amax() < 1e-4);
        prop_assert!((second - &mean * mean.transpose() - target.cov()).amax() < 1e-4);
    }
}

