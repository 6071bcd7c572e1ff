mod common;

use common::{taylor_expm, Lcg};
use usc_transfer::Complex64 as C64;
use usc_transfer::{
    basis_state, excitation_operator, parity_operator, propagate, propagate_piecewise, GaussianPair, Method,
    Model, ModelParams, PiecewiseConstantSchedule, PropagationOptions, PulseSchedule,
};

#[test]
fn identical_bins_compose_like_one_long_bin() {
    let p = ModelParams::resonant(0.005, 3).unwrap();
    let psi0 = basis_state(0, 0, 1, &p).unwrap();
    let many = PiecewiseConstantSchedule::constant(0.0, 12.0, 8, 0.21, 0.13, (0.0, 0.3)).unwrap();
    let one = PiecewiseConstantSchedule::constant(0.0, 12.0, 1, 0.21, 0.13, (0.0, 0.3)).unwrap();
    let opts = PropagationOptions::default();
    let (a, _) = propagate_piecewise(&psi0, &many, &p, &opts).unwrap();
    let (b, _) = propagate_piecewise(&psi0, &one, &p, &opts).unwrap();
    for (x, y) in a.final_state.as_slice().iter().zip(b.final_state.as_slice()) {
        assert!((x - y).norm() < 1e-10);
    }
}

#[test]
fn piecewise_chain_matches_taylor_oracle() {
    let p = ModelParams::resonant(0.005, 3).unwrap();
    let psi0 = basis_state(0, 0, 1, &p).unwrap();
    let sched = Lcg(11).schedule(6, 25.0, 0.3);
    for model in [Model::Rabi, Model::Rwa] {
        let opts = PropagationOptions::default().with_model(model);
        let (traj, props) = propagate_piecewise(&psi0, &sched, &p, &opts).unwrap();
        let gen = usc_transfer::Generator::new(&p, model).unwrap();
        let mut psi = psi0.amplitudes().clone();
        for (k, prop) in props.iter().enumerate() {
            let (g1, g2) = sched.bin(k);
            let u = taylor_expm(&(gen.dense(g1, g2).matrix() * C64::new(0.0, -sched.dt())));
            let err = (&u - prop.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "bin {k}: {err}");
            psi = &u * psi;
        }
        for (x, y) in traj.final_state.as_slice().iter().zip(psi.iter()) {
            assert!((x - y).norm() < 1e-10);
        }
        // the fine-step propagator reaches the same state
        let fine = propagate(&psi0, &sched.clone().into(), &p, (0.0, 25.0), &opts).unwrap();
        for (x, y) in fine.final_state.as_slice().iter().zip(psi.iter()) {
            assert!((x - y).norm() < 1e-10);
        }
    }
}

#[test]
fn conserved_quantities_without_loss() {
    let p = ModelParams::resonant(0.0, 6).unwrap();
    let psi0 = basis_state(0, 0, 1, &p).unwrap();
    let gauss: PulseSchedule = GaussianPair::with_ratio(0.3, 8.0, 0.7).unwrap().into();
    let steps: PulseSchedule = Lcg(5).schedule(10, 30.0, 0.4).into();
    let opts = PropagationOptions { record_stride: 5, ..Default::default() };
    let parity = parity_operator(&p);
    let excitations = excitation_operator(&p);
    for sched in [gauss, steps] {
        let window = (-20.0, 30.0);
        let rabi = propagate(&psi0, &sched, &p, window, &opts).unwrap();
        let p0 = parity.expectation(&psi0);
        for s in &rabi.states {
            assert!((s.norm_sqr() - 1.0).abs() < 1e-9);
            assert!((parity.expectation(s) - p0).norm() < 1e-8);
        }
        let rwa = propagate(&psi0, &sched, &p, window, &opts.with_model(Model::Rwa)).unwrap();
        let n0 = excitations.expectation(&psi0);
        for s in &rwa.states {
            assert!((excitations.expectation(s) - n0).norm() < 1e-8);
        }
    }
}

#[test]
fn adaptive_matches_exponential_on_cyan_gaussian() {
    let p = ModelParams::default();
    let psi0 = basis_state(0, 0, 1, &p).unwrap();
    let target = basis_state(0, 1, 0, &p).unwrap();
    let pair = GaussianPair::with_ratio(0.3, 25.0, 0.7).unwrap();
    let window = pair.integration_window(1e-4).unwrap();
    let sched = PulseSchedule::from(pair);
    let mut f = Vec::new();
    for (method, dt) in [(Method::PiecewiseExponential, 0.01), (Method::AdaptiveRk, 0.01)] {
        let opts = PropagationOptions { dt, record_stride: 1000, ..Default::default() }.with_method(method);
        let traj = propagate(&psi0, &sched, &p, window, &opts).unwrap();
        f.push(target.inner(&traj.final_state).norm_sqr());
    }
    assert!((f[0] - f[1]).abs() < 1e-6, "{f:?}");
}

#[test]
fn lossy_norm_never_grows() {
    let p = ModelParams::default();
    let psi0 = basis_state(0, 0, 1, &p).unwrap();
    let sched: PulseSchedule = Lcg(2).schedule(20, 25.0, 0.3).into();
    for method in [Method::PiecewiseExponential, Method::AdaptiveRk] {
        let opts = PropagationOptions { record_stride: 1, ..Default::default() }.with_method(method);
        let traj = propagate(&psi0, &sched, &p, (0.0, 25.0), &opts).unwrap();
        let norms: Vec<f64> = traj.norms_sqr().collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        assert!(*norms.last().unwrap() < 1.0);
    }
}
