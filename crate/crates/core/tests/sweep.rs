use usc_transfer::sweep::{heatmap_csv, run_point, run_sweep, SweepGrid};
use usc_transfer::Model;

#[test]
fn rwa_beats_rabi_on_most_strong_coupling_points() {
    let mut grid = SweepGrid::default();
    grid.g0_values.retain(|g| *g >= 0.2 - 1e-12);
    let rabi = run_sweep(&grid).unwrap();
    grid.settings = grid.settings.with_model(Model::Rwa);
    let rwa = run_sweep(&grid).unwrap();
    let total = rabi.len();
    let wins = rabi
        .iter()
        .zip(&rwa)
        .filter(|(a, b)| b.record.as_ref().unwrap().fidelity >= a.record.as_ref().unwrap().fidelity)
        .count();
    assert!(wins as f64 >= 0.9 * total as f64, "{wins}/{total}");
}

#[test]
fn sweep_csv_is_deterministic() {
    let grid = SweepGrid {
        t_inv_values: vec![0.05, 0.08, 0.1],
        g0_values: vec![0.1, 0.2, 0.3],
        ..Default::default()
    };
    let a = heatmap_csv(&run_sweep(&grid).unwrap(), Model::Rabi);
    let b = heatmap_csv(&run_sweep(&grid).unwrap(), Model::Rabi);
    assert_eq!(a.as_bytes(), b.as_bytes());
    assert_eq!(a.lines().count(), 10);
    // row-major: t_inv outer, g0 inner
    let second: Vec<&str> = a.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(second[0], "5.00000000000e-2");
    assert_eq!(second[1], "2.00000000000e-1");
    let single = run_point(0.05, 0.2, &grid.settings).unwrap();
    assert_eq!(second[3], usc_transfer::metrics::format_sig12(single.fidelity));
}
