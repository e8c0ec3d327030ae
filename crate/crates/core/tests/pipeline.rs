use nsbm_core::pipeline::{PipelineConfig, Run};
use nsbm_core::risk::{predict, RiskGrid};
use nsbm_core::scene_graph::graph_for_frame;
use nsbm_core::trajectory::{compute_mrd, VehicleState};

fn vehicle(id: u64, lane: u32, x: f64, speed: f64, accel: f64) -> VehicleState {
    VehicleState {
        vehicle_id: id,
        t: 0.0,
        x,
        y: (lane as f64 - 0.5) * 3.5,
        speed,
        accel,
        heading: 0.0,
        lane,
        length: 4.5,
        width: 1.8,
    }
}

fn danger(frame: &[VehicleState]) -> f64 {
    let others: Vec<&VehicleState> = frame[1..].iter().collect();
    -compute_mrd(&frame[0], &others).unwrap()
}

#[test]
fn trained_models_warn_on_imminent_crashes_only() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.seed = 11;
    cfg.lead_times = vec![1.0];
    let run = Run::new(tmp.path(), cfg).unwrap();
    run.run_all().unwrap();
    let scorers = run.scorers(1.0).unwrap();
    let m_star = run.calibration("nsbm", 1.0).unwrap().m_star;
    let grid = RiskGrid::new(1.0);

    let assess = |frame: &[VehicleState]| {
        let z = danger(frame);
        let g = graph_for_frame::<f64>(frame, 1, "probe", 0.0).unwrap();
        predict(&g, &scorers.nsbm_crash, &scorers.nsbm_noncrash, m_star, z, grid).unwrap()
    };

    // leader braking hard 0.1 m ahead while the subject is still 8 m/s faster
    let imminent = [
        vehicle(1, 2, 100.0, 20.0, 0.0),
        vehicle(2, 2, 104.6, 12.0, -6.0),
        vehicle(3, 1, 92.0, 18.0, 0.0),
        vehicle(4, 3, 110.0, 19.0, 0.0),
    ];
    assert!(danger(&imminent) > -0.2);
    let hot = assess(&imminent);
    assert!(hot.warn, "M = {} below M* = {m_star}", hot.m);

    // nobody within 30 m
    let free = [
        vehicle(1, 2, 100.0, 22.0, 0.0),
        vehicle(2, 2, 150.0, 22.0, 0.0),
        vehicle(3, 1, 60.0, 21.0, 0.0),
        vehicle(4, 3, 140.0, 23.0, 0.0),
    ];
    assert!(danger(&free) < -30.0);
    let calm = assess(&free);
    assert!(!calm.warn, "M = {} reaches M* = {m_star}", calm.m);
    assert!(calm.m < hot.m);
}
