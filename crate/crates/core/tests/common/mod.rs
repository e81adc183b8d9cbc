#![allow(dead_code)]

pub mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simstream::{Config, DataPoint};

/// The six ten-feature points of the worked example, in arrival order.
pub const WORKED_POINTS: [[f64; 10]; 6] = [
    [10., 15., 20., 25., 30., 35., 40., 45., 50., 55.],
    [9., 35., 18., 45., 10., 32., 60., 41., 10., 20.],
    [18., 13., 18., 27., 30., 38., 38., 41., 49., 57.],
    [20., 20., 18., 5., 15., 34., 50., 43., 10., 50.],
    [17., 17., 18., 15., 22., 35., 44., 43., 10., 53.],
    [10., 32., 20., 45., 12., 55., 40., 55., 9., 25.],
];

pub fn worked_csv() -> String {
    WORKED_POINTS
        .iter()
        .map(|row| {
            row.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

pub fn worked_config() -> Config {
    Config::new(60.0, 10).unwrap()
}

pub fn points_from(config: &Config, rows: &[Vec<f64>]) -> Vec<DataPoint> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| DataPoint::new(i as u64, r.clone(), config).unwrap())
        .collect()
}

pub fn worked_points() -> Vec<DataPoint> {
    let rows: Vec<Vec<f64>> = WORKED_POINTS.iter().map(|r| r.to_vec()).collect();
    points_from(&worked_config(), &rows)
}

/// A random stream shaped to exercise every assignment branch: points are
/// perturbations of a handful of prototypes with small integer features, so
/// joins, multi-cluster qualification and exact average ties all occur.
#[derive(Debug, Clone)]
pub struct RandomStream {
    pub config: Config,
    pub rows: Vec<Vec<f64>>,
}

impl RandomStream {
    pub fn points(&self) -> Vec<DataPoint> {
        points_from(&self.config, &self.rows)
    }
}

pub const STRICTNESS_SET: [f64; 5] = [50.0, 60.0, 75.0, 90.0, 100.0];

pub fn random_stream(seed: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=16);
    let strictness = STRICTNESS_SET[rng.gen_range(0..STRICTNESS_SET.len())];
    let len = rng.gen_range(0..=200);
    let n_protos = rng.gen_range(1..=6);
    let protos: Vec<Vec<f64>> = (0..n_protos)
        .map(|_| (0..n).map(|_| rng.gen_range(0..=30) as f64).collect())
        .collect();
    let fractional = rng.gen_bool(0.3);
    let rows = (0..len)
        .map(|_| {
            let p = &protos[rng.gen_range(0..n_protos)];
            p.iter()
                .map(|&v| {
                    let jitter = if rng.gen_bool(0.5) {
                        0.0
                    } else {
                        rng.gen_range(-4i32..=4) as f64
                    };
                    let mut x = (v + jitter).max(0.0);
                    if fractional {
                        x += rng.gen_range(0..4) as f64 * 0.25;
                    }
                    x
                })
                .collect()
        })
        .collect();
    RandomStream {
        config: Config::new(strictness, n).unwrap(),
        rows,
    }
}

/// Relative closeness with an absolute floor for values near zero.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || a == b
}
