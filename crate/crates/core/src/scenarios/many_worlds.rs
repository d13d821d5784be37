//! A Born ensemble of Bohmian worlds split by a beam splitter.
//!
//! The splitter is a narrow smooth barrier calibrated so that the incident
//! packet's band-averaged transmission equals the requested probability.
//! Every member is guided by the same evolving wave; transmitted members are
//! the ones that finish on the far side.

use serde::Serialize;

use crate::bohm::{ks_distance, sample_born, transport_ensemble, GridCdf};
use crate::error::{Error, Result};
use crate::scenarios::barrier::Barrier;
use crate::wavepacket::{gaussian_packet, Grid, PacketSpec, SplitStep};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManyWorldsConfig {
    pub n: usize,
    pub transmit_prob: f64,
    pub seed: u64,
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub start: f64,
    /// Density standard deviation of the incident packet.
    pub width: f64,
    pub momentum: f64,
    pub barrier_width: f64,
    pub duration: f64,
    /// Number of stored trajectories (evenly spread in initial rank).
    pub n_trajectories: usize,
}

impl Default for ManyWorldsConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            transmit_prob: 0.7,
            seed: 0,
            x_min: -30.0,
            x_max: 30.0,
            n_points: 2048,
            start: -12.0,
            width: 1.5,
            momentum: 5.0,
            barrier_width: 0.1,
            duration: 5.0,
            n_trajectories: 40,
        }
    }
}

/// KS distance between the ensemble and |Ψ_t|² at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub time: f64,
    pub ks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManyWorldsReport {
    pub n: usize,
    pub transmit_prob: f64,
    pub barrier_height: f64,
    /// Mass on the far side of the barrier at the final time.
    pub grid_transmission: f64,
    pub transmitted: usize,
    pub transmitted_fraction: f64,
    /// Binomial standard deviation of the fraction at `transmit_prob`.
    pub binomial_sigma: f64,
    pub crossing_pairs: u64,
    pub checkpoints: Vec<Checkpoint>,
    /// Split point between reflected and transmitted initial positions,
    /// when they are separated by a single cut.
    pub cut_position: Option<f64>,
    /// Initial-density quantile of the cut.
    pub cut_quantile: Option<f64>,
    pub steps: usize,
    pub dt: f64,
    #[serde(skip)]
    pub trajectories: Trajectories,
}

/// Stored member paths: `positions[t][m]` at `times[t]` for `members[m]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectories {
    pub times: Vec<f64>,
    pub members: Vec<usize>,
    pub positions: Vec<Vec<f64>>,
}

impl Trajectories {
    /// CSV with columns `t,member,x`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,member,x\n");
        for (t, row) in self.times.iter().zip(&self.positions) {
            for (m, x) in self.members.iter().zip(row) {
                out.push_str(&format!("{t},{m},{x}\n"));
            }
        }
        out
    }
}

const RECORDS: usize = 60;
const CFL_SAFETY: f64 = 0.5;

/// Runs the split. Members are Born-sampled from the incident packet with
/// the configured seed.
pub fn many_worlds_bs(cfg: &ManyWorldsConfig) -> Result<ManyWorldsReport> {
    if cfg.n < 100 {
        return Err(Error::InvalidParameter(format!(
            "ensemble size {} below 100",
            cfg.n
        )));
    }
    if !(cfg.transmit_prob > 0.0 && cfg.transmit_prob <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "transmit_prob {} outside (0, 1]",
            cfg.transmit_prob
        )));
    }
    let grid = Grid::new(cfg.x_min, cfg.x_max, cfg.n_points)?;
    let psi0 = gaussian_packet(PacketSpec::moving(cfg.start, cfg.width, cfg.momentum), grid)?;
    let sigma_k = 1.0 / (2.0 * cfg.width);
    let barrier = Barrier::calibrate(cfg.barrier_width, cfg.momentum, sigma_k, cfg.transmit_prob)?;
    let potential = barrier.on_grid(&grid);

    // bound on |v| in the incident/reflected standing wave
    let rho = (1.0 - cfg.transmit_prob).sqrt().min(0.95);
    let k_top = cfg.momentum.abs() + 4.0 * sigma_k;
    let v_bound = k_top * (1.0 + rho) / (1.0 - rho);
    let h_max = CFL_SAFETY * grid.spacing() / v_bound;
    let rk_steps = {
        let raw = (cfg.duration / h_max).ceil() as usize;
        raw.div_ceil(RECORDS) * RECORDS
    };
    let dt = cfg.duration / (2 * rk_steps) as f64;
    let prop = SplitStep::new(grid, dt, Some(&potential))?;

    let ensemble = sample_born(&psi0, cfg.n, cfg.seed)?;
    let members = ensemble.coordinates(0);
    let out = transport_ensemble(&psi0, &prop, &members, rk_steps, rk_steps / RECORDS)?;

    let checkpoints = [RECORDS / 3, 2 * RECORDS / 3, RECORDS]
        .iter()
        .map(|&r| {
            let cdf = GridCdf::new(grid, &out.record_densities[r]);
            Checkpoint {
                time: out.record_times[r],
                ks: ks_distance(&out.records[r], |x| cdf.at(x)),
            }
        })
        .collect();

    let final_density = out.final_density();
    let grid_transmission = grid
        .points()
        .zip(&final_density)
        .filter(|(x, _)| *x > 0.0)
        .map(|(_, d)| d)
        .sum::<f64>()
        * grid.spacing();
    let transmitted = out.final_positions.iter().filter(|&&x| x > 0.0).count();

    let max_reflected = members
        .iter()
        .zip(&out.final_positions)
        .filter(|(_, &x)| x <= 0.0)
        .map(|(&x0, _)| x0)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_transmitted = members
        .iter()
        .zip(&out.final_positions)
        .filter(|(_, &x)| x > 0.0)
        .map(|(&x0, _)| x0)
        .fold(f64::INFINITY, f64::min);
    let cut_position = (max_reflected < min_transmitted
        && max_reflected.is_finite()
        && min_transmitted.is_finite())
    .then_some(0.5 * (max_reflected + min_transmitted));
    let initial_cdf = GridCdf::from_wave(&psi0);
    let cut_quantile = cut_position.map(|c| initial_cdf.at(c));

    let mut ranked: Vec<usize> = (0..members.len()).collect();
    ranked.sort_by(|&a, &b| members[a].total_cmp(&members[b]));
    let n_traj = cfg.n_trajectories.min(members.len());
    let picked: Vec<usize> = (0..n_traj)
        .map(|j| ranked[(2 * j + 1) * members.len() / (2 * n_traj)])
        .collect();
    let trajectories = Trajectories {
        times: out.record_times.clone(),
        members: picked.clone(),
        positions: out
            .records
            .iter()
            .map(|row| picked.iter().map(|&m| row[m]).collect())
            .collect(),
    };

    let p = cfg.transmit_prob;
    Ok(ManyWorldsReport {
        n: cfg.n,
        transmit_prob: p,
        barrier_height: barrier.height,
        grid_transmission,
        transmitted,
        transmitted_fraction: transmitted as f64 / cfg.n as f64,
        binomial_sigma: (p * (1.0 - p) / cfg.n as f64).sqrt(),
        crossing_pairs: out.crossing_pairs,
        checkpoints,
        cut_position,
        cut_quantile,
        steps: 2 * rk_steps,
        dt,
        trajectories,
    })
}
