//! Wall-clock comparison of analytical and finite-difference Jacobians.

use std::time::Instant;

use crate::error::Result;
use crate::harness::fd::{fd_bundle, FdConfig};
use crate::harness::random::{random_chain, random_coords};
use crate::jacobians::JacobianBundle;
use crate::kinodynamics::GravitySpec;

pub const WARMUP: usize = 3;
pub const REPS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub dof: usize,
    pub order: usize,
    pub analytic_s: f64,
    pub fd_s: f64,
}

impl BenchRow {
    pub fn speedup(&self) -> f64 {
        self.fd_s / self.analytic_s
    }
}

/// Median wall time of `reps` runs after `warmup` discarded runs.
pub fn median_time<F: FnMut() -> Result<()>>(mut f: F, warmup: usize, reps: usize) -> Result<f64> {
    for _ in 0..warmup {
        f()?;
    }
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps.max(1) {
        let t0 = Instant::now();
        f()?;
        times.push(t0.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    let n = times.len();
    Ok(if n % 2 == 1 {
        times[n / 2]
    } else {
        0.5 * (times[n / 2 - 1] + times[n / 2])
    })
}

/// Times the full analytical bundle and its FD oracle on a random serial chain.
pub fn bench_point(dof: usize, order: usize, warmup: usize, reps: usize, seed: u64) -> Result<BenchRow> {
    let model = random_chain(dof, seed);
    let coords = random_coords(&model, order + 1, seed);
    let gravity = GravitySpec::on([0.0, 0.0, -9.81]);
    let cfg = FdConfig::default();
    let analytic_s = median_time(
        || JacobianBundle::compute(&model, &coords, &gravity, order).map(|_| ()),
        warmup,
        reps,
    )?;
    let fd_s = median_time(
        || fd_bundle(&model, &coords, &gravity, order, &cfg).map(|_| ()),
        warmup,
        reps,
    )?;
    Ok(BenchRow {
        dof,
        order,
        analytic_s,
        fd_s,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
