//! Benchmark harness: prepare an instance, run one algorithm, and report
//! the LP bound against the distribution's expected size.

use std::time::Instant;

use serde::Serialize;

use crate::datagen::{generate_bounds, generate_if, DEFAULT_RANK_PERCENTS};
use crate::error::{Error, Result};
use crate::ext::{solve_extended, Algorithm, FairnessObjective, RunOptions, Solution};
use crate::greedy::{f_epsilon, ScanOrder};
use crate::instance::{compute_stats, Instance};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum BoundStyle {
    /// Use the instance's bounds as given.
    #[default]
    Keep,
    /// Replace group caps by the uniform generated cap.
    Uniform,
}

/// Everything a run needs besides the instance.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub objective: FairnessObjective,
    pub seed: u64,
    pub bounds: BoundStyle,
    /// Regenerate rank fairness windows with these percentages.
    pub rank_percents: Option<Vec<f64>>,
    /// Scale lower bounds in exact mode when infeasible.
    pub scale: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Greedy,
            epsilon: 1e-3,
            objective: FairnessObjective::default(),
            seed: 0,
            bounds: BoundStyle::Keep,
            rank_percents: None,
            scale: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.algorithm == Algorithm::Greedy && !(self.epsilon > 0.0) {
            return Err(Error::Input(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if let Some(r) = self
            .rank_percents
            .iter()
            .flatten()
            .find(|&&r| !(r > 0.0 && r <= 100.0))
        {
            return Err(Error::Input(format!("rank percentage {r} is outside (0, 100]")));
        }
        Ok(())
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            epsilon: self.epsilon,
            order: ScanOrder::PreferenceRank,
            scale: self.scale,
            ..RunOptions::default()
        }
    }

    /// Applies the configured bound and fairness generators.
    pub fn prepare(&self, instance: &Instance) -> Result<Instance> {
        let mut inst = instance.clone();
        if self.bounds == BoundStyle::Uniform {
            inst = generate_bounds(&inst)?;
        }
        if let Some(r) = &self.rank_percents {
            let r = if r.is_empty() { DEFAULT_RANK_PERCENTS.to_vec() } else { r.clone() };
            inst = generate_if(&inst, self.seed, &r)?;
        }
        Ok(inst)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BenchRow {
    pub algorithm: String,
    pub objective: String,
    pub items: usize,
    pub platforms: usize,
    pub edges: usize,
    pub groups: usize,
    pub delta: usize,
    pub g: usize,
    /// LP optimum.
    pub ub: f64,
    /// Expected size of the distribution.
    pub sol: f64,
    pub ub_over_sol: f64,
    /// Worst-case ratio guaranteed for the algorithm.
    pub approx: f64,
    pub support: usize,
    pub seconds: f64,
    pub t_star: f64,
    pub audit_pass: bool,
}

impl BenchRow {
    pub const HEADER: [&'static str; 16] = [
        "algorithm", "objective", "items", "platforms", "edges", "groups", "delta", "g", "ub", "sol",
        "ub_over_sol", "approx", "support", "seconds", "t_star", "audit_pass",
    ];

    pub fn to_csv(rows: &[BenchRow]) -> String {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(Self::HEADER).expect("in-memory write");
        for r in rows {
            w.serialize(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Guarantee on UB/SOL for the algorithm on this instance.
pub fn guarantee(instance: &Instance, algorithm: Algorithm, solution: &Solution) -> Result<f64> {
    let stats = compute_stats(instance);
    Ok(match algorithm {
        Algorithm::Exact => 1.0,
        Algorithm::Greedy => f_epsilon(instance.num_items(), solution_epsilon(solution), stats.delta)?,
        Algorithm::TwoG => (2 * stats.g) as f64,
        Algorithm::G => stats.g as f64,
    })
}

fn solution_epsilon(solution: &Solution) -> f64 {
    match &solution.details {
        crate::ext::Details::Greedy(r) => r.epsilon,
        _ => 0.0,
    }
}

/// Runs the configured pipeline once and summarises it.
pub fn bench(config: &RunConfig, instance: &Instance) -> Result<(BenchRow, Solution)> {
    config.validate()?;
    if instance.num_edges() == 0 {
        return Err(Error::Input("cannot bench an instance without edges".into()));
    }
    let inst = config.prepare(instance)?;
    let start = Instant::now();
    let solution = solve_extended::<f64>(&inst, config.objective, config.algorithm, &config.run_options())?;
    let seconds = start.elapsed().as_secs_f64();
    let stats = compute_stats(&inst);
    let ub = solution.lp_value;
    let sol = solution.report.expected_size;
    let row = BenchRow {
        algorithm: config.algorithm.name().into(),
        objective: config.objective.variant.name().into(),
        items: inst.num_items(),
        platforms: inst.num_platforms(),
        edges: inst.num_edges(),
        groups: inst.num_groups(),
        delta: stats.delta,
        g: stats.g,
        ub,
        sol,
        ub_over_sol: if sol > 0.0 { ub / sol } else { f64::INFINITY },
        approx: guarantee(&inst, config.algorithm, &solution)?,
        support: solution.distribution.len(),
        seconds,
        t_star: solution.t_star,
        audit_pass: solution.report.all_pass(),
    };
    Ok((row, solution))
}

/// Benches every instance on its own worker thread.
pub fn bench_all(config: &RunConfig, instances: &[Instance]) -> Vec<Result<BenchRow>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = instances
            .iter()
            .map(|inst| s.spawn(move || bench(config, inst).map(|(row, _)| row)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("bench worker panicked")).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceDoc;

    fn d1() -> Instance {
        InstanceDoc::new(2, 1, &[(0, 0), (1, 0)], vec![vec![0, 1]])
            .group_bound(0, 0, 0.0, 1.0)
            .platform_bound(0, 0.0, 1.0)
            .with_default_preferences()
            .rank_window(0, 1, 0.5, 1.0)
            .rank_window(1, 1, 0.5, 1.0)
            .build()
            .unwrap()
    }

    #[test]
    fn d1_exact_row() {
        let cfg = RunConfig {
            algorithm: Algorithm::Exact,
            ..RunConfig::default()
        };
        let (row, sol) = bench(&cfg, &d1()).unwrap();
        assert_eq!(row.ub_over_sol, 1.0);
        assert_eq!(row.support, 2);
        assert_eq!(row.sol, sol.report.expected_size);
        assert!(row.audit_pass);
        let csv = BenchRow::to_csv(&[row]);
        assert!(csv.starts_with("algorithm,objective"));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn empty_instance_rejected() {
        let inst = InstanceDoc::new(1, 1, &[], vec![vec![0]]).build().unwrap();
        assert!(bench(&RunConfig::default(), &inst).is_err());
    }

    #[test]
    fn greedy_needs_positive_epsilon() {
        let cfg = RunConfig {
            epsilon: 0.0,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
