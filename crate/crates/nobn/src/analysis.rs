//! Traces behind finding-degree ordering: expected parent count against
//! `ξ`, and `γ` against the mean `ξ` of random transformed sets.

use nobn_core::synth::{
    degree_xi_expectation, estimate_gamma, gen_network, random_findings, rng, uniform_theta,
    NetworkSpec,
};
use nobn_core::variational::{prior_xi, Solver, XiCache};
use nobn_core::{NoisyOrNetwork, Result};
use serde::Serialize;

/// Uniform prior and uniform edge probability of one panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeSetting {
    pub name: &'static str,
    pub prior: f64,
    pub edge_prob: f64,
}

impl DegreeSetting {
    /// Inverse prior odds.
    pub fn p(&self) -> f64 {
        (1.0 - self.prior) / self.prior
    }

    /// Uniform edge weight.
    pub fn c(&self) -> f64 {
        uniform_theta(self.edge_prob)
    }
}

pub const SETTINGS: [DegreeSetting; 4] = [
    DegreeSetting {
        name: "a",
        prior: 0.01,
        edge_prob: 0.5,
    },
    DegreeSetting {
        name: "b",
        prior: 0.001,
        edge_prob: 0.6,
    },
    DegreeSetting {
        name: "c",
        prior: 0.002,
        edge_prob: 0.7,
    },
    DegreeSetting {
        name: "d",
        prior: 0.005,
        edge_prob: 0.9,
    },
];

/// Log-spaced grid over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    let step = (hi / lo).ln() / (points - 1) as f64;
    let mut out: Vec<f64> = (0..points).map(|k| lo * (step * k as f64).exp()).collect();
    out[points - 1] = hi;
    out
}

/// `(ξ, E|π(f+)|)` over `grid`.
pub fn degree_trace(setting: &DegreeSetting, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    grid.iter()
        .map(|&xi| Ok((xi, degree_xi_expectation(xi, setting.p(), setting.c())?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaConfig {
    pub n_diseases: u32,
    pub n_symptoms: u32,
    pub density: f64,
    /// Findings per transformed set.
    pub set_size: usize,
    pub n_sets: usize,
    /// Monte Carlo draws per `γ` estimate.
    pub samples: usize,
    pub solver: Solver,
    pub seed: u64,
}

impl Default for GammaConfig {
    fn default() -> Self {
        GammaConfig {
            n_diseases: 2000,
            n_symptoms: 400,
            density: 0.003,
            set_size: 2,
            n_sets: 50,
            samples: 1_000_000,
            solver: Solver::Cvx,
            seed: 1,
        }
    }
}

/// Network with every prior and every edge probability fixed by `setting`.
pub fn uniform_network(setting: &DegreeSetting, config: &GammaConfig) -> Result<NoisyOrNetwork> {
    gen_network(&NetworkSpec {
        n_diseases: config.n_diseases,
        n_symptoms: config.n_symptoms,
        density: config.density,
        prior_range: (setting.prior, setting.prior),
        edge_prob_range: (setting.edge_prob, setting.edge_prob),
        seed: config.seed,
    })
}

/// One point per random transformed set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPoint {
    pub xi_sum: f64,
    pub xi_mean: f64,
    pub gamma: f64,
}

/// `γ` for `n_sets` random sets of `set_size` findings, with prior-odds `ξ`.
pub fn gamma_trace(net: &NoisyOrNetwork, config: &GammaConfig) -> Result<Vec<GammaPoint>> {
    let mut r = rng(config.seed ^ 0x0067_616d_6d61);
    let mut cache = XiCache::new();
    let mut out = Vec::with_capacity(config.n_sets);
    for k in 0..config.n_sets {
        let f1 = random_findings(net, config.set_size, &mut r);
        let xi = prior_xi(net, &f1, config.solver, &mut cache)?;
        let gamma = estimate_gamma(
            net,
            &f1,
            &xi,
            config.samples,
            config.seed.wrapping_add(k as u64),
        )?;
        let xi_sum = xi.sum();
        out.push(GammaPoint {
            xi_sum,
            xi_mean: xi_sum / f1.len().max(1) as f64,
            gamma,
        });
    }
    Ok(out)
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties; NaN when either
/// side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub trace: &'static str,
    pub setting: &'static str,
    pub x: f64,
    pub y: f64,
}

/// Degree traces on `grid` and `γ` traces for all four settings.
pub fn fdo_rows(grid: &[f64], config: &GammaConfig) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::new();
    for s in &SETTINGS {
        for (x, y) in degree_trace(s, grid)? {
            rows.push(TraceRow {
                trace: "degree",
                setting: s.name,
                x,
                y,
            });
        }
    }
    for s in &SETTINGS {
        let net = uniform_network(s, config)?;
        for p in gamma_trace(&net, config)? {
            rows.push(TraceRow {
                trace: "gamma",
                setting: s.name,
                x: p.xi_mean,
                y: p.gamma,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, 0.0]) + 1.0).abs() < 1e-15);
        // ranks with ties: x = [1, 2.5, 2.5, 4]
        let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]);
        assert!((r - 0.9486832980505138).abs() < 1e-12, "{r}");
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_nan());
    }

    #[test]
    fn grid_ends() {
        let g = log_grid(0.01, 50.0, 30);
        assert_eq!(g.len(), 30);
        assert_eq!((g[0], g[29]), (0.01, 50.0));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn settings_match_panels() {
        assert!((SETTINGS[0].p() - 99.0).abs() < 1e-12);
        assert!((SETTINGS[0].c() - core::f64::consts::LN_2).abs() < 1e-15);
    }
}
