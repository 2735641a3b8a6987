use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("game.cost_k must be positive, got {0}")]
    CostK(f64),
    #[error("game.fg_cost ({cost}) must be positive and below game.fg_benefit ({benefit})")]
    FgCost { cost: f64, benefit: f64 },
    #[error("game.fg_tol must be positive, got {0}")]
    Tol(f64),
    #[error("game.fg_max_iters must be at least 1")]
    MaxIters,
    #[error("alpha1+alpha2 must equal 10 (got {0})")]
    AlphaSum(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    VolunteerDilemma,
    ForwardingGame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    pub mechanism: Mechanism,
    /// Volunteering cost in utility units.
    pub cost_k: f64,
    pub fg_benefit: f64,
    pub fg_cost: f64,
    pub fg_tol: f64,
    pub fg_max_iters: u32,
    /// Utility weight on the distance factor.
    pub alpha1: f64,
    /// Utility weight on the link-quality factor.
    pub alpha2: f64,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            mechanism: Mechanism::VolunteerDilemma,
            cost_k: 1.0,
            fg_benefit: 2.0,
            fg_cost: 1.0,
            fg_tol: 1e-6,
            fg_max_iters: 100,
            alpha1: 6.0,
            alpha2: 4.0,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Vec<GameError> {
        let mut errs = Vec::new();
        if !(self.cost_k > 0.0) {
            errs.push(GameError::CostK(self.cost_k));
        }
        if !(self.fg_cost > 0.0 && self.fg_cost < self.fg_benefit) {
            errs.push(GameError::FgCost { cost: self.fg_cost, benefit: self.fg_benefit });
        }
        if !(self.fg_tol > 0.0) {
            errs.push(GameError::Tol(self.fg_tol));
        }
        if self.fg_max_iters == 0 {
            errs.push(GameError::MaxIters);
        }
        if ((self.alpha1 + self.alpha2) - 10.0).abs() > 1e-9 {
            errs.push(GameError::AlphaSum(self.alpha1 + self.alpha2));
        }
        errs
    }
}

/// Volunteer's-dilemma forwarding probability.
///
/// A candidate whose utility does not exceed the volunteering cost, or who is
/// the only candidate, always forwards. Otherwise the probability decays
/// geometrically with the number of other candidates that could volunteer.
pub fn vod_forward_probability(u: f64, n_candidates: usize, cost_k: f64) -> f64 {
    if n_candidates <= 1 || u <= cost_k {
        return 1.0;
    }
    (cost_k / u).powi(n_candidates as i32 - 1).clamp(0.0, 1.0)
}

/// Expected payoff of player `i` choosing `p_i` against the others' `probs`.
///
/// Forwarding earns `benefit·a_i − cost`; staying silent earns `benefit·a_i`
/// only if someone else forwards.
pub fn forwarding_game_payoff(i: usize, p_i: f64, probs: &[f64], avails: &[f64], benefit: f64, cost: f64) -> f64 {
    let none_other: f64 = probs
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, p)| 1.0 - p)
        .product();
    let gain = benefit * avails[i];
    p_i * (gain - cost) + (1.0 - p_i) * gain * (1.0 - none_other)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub probs: Vec<f64>,
    pub converged: bool,
    pub iterations: u32,
}

/// Mixed equilibrium of the forwarding game.
///
/// Players whose benefit does not cover the cost never forward. Among the
/// rest, each mixing player is made indifferent, which requires the
/// probability that no other player forwards to equal `c_i = cost/(benefit·a_i)`.
/// With `P` the probability that no support member forwards this gives
/// `p_i = 1 − P/c_i`, and `P` is found by fixed-point iteration from the
/// all-0.5 profile. The largest support whose solution is a valid
/// probability profile, with every excluded player preferring silence, is
/// returned. A one-player support means the best-placed player forwards
/// surely.
pub fn forwarding_game_equilibrium(avails: &[f64], cfg: &GameConfig) -> Equilibrium {
    let n = avails.len();
    let mut probs = vec![0.0; n];
    let (b, c) = (cfg.fg_benefit, cfg.fg_cost);
    let mut active: Vec<(f64, usize)> = avails
        .iter()
        .enumerate()
        .filter(|&(_, &a)| b * a > c)
        .map(|(i, &a)| (c / (b * a), i))
        .collect();
    if active.is_empty() {
        return Equilibrium { probs, converged: true, iterations: 0 };
    }
    active.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

    let mut total_iters = 0;
    for s in (2..=active.len()).rev() {
        let support = &active[..s];
        let prod_c: f64 = support.iter().map(|&(ci, _)| ci).product();
        let mut p_none = 0.5f64.powi(s as i32);
        let mut converged = false;
        for _ in 0..cfg.fg_max_iters {
            total_iters += 1;
            let next = (p_none * prod_c).powf(1.0 / s as f64);
            let delta = support
                .iter()
                .map(|&(ci, _)| ((next - p_none) / ci).abs())
                .fold(0.0, f64::max);
            p_none = next;
            if delta < cfg.fg_tol {
                converged = true;
                break;
            }
        }
        let candidate: Vec<f64> = support.iter().map(|&(ci, _)| 1.0 - p_none / ci).collect();
        let valid = candidate.iter().all(|&p| (-cfg.fg_tol..=1.0).contains(&p))
            && active[s..].iter().all(|&(ck, _)| p_none <= ck + cfg.fg_tol);
        if valid {
            for (&(_, i), p) in support.iter().zip(candidate) {
                probs[i] = p.clamp(0.0, 1.0);
            }
            return Equilibrium { probs, converged, iterations: total_iters };
        }
    }
    probs[active[0].1] = 1.0;
    Equilibrium { probs, converged: true, iterations: total_iters }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{RngStreams, StreamId};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn vod_examples() {
        assert_eq!(vod_forward_probability(1.0, 7, 1.0), 1.0);
        assert!((vod_forward_probability(10.0, 2, 1.0) - 0.1).abs() < 1e-12);
        assert!((vod_forward_probability(10.0, 3, 1.0) - 0.01).abs() < 1e-12);
        assert_eq!(vod_forward_probability(1e9, 1, 1.0), 1.0);
    }

    #[test]
    fn vod_monte_carlo_within_three_sigma() {
        let p = vod_forward_probability(3.0, 2, 1.0);
        let mut rng = RngStreams::new(11).stream(StreamId::GameDraw);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| rng.random::<f64>() < p).count() as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits / n as f64 - p).abs() <= 3.0 * sigma);
    }

    #[test]
    fn fg_single_player_forwards() {
        let eq = forwarding_game_equilibrium(&[0.8], &GameConfig::default());
        assert_eq!(eq.probs, vec![1.0]);
    }

    #[test]
    fn fg_no_player_covers_cost() {
        let eq = forwarding_game_equilibrium(&[0.1, 0.5, 0.3], &GameConfig::default());
        assert_eq!(eq.probs, vec![0.0; 3]);
    }

    /// Largest payoff gain any player can get by deviating to a grid point.
    fn max_regret(probs: &[f64], avails: &[f64], cfg: &GameConfig) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..probs.len() {
            let current = forwarding_game_payoff(i, probs[i], probs, avails, cfg.fg_benefit, cfg.fg_cost);
            for k in 0..=1000 {
                let alt = forwarding_game_payoff(i, k as f64 / 1000.0, probs, avails, cfg.fg_benefit, cfg.fg_cost);
                worst = worst.max(alt - current);
            }
        }
        worst
    }

    #[test]
    fn fg_symmetric_pair() {
        let cfg = GameConfig { fg_benefit: 2.0, fg_cost: 1.0, ..GameConfig::default() };
        let eq = forwarding_game_equilibrium(&[1.0, 1.0], &cfg);
        assert!(eq.converged);
        for p in &eq.probs {
            assert!((p - 0.5).abs() < 1e-6);
        }
        // grid search: 0.5 is the only interior point where neither player gains by deviating
        let grid: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
        let symmetric_eq: Vec<f64> = grid
            .iter()
            .copied()
            .filter(|&p| max_regret(&[p, p], &[1.0, 1.0], &cfg) <= 1e-3 && p > 0.0 && p < 1.0)
            .collect();
        assert!(symmetric_eq.iter().all(|&p| (p - 0.5).abs() <= 2e-3), "{symmetric_eq:?}");
        assert!(symmetric_eq.contains(&0.5));
    }

    proptest! {
        #[test]
        fn fg_is_mutual_best_response(
            avails in prop::collection::vec(0.0..=1.0f64, 1..=3),
            benefit in 1.5..5.0f64,
        ) {
            let cfg = GameConfig { fg_benefit: benefit, fg_cost: 1.0, ..GameConfig::default() };
            let eq = forwarding_game_equilibrium(&avails, &cfg);
            prop_assert!(eq.probs.iter().all(|p| (0.0..=1.0).contains(p)));
            prop_assert!(max_regret(&eq.probs, &avails, &cfg) <= 1e-3);
        }

        #[test]
        fn vod_monotone(u1 in 1.0..1e10f64, u2 in 1.0..1e10f64, n in 1usize..30, k in 0.5..1e3f64) {
            let (lo, hi) = if u1 < u2 { (u1, u2) } else { (u2, u1) };
            prop_assert!(vod_forward_probability(lo, n, k) >= vod_forward_probability(hi, n, k));
            if hi > k {
                prop_assert!(vod_forward_probability(hi, n + 1, k) <= vod_forward_probability(hi, n, k));
            }
        }
    }
}
