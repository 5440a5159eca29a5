//! The return-quality switching gate and the context-staleness refit gate.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateConfig {
    /// Earliest global step at which the gate is evaluated.
    pub t0: u64,
    pub window: usize,
    pub g_min: usize,
    pub quantile: f64,
    pub theta_floor: f64,
    pub delta: f64,
}

impl GateConfig {
    pub fn new(t0: u64, quantile: f64, theta_floor: f64) -> Self {
        Self { t0, window: 30, g_min: 20, quantile, theta_floor, delta: 1.0 }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.window == 0 || self.g_min > self.window {
            return Err(format!("gate needs 1 <= g_min <= window (got {} / {})", self.g_min, self.window));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(format!("gate quantile {} outside (0, 1)", self.quantile));
        }
        if !self.theta_floor.is_finite() || !(self.delta >= 0.0) {
            return Err("gate floor must be finite and margin non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefitConfig {
    pub rho_stale: f64,
    pub e_min: u64,
}

impl Default for RefitConfig {
    fn default() -> Self {
        Self { rho_stale: 0.25, e_min: 1 }
    }
}

impl RefitConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rho_stale > 0.0 && self.rho_stale <= 1.0) {
            return Err(format!("rho_stale {} outside (0, 1]", self.rho_stale));
        }
        if self.e_min == 0 {
            return Err("e_min must be at least 1".into());
        }
        Ok(())
    }
}

/// The last `capacity` episode returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnWindow {
    returns: VecDeque<f64>,
    capacity: usize,
}

impl ReturnWindow {
    pub fn new(capacity: usize) -> Self {
        Self { returns: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn push(&mut self, ret: f64) {
        if self.returns.len() == self.capacity {
            self.returns.pop_front();
        }
        self.returns.push_back(ret);
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.returns.iter()
    }
}

impl FromIterator<f64> for ReturnWindow {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let returns: VecDeque<f64> = iter.into_iter().collect();
        let capacity = returns.len().max(1);
        Self { returns, capacity }
    }
}

/// Quantile by linear interpolation between order statistics at position
/// q (n - 1); the midpoint of the two central values for the median of an
/// even count.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateDecision {
    pub fire: bool,
    pub theta_t: f64,
    /// Returns clearing the floor margin.
    pub g_t: usize,
}

/// Fires when the window is full, at least `g_min` returns exceed
/// `theta_floor + delta`, and the window's q-quantile also exceeds it.
/// Counting against the quantile itself could never reach `g_min` when
/// `g_min > (1 - q) W`, so the count is taken against the floor margin.
pub fn switch_gate(window: &ReturnWindow, cfg: &GateConfig) -> GateDecision {
    let values: Vec<f64> = window.iter().copied().collect();
    if values.len() < cfg.window {
        return GateDecision { fire: false, theta_t: f64::NAN, g_t: 0 };
    }
    let bar = cfg.theta_floor + cfg.delta;
    let theta_t = quantile(&values, cfg.quantile);
    let g_t = values.iter().filter(|&&r| r > bar).count();
    GateDecision { fire: g_t >= cfg.g_min && theta_t > bar, theta_t, g_t }
}

/// Fires when (t - t_last) / k >= rho_stale and at least e_min episodes
/// finished since the last refit.
pub fn refit_gate(t: u64, t_last: u64, episodes: u64, e_last: u64, k: usize, cfg: &RefitConfig) -> bool {
    let turnover = t.saturating_sub(t_last) as f64 / k as f64;
    turnover >= cfg.rho_stale && episodes.saturating_sub(e_last) >= cfg.e_min
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(tens: usize, zeros: usize) -> ReturnWindow {
        std::iter::repeat_n(10.0, tens).chain(std::iter::repeat_n(0.0, zeros)).collect()
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[5.0], 0.75), 5.0);
        assert_eq!(quantile(&[0.0, 10.0], 0.75), 7.5);
    }

    #[test]
    fn window_is_bounded() {
        let mut w = ReturnWindow::new(3);
        for r in 0..5 {
            w.push(r as f64);
        }
        assert_eq!(w.iter().copied().collect::<Vec<_>>(), vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn short_window_never_fires() {
        let w: ReturnWindow = std::iter::repeat_n(100.0, 29).collect();
        assert!(!switch_gate(&w, &GateConfig::new(0, 0.5, 0.0)).fire);
    }

    #[test]
    fn refit_boundaries() {
        let cfg = RefitConfig::default();
        assert!(refit_gate(1250, 1000, 5, 4, 1000, &cfg));
        assert!(!refit_gate(1249, 1000, 5, 4, 1000, &cfg));
        assert!(!refit_gate(5000, 1000, 4, 4, 1000, &cfg));
    }

    #[test]
    fn mixed_window_counts() {
        let w = window(20, 10);
        let d = switch_gate(&w, &GateConfig::new(0, 0.5, 0.0));
        assert_eq!(d.g_t, 20);
    }
}
