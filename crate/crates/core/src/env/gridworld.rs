//! CliffWalking and FrozenLake transition tables, following the Gymnasium
//! definitions of both environments.

use super::Outcome;

pub const CLIFF_ROWS: usize = 4;
pub const CLIFF_COLS: usize = 12;
pub const CLIFF_START: usize = 36;
pub const CLIFF_GOAL: usize = 47;

pub const FROZEN_4X4: [&str; 4] = ["SFFF", "FHFH", "FFFH", "HFFG"];
pub const FROZEN_8X8: [&str; 8] =
    ["SFFFFFFF", "FFFFFFFF", "FFFHFFFF", "FFFFFHFF", "FFFHFFFF", "FHHFFFHF", "FHFFHFHF", "FFFHFFFG"];

pub fn cliff_is_cliff(index: usize) -> bool {
    let (row, col) = (index / CLIFF_COLS, index % CLIFF_COLS);
    row == CLIFF_ROWS - 1 && (1..CLIFF_COLS - 1).contains(&col)
}

/// Actions: 0 up, 1 right, 2 down, 3 left. Off-grid moves are clamped.
pub fn cliff_outcomes(index: usize, action: usize) -> Vec<Outcome> {
    let (row, col) = ((index / CLIFF_COLS) as isize, (index % CLIFF_COLS) as isize);
    let (dr, dc) = match action {
        0 => (-1, 0),
        1 => (0, 1),
        2 => (1, 0),
        _ => (0, -1),
    };
    let nr = (row + dr).clamp(0, CLIFF_ROWS as isize - 1) as usize;
    let nc = (col + dc).clamp(0, CLIFF_COLS as isize - 1) as usize;
    let next = nr * CLIFF_COLS + nc;
    if cliff_is_cliff(next) {
        return vec![Outcome { prob: 1.0, next: CLIFF_START, reward: -100.0, terminated: false }];
    }
    vec![Outcome { prob: 1.0, next, reward: -1.0, terminated: next == CLIFF_GOAL }]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrozenMap {
    rows: &'static [&'static str],
}

impl FrozenMap {
    pub fn four() -> Self {
        Self { rows: &FROZEN_4X4 }
    }

    pub fn eight() -> Self {
        Self { rows: &FROZEN_8X8 }
    }

    pub fn ncol(&self) -> usize {
        self.rows[0].len()
    }

    pub fn nrow(&self) -> usize {
        self.rows.len()
    }

    pub fn n_states(&self) -> usize {
        self.nrow() * self.ncol()
    }

    pub fn cell(&self, index: usize) -> u8 {
        self.rows[index / self.ncol()].as_bytes()[index % self.ncol()]
    }

    pub fn is_terminal(&self, index: usize) -> bool {
        matches!(self.cell(index), b'H' | b'G')
    }

    fn moved(&self, index: usize, action: usize) -> usize {
        let (mut row, mut col) = (index / self.ncol(), index % self.ncol());
        match action {
            0 => col = col.saturating_sub(1),
            1 => row = (row + 1).min(self.nrow() - 1),
            2 => col = (col + 1).min(self.ncol() - 1),
            _ => row = row.saturating_sub(1),
        }
        row * self.ncol() + col
    }

    /// Actions: 0 left, 1 down, 2 right, 3 up. On the slippery surface the
    /// intended move and both perpendicular moves each happen with
    /// probability 1/3; outcomes are listed separately even when two of
    /// them land on the same cell.
    pub fn outcomes(&self, index: usize, action: usize, slippery: bool) -> Vec<Outcome> {
        if self.is_terminal(index) {
            return vec![Outcome { prob: 1.0, next: index, reward: 0.0, terminated: true }];
        }
        let make = |a: usize, prob: f64| {
            let next = self.moved(index, a);
            let cell = self.cell(next);
            Outcome {
                prob,
                next,
                reward: if cell == b'G' { 1.0 } else { 0.0 },
                terminated: matches!(cell, b'G' | b'H'),
            }
        };
        if slippery {
            [(action + 3) % 4, action, (action + 1) % 4].into_iter().map(|a| make(a, 1.0 / 3.0)).collect()
        } else {
            vec![make(action, 1.0)]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cliff_start_is_bottom_left() {
        assert_eq!(CLIFF_START / CLIFF_COLS, 3);
        assert_eq!(CLIFF_START % CLIFF_COLS, 0);
    }

    #[test]
    fn stepping_into_cliff_resets() {
        let out = cliff_outcomes(CLIFF_START, 1);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].next, CLIFF_START);
        assert_eq!(out[0].reward, -100.0);
        assert!(!out[0].terminated);
    }

    #[test]
    fn cliff_goal_reached_from_above() {
        let out = cliff_outcomes(35, 2);
        assert_eq!(out[0].next, CLIFF_GOAL);
        assert!(out[0].terminated);
        assert_eq!(out[0].reward, -1.0);
    }

    #[test]
    fn frozen_hole_terminates_without_reward() {
        let map = FrozenMap::four();
        // state 1 moving down lands in the hole at 5
        let out = map.outcomes(1, 1, false);
        assert_eq!(out[0].next, 5);
        assert_eq!(out[0].reward, 0.0);
        assert!(out[0].terminated);
    }

    #[test]
    fn frozen_slippery_perpendiculars() {
        let map = FrozenMap::four();
        let out = map.outcomes(0, 2, true);
        let nexts: Vec<usize> = out.iter().map(|o| o.next).collect();
        // down, right, up from the corner
        assert_eq!(nexts, vec![4, 1, 0]);
    }
}
