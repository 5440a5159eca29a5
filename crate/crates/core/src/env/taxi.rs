//! Taxi: 5x5 grid, four pickup locations, 500 encoded states.

use super::Outcome;

const MAP: [&str; 7] =
    ["+---------+", "|R: | : :G|", "| : | : : |", "| : : : : |", "| | : | : |", "|Y| : |B: |", "+---------+"];

pub const LOCS: [(usize, usize); 4] = [(0, 0), (0, 4), (4, 0), (4, 3)];
pub const N_STATES: usize = 500;
pub const N_ACTIONS: usize = 6;
/// Passenger index meaning "inside the taxi".
pub const IN_TAXI: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaxiState {
    pub row: usize,
    pub col: usize,
    pub passenger: usize,
    pub destination: usize,
}

pub fn encode(s: TaxiState) -> usize {
    ((s.row * 5 + s.col) * 5 + s.passenger) * 4 + s.destination
}

pub fn decode(mut index: usize) -> TaxiState {
    let destination = index % 4;
    index /= 4;
    let passenger = index % 5;
    index /= 5;
    let col = index % 5;
    let row = index / 5;
    TaxiState { row, col, passenger, destination }
}

/// A delivered passenger sits at its destination; nothing else reaches such a state.
pub fn is_terminal(index: usize) -> bool {
    let s = decode(index);
    s.passenger == s.destination
}

/// Valid episode starts: passenger waiting at a pickup location that is not its destination.
pub fn initial_states() -> Vec<usize> {
    (0..N_STATES)
        .filter(|&i| {
            let s = decode(i);
            s.passenger < IN_TAXI && s.passenger != s.destination
        })
        .collect()
}

fn map_at(row: usize, col: usize) -> u8 {
    MAP[row].as_bytes()[col]
}

/// Actions: 0 south, 1 north, 2 east, 3 west, 4 pickup, 5 dropoff.
pub fn outcomes(index: usize, action: usize) -> Vec<Outcome> {
    if is_terminal(index) {
        return vec![Outcome { prob: 1.0, next: index, reward: 0.0, terminated: true }];
    }
    let s = decode(index);
    let mut n = s;
    let mut reward = -1.0;
    let mut terminated = false;
    let here = (s.row, s.col);
    match action {
        0 => n.row = (s.row + 1).min(4),
        1 => n.row = s.row.saturating_sub(1),
        2 => {
            if map_at(1 + s.row, 2 * s.col + 2) == b':' {
                n.col = (s.col + 1).min(4);
            }
        }
        3 => {
            if map_at(1 + s.row, 2 * s.col) == b':' {
                n.col = s.col.saturating_sub(1);
            }
        }
        4 => {
            if s.passenger < IN_TAXI && here == LOCS[s.passenger] {
                n.passenger = IN_TAXI;
            } else {
                reward = -10.0;
            }
        }
        _ => {
            if here == LOCS[s.destination] && s.passenger == IN_TAXI {
                n.passenger = s.destination;
                terminated = true;
                reward = 20.0;
            } else if s.passenger == IN_TAXI && LOCS.contains(&here) {
                n.passenger = LOCS.iter().position(|&l| l == here).unwrap();
            } else {
                reward = -10.0;
            }
        }
    }
    vec![Outcome { prob: 1.0, next: encode(n), reward, terminated }]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_formula_roundtrip() {
        for i in 0..N_STATES {
            assert_eq!(encode(decode(i)), i);
        }
        assert_eq!(decode(0), TaxiState { row: 0, col: 0, passenger: 0, destination: 0 });
    }

    #[test]
    fn three_hundred_starts() {
        assert_eq!(initial_states().len(), 300);
    }

    #[test]
    fn walls_block_east_from_r() {
        // R is at (0,0); the wall after column 1 blocks (0,1) -> (0,2)
        let s = encode(TaxiState { row: 0, col: 1, passenger: 2, destination: 0 });
        let out = outcomes(s, 2);
        assert_eq!(decode(out[0].next).col, 1);
        let s = encode(TaxiState { row: 0, col: 0, passenger: 2, destination: 0 });
        assert_eq!(decode(outcomes(s, 2)[0].next).col, 1);
    }

    #[test]
    fn pickup_and_dropoff() {
        let s = encode(TaxiState { row: 0, col: 0, passenger: 0, destination: 1 });
        let picked = outcomes(s, 4)[0];
        assert_eq!(decode(picked.next).passenger, IN_TAXI);
        assert_eq!(picked.reward, -1.0);
        let at_g = encode(TaxiState { row: 0, col: 4, passenger: IN_TAXI, destination: 1 });
        let dropped = outcomes(at_g, 5)[0];
        assert!(dropped.terminated);
        assert_eq!(dropped.reward, 20.0);
        assert!(is_terminal(dropped.next));
        // illegal pickup
        assert_eq!(outcomes(at_g, 4)[0].reward, -10.0);
    }
}
