//! Deterministic baselines mapping prediction streams to behaviour decisions:
//! a sliding-window mean, an exponentially decayed accumulator, and the
//! ground-truth control.

use std::collections::VecDeque;

use thiserror::Error;

use crate::synth::{Activity, Behaviour, Session, N_ACTIVITIES};

/// Window length: 8 rows = four seconds of session time.
pub const WINDOW_LEN: usize = 8;
/// Decay of the exponential accumulator.
pub const DECAY: f64 = 0.9;

#[derive(Debug, Error)]
pub enum HeuristicsError {
    #[error("cannot decide on an all-zero aggregate")]
    ZeroAggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Window,
    Exponential,
}

impl Policy {
    pub fn token(self) -> &'static str {
        match self {
            Policy::Window => "window",
            Policy::Exponential => "exponential",
        }
    }

    pub fn from_token(s: &str) -> Option<Policy> {
        match s {
            "window" => Some(Policy::Window),
            "exponential" => Some(Policy::Exponential),
            _ => None,
        }
    }
}

/// Streaming state for one session under one policy.
#[derive(Debug, Clone)]
pub enum PolicyState {
    Window { ring: VecDeque<[f64; N_ACTIVITIES]> },
    Exponential { accumulator: Option<[f64; N_ACTIVITIES]> },
}

impl PolicyState {
    pub fn new(policy: Policy) -> PolicyState {
        match policy {
            Policy::Window => PolicyState::Window {
                ring: VecDeque::with_capacity(WINDOW_LEN),
            },
            Policy::Exponential => PolicyState::Exponential { accumulator: None },
        }
    }

    /// Feeds one row; emits the policy aggregate once available. The window
    /// policy stays silent until 8 rows have been observed.
    pub fn update(&mut self, row: &[f64; N_ACTIVITIES]) -> Option<[f64; N_ACTIVITIES]> {
        match self {
            PolicyState::Window { ring } => window_update(ring, row),
            PolicyState::Exponential { accumulator } => Some(exponential_update(accumulator, row)),
        }
    }
}

fn window_update(
    ring: &mut VecDeque<[f64; N_ACTIVITIES]>,
    row: &[f64; N_ACTIVITIES],
) -> Option<[f64; N_ACTIVITIES]> {
    if ring.len() == WINDOW_LEN {
        ring.pop_front();
    }
    ring.push_back(*row);
    if ring.len() < WINDOW_LEN {
        return None;
    }
    let mut mean = [0.0f64; N_ACTIVITIES];
    for r in ring.iter() {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= WINDOW_LEN as f64;
    }
    Some(mean)
}

fn exponential_update(
    accumulator: &mut Option<[f64; N_ACTIVITIES]>,
    row: &[f64; N_ACTIVITIES],
) -> [f64; N_ACTIVITIES] {
    let next = match accumulator {
        None => *row,
        Some(acc) => {
            let mut next = [0.0f64; N_ACTIVITIES];
            for ((n, a), v) in next.iter_mut().zip(acc.iter()).zip(row.iter()) {
                *n = DECAY * a + v;
            }
            next
        }
    };
    *accumulator = Some(next);
    next
}

/// Argmax over activities, then the activity-to-behaviour map. Ties resolve
/// to the lowest activity index.
pub fn decide(aggregate: &[f64; N_ACTIVITIES]) -> Result<Behaviour, HeuristicsError> {
    if aggregate.iter().all(|&v| v == 0.0) {
        return Err(HeuristicsError::ZeroAggregate);
    }
    let mut best = 0usize;
    for (i, &v) in aggregate.iter().enumerate().skip(1) {
        if v > aggregate[best] {
            best = i;
        }
    }
    Ok(Activity::from_index(best).unwrap().behaviour())
}

/// Control condition: the session's true behaviour, independent of predictions.
pub fn ground_truth_decision(session: &Session) -> Behaviour {
    session.behaviour()
}

/// Full 140-entry decision stream for one robot battery: one decision per
/// prediction timestep. Steps where the window policy has not yet filled emit
/// no-action.
pub fn decision_stream(rows: &[[f64; N_ACTIVITIES]], policy: Policy) -> Vec<Behaviour> {
    let mut state = PolicyState::new(policy);
    rows.iter()
        .map(|row| match state.update(row) {
            Some(agg) => decide(&agg).unwrap_or(Behaviour::NoAction),
            None => Behaviour::NoAction,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(i: usize) -> [f64; N_ACTIVITIES] {
        let mut row = [0.0; N_ACTIVITIES];
        row[i] = 1.0;
        row
    }

    fn uniform() -> [f64; N_ACTIVITIES] {
        [1.0 / N_ACTIVITIES as f64; N_ACTIVITIES]
    }

    #[test]
    fn window_silent_for_first_seven_rows() {
        let mut state = PolicyState::new(Policy::Window);
        for _ in 0..7 {
            assert!(state.update(&uniform()).is_none());
        }
        assert!(state.update(&uniform()).is_some());
    }

    #[test]
    fn window_of_identical_rows_returns_the_row() {
        let mut state = PolicyState::new(Policy::Window);
        let row = one_hot(2);
        let mut last = None;
        for _ in 0..8 {
            last = state.update(&row);
        }
        assert_eq!(last.unwrap(), row);
    }

    #[test]
    fn window_mixes_recent_rows() {
        // 4 one-hot(a1) then 4 one-hot(a4): mean has 0.5 at each.
        let mut state = PolicyState::new(Policy::Window);
        let mut out = None;
        for _ in 0..4 {
            out = state.update(&one_hot(0));
        }
        for _ in 0..4 {
            out = state.update(&one_hot(3));
        }
        let mean = out.unwrap();
        assert!((mean[0] - 0.5).abs() < 1e-12);
        assert!((mean[3] - 0.5).abs() < 1e-12);
        assert!(mean.iter().sum::<f64>() - 1.0 < 1e-12);
    }

    #[test]
    fn exponential_first_row_is_identity() {
        let mut state = PolicyState::new(Policy::Exponential);
        let row = one_hot(4);
        assert_eq!(state.update(&row).unwrap(), row);
    }

    #[test]
    fn exponential_two_rows_unroll() {
        let mut state = PolicyState::new(Policy::Exponential);
        let p = one_hot(1);
        let q = one_hot(5);
        state.update(&p);
        let out = state.update(&q).unwrap();
        for i in 0..N_ACTIVITIES {
            assert!((out[i] - (0.9 * p[i] + q[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn exponential_geometric_limit() {
        // Constant row p: accumulator -> p / (1 - 0.9) = 10 p, within 1% after 44 steps.
        let mut state = PolicyState::new(Policy::Exponential);
        let p = uniform();
        let mut out = [0.0; N_ACTIVITIES];
        for _ in 0..44 {
            out = state.update(&p).unwrap();
        }
        for i in 0..N_ACTIVITIES {
            let limit = 10.0 * p[i];
            assert!((out[i] - limit).abs() / limit < 0.01, "coord {i}: {}", out[i]);
        }
        // Bounded above by 10 per coordinate for simplex inputs.
        for _ in 0..1000 {
            out = state.update(&p).unwrap();
        }
        assert!(out.iter().all(|&v| v <= 10.0 + 1e-9));
    }

    #[test]
    fn decide_maps_through_activity_table() {
        let mut agg = [0.0; N_ACTIVITIES];
        agg[2] = 3.0; // a3 -> b1
        assert_eq!(decide(&agg).unwrap(), Behaviour::B1);
        let mut agg = [0.0; N_ACTIVITIES];
        agg[8] = 0.1; // a9 -> no action
        assert_eq!(decide(&agg).unwrap(), Behaviour::NoAction);
    }

    #[test]
    fn decide_ties_break_to_lowest_activity() {
        assert_eq!(decide(&uniform()).unwrap(), Behaviour::B1); // a1 wins
        assert!(matches!(
            decide(&[0.0; N_ACTIVITIES]),
            Err(HeuristicsError::ZeroAggregate)
        ));
    }

    #[test]
    fn decide_is_scale_invariant() {
        let agg = [0.01, 0.2, 0.05, 0.3, 0.1, 0.02, 0.12, 0.1, 0.1];
        let scaled: [f64; N_ACTIVITIES] = std::array::from_fn(|i| agg[i] * 731.5);
        assert_eq!(decide(&agg).unwrap(), decide(&scaled).unwrap());
    }

    #[test]
    fn noiseless_streams_decide_truth_everywhere() {
        for (idx, want) in [(0, Behaviour::B1), (4, Behaviour::B2), (7, Behaviour::NoAction)] {
            let rows = vec![one_hot(idx); 30];
            for policy in [Policy::Window, Policy::Exponential] {
                let mut state = PolicyState::new(policy);
                for row in &rows {
                    if let Some(agg) = state.update(row) {
                        assert_eq!(decide(&agg).unwrap(), want);
                    }
                }
            }
        }
    }

    #[test]
    fn ground_truth_ignores_predictions() {
        let corpus = crate::synth::generate_corpus(0);
        for s in &corpus {
            assert_eq!(ground_truth_decision(s), s.activity.behaviour());
        }
    }

    #[test]
    fn decision_stream_has_one_entry_per_row() {
        let rows = vec![uniform(); 140];
        let stream = decision_stream(&rows, Policy::Window);
        assert_eq!(stream.len(), 140);
        assert!(stream[..7].iter().all(|&b| b == Behaviour::NoAction));
    }
}
