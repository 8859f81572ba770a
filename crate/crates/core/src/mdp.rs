//! Finite MDPs and their line-oriented text format.
//!
//! State-action pairs are flattened as `x * n_actions + a` everywhere in
//! the crate; transition probabilities are stored as
//! `transitions[(x * n_actions + a) * n_states + x']`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, ParseError, Result};

/// Tolerance on transition row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
    absorbing: Vec<bool>,
    r_max: f64,
}

impl Mdp {
    /// Builds and validates an MDP. `transitions` is indexed
    /// `(x, a, x')` row-major, `rewards` is indexed `(x, a)`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        absorbing: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp(
                "state and action counts must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!("gamma {gamma} outside [0, 1)")));
        }
        let n_sa = n_states * n_actions;
        if transitions.len() != n_sa * n_states {
            return Err(Error::Dimension(format!(
                "transition tensor has {} entries, expected {}",
                transitions.len(),
                n_sa * n_states
            )));
        }
        if rewards.len() != n_sa {
            return Err(Error::Dimension(format!(
                "reward table has {} entries, expected {n_sa}",
                rewards.len()
            )));
        }
        for (sa, row) in transitions.chunks(n_states).enumerate() {
            let (x, a) = (sa / n_actions, sa % n_actions);
            if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
                return Err(Error::InvalidMdp(format!(
                    "transition ({x}, {a}) has invalid probability {p}"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidMdp(format!(
                    "transition row ({x}, {a}) sums to {sum}"
                )));
            }
        }
        if let Some(i) = rewards.iter().position(|r| !r.is_finite()) {
            return Err(Error::InvalidMdp(format!(
                "reward ({}, {}) is not finite",
                i / n_actions,
                i % n_actions
            )));
        }
        let mut flags = vec![false; n_states];
        for x in absorbing {
            if x >= n_states {
                return Err(Error::InvalidMdp(format!(
                    "absorbing state {x} out of range"
                )));
            }
            for a in 0..n_actions {
                let sa = x * n_actions + a;
                if transitions[sa * n_states + x] != 1.0 || rewards[sa] != 0.0 {
                    return Err(Error::InvalidMdp(format!(
                        "absorbing state {x} must self-loop with zero reward under every action"
                    )));
                }
            }
            flags[x] = true;
        }
        let r_max = rewards.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        Ok(Self {
            n_states,
            n_actions,
            gamma,
            transitions,
            rewards,
            absorbing: flags,
            r_max,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Number of flattened state-action pairs.
    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Largest absolute reward.
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn pair(&self, x: usize, a: usize) -> usize {
        x * self.n_actions + a
    }

    pub fn reward(&self, x: usize, a: usize) -> f64 {
        self.rewards[self.pair(x, a)]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// `P(. | x, a)` as a slice over next states.
    pub fn next_state_probs(&self, x: usize, a: usize) -> &[f64] {
        let start = self.pair(x, a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    pub fn prob(&self, x: usize, a: usize, next: usize) -> f64 {
        self.transitions[self.pair(x, a) * self.n_states + next]
    }

    pub fn is_absorbing(&self, x: usize) -> bool {
        self.absorbing[x]
    }

    pub fn absorbing_states(&self) -> impl Iterator<Item = usize> + '_ {
        self.absorbing
            .iter()
            .enumerate()
            .filter_map(|(x, &f)| f.then_some(x))
    }

    pub fn non_absorbing_states(&self) -> Vec<usize> {
        (0..self.n_states).filter(|&x| !self.absorbing[x]).collect()
    }

    /// Same dynamics and rewards with a different discount.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(
            self.n_states,
            self.n_actions,
            gamma,
            self.transitions.clone(),
            self.rewards.clone(),
            self.absorbing_states().collect::<Vec<_>>(),
        )
    }

    /// Parses the text format:
    ///
    /// ```text
    /// # comment
    /// mdp <n_states> <n_actions> <gamma>
    /// r <x> <a> <value>
    /// p <x> <a> <x'> <prob>
    /// absorbing <x>
    /// ```
    ///
    /// The header must come first. Missing rewards default to 0. Every
    /// non-absorbing `(x, a)` needs at least one `p` line; rows of
    /// absorbing states may be omitted and are filled with self-loops.
    pub fn parse(text: &str) -> Result<Self> {
        parse_text(text)
    }

    /// Writes the text format. Output is deterministic: header, then all
    /// rewards, then non-zero transitions, then absorbing declarations, each
    /// in flattened index order. Floats use the shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "mdp {} {} {}",
            self.n_states, self.n_actions, self.gamma
        );
        for x in 0..self.n_states {
            for a in 0..self.n_actions {
                let _ = writeln!(out, "r {x} {a} {}", self.reward(x, a));
            }
        }
        for x in 0..self.n_states {
            for a in 0..self.n_actions {
                for (y, &p) in self.next_state_probs(x, a).iter().enumerate() {
                    if p != 0.0 {
                        let _ = writeln!(out, "p {x} {a} {y} {p}");
                    }
                }
            }
        }
        for x in self.absorbing_states() {
            let _ = writeln!(out, "absorbing {x}");
        }
        out
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, ParseError> {
    let tok = tok.ok_or_else(|| ParseError::new(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| ParseError::new(line, format!("cannot parse {what} from {tok:?}")))
}

fn index(tok: Option<&str>, line: usize, what: &str, bound: usize) -> Result<usize, ParseError> {
    let v: usize = field(tok, line, what)?;
    if v >= bound {
        return Err(ParseError::new(
            line,
            format!("{what} {v} out of range (must be < {bound})"),
        ));
    }
    Ok(v)
}

fn finite(tok: Option<&str>, line: usize, what: &str) -> Result<f64, ParseError> {
    let v: f64 = field(tok, line, what)?;
    if !v.is_finite() {
        return Err(ParseError::new(line, format!("{what} must be finite")));
    }
    Ok(v)
}

fn parse_text(text: &str) -> Result<Mdp> {
    let mut header: Option<(usize, usize, f64)> = None;
    let mut rewards: Vec<Option<f64>> = Vec::new();
    let mut transitions: Vec<f64> = Vec::new();
    let mut seen_p: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    let mut absorbing: BTreeSet<usize> = BTreeSet::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let kw = toks.next().unwrap_or_default();
        if kw == "mdp" {
            if header.is_some() {
                return Err(ParseError::new(line, "duplicate mdp header").into());
            }
            let n_states: usize = field(toks.next(), line, "n_states")?;
            let n_actions: usize = field(toks.next(), line, "n_actions")?;
            let gamma = finite(toks.next(), line, "gamma")?;
            if n_states == 0 || n_actions == 0 {
                return Err(ParseError::new(line, "state and action counts must be positive").into());
            }
            let n_sa = n_states
                .checked_mul(n_actions)
                .and_then(|n| n.checked_mul(n_states).map(|m| (n, m)))
                .filter(|&(_, m)| m <= 1 << 24)
                .ok_or_else(|| ParseError::new(line, "MDP too large for dense representation"))?;
            header = Some((n_states, n_actions, gamma));
            rewards = vec![None; n_sa.0];
            transitions = vec![0.0; n_sa.1];
            if toks.next().is_some() {
                return Err(ParseError::new(line, "trailing tokens after header").into());
            }
            continue;
        }
        let Some((n_states, n_actions, _)) = header else {
            return Err(ParseError::new(line, "expected `mdp <n_states> <n_actions> <gamma>` header first").into());
        };
        match kw {
            "r" => {
                let x = index(toks.next(), line, "state", n_states)?;
                let a = index(toks.next(), line, "action", n_actions)?;
                let v = finite(toks.next(), line, "reward")?;
                let slot = &mut rewards[x * n_actions + a];
                if slot.is_some() {
                    return Err(ParseError::new(line, format!("duplicate reward for ({x}, {a})")).into());
                }
                *slot = Some(v);
            }
            "p" => {
                let x = index(toks.next(), line, "state", n_states)?;
                let a = index(toks.next(), line, "action", n_actions)?;
                let y = index(toks.next(), line, "next state", n_states)?;
                let p = finite(toks.next(), line, "probability")?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(ParseError::new(line, format!("probability {p} outside [0, 1]")).into());
                }
                if !seen_p.insert((x, a, y)) {
                    return Err(ParseError::new(line, format!("duplicate transition ({x}, {a}, {y})")).into());
                }
                transitions[(x * n_actions + a) * n_states + y] = p;
            }
            "absorbing" => {
                let x = index(toks.next(), line, "state", n_states)?;
                absorbing.insert(x);
            }
            other => {
                return Err(ParseError::new(line, format!("unknown directive {other:?}")).into());
            }
        }
        if toks.next().is_some() {
            return Err(ParseError::new(line, "trailing tokens").into());
        }
    }

    let (n_states, n_actions, gamma) =
        header.ok_or_else(|| ParseError::new(0, "missing mdp header"))?;
    let mut has_row = vec![false; n_states * n_actions];
    for &(x, a, _) in &seen_p {
        has_row[x * n_actions + a] = true;
    }
    for x in 0..n_states {
        for a in 0..n_actions {
            let sa = x * n_actions + a;
            if has_row[sa] {
                continue;
            }
            if absorbing.contains(&x) {
                transitions[sa * n_states + x] = 1.0;
            } else {
                return Err(Error::InvalidMdp(format!(
                    "no transitions given for ({x}, {a})"
                )));
            }
        }
    }
    let rewards = rewards.into_iter().map(|r| r.unwrap_or(0.0)).collect();
    Mdp::new(n_states, n_actions, gamma, transitions, rewards, absorbing)
}
