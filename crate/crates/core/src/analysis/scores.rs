use std::collections::HashMap;
use std::fmt::Write;

use crate::error::{Error, ParseError, Result};

/// `f` is sampled at `x = i / 100` for `i = 0..=100`.
pub const SCORE_GRID_POINTS: usize = 101;

/// Raw scores, one per (game, algorithm), stored game-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    games: Vec<String>,
    algorithms: Vec<String>,
    raw: Vec<f64>,
}

impl ScoreTable {
    pub fn new(games: Vec<String>, algorithms: Vec<String>, raw: Vec<f64>) -> Result<Self> {
        if games.is_empty() {
            return Err(Error::Domain("score table has no games".into()));
        }
        if algorithms.len() < 2 {
            return Err(Error::Domain("normalisation needs at least 2 algorithms".into()));
        }
        if raw.len() != games.len() * algorithms.len() {
            return Err(Error::Dimension(format!(
                "{} scores for {} games and {} algorithms",
                raw.len(),
                games.len(),
                algorithms.len()
            )));
        }
        for (kind, names) in [("game", &games), ("algorithm", &algorithms)] {
            let mut seen = HashMap::new();
            for n in names {
                if seen.insert(n.as_str(), ()).is_some() {
                    return Err(Error::Domain(format!("duplicate {kind} '{n}'")));
                }
            }
        }
        if let Some(v) = raw.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite score {v}")));
        }
        Ok(Self { games, algorithms, raw })
    }

    /// Reads `game,algorithm,score` CSV. Games and algorithms keep their
    /// order of first appearance; every combination must occur exactly once.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| csv_error(&e, 1))?.clone();
        if header.iter().collect::<Vec<_>>() != ["game", "algorithm", "score"] {
            return Err(ParseError::new(1, "expected header 'game,algorithm,score'").into());
        }
        let mut games = Vec::new();
        let mut algorithms = Vec::new();
        let mut game_index = HashMap::new();
        let mut alg_index = HashMap::new();
        let mut cells: HashMap<(usize, usize), f64> = HashMap::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_error(&e, 0))?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let game = record.get(0).unwrap_or_default();
            let alg = record.get(1).unwrap_or_default();
            if game.is_empty() || alg.is_empty() {
                return Err(ParseError::new(line, "empty game or algorithm name").into());
            }
            let score: f64 = record
                .get(2)
                .unwrap_or_default()
                .parse()
                .map_err(|_| ParseError::new(line, format!("bad score '{}'", record.get(2).unwrap_or_default())))?;
            if !score.is_finite() {
                return Err(ParseError::new(line, "score must be finite").into());
            }
            let g = *game_index.entry(game.to_string()).or_insert_with(|| {
                games.push(game.to_string());
                games.len() - 1
            });
            let a = *alg_index.entry(alg.to_string()).or_insert_with(|| {
                algorithms.push(alg.to_string());
                algorithms.len() - 1
            });
            if cells.insert((g, a), score).is_some() {
                return Err(ParseError::new(line, format!("duplicate row for game '{game}', algorithm '{alg}'")).into());
            }
        }
        let mut raw = Vec::with_capacity(games.len() * algorithms.len());
        for (g, game) in games.iter().enumerate() {
            for (a, alg) in algorithms.iter().enumerate() {
                match cells.get(&(g, a)) {
                    Some(&v) => raw.push(v),
                    None => return Err(Error::Domain(format!("no score for game '{game}', algorithm '{alg}'"))),
                }
            }
        }
        Self::new(games, algorithms, raw)
    }

    pub fn games(&self) -> &[String] {
        &self.games
    }

    pub fn algorithms(&self) -> &[String] {
        &self.algorithms
    }

    pub fn raw(&self, game: usize, algorithm: usize) -> f64 {
        self.raw[game * self.algorithms.len() + algorithm]
    }
}

fn csv_error(e: &csv::Error, fallback_line: usize) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line() as usize);
    ParseError::new(line, e.to_string()).into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub games: Vec<String>,
    pub algorithms: Vec<String>,
    /// Normalised scores, game-major.
    pub z: Vec<f64>,
    /// Games where every algorithm scored the same; all get `z = 1`.
    pub degenerate: Vec<bool>,
    pub grid: Vec<f64>,
    /// `f[a][i]`: fraction of games with `z >= grid[i]`.
    pub f: Vec<Vec<f64>>,
}

impl ScoreReport {
    pub fn z(&self, game: usize, algorithm: usize) -> f64 {
        self.z[game * self.algorithms.len() + algorithm]
    }

    /// `f_a(x)` at an arbitrary threshold.
    pub fn f_at(&self, algorithm: usize, x: f64) -> f64 {
        let n = self.games.len();
        let count = (0..n).filter(|&g| self.z(g, algorithm) >= x).count();
        count as f64 / n as f64
    }

    /// `algorithm,x,f` rows, algorithms in table order.
    pub fn f_csv(&self) -> String {
        let mut out = String::from("algorithm,x,f\n");
        for (a, name) in self.algorithms.iter().enumerate() {
            for (x, f) in self.grid.iter().zip(&self.f[a]) {
                writeln!(out, "{name},{x},{f}").unwrap();
            }
        }
        out
    }

    /// `game,algorithm,z,degenerate` rows.
    pub fn z_csv(&self) -> String {
        let mut out = String::from("game,algorithm,z,degenerate\n");
        for (g, game) in self.games.iter().enumerate() {
            for (a, alg) in self.algorithms.iter().enumerate() {
                writeln!(out, "{game},{alg},{},{}", self.z(g, a), self.degenerate[g]).unwrap();
            }
        }
        out
    }
}

/// Per-game min-max normalisation and the distribution `f_a(x)`, whose
/// divisor is the number of games in the table.
pub fn inter_algorithm_scores(table: &ScoreTable) -> ScoreReport {
    let na = table.algorithms.len();
    let mut z = Vec::with_capacity(table.raw.len());
    let mut degenerate = Vec::with_capacity(table.games.len());
    for row in table.raw.chunks(na) {
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let flat = hi - lo == 0.0;
        degenerate.push(flat);
        z.extend(row.iter().map(|&v| if flat { 1.0 } else { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) }));
    }
    let grid: Vec<f64> = (0..SCORE_GRID_POINTS).map(|i| i as f64 / 100.0).collect();
    let mut report = ScoreReport {
        games: table.games.clone(),
        algorithms: table.algorithms.clone(),
        z,
        degenerate,
        grid,
        f: Vec::new(),
    };
    report.f = (0..na)
        .map(|a| report.grid.iter().map(|&x| report.f_at(a, x)).collect())
        .collect();
    report
}
