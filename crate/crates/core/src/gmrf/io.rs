//! Plain-text inputs: adjacency as `i j` edge pairs and observations as
//! `t y_t [n_t]` lines, both 1-based. Blank lines and `#` comments are
//! skipped.

use super::ObsData;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GmrfIoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(k, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then(|| (k + 1, l.split_whitespace().collect()))
    })
}

fn field<T: std::str::FromStr>(line: usize, s: &str, what: &str) -> Result<T, GmrfIoError> {
    s.parse().map_err(|_| GmrfIoError::Parse { line, message: format!("bad {what} {s:?}") })
}

fn index(line: usize, s: &str) -> Result<usize, GmrfIoError> {
    let i: usize = field(line, s, "index")?;
    if i == 0 {
        return Err(GmrfIoError::Parse { line, message: "indices are 1-based".into() });
    }
    Ok(i - 1)
}

/// Undirected neighbor lists. The number of sites is the largest index seen,
/// or `num_sites` when given.
pub fn parse_adjacency(text: &str, num_sites: Option<usize>) -> Result<Vec<Vec<usize>>, GmrfIoError> {
    let mut edges = Vec::new();
    for (line, f) in content_lines(text) {
        if f.len() != 2 {
            return Err(GmrfIoError::Parse { line, message: "expected two indices".into() });
        }
        let (i, j) = (index(line, f[0])?, index(line, f[1])?);
        if i == j {
            return Err(GmrfIoError::Parse { line, message: format!("self loop at {}", i + 1) });
        }
        edges.push((line, i, j));
    }
    let seen = edges.iter().map(|&(_, i, j)| i.max(j) + 1).max().unwrap_or(0);
    let n = num_sites.unwrap_or(seen);
    let mut adj = vec![Vec::new(); n];
    for (line, i, j) in edges {
        if i.max(j) >= n {
            return Err(GmrfIoError::Parse { line, message: format!("index beyond {n} sites") });
        }
        adj[i].push(j);
        adj[j].push(i);
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    Ok(adj)
}

/// Observations; lines without a trial count use `default_trials`. Every
/// site `1..=T` must appear exactly once.
pub fn parse_observations(text: &str, default_trials: u32) -> Result<ObsData, GmrfIoError> {
    let mut rows: Vec<Option<(f64, u32)>> = Vec::new();
    for (line, f) in content_lines(text) {
        if !(2..=3).contains(&f.len()) {
            return Err(GmrfIoError::Parse { line, message: "expected `t y [n]`".into() });
        }
        let t = index(line, f[0])?;
        let y: f64 = field(line, f[1], "observation")?;
        let n = match f.get(2) {
            Some(s) => field(line, s, "trial count")?,
            None => default_trials,
        };
        if rows.len() <= t {
            rows.resize(t + 1, None);
        }
        if rows[t].replace((y, n)).is_some() {
            return Err(GmrfIoError::Parse { line, message: format!("site {} repeated", t + 1) });
        }
    }
    let mut y = Vec::with_capacity(rows.len());
    let mut trials = Vec::with_capacity(rows.len());
    for (t, r) in rows.into_iter().enumerate() {
        let (yt, nt) = r.ok_or_else(|| GmrfIoError::Parse { line: 0, message: format!("site {} missing", t + 1) })?;
        y.push(yt);
        trials.push(nt);
    }
    Ok(ObsData { y, trials })
}

pub fn read_adjacency(path: &Path, num_sites: Option<usize>) -> Result<Vec<Vec<usize>>, GmrfIoError> {
    parse_adjacency(&std::fs::read_to_string(path)?, num_sites)
}

pub fn read_observations(path: &Path, default_trials: u32) -> Result<ObsData, GmrfIoError> {
    parse_observations(&std::fs::read_to_string(path)?, default_trials)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjacency_round_trip() {
        let adj = parse_adjacency("# path\n1 2\n2 3\n\n3 2\n", None).unwrap();
        assert_eq!(adj, vec![vec![1], vec![0, 2], vec![1]]);
        assert_eq!(parse_adjacency("1 2", Some(4)).unwrap().len(), 4);
        assert!(parse_adjacency("0 1", None).is_err());
        assert!(parse_adjacency("2 2", None).is_err());
    }

    #[test]
    fn observations_with_and_without_trials() {
        let d = parse_observations("2 3 5\n1 4\n", 10).unwrap();
        assert_eq!(d.y, vec![4.0, 3.0]);
        assert_eq!(d.trials, vec![10, 5]);
        assert!(parse_observations("1 2\n3 1\n", 10).is_err());
        assert!(parse_observations("1 2\n1 1\n", 10).is_err());
    }
}
