//! Per-node SNR traces exported by an external network simulator.
//!
//! The file has a header row `node_id,peer_id,snr_db` and one row per
//! directed link, transmitter first. Node ids number the APs `0..B` and the
//! users `B..B+U` in scenario order, so `(ap, user)` rows are downlink and
//! `(user, ap)` rows are uplink.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{db_to_linear, rate};
use crate::scalar::{lit, Real};

pub const HEADER: [&str; 3] = ["node_id", "peer_id", "snr_db"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrRow {
    pub node_id: u32,
    pub peer_id: u32,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSnrTrace {
    pub source: String,
    pub rows: Vec<SnrRow>,
}

fn csv_error(source: &str, line: u64, reason: impl Into<String>) -> Error {
    Error::Csv {
        source_name: source.to_string(),
        line,
        reason: reason.into(),
    }
}

/// Parses trace text; `source` labels errors and the trace.
pub fn parse_snr_csv(text: &str, source: &str) -> Result<ExternalSnrTrace> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| csv_error(source, 1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(csv_error(
            source,
            1,
            format!(
                "expected header `{}`, found `{}`",
                HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            csv_error(source, line, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |k: usize| record.get(k).unwrap_or("");
        let id = |k: usize| {
            field(k)
                .parse::<u32>()
                .map_err(|_| csv_error(source, line, format!("{} `{}` is not a node id", HEADER[k], field(k))))
        };
        let snr_db = field(2)
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| csv_error(source, line, format!("snr_db `{}` is not a finite number", field(2))))?;
        rows.push(SnrRow {
            node_id: id(0)?,
            peer_id: id(1)?,
            snr_db,
        });
    }
    Ok(ExternalSnrTrace {
        source: source.to_string(),
        rows,
    })
}

pub fn import_ns3_snr_csv(path: &Path) -> Result<ExternalSnrTrace> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_snr_csv(&text, &path.display().to_string())
}

/// Serializes with the shortest round-tripping float format.
pub fn snr_csv_string(trace: &ExternalSnrTrace) -> String {
    let mut out = HEADER.join(",");
    out.push('\n');
    for r in &trace.rows {
        out.push_str(&format!("{},{},{}\n", r.node_id, r.peer_id, r.snr_db));
    }
    out
}

pub fn export_snr_csv(trace: &ExternalSnrTrace, path: &Path) -> Result<()> {
    std::fs::write(path, snr_csv_string(trace)).map_err(|e| Error::io(path, e))
}

/// Linear SNR per link, keyed `(user, ap)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSinr<T: Real> {
    pub n_aps: usize,
    pub n_users: usize,
    pub dl: BTreeMap<(usize, usize), T>,
    pub ul: BTreeMap<(usize, usize), T>,
}

impl<T: Real> ExternalSinr<T> {
    fn lookup(map: &BTreeMap<(usize, usize), T>, user: usize, ap: usize, band: &str) -> Result<T> {
        map.get(&(user, ap))
            .copied()
            .ok_or_else(|| Error::MissingChannel(format!("{band} SNR of user{user}/ap{ap} in trace")))
    }

    pub fn dl(&self, user: usize, ap: usize) -> Result<T> {
        Self::lookup(&self.dl, user, ap, "DL")
    }

    pub fn ul(&self, user: usize, ap: usize) -> Result<T> {
        Self::lookup(&self.ul, user, ap, "UL")
    }

    /// `rates[user][ap]`; links absent from the trace get rate 0.
    pub fn dl_rates(&self, bandwidth: T) -> Result<Vec<Vec<T>>> {
        (0..self.n_users)
            .map(|i| {
                (0..self.n_aps)
                    .map(|j| self.dl.get(&(i, j)).map_or(Ok(T::zero()), |s| rate(*s, bandwidth)))
                    .collect()
            })
            .collect()
    }
}

/// Maps trace node ids onto a scenario with `n_aps` APs and `n_users` users.
pub fn external_sinr<T: Real>(trace: &ExternalSnrTrace, n_aps: usize, n_users: usize) -> Result<ExternalSinr<T>> {
    let total = (n_aps + n_users) as u64;
    let unknown: BTreeSet<u32> = trace
        .rows
        .iter()
        .flat_map(|r| [r.node_id, r.peer_id])
        .filter(|id| u64::from(*id) >= total)
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownNodes(unknown.into_iter().collect()));
    }
    let mut out = ExternalSinr {
        n_aps,
        n_users,
        dl: BTreeMap::new(),
        ul: BTreeMap::new(),
    };
    let is_ap = |id: u32| (id as usize) < n_aps;
    for (k, r) in trace.rows.iter().enumerate() {
        let line = k as u64 + 2;
        let value = db_to_linear(lit::<T>(r.snr_db));
        let (map, key) = match (is_ap(r.node_id), is_ap(r.peer_id)) {
            (true, false) => (&mut out.dl, (r.peer_id as usize - n_aps, r.node_id as usize)),
            (false, true) => (&mut out.ul, (r.node_id as usize - n_aps, r.peer_id as usize)),
            _ => {
                return Err(csv_error(
                    &trace.source,
                    line,
                    format!("link {} -> {} must join an AP and a user", r.node_id, r.peer_id),
                ))
            }
        };
        if map.insert(key, value).is_some() {
            return Err(csv_error(
                &trace.source,
                line,
                format!("duplicate link {} -> {}", r.node_id, r.peer_id),
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "node_id,peer_id,snr_db\n0,2,10\n2,0,3.5\n1,3,-2.25\n3,1,0\n";

    #[test]
    fn parse_and_round_trip() {
        let t = parse_snr_csv(TEXT, "mem").unwrap();
        assert_eq!(t.rows.len(), 4);
        assert_eq!(
            t.rows[2],
            SnrRow {
                node_id: 1,
                peer_id: 3,
                snr_db: -2.25
            }
        );
        assert_eq!(snr_csv_string(&t), TEXT);
        assert_eq!(parse_snr_csv(&snr_csv_string(&t), "mem").unwrap(), t);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "node_id,peer_id,snr_db\n0,2,10\n2,0,abc\n";
        match parse_snr_csv(bad, "f.csv") {
            Err(Error::Csv { line, source_name, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(source_name, "f.csv");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_snr_csv("a,b,c\n", "h"), Err(Error::Csv { line: 1, .. })));
        assert!(matches!(
            parse_snr_csv("node_id,peer_id,snr_db\n0,2\n", "h"),
            Err(Error::Csv { line: 2, .. })
        ));
        assert!(matches!(
            parse_snr_csv("node_id,peer_id,snr_db\n-1,2,3\n", "h"),
            Err(Error::Csv { line: 2, .. })
        ));
        assert!(matches!(
            parse_snr_csv("node_id,peer_id,snr_db\n1,2,NaN\n", "h"),
            Err(Error::Csv { line: 2, .. })
        ));
    }

    #[test]
    fn maps_nodes_to_links() {
        let t = parse_snr_csv(TEXT, "mem").unwrap();
        let s = external_sinr::<f64>(&t, 2, 2).unwrap();
        assert!((s.dl(0, 0).unwrap() - 10.0).abs() < 1e-12);
        assert!((s.ul(0, 0).unwrap() - 10f64.powf(0.35)).abs() < 1e-12);
        assert!((s.dl(1, 1).unwrap() - 10f64.powf(-0.225)).abs() < 1e-12);
        assert!(s.dl(0, 1).is_err());
        let rates = s.dl_rates(1.0).unwrap();
        assert_eq!(rates[0][1], 0.0);
        assert!((rates[0][0] - 11f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_and_same_kind_links() {
        let t = parse_snr_csv("node_id,peer_id,snr_db\n0,9,1\n7,1,1\n", "m").unwrap();
        match external_sinr::<f64>(&t, 2, 2) {
            Err(Error::UnknownNodes(ids)) => assert_eq!(ids, vec![7, 9]),
            other => panic!("{other:?}"),
        }
        let t = parse_snr_csv("node_id,peer_id,snr_db\n0,2,1\n0,1,1\n", "m").unwrap();
        assert!(matches!(
            external_sinr::<f64>(&t, 2, 2),
            Err(Error::Csv { line: 3, .. })
        ));
        let t = parse_snr_csv("node_id,peer_id,snr_db\n0,2,1\n0,2,2\n", "m").unwrap();
        assert!(external_sinr::<f64>(&t, 2, 2).is_err());
    }

    #[test]
    fn linear_three_gives_two_bits() {
        let t = parse_snr_csv(&format!("node_id,peer_id,snr_db\n0,1,{}\n", 10.0 * 3f64.log10()), "m").unwrap();
        let s = external_sinr::<f64>(&t, 1, 1).unwrap();
        let r = rate(s.dl(0, 0).unwrap(), 2.16e9).unwrap();
        assert!((r - 2.0 * 2.16e9).abs() < 1e-3);
    }
}
