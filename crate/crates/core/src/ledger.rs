//! Append-only time/energy record of everything a sub-array executes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::charge::Ns;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Write,
    Read,
    Refresh,
    Not,
    Nor,
}

impl OpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::Write => "write",
            OpKind::Read => "read",
            OpKind::Refresh => "refresh",
            OpKind::Not => "not",
            OpKind::Nor => "nor",
        }
    }

    pub fn is_logic(self) -> bool {
        matches!(self, OpKind::Not | OpKind::Nor)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "write" => OpKind::Write,
            "read" => OpKind::Read,
            "refresh" => OpKind::Refresh,
            "not" => OpKind::Not,
            "nor" => OpKind::Nor,
            other => return Err(Error::Usage(format!("unknown op kind `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry<S> {
    pub start_ns: Ns,
    pub duration_ns: Ns,
    pub op: OpKind,
    /// Rows touched; for logic ops the inputs come first and the output last.
    pub rows: Vec<usize>,
    pub active_columns: usize,
    pub energy_fj: S,
}

impl<S: Scalar> LedgerEntry<S> {
    pub fn end_ns(&self) -> Ns {
        self.start_ns + self.duration_ns
    }

    pub fn energy_per_column(&self) -> S {
        if self.active_columns == 0 {
            S::zero()
        } else {
            self.energy_fj / S::ns(self.active_columns as u64)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventLedger<S> {
    entries: Vec<LedgerEntry<S>>,
}

pub const LEDGER_CSV_HEADER: &str = "start_ns,duration_ns,op,rows,energy_fj";

impl<S: Scalar> EventLedger<S> {
    pub fn new() -> Self {
        EventLedger { entries: Vec::new() }
    }

    /// Appends an entry. Entries must arrive in start-time order.
    pub fn push(&mut self, entry: LedgerEntry<S>) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if entry.start_ns < last.start_ns {
                return Err(Error::Usage(format!(
                    "ledger entry at {} ns precedes previous entry at {} ns",
                    entry.start_ns, last.start_ns
                )));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[LedgerEntry<S>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_energy_fj(&self) -> S {
        self.entries.iter().map(|e| e.energy_fj).sum()
    }

    pub fn start_ns(&self) -> Ns {
        self.entries.first().map_or(0, |e| e.start_ns)
    }

    /// Latest end time over all entries.
    pub fn end_ns(&self) -> Ns {
        self.entries.iter().map(LedgerEntry::end_ns).max().unwrap_or(0)
    }

    pub fn busy_ns(&self) -> Ns {
        self.entries.iter().map(|e| e.duration_ns).sum()
    }

    pub fn busy_ns_of(&self, kind: OpKind) -> Ns {
        self.entries
            .iter()
            .filter(|e| e.op == kind)
            .map(|e| e.duration_ns)
            .sum()
    }

    pub fn count_of(&self, kind: OpKind) -> usize {
        self.entries.iter().filter(|e| e.op == kind).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(LEDGER_CSV_HEADER);
        out.push('\n');
        for e in &self.entries {
            let rows: Vec<String> = e.rows.iter().map(usize::to_string).collect();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.start_ns,
                e.duration_ns,
                e.op,
                rows.join(" "),
                e.energy_fj
            ));
        }
        out
    }

    /// Parses the CSV written by [`EventLedger::to_csv`]. The column count of
    /// each entry is not part of the file and is recorded as zero.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == LEDGER_CSV_HEADER => {}
            _ => return Err(Error::Usage(format!("ledger header must be `{LEDGER_CSV_HEADER}`"))),
        }
        let bad = |n: usize, what: &str| Error::Usage(format!("ledger line {}: {what}", n + 1));
        let mut ledger = EventLedger::new();
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(bad(n, "expected 5 fields"));
            }
            let start_ns = fields[0].trim().parse().map_err(|_| bad(n, "bad start_ns"))?;
            let duration_ns = fields[1].trim().parse().map_err(|_| bad(n, "bad duration_ns"))?;
            let op = fields[2].trim().parse().map_err(|_| bad(n, "bad op"))?;
            let rows = fields[3]
                .split_whitespace()
                .map(|r| r.parse().map_err(|_| bad(n, "bad row")))
                .collect::<Result<Vec<usize>>>()?;
            let energy: f64 = fields[4].trim().parse().map_err(|_| bad(n, "bad energy_fj"))?;
            if !energy.is_finite() || energy < 0.0 {
                return Err(bad(n, "energy must be finite and non-negative"));
            }
            ledger
                .push(LedgerEntry {
                    start_ns,
                    duration_ns,
                    op,
                    rows,
                    active_columns: 0,
                    energy_fj: S::of(energy),
                })
                .map_err(|e| bad(n, &e.to_string()))?;
        }
        Ok(ledger)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(start: Ns, op: OpKind, e: f64) -> LedgerEntry<f64> {
        LedgerEntry {
            start_ns: start,
            duration_ns: 3,
            op,
            rows: vec![0, 1, 2],
            active_columns: 64,
            energy_fj: e,
        }
    }

    #[test]
    fn rejects_out_of_order() {
        let mut l = EventLedger::new();
        l.push(entry(10, OpKind::Nor, 1.0)).unwrap();
        assert!(l.push(entry(5, OpKind::Nor, 1.0)).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut l = EventLedger::new();
        l.push(entry(0, OpKind::Not, 13.4 * 64.0)).unwrap();
        l.push(entry(3, OpKind::Nor, 13.5 * 64.0)).unwrap();
        let text = l.to_csv();
        assert!(text.starts_with("start_ns,duration_ns,op,rows,energy_fj\n0,3,not,0 1 2,857.6\n"));
        let back = EventLedger::<f64>::from_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.total_energy_fj(), l.total_energy_fj());
        assert_eq!(back.end_ns(), 6);
    }

    #[test]
    fn corrupt_csv() {
        assert!(EventLedger::<f64>::from_csv("nope\n").is_err());
        let t = format!("{LEDGER_CSV_HEADER}\n0,3,xor,1,2\n");
        assert!(EventLedger::<f64>::from_csv(&t).is_err());
        let t = format!("{LEDGER_CSV_HEADER}\n0,3,not\n");
        assert!(EventLedger::<f64>::from_csv(&t).is_err());
    }
}
