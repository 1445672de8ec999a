use std::collections::BTreeMap;

use serde::Serialize;

use crate::ingest::{int_cell, Cells, IngestError, Record};
use crate::model::{OccCode, StateCode};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TruthCell {
    pub employed: u64,
    /// Unemployed workers whose last job was in this occupation.
    pub unemployed: u64,
    /// Workers displaced from this occupation during the month.
    pub displaced: u64,
}

/// One worker in one month.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkerMonth {
    pub state: StateCode,
    pub year: i32,
    pub month: u8,
    /// Current occupation, or the last one held if unemployed.
    pub occ: OccCode,
    pub employed: bool,
    pub displaced: bool,
}

pub type TruthKey = (StateCode, i32, u8, OccCode);

/// Worker-month counts by (state, year, month, occupation). Workers of one
/// cell are interchangeable, so counts are a lossless summary of the
/// individual records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MicroTruth {
    pub cells: BTreeMap<TruthKey, TruthCell>,
}

impl MicroTruth {
    pub fn from_worker_months(records: impl IntoIterator<Item = WorkerMonth>) -> Self {
        let mut truth = MicroTruth::default();
        for w in records {
            let c = truth
                .cells
                .entry((w.state, w.year, w.month, w.occ))
                .or_default();
            if w.employed {
                c.employed += 1;
            } else {
                c.unemployed += 1;
            }
            if w.displaced {
                c.displaced += 1;
            }
        }
        truth
    }

    /// Adds a block of identical worker-months.
    pub fn record(&mut self, key: TruthKey, cell: TruthCell) {
        let c = self.cells.entry(key).or_default();
        c.employed += cell.employed;
        c.unemployed += cell.unemployed;
        c.displaced += cell.displaced;
    }

    /// Counts for `occ` in a state-month. A major-group code sums its
    /// detailed occupations.
    pub fn counts(&self, state: StateCode, year: i32, month: u8, occ: OccCode) -> TruthCell {
        let mut total = TruthCell::default();
        let lo = (state, year, month, occ.major());
        for (k, c) in self.cells.range(lo..) {
            if (k.0, k.1, k.2) != (state, year, month) || k.3.major() != occ.major() {
                break;
            }
            if occ.is_major() || k.3 == occ {
                total.employed += c.employed;
                total.unemployed += c.unemployed;
                total.displaced += c.displaced;
            }
        }
        total
    }

    /// Unemployed workers last employed in `occ` divided by all labor-force
    /// members whose current or last occupation is `occ`. `None` when that
    /// group is empty.
    pub fn oracle_risk(&self, state: StateCode, year: i32, month: u8, occ: OccCode) -> Option<f64> {
        let c = self.counts(state, year, month, occ);
        let lf = c.employed + c.unemployed;
        (lf > 0).then(|| c.unemployed as f64 / lf as f64)
    }

    /// Major-group rows for the truth file.
    pub fn major_rows(&self) -> Vec<TruthRow> {
        let mut agg: BTreeMap<TruthKey, TruthCell> = BTreeMap::new();
        for (&(s, y, m, o), c) in &self.cells {
            let a = agg.entry((s, y, m, o.major())).or_default();
            a.employed += c.employed;
            a.unemployed += c.unemployed;
            a.displaced += c.displaced;
        }
        agg.into_iter()
            .map(|((state, year, month, occ), c)| TruthRow {
                state,
                year,
                month,
                occ,
                employed: c.employed,
                unemployed: c.unemployed,
            })
            .collect()
    }

    /// Rebuilds major-level truth from truth-file rows.
    pub fn from_rows(rows: &[TruthRow]) -> Self {
        let mut t = MicroTruth::default();
        for r in rows {
            t.record(
                (r.state, r.year, r.month, r.occ),
                TruthCell {
                    employed: r.employed,
                    unemployed: r.unemployed,
                    displaced: 0,
                },
            );
        }
        t
    }

    /// (state, year, month) cells present.
    pub fn state_months(&self) -> Vec<(StateCode, i32, u8)> {
        let mut out: Vec<_> = self.cells.keys().map(|k| (k.0, k.1, k.2)).collect();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthRow {
    pub state: StateCode,
    pub year: i32,
    pub month: u8,
    pub occ: OccCode,
    pub employed: u64,
    pub unemployed: u64,
}

impl Record for TruthRow {
    type Key = TruthKey;

    fn from_cells(c: &Cells<'_>) -> Result<Self, IngestError> {
        Ok(TruthRow {
            state: c.state(0)?,
            year: c.small(1)?,
            month: c.small(2)?,
            occ: c.occ(3)?,
            employed: c.small(4)?,
            unemployed: c.small(5)?,
        })
    }

    fn to_cells(&self) -> Vec<String> {
        vec![
            self.state.to_string(),
            self.year.to_string(),
            self.month.to_string(),
            self.occ.to_string(),
            int_cell(self.employed as i64),
            int_cell(self.unemployed as i64),
        ]
    }

    fn key(&self) -> TruthKey {
        (self.state, self.year, self.month, self.occ)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_count_example() {
        let s: StateCode = "AK".parse().unwrap();
        let a: OccCode = "11-1011".parse().unwrap();
        let b: OccCode = "13-1011".parse().unwrap();
        let mut workers = Vec::new();
        for i in 0..5 {
            workers.push(WorkerMonth {
                state: s,
                year: 2010,
                month: 1,
                occ: a,
                employed: i >= 2,
                displaced: false,
            });
        }
        for _ in 0..5 {
            workers.push(WorkerMonth {
                state: s,
                year: 2010,
                month: 1,
                occ: b,
                employed: true,
                displaced: false,
            });
        }
        let t = MicroTruth::from_worker_months(workers);
        assert_eq!(t.oracle_risk(s, 2010, 1, a), Some(0.4));
        assert_eq!(t.oracle_risk(s, 2010, 1, a.major()), Some(0.4));
        assert_eq!(t.oracle_risk(s, 2010, 1, b), Some(0.0));
        assert_eq!(t.oracle_risk(s, 2010, 2, b), None);
    }

    #[test]
    fn major_rows_roundtrip() {
        let s: StateCode = "CA".parse().unwrap();
        let mut t = MicroTruth::default();
        for (o, e, u) in [("15-1011", 10, 1), ("15-2011", 30, 3), ("17-1011", 5, 0)] {
            t.record(
                (s, 2011, 3, o.parse().unwrap()),
                TruthCell {
                    employed: e,
                    unemployed: u,
                    displaced: 0,
                },
            );
        }
        let rows = t.major_rows();
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].employed, rows[0].unemployed), (40, 4));
        let back = MicroTruth::from_rows(&rows);
        let m: OccCode = "15".parse().unwrap();
        assert_eq!(
            back.oracle_risk(s, 2011, 3, m),
            t.oracle_risk(s, 2011, 3, m)
        );
    }
}
