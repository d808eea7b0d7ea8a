use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::StatsError;

/// One subject. `response = post_severity - pre_severity`, so improvement
/// is negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRecord {
    pub subject_id: String,
    pub age: f64,
    /// Binary code, 0 or 1.
    pub sex: f64,
    pub pre_severity: f64,
    pub post_severity: f64,
    pub response: f64,
    /// Postictal suppression index in percent, if recorded.
    pub psi: Option<f64>,
    pub mc_mean: f64,
    pub ac_mean: f64,
    pub edge_count: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    Age,
    Sex,
    PreSeverity,
    PostSeverity,
    Response,
    Psi,
    McMean,
    AcMean,
    EdgeCount,
}

impl Column {
    pub const ALL: [Column; 9] = [
        Column::Age,
        Column::Sex,
        Column::PreSeverity,
        Column::PostSeverity,
        Column::Response,
        Column::Psi,
        Column::McMean,
        Column::AcMean,
        Column::EdgeCount,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Column::Age => "age",
            Column::Sex => "sex",
            Column::PreSeverity => "pre_severity",
            Column::PostSeverity => "post_severity",
            Column::Response => "response",
            Column::Psi => "psi",
            Column::McMean => "mc_mean",
            Column::AcMean => "ac_mean",
            Column::EdgeCount => "edge_count",
        }
    }

    /// Age, sex, pre-treatment severity and edge count.
    pub fn default_covariates() -> Vec<Column> {
        vec![Column::Age, Column::Sex, Column::PreSeverity, Column::EdgeCount]
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Column {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Column::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| StatsError::UnknownColumn(s.to_string()))
    }
}

impl CohortRecord {
    pub fn get(&self, col: Column) -> Option<f64> {
        let v = match col {
            Column::Age => self.age,
            Column::Sex => self.sex,
            Column::PreSeverity => self.pre_severity,
            Column::PostSeverity => self.post_severity,
            Column::Response => self.response,
            Column::Psi => return self.psi.filter(|v| v.is_finite()),
            Column::McMean => self.mc_mean,
            Column::AcMean => self.ac_mean,
            Column::EdgeCount => self.edge_count,
        };
        v.is_finite().then_some(v)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CohortTable {
    pub records: Vec<CohortRecord>,
}

impl CohortTable {
    pub fn new(records: Vec<CohortRecord>) -> Result<Self, StatsError> {
        let t = Self { records };
        t.validate()?;
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        for (row, r) in self.records.iter().enumerate() {
            let expected = r.post_severity - r.pre_severity;
            if (r.response - expected).abs() > 1e-9 * expected.abs().max(1.0) {
                return Err(StatsError::InvalidCohort {
                    row,
                    reason: format!(
                        "response {} != post - pre = {expected}",
                        r.response
                    ),
                });
            }
            if let Some(psi) = r.psi {
                if !(0.0..=100.0).contains(&psi) {
                    return Err(StatsError::InvalidCohort {
                        row,
                        reason: format!("psi {psi} outside [0, 100]"),
                    });
                }
            }
            if r.sex != 0.0 && r.sex != 1.0 {
                return Err(StatsError::InvalidCohort {
                    row,
                    reason: format!("sex code {} is not 0 or 1", r.sex),
                });
            }
        }
        Ok(())
    }

    /// Values of `cols` for the rows where all of them are present, as one
    /// vector per column. Rows with a missing value are dropped for this
    /// analysis only.
    pub fn complete_cases(&self, cols: &[Column]) -> Result<Vec<Vec<f64>>, StatsError> {
        let mut out = vec![Vec::with_capacity(self.len()); cols.len()];
        for r in &self.records {
            let vals: Option<Vec<f64>> = cols.iter().map(|&c| r.get(c)).collect();
            if let Some(vals) = vals {
                for (dst, v) in out.iter_mut().zip(vals) {
                    dst.push(v);
                }
            }
        }
        if let (Some(first), Some(col)) = (out.first(), cols.first()) {
            if first.is_empty() && !self.is_empty() {
                let missing = cols
                    .iter()
                    .find(|&&c| self.records.iter().all(|r| r.get(c).is_none()))
                    .unwrap_or(col);
                return Err(StatsError::MissingColumn(missing.to_string()));
            }
        }
        Ok(out)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, StatsError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let records = rdr.deserialize().collect::<Result<Vec<CohortRecord>, _>>()?;
        Self::new(records)
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<(), StatsError> {
        let mut wtr = csv::Writer::from_writer(writer);
        for r in &self.records {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, StatsError> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), StatsError> {
        self.to_writer(std::fs::File::create(path)?)
    }
}
