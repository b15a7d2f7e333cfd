//! Column-oriented observation tables and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset has no column `{0}`")]
    MissingColumn(String),
    #[error("column `{column}` has {found} rows, expected {expected}")]
    RaggedColumns {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("dataset must contain at least one row and one column")]
    Empty,
    #[error("non-finite value in column `{column}` at row {row}")]
    NonFinite { column: String, row: usize },
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("cannot parse `{value}` in column `{column}` at data row {row}")]
    Parse {
        column: String,
        row: usize,
        value: String,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Simulated { seed: u64 },
    Loaded { path: String },
    Resampled { seed: u64 },
    InMemory,
}

/// `m` joint observations of named network variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    columns: IndexMap<String, Vec<F>>,
    rows: usize,
    provenance: Provenance,
}

impl<F: Real> Dataset<F> {
    pub fn new(
        columns: impl IntoIterator<Item = (String, Vec<F>)>,
        provenance: Provenance,
    ) -> Result<Self, DataError> {
        let mut map = IndexMap::new();
        let mut rows = None;
        for (name, values) in columns {
            let expected = *rows.get_or_insert(values.len());
            if values.len() != expected {
                return Err(DataError::RaggedColumns {
                    column: name,
                    expected,
                    found: values.len(),
                });
            }
            if let Some(row) = values.iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite { column: name, row });
            }
            if map.contains_key(&name) {
                return Err(DataError::DuplicateColumn(name));
            }
            map.insert(name, values);
        }
        match rows {
            Some(r) if r > 0 => Ok(Dataset {
                columns: map,
                rows: r,
                provenance,
            }),
            _ => Err(DataError::Empty),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&[F], DataError> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    }

    /// New dataset made of the given rows (repeats allowed), in order.
    pub fn select_rows(&self, rows: &[usize], provenance: Provenance) -> Result<Self, DataError> {
        Dataset::new(
            self.columns
                .iter()
                .map(|(k, v)| (k.clone(), rows.iter().map(|&r| v[r]).collect())),
            provenance,
        )
    }

    /// Same number of rows drawn with replacement.
    pub fn bootstrap(&self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx: Vec<usize> = (0..self.rows).map(|_| rng.gen_range(0..self.rows)).collect();
        self.select_rows(&idx, Provenance::Resampled { seed })
            .expect("rows of a valid dataset")
    }

    pub fn first_rows(&self, n: usize) -> Result<Self, DataError> {
        let idx: Vec<usize> = (0..n.min(self.rows)).collect();
        self.select_rows(&idx, self.provenance.clone())
    }

    pub fn read_csv<R: Read>(reader: R, provenance: Provenance) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut columns: Vec<Vec<F>> = vec![Vec::new(); headers.len()];
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            for (c, field) in record.iter().enumerate() {
                let value: f64 = field.parse().map_err(|_| DataError::Parse {
                    column: headers[c].clone(),
                    row,
                    value: field.to_string(),
                })?;
                columns[c].push(F::lit(value));
            }
        }
        Dataset::new(headers.into_iter().zip(columns), provenance)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::read_csv(
            file,
            Provenance::Loaded {
                path: path.display().to_string(),
            },
        )
    }

    /// Writes a header row and one record per observation using shortest round-trip decimals.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(self.columns.keys())?;
        let cols: Vec<&Vec<F>> = self.columns.values().collect();
        let mut record = Vec::with_capacity(cols.len());
        for r in 0..self.rows {
            record.clear();
            record.extend(cols.iter().map(|c| c[r].as_f64().to_string()));
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
