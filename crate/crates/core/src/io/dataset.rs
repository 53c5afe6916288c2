//! CSV ingestion with column-role designations.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::design::Covariates;
use crate::error::{Error, Result};
use crate::geometry::CoordinateSet;

const MODULE: &str = "io";

/// Which columns play which role.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schema {
    /// Coordinate columns `(px, py)`.
    pub coords: Option<(String, String)>,
    pub y: Option<String>,
    pub x: Vec<String>,
    pub xconst: Vec<String>,
}

impl Schema {
    /// Coordinates in columns `px` and `py`, nothing else designated.
    pub fn coords_only() -> Self {
        Self {
            coords: Some(("px".into(), "py".into())),
            ..Default::default()
        }
    }

    fn designated(&self) -> Vec<&str> {
        let mut v = Vec::new();
        if let Some((px, py)) = &self.coords {
            v.extend([px.as_str(), py.as_str()]);
        }
        v.extend(self.y.as_deref());
        v.extend(self.x.iter().map(String::as_str));
        v.extend(self.xconst.iter().map(String::as_str));
        v
    }
}

/// Numeric table with designated roles. Undesignated cells that do not parse
/// are stored as NaN; designated cells are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub data: DMatrix<f64>,
    pub schema: Schema,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn column(&self, name: &str) -> Option<DVector<f64>> {
        let j = self.names.iter().position(|c| c == name)?;
        Some(self.data.column(j).into_owned())
    }

    fn designated_column(&self, name: &str) -> DVector<f64> {
        self.column(name).expect("designated columns are validated on load")
    }

    pub fn coords(&self) -> Result<CoordinateSet<f64>> {
        let (px, py) = self
            .schema
            .coords
            .as_ref()
            .ok_or_else(|| Error::input(MODULE, "no coordinate columns designated"))?;
        let px = self.designated_column(px);
        let py = self.designated_column(py);
        CoordinateSet::from_columns(px.as_slice(), py.as_slice())
    }

    pub fn response(&self) -> Result<DVector<f64>> {
        let name = self
            .schema
            .y
            .as_deref()
            .ok_or_else(|| Error::input(MODULE, "no response column designated"))?;
        Ok(self.designated_column(name))
    }

    pub fn covariates(&self) -> Result<Covariates<f64>> {
        self.named(&self.schema.x)
    }

    pub fn constant_covariates(&self) -> Result<Covariates<f64>> {
        self.named(&self.schema.xconst)
    }

    fn named(&self, cols: &[String]) -> Result<Covariates<f64>> {
        let mut m = DMatrix::zeros(self.n(), cols.len());
        for (j, c) in cols.iter().enumerate() {
            m.set_column(j, &self.designated_column(c));
        }
        Covariates::new(m, cols.to_vec())
    }
}

/// Reads a comma-separated file with a header row.
pub fn load_table(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::input(MODULE, format!("cannot open {}: {e}", path.display())))?;
    parse_table(file, schema)
}

/// Reads a headerless comma-separated square matrix (a user connectivity matrix).
pub fn load_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::input(MODULE, format!("cannot open {}: {e}", path.display())))?;
    parse_matrix(file)
}

/// [`load_matrix`] over any reader.
pub fn parse_matrix(reader: impl std::io::Read) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if *width.get_or_insert(record.len()) != record.len() {
            return Err(Error::input(MODULE, format!("matrix row {}: {} fields, expected {}", i + 1, record.len(), width.unwrap())));
        }
        for (j, cell) in record.iter().enumerate() {
            let v = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::input(MODULE, format!("matrix row {}, column {}: `{cell}` is not a finite number", i + 1, j + 1)))?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    if rows == 0 || rows != cols {
        return Err(Error::input(MODULE, format!("connectivity matrix is {rows} x {cols}; expected a nonempty square matrix")));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// [`load_table`] over any reader.
pub fn parse_table(reader: impl std::io::Read, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::input(MODULE, "empty file: no header row"));
    }
    let mut roles = Vec::new();
    for col in schema.designated() {
        let j = names
            .iter()
            .position(|c| c == col)
            .ok_or_else(|| Error::input(MODULE, format!("missing column `{col}`")))?;
        roles.push(j);
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != names.len() {
            return Err(Error::input(
                MODULE,
                format!("row {row}: {} fields, header has {}", record.len(), names.len()),
            ));
        }
        for (j, cell) in record.iter().enumerate() {
            let parsed = cell.parse::<f64>().ok();
            if roles.contains(&j) {
                match parsed {
                    Some(v) if v.is_finite() => values.push(v),
                    _ => {
                        return Err(Error::input(
                            MODULE,
                            format!("row {row}, column `{}`: `{cell}` is not a finite number", names[j]),
                        ))
                    }
                }
            } else {
                values.push(parsed.unwrap_or(f64::NAN));
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::input(MODULE, "no data rows"));
    }
    Ok(Dataset {
        data: DMatrix::from_row_slice(rows, names.len(), &values),
        names,
        schema: schema.clone(),
    })
}
