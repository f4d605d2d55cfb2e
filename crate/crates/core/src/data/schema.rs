//! Schema-driven CSV ingestion and the built-in schemas for the benchmark
//! datasets.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Dataset, Target, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoricalEncoding {
    /// One numeric column holding the level index.
    Integer,
    /// One indicator column per level.
    OneHot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub name: String,
    pub levels: Vec<String>,
    pub encoding: CategoricalEncoding,
}

/// Maps a raw target value to a class name; `None` drops the row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRule {
    pub raw: String,
    pub class: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Drop,
    /// Numeric gaps take the column mean; rows missing a categorical value or
    /// the target are still dropped.
    ImputeMean,
}

/// Handling of the HCV "suspect blood donor" category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuspectPolicy {
    #[default]
    Drop,
    MergeHealthy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    #[serde(default = "yes")]
    pub has_header: bool,
    /// Column names for headerless files.
    #[serde(default)]
    pub columns: Option<Vec<String>>,
    pub target: String,
    pub task: Task,
    #[serde(default)]
    pub ignore: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<CategoricalColumn>,
    /// Empty means classes are the sorted distinct raw target values.
    #[serde(default)]
    pub class_rules: Vec<ClassRule>,
    #[serde(default)]
    pub missing: MissingPolicy,
    #[serde(default = "default_missing_tokens")]
    pub missing_tokens: Vec<String>,
}

fn yes() -> bool {
    true
}

fn default_missing_tokens() -> Vec<String> {
    vec!["".into(), "NA".into(), "?".into()]
}

impl CsvSchema {
    /// Four measurements and the species label, with a header row.
    pub fn iris() -> Self {
        CsvSchema {
            has_header: true,
            columns: None,
            target: "species".into(),
            task: Task::Classification,
            ignore: vec![],
            categorical: vec![],
            class_rules: vec![],
            missing: MissingPolicy::Drop,
            missing_tokens: default_missing_tokens(),
        }
    }

    /// Headerless `abalone.data`: sex, seven measurements, ring count.
    pub fn abalone(sex: CategoricalEncoding) -> Self {
        let columns = [
            "sex",
            "length",
            "diameter",
            "height",
            "whole_weight",
            "shucked_weight",
            "viscera_weight",
            "shell_weight",
            "rings",
        ];
        CsvSchema {
            has_header: false,
            columns: Some(columns.iter().map(|s| s.to_string()).collect()),
            target: "rings".into(),
            task: Task::Regression,
            ignore: vec![],
            categorical: vec![CategoricalColumn {
                name: "sex".into(),
                levels: vec!["F".into(), "I".into(), "M".into()],
                encoding: sex,
            }],
            class_rules: vec![],
            missing: MissingPolicy::Drop,
            missing_tokens: default_missing_tokens(),
        }
    }

    /// `hcvdat0.csv`: unnamed index column, category, age, sex and ten blood
    /// measurements (12 predictors), four diagnostic groups.
    pub fn hcv(suspect: SuspectPolicy) -> Self {
        let rule = |raw: &str, class: Option<&str>| ClassRule {
            raw: raw.into(),
            class: class.map(Into::into),
        };
        let suspect_class = match suspect {
            SuspectPolicy::Drop => None,
            SuspectPolicy::MergeHealthy => Some("healthy"),
        };
        CsvSchema {
            has_header: true,
            columns: None,
            target: "Category".into(),
            task: Task::Classification,
            ignore: vec!["".into()],
            categorical: vec![CategoricalColumn {
                name: "Sex".into(),
                levels: vec!["f".into(), "m".into()],
                encoding: CategoricalEncoding::Integer,
            }],
            class_rules: vec![
                rule("0=Blood Donor", Some("healthy")),
                rule("0s=suspect Blood Donor", suspect_class),
                rule("1=Hepatitis", Some("hepatitis")),
                rule("2=Fibrosis", Some("fibrosis")),
                rule("3=Cirrhosis", Some("cirrhosis")),
            ],
            missing: MissingPolicy::Drop,
            missing_tokens: vec!["NA".into(), "".into()],
        }
    }

    fn is_missing(&self, v: &str) -> bool {
        self.missing_tokens.iter().any(|t| t == v.trim())
    }
}

enum ColumnRole {
    Target,
    Ignore,
    Numeric,
    Categorical(usize),
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_csv(file, schema)
}

fn parse_csv<R: std::io::Read>(input: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();

    let header: Vec<String> = if schema.has_header {
        let rec = records
            .next()
            .ok_or_else(|| Error::parse(0, "missing header row"))??;
        rec.iter().map(|s| s.trim().to_string()).collect()
    } else {
        schema
            .columns
            .clone()
            .ok_or_else(|| Error::InvalidConfig("headerless CSV needs column names".into()))?
    };
    let header = match (&schema.columns, schema.has_header) {
        (Some(cols), true) => cols.clone(),
        _ => header,
    };

    let roles: Vec<ColumnRole> = header
        .iter()
        .map(|name| {
            if *name == schema.target {
                ColumnRole::Target
            } else if schema.ignore.contains(name) {
                ColumnRole::Ignore
            } else if let Some(c) = schema.categorical.iter().position(|c| c.name == *name) {
                ColumnRole::Categorical(c)
            } else {
                ColumnRole::Numeric
            }
        })
        .collect();
    let target_col = roles
        .iter()
        .position(|r| matches!(r, ColumnRole::Target))
        .ok_or_else(|| Error::InvalidConfig(format!("target column `{}` not found", schema.target)))?;

    let mut feature_names = Vec::new();
    for (name, role) in header.iter().zip(&roles) {
        match role {
            ColumnRole::Numeric => feature_names.push(name.clone()),
            ColumnRole::Categorical(c) => {
                let cat = &schema.categorical[*c];
                match cat.encoding {
                    CategoricalEncoding::Integer => feature_names.push(name.clone()),
                    CategoricalEncoding::OneHot => {
                        feature_names.extend(cat.levels.iter().map(|l| format!("{name}={l}")))
                    }
                }
            }
            _ => {}
        }
    }
    let width = feature_names.len();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_targets: Vec<String> = Vec::new();
    let mut dropped = 0usize;
    for rec in records {
        let rec = rec?;
        let offset = rec.position().map_or(0, |p| p.byte());
        if rec.len() == 1 && rec.get(0).is_some_and(|s| s.trim().is_empty()) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::parse(
                offset,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let raw_target = rec[target_col].trim();
        if schema.is_missing(raw_target) {
            dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(width);
        let mut skip = false;
        for (field, role) in rec.iter().zip(&roles) {
            let field = field.trim();
            match role {
                ColumnRole::Numeric => {
                    if schema.is_missing(field) {
                        if schema.missing == MissingPolicy::Drop {
                            skip = true;
                        }
                        row.push(f64::NAN);
                    } else {
                        let v: f64 = field.parse().map_err(|_| {
                            Error::parse(offset, format!("`{field}` is not a number"))
                        })?;
                        if !v.is_finite() {
                            return Err(Error::parse(offset, format!("non-finite value `{field}`")));
                        }
                        row.push(v);
                    }
                }
                ColumnRole::Categorical(c) => {
                    let cat = &schema.categorical[*c];
                    if schema.is_missing(field) {
                        skip = true;
                        continue;
                    }
                    let level = cat.levels.iter().position(|l| l == field).ok_or_else(|| {
                        Error::parse(offset, format!("unknown level `{field}` for `{}`", cat.name))
                    })?;
                    match cat.encoding {
                        CategoricalEncoding::Integer => row.push(level as f64),
                        CategoricalEncoding::OneHot => {
                            row.extend((0..cat.levels.len()).map(|l| if l == level { 1.0 } else { 0.0 }))
                        }
                    }
                }
                _ => {}
            }
        }
        if skip {
            dropped += 1;
            continue;
        }
        rows.push(row);
        raw_targets.push(raw_target.to_string());
    }
    if dropped > 0 {
        log::info!("dropped {dropped} rows with missing values or excluded classes");
    }

    // Target encoding; class rules may drop further rows.
    let (keep, target) = match schema.task {
        Task::Regression => {
            let mut vals = Vec::with_capacity(raw_targets.len());
            for t in &raw_targets {
                vals.push(t.parse::<f64>().map_err(|_| Error::parse(0, format!("target `{t}` is not a number")))?);
            }
            ((0..rows.len()).collect::<Vec<_>>(), Target::Real(vals))
        }
        Task::Classification => encode_classes(&raw_targets, &schema.class_rules)?,
    };
    let rows: Vec<Vec<f64>> = keep.iter().map(|&i| rows[i].clone()).collect();

    let n = rows.len();
    if n == 0 {
        return Err(Error::EmptyPartition("no rows survived ingestion".into()));
    }
    let mut x = DMatrix::from_fn(n, width, |i, j| rows[i][j]);
    if schema.missing == MissingPolicy::ImputeMean {
        for mut col in x.column_iter_mut() {
            let present: Vec<f64> = col.iter().copied().filter(|v| v.is_finite()).collect();
            if present.len() < n {
                if present.is_empty() {
                    return Err(Error::invalid("column has no values to impute from"));
                }
                let mean = present.iter().sum::<f64>() / present.len() as f64;
                col.apply(|v| {
                    if !v.is_finite() {
                        *v = mean
                    }
                });
            }
        }
    }
    Dataset::new(x, target, feature_names)
}

fn encode_classes(raw: &[String], rules: &[ClassRule]) -> Result<(Vec<usize>, Target)> {
    let mut names: Vec<String> = Vec::new();
    if rules.is_empty() {
        names = raw.to_vec();
        names.sort();
        names.dedup();
    } else {
        for r in rules {
            if let Some(c) = &r.class {
                if !names.contains(c) {
                    names.push(c.clone());
                }
            }
        }
    }
    let mut keep = Vec::new();
    let mut labels = Vec::new();
    for (i, t) in raw.iter().enumerate() {
        let class = if rules.is_empty() {
            Some(t.clone())
        } else {
            let rule = rules
                .iter()
                .find(|r| r.raw == *t)
                .ok_or_else(|| Error::parse(0, format!("target value `{t}` matches no class rule")))?;
            rule.class.clone()
        };
        if let Some(c) = class {
            keep.push(i);
            labels.push(names.iter().position(|n| *n == c).expect("class registered above"));
        }
    }
    Ok((keep, Target::Class { labels, names }))
}

/// Headerless numeric CSV, one row per sample (e.g. externally computed
/// low-dimensional embeddings).
pub fn import_embedding(path: impl AsRef<Path>, expected_rows: Option<usize>) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path.as_ref())?;
    let mut data = Vec::new();
    let mut width = None;
    let mut n = 0;
    for rec in reader.records() {
        let rec = rec?;
        let offset = rec.position().map_or(0, |p| p.byte());
        if *width.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::parse(offset, "ragged embedding row"));
        }
        for f in rec.iter() {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::parse(offset, format!("`{f}` is not a number")))?;
            data.push(v);
        }
        n += 1;
    }
    if let Some(e) = expected_rows {
        if e != n {
            return Err(Error::invalid(format!("embedding has {n} rows, labels have {e}")));
        }
    }
    Ok(DMatrix::from_row_slice(n, width.unwrap_or(0), &data))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HCV_SAMPLE: &str = "\"\",\"Category\",\"Age\",\"Sex\",\"ALB\",\"ALP\",\"ALT\",\"AST\",\"BIL\",\"CHE\",\"CHOL\",\"CREA\",\"GGT\",\"PROT\"
\"1\",\"0=Blood Donor\",32,\"m\",38.5,52.5,7.7,22.1,7.5,6.93,3.23,106,12.1,69
\"2\",\"0s=suspect Blood Donor\",47,\"m\",22.5,124,79.5,46.7,2.3,6.83,4.3,170,345.6,58.6
\"3\",\"1=Hepatitis\",23,\"m\",47,19.1,38.9,164.2,17,7.09,3.2,79.3,90.4,70.1
\"4\",\"2=Fibrosis\",49,\"m\",39,NA,118,62,10,7.28,3.9,81,130,72
\"5\",\"3=Cirrhosis\",38,\"f\",44,NA,94,60,12,4.37,3.2,61.9,99,77
\"6\",\"3=Cirrhosis\",42,\"f\",32,116,10.9,110.3,24,5.57,4.47,92,62.3,70.5
";

    #[test]
    fn hcv_schema_drops_missing_and_suspect() {
        let ds = parse_csv(HCV_SAMPLE.as_bytes(), &CsvSchema::hcv(SuspectPolicy::Drop)).unwrap();
        assert_eq!(ds.n_vars(), 12);
        assert_eq!(ds.n_samples(), 3);
        assert_eq!(ds.class_names().unwrap(), &["healthy", "hepatitis", "fibrosis", "cirrhosis"]);
        assert_eq!(ds.labels().unwrap(), &[0, 1, 3]);
        assert_eq!(ds.x()[(2, 1)], 0.0); // Sex f -> 0
    }

    #[test]
    fn hcv_merge_and_impute() {
        let mut schema = CsvSchema::hcv(SuspectPolicy::MergeHealthy);
        schema.missing = MissingPolicy::ImputeMean;
        let ds = parse_csv(HCV_SAMPLE.as_bytes(), &schema).unwrap();
        assert_eq!(ds.n_samples(), 6);
        assert_eq!(ds.labels().unwrap(), &[0, 0, 1, 2, 3, 3]);
        let alp_mean = (52.5 + 124.0 + 19.1 + 116.0) / 4.0;
        assert!((ds.x()[(3, 3)] - alp_mean).abs() < 1e-12);
    }

    #[test]
    fn abalone_encodings() {
        let text = "M,0.455,0.365,0.095,0.514,0.2245,0.101,0.15,15\nF,0.53,0.42,0.135,0.677,0.2565,0.1415,0.21,9\nI,0.33,0.255,0.08,0.205,0.0895,0.0395,0.055,7\n";
        let ds = parse_csv(text.as_bytes(), &CsvSchema::abalone(CategoricalEncoding::Integer)).unwrap();
        assert_eq!(ds.n_vars(), 8);
        assert_eq!(ds.values().unwrap(), &[15.0, 9.0, 7.0]);
        assert_eq!(ds.x().column(0).as_slice(), &[2.0, 0.0, 1.0]);
        let ds = parse_csv(text.as_bytes(), &CsvSchema::abalone(CategoricalEncoding::OneHot)).unwrap();
        assert_eq!(ds.n_vars(), 10);
        assert_eq!(ds.x().row(0).iter().take(3).copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn iris_classes_sorted() {
        let text = "a,b,species\n1,2,virginica\n3,4,setosa\n5,6,versicolor\n";
        let ds = parse_csv(text.as_bytes(), &CsvSchema::iris()).unwrap();
        assert_eq!(ds.class_names().unwrap(), &["setosa", "versicolor", "virginica"]);
        assert_eq!(ds.labels().unwrap(), &[2, 0, 1]);
    }

    #[test]
    fn parse_errors_carry_offsets() {
        let text = "a,b,species\n1,2,x\n3,oops,y\n";
        match parse_csv(text.as_bytes(), &CsvSchema::iris()) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 18),
            other => panic!("{other:?}"),
        }
        let text = "a,b,species\n1,2\n";
        assert!(matches!(parse_csv(text.as_bytes(), &CsvSchema::iris()), Err(Error::Parse { .. })));
        let text = "a,b,kind\n1,2,x\n";
        assert!(matches!(parse_csv(text.as_bytes(), &CsvSchema::iris()), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn embedding_import_checks_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.csv");
        std::fs::write(&p, "0.1,0.2\n0.3,0.4\n0.5,0.6\n").unwrap();
        let m = import_embedding(&p, Some(3)).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (3, 2));
        assert_eq!(m[(2, 1)], 0.6);
        assert!(import_embedding(&p, Some(4)).is_err());
        std::fs::write(&p, "0.1,0.2\n0.3\n").unwrap();
        assert!(import_embedding(&p, None).is_err());
    }
}
