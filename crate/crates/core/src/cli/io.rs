//! CSV and JSON files read and written by the command-line tool.
//!
//! Individuals: `group_id,period,y` with `period` 0 (pre) or 1 (post).
//! Groups: `group_id,T,<covariate>...`, one row per group. Lines starting
//! with `#` are comments.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{GroupObservations, HdidDataset};

fn data_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Data {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    data_err(path, line, e.to_string())
}

/// Header row and its line number.
fn header(path: &Path, rdr: &mut csv::Reader<std::fs::File>) -> Result<(Vec<String>, u64)> {
    let h = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let line = h.position().map_or(1, |p| p.line());
    Ok((h.iter().map(str::to_string).collect(), line))
}

fn parse_f64(path: &Path, line: u64, column: &str, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| data_err(path, line, format!("column '{column}': '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(data_err(path, line, format!("column '{column}': value {v} is not finite")));
    }
    Ok(v)
}

/// Reads the two input files into a dataset. Group order follows the
/// groups file.
pub fn read_dataset(individuals: &Path, groups: &Path) -> Result<HdidDataset> {
    let mut rdr = reader(groups)?;
    let (cols, hline) = header(groups, &mut rdr)?;
    if cols.len() < 2 || cols[0] != "group_id" || cols[1] != "T" {
        return Err(data_err(
            groups,
            hline,
            format!("expected header 'group_id,T,<covariates>', found '{}'", cols.join(",")),
        ));
    }
    let names: Vec<String> = cols[2..].to_vec();
    let k = names.len();
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut t = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(groups, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = rec[0].to_string();
        if index.contains_key(&id) {
            return Err(data_err(groups, line, format!("duplicate group_id '{id}'")));
        }
        index.insert(id.clone(), ids.len());
        ids.push(id);
        t.push(parse_f64(groups, line, "T", &rec[1])?);
        for c in 0..k {
            xs.push(parse_f64(groups, line, &names[c], &rec[c + 2])?);
        }
    }
    let j = ids.len();
    let x = DMatrix::from_row_slice(j, k, &xs);

    let mut obs: Vec<GroupObservations> = ids
        .iter()
        .map(|id| GroupObservations {
            id: id.clone(),
            y_pre: Vec::new(),
            y_post: Vec::new(),
        })
        .collect();
    let mut rdr = reader(individuals)?;
    let (cols, hline) = header(individuals, &mut rdr)?;
    if cols != ["group_id", "period", "y"] {
        return Err(data_err(
            individuals,
            hline,
            format!("expected header 'group_id,period,y', found '{}'", cols.join(",")),
        ));
    }
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(individuals, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let g = *index.get(&rec[0]).ok_or_else(|| {
            data_err(individuals, line, format!("group_id '{}' not in the groups file", &rec[0]))
        })?;
        let y = parse_f64(individuals, line, "y", &rec[2])?;
        match &rec[1] {
            "0" => obs[g].y_pre.push(y),
            "1" => obs[g].y_post.push(y),
            p => return Err(data_err(individuals, line, format!("period must be 0 or 1, found '{p}'"))),
        }
    }
    Ok(HdidDataset {
        groups: obs,
        x,
        treatment: t,
        covariate_names: names,
    })
}

/// Shortest text that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// CSV text that starts with a `# ` provenance comment line.
pub struct CsvTable {
    comment: String,
    writer: csv::Writer<Vec<u8>>,
}

impl CsvTable {
    pub fn new(comment: &str, header: &[String]) -> Result<Self> {
        let mut t = Self {
            comment: comment.replace('\n', " "),
            writer: csv::Writer::from_writer(Vec::new()),
        };
        t.row(header)?;
        Ok(t)
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<()> {
        self.writer
            .write_record(fields.iter().map(|f| f.as_ref()))
            .map_err(|e| Error::Numerical(format!("csv encoding: {e}")))
    }

    pub fn write(self, path: &Path) -> Result<()> {
        let body = self
            .writer
            .into_inner()
            .map_err(|e| Error::Numerical(format!("csv encoding: {e}")))?;
        let mut text = format!("# {}\n", self.comment).into_bytes();
        text.extend(body);
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("json encoding: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the two input files for `dataset`.
pub fn write_dataset(dataset: &HdidDataset, comment: &str, individuals: &Path, groups: &Path) -> Result<()> {
    let mut ind = CsvTable::new(comment, &["group_id".into(), "period".into(), "y".into()])?;
    for g in &dataset.groups {
        for (period, ys) in [("0", &g.y_pre), ("1", &g.y_post)] {
            for y in ys.iter() {
                ind.row(&[g.id.as_str(), period, &fmt_f64(*y)])?;
            }
        }
    }
    ind.write(individuals)?;
    let mut header = vec!["group_id".to_string(), "T".to_string()];
    header.extend(dataset.covariate_names.iter().cloned());
    let mut grp = CsvTable::new(comment, &header)?;
    for (r, g) in dataset.groups.iter().enumerate() {
        let mut row = vec![g.id.clone(), fmt_f64(dataset.treatment[r])];
        row.extend((0..dataset.num_covariates()).map(|c| fmt_f64(dataset.x[(r, c)])));
        grp.row(&row)?;
    }
    grp.write(groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn reads_comments_and_periods() {
        let d = tempfile::tempdir().unwrap();
        let g = write(d.path(), "g.csv", "# note\ngroup_id,T,age\na,1,0.5\nb,0,-1\n");
        let i = write(d.path(), "i.csv", "group_id,period,y\na,0,1\na,1,2\nb,0,3\n# end\nb,1,4.5\n");
        let ds = read_dataset(&i, &g).unwrap();
        assert_eq!(ds.covariate_names, vec!["age"]);
        assert_eq!(ds.treatment, vec![1.0, 0.0]);
        assert_eq!(ds.groups[1].y_post, vec![4.5]);
        assert_eq!(ds.x[(1, 0)], -1.0);
    }

    fn line_of(e: Error) -> u64 {
        match e {
            Error::Data { line, .. } => line,
            other => panic!("expected data error, got {other}"),
        }
    }

    #[test]
    fn errors_name_the_line() {
        let d = tempfile::tempdir().unwrap();
        let g = write(d.path(), "g.csv", "group_id,T\na,1\nb,0\n");
        let bad_header = write(d.path(), "i1.csv", "a,b,c\n");
        assert_eq!(line_of(read_dataset(&bad_header, &g).unwrap_err()), 1);
        let bad_y = write(d.path(), "i2.csv", "group_id,period,y\na,0,1\na,1,x\n");
        assert_eq!(line_of(read_dataset(&bad_y, &g).unwrap_err()), 3);
        let bad_p = write(d.path(), "i3.csv", "group_id,period,y\na,2,1\n");
        assert_eq!(line_of(read_dataset(&bad_p, &g).unwrap_err()), 2);
        let unknown = write(d.path(), "i4.csv", "group_id,period,y\nz,0,1\n");
        assert_eq!(line_of(read_dataset(&unknown, &g).unwrap_err()), 2);
        let dup = write(d.path(), "g2.csv", "group_id,T\na,1\na,0\n");
        let ok = write(d.path(), "i5.csv", "group_id,period,y\na,0,1\n");
        let e = read_dataset(&ok, &dup).unwrap_err();
        assert!(e.to_string().contains("duplicate group_id 'a'"));
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn write_then_read_round_trips() {
        let d = tempfile::tempdir().unwrap();
        let ds = HdidDataset {
            groups: vec![
                GroupObservations {
                    id: "1".into(),
                    y_pre: vec![0.1, 1.0 / 3.0],
                    y_post: vec![-2.5e-7],
                },
                GroupObservations {
                    id: "2".into(),
                    y_pre: vec![],
                    y_post: vec![7.0],
                },
            ],
            x: DMatrix::from_row_slice(2, 1, &[std::f64::consts::PI, -1.0]),
            treatment: vec![0.3, 1e10],
            covariate_names: vec!["X1".into()],
        };
        let (i, g) = (d.path().join("i.csv"), d.path().join("g.csv"));
        write_dataset(&ds, "seed=1", &i, &g).unwrap();
        assert!(std::fs::read_to_string(&i).unwrap().starts_with("# seed=1\n"));
        assert_eq!(read_dataset(&i, &g).unwrap(), ds);
    }
}
