//! CSV and JSON file formats.
//!
//! - raw answers: `respondent_id,stopping_time,choice`
//! - choice frequencies: header `period,<item labels…>`, one row per period
//! - period counts: `period,count`

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::choice::ChoiceDataset;
use crate::cluster::RawObservation;
use crate::error::{RasError, Result};

/// Rows of a frequency file may miss 1 by this much (rounded output); they are rescaled.
pub const PI_ROW_TOL: f64 = 1e-4;

pub fn read_raw_csv<R: Read>(reader: R) -> Result<Vec<RawObservation>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    rdr.deserialize()
        .map(|r| r.map_err(RasError::from))
        .collect()
}

pub fn write_raw_csv<W: Write>(writer: W, obs: &[RawObservation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for o in obs {
        w.serialize(o)?;
    }
    w.flush()?;
    Ok(())
}

/// Item labels and the choice data; period labels come from the first column.
pub fn read_pi_csv<R: Read>(reader: R) -> Result<(Vec<String>, ChoiceDataset)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 3 {
        return Err(RasError::Validation(
            "frequency file needs a period column and at least two items".into(),
        ));
    }
    let items: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut periods = Vec::new();
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut fields = rec.iter();
        periods.push(fields.next().unwrap_or_default().to_owned());
        let row = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    RasError::Validation(format!("row {}: '{f}' is not a number", line + 2))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(RasError::Validation("frequency file has no periods".into()));
    }
    let data = ChoiceDataset::renormalized(&rows, PI_ROW_TOL)?.with_labels(periods)?;
    Ok((items, data))
}

pub fn write_pi_csv<W: Write>(writer: W, items: &[String], data: &ChoiceDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(std::iter::once("period").chain(items.iter().map(String::as_str)))?;
    for (label, row) in data.period_labels().iter().zip(data.rows()) {
        w.write_record(std::iter::once(label.clone()).chain(row.iter().map(f64::to_string)))?;
    }
    w.flush()?;
    Ok(())
}

/// `(period label, count)` pairs in file order.
pub fn read_counts_csv<R: Read>(reader: R) -> Result<Vec<(String, u64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    rdr.deserialize()
        .map(|r| r.map_err(RasError::from))
        .collect()
}

pub fn write_counts_csv<W: Write>(writer: W, labels: &[String], counts: &[u64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["period", "count"])?;
    for (l, c) in labels.iter().zip(counts) {
        w.write_record([l.clone(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(writer: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(writer, value)?;
    Ok(())
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        RasError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

pub fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| {
        RasError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_round_trip() {
        let data = ChoiceDataset::from_rows(&[vec![0.25, 0.75], vec![1.0 / 3.0, 2.0 / 3.0]])
            .unwrap()
            .with_labels(vec!["early".into(), "late".into()])
            .unwrap();
        let items = vec!["a".to_owned(), "b".to_owned()];
        let mut buf = Vec::new();
        write_pi_csv(&mut buf, &items, &data).unwrap();
        let (items2, back) = read_pi_csv(buf.as_slice()).unwrap();
        assert_eq!(items2, items);
        assert_eq!(back.rows(), data.rows());
        assert_eq!(back.period_labels(), data.period_labels());
    }

    #[test]
    fn rounded_rows_are_rescaled_and_bad_rows_rejected() {
        let (_, d) = read_pi_csv("period,a,b\n1,0.33333,0.66666\n".as_bytes()).unwrap();
        assert!((d.rows()[0].iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(read_pi_csv("period,a,b\n1,0.5,0.4\n".as_bytes()).is_err());
        assert!(read_pi_csv("period,a,b\n1,0.5,x\n".as_bytes()).is_err());
    }

    #[test]
    fn raw_and_counts() {
        let raw =
            read_raw_csv("respondent_id,stopping_time,choice\nr1, 0 ,a\nr2,3.5,b\n".as_bytes())
                .unwrap();
        assert_eq!(raw[1].stopping_time, 3.5);
        assert_eq!(raw[0].choice, "a");
        let mut buf = Vec::new();
        write_raw_csv(&mut buf, &raw).unwrap();
        assert_eq!(read_raw_csv(buf.as_slice()).unwrap(), raw);
        assert!(
            read_raw_csv("respondent_id,stopping_time,choice\nr1,soon,a\n".as_bytes()).is_err()
        );

        let mut buf = Vec::new();
        write_counts_csv(&mut buf, &["1".into(), "2".into()], &[10, 20]).unwrap();
        assert_eq!(
            read_counts_csv(buf.as_slice()).unwrap(),
            vec![("1".into(), 10), ("2".into(), 20)]
        );
    }
}
