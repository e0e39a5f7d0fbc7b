use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use super::{Dataset, Matrix};
use crate::error::{Error, Result};

/// Which column of a CSV file carries the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

fn numeric_label_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

/// Loads a rectangular numeric CSV.
///
/// The header row is optional: it is assumed present when the label column is
/// given by name, or when any feature cell of the first row is not numeric.
/// Labels are re-encoded to contiguous ids in ascending (numeric-aware) order;
/// the original label text is kept as the dataset's class names.
pub fn load_csv(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, label_column)
}

pub(crate) fn parse_csv(text: &str, label_column: &LabelColumn) -> Result<Dataset> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .trim(::csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Format(format!("csv: {e}")))?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::Format("csv: file contains no rows".into()));
    }
    let width = records[0].len();
    if width < 2 {
        return Err(Error::Format(
            "csv: need at least one feature column and a label column".into(),
        ));
    }

    let (label_idx, has_header) = match label_column {
        LabelColumn::Name(name) => {
            let idx = records[0]
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Format(format!("csv: no column named {name:?}")))?;
            (idx, true)
        }
        LabelColumn::Index(idx) => {
            if *idx >= width {
                return Err(Error::Format(format!(
                    "csv: label column {idx} out of range for {width} columns"
                )));
            }
            let header = records[0]
                .iter()
                .enumerate()
                .any(|(j, cell)| j != *idx && cell.parse::<f32>().is_err());
            (*idx, header)
        }
    };

    let feature_names = has_header.then(|| {
        records[0]
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != label_idx)
            .map(|(_, h)| h.to_string())
            .collect::<Vec<_>>()
    });
    let body = if has_header {
        &records[1..]
    } else {
        &records[..]
    };
    if body.is_empty() {
        return Err(Error::Format("csv: header but no data rows".into()));
    }

    let n_features = width - 1;
    let mut data = Vec::with_capacity(body.len() * n_features);
    let mut raw_labels = Vec::with_capacity(body.len());
    for (r, rec) in body.iter().enumerate() {
        let line = r + 1 + usize::from(has_header);
        for (j, cell) in rec.iter().enumerate() {
            if j == label_idx {
                raw_labels.push(cell.to_string());
                continue;
            }
            let v: f32 = cell.parse().map_err(|_| {
                Error::Format(format!(
                    "csv line {line}: non-numeric feature cell {cell:?}"
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Format(format!(
                    "csv line {line}: non-finite feature cell {cell:?}"
                )));
            }
            data.push(v);
        }
    }

    let mut distinct: Vec<&str> = raw_labels.iter().map(String::as_str).collect();
    distinct.sort_by(|a, b| numeric_label_order(a, b));
    distinct.dedup();
    if distinct.len() > u16::MAX as usize + 1 {
        return Err(Error::Capacity(format!("{} classes", distinct.len())));
    }
    let ids: BTreeMap<&str, u16> = distinct
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i as u16))
        .collect();
    let labels = raw_labels.iter().map(|s| ids[s.as_str()]).collect();
    let class_names = distinct.iter().map(|s| s.to_string()).collect();

    let features = Matrix::new(body.len(), n_features, data)?;
    let mut dataset =
        Dataset::new(features, labels, distinct.len())?.with_class_names(class_names)?;
    if let Some(names) = feature_names {
        dataset = dataset.with_feature_names(names)?;
    }
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reencodes_labels() {
        let text = "1,2,3,7\n4,5,6,7\n7,8,9,9\n1,1,1,9\n";
        let d = parse_csv(text, &LabelColumn::Index(3)).unwrap();
        assert_eq!(d.labels(), &[0, 0, 1, 1]);
        assert_eq!(d.n_classes(), 2);
        assert_eq!(d.n_features(), 3);
        assert_eq!(
            d.class_names().unwrap(),
            &["7".to_string(), "9".to_string()]
        );
    }

    #[test]
    fn numeric_order_not_lexicographic() {
        let text = "0,10\n0,9\n0,10\n";
        let d = parse_csv(text, &LabelColumn::Index(1)).unwrap();
        assert_eq!(d.labels(), &[1, 0, 1]);
    }

    #[test]
    fn header_by_name() {
        let text = "a,label,b\n1,x,2\n3,y,4\n";
        let d = parse_csv(text, &LabelColumn::Name("label".into())).unwrap();
        assert_eq!(
            d.feature_names().unwrap(),
            &["a".to_string(), "b".to_string()]
        );
        assert_eq!(d.sample(1), &[3.0, 4.0]);
        assert_eq!(d.labels(), &[0, 1]);
    }

    #[test]
    fn header_detected_for_index() {
        let text = "f0,f1,y\n1,2,0\n";
        let d = parse_csv(text, &LabelColumn::Index(2)).unwrap();
        assert_eq!(d.n_samples(), 1);
    }

    #[test]
    fn empty_file() {
        assert!(matches!(
            parse_csv("", &LabelColumn::Index(0)),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn ragged_rows() {
        let text = "1,2,0\n1,0\n";
        assert!(matches!(
            parse_csv(text, &LabelColumn::Index(2)),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn non_numeric_cell() {
        let text = "1,2,0\n1,abc,1\n";
        assert!(matches!(
            parse_csv(text, &LabelColumn::Index(2)),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn label_column_parse() {
        assert_eq!("3".parse::<LabelColumn>().unwrap(), LabelColumn::Index(3));
        assert_eq!(
            "species".parse::<LabelColumn>().unwrap(),
            LabelColumn::Name("species".into())
        );
    }
}
