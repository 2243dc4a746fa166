//! Loading and preparing UCI-style classification files.
//!
//! A dataset is described by a small `key = value` schema file:
//!
//! ```text
//! name = breast-cancer-wisconsin
//! inputs = 9
//! classes = 2
//! class_col = 10      # 0-based column of the class label
//! id_cols = 0         # columns dropped before use
//! labels = 2, 4       # label tokens in class order (optional)
//! missing = ?
//! rows = 699
//! rescale = true
//! impute = mean       # or constant:<value>
//! onehot =            # 0-based input attributes to expand
//! ```
//!
//! Preparation runs imputation, categorical expansion, rescaling to [0, 1]
//! and 1-of-m target encoding, in that order. Partitions are consecutive
//! slices of the file, never shuffled.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use crate::error::{config, csv_err, io_err, Error, Result};
use crate::network::Network;
use crate::train::PatternSet;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ImputeStrategy {
    ColumnMean,
    Constant(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSchema {
    pub name: String,
    /// Input attributes in the file (before categorical expansion).
    pub inputs: usize,
    pub classes: usize,
    pub class_col: usize,
    pub id_cols: Vec<usize>,
    pub missing: String,
    pub rows: Option<usize>,
    /// Label tokens for classes 1..=m. When absent, labels must be the
    /// integers 1..=m.
    pub labels: Option<Vec<String>>,
    pub rescale: bool,
    pub impute: ImputeStrategy,
    /// Input attributes (0-based, among inputs) expanded into indicator
    /// columns, one per distinct value.
    pub onehot: Vec<usize>,
}

impl DatasetSchema {
    /// Columns per row in the file.
    pub fn arity(&self) -> usize {
        self.inputs + 1 + self.id_cols.len()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = parse_key_values(text)?;
        let mut take = |key: &str| map.remove(key);
        let required = |value: Option<String>, key: &str| value.ok_or_else(|| config(format!("schema key `{key}` is missing")));

        let name = required(take("name"), "name")?;
        let inputs = parse_value(&required(take("inputs"), "inputs")?, "inputs")?;
        let classes = parse_value(&required(take("classes"), "classes")?, "classes")?;
        let class_col = parse_value(&required(take("class_col"), "class_col")?, "class_col")?;
        let id_cols = take("id_cols").map_or(Ok(Vec::new()), |v| parse_list(&v, "id_cols"))?;
        let missing = take("missing").unwrap_or_else(|| "?".to_string());
        let rows = take("rows").map(|v| parse_value(&v, "rows")).transpose()?;
        let labels = take("labels").map(|v| split_list(&v).map(str::to_string).collect::<Vec<_>>());
        let rescale = take("rescale").map_or(Ok(true), |v| parse_value(&v, "rescale"))?;
        let impute = match take("impute").as_deref() {
            None | Some("mean") => ImputeStrategy::ColumnMean,
            Some(other) => match other.strip_prefix("constant:") {
                Some(c) => ImputeStrategy::Constant(parse_value(c.trim(), "impute")?),
                None => return Err(config(format!("unknown impute strategy `{other}`"))),
            },
        };
        let onehot = take("onehot").map_or(Ok(Vec::new()), |v| parse_list(&v, "onehot"))?;
        if let Some(key) = map.keys().next() {
            return Err(config(format!("unknown schema key `{key}`")));
        }

        let schema = Self { name, inputs, classes, class_col, id_cols, missing, rows, labels, rescale, impute, onehot };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0 {
            return Err(config("schema needs at least one input attribute"));
        }
        if self.classes < 2 {
            return Err(config("schema needs at least two classes"));
        }
        let arity = self.arity();
        if self.class_col >= arity || self.id_cols.iter().any(|&c| c >= arity || c == self.class_col) {
            return Err(config("class_col and id_cols must be distinct columns inside the row"));
        }
        if self.id_cols.iter().collect::<BTreeSet<_>>().len() != self.id_cols.len() {
            return Err(config("id_cols contains duplicates"));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.classes {
                return Err(config(format!("{} labels given for {} classes", labels.len(), self.classes)));
            }
        }
        if self.onehot.iter().any(|&c| c >= self.inputs) {
            return Err(config("onehot attribute index out of range"));
        }
        Ok(())
    }

    /// 1-based class of a label token.
    pub fn class_index(&self, label: &str) -> Result<usize> {
        let class = match &self.labels {
            Some(labels) => labels.iter().position(|l| l == label).map(|k| k + 1),
            None => label.parse::<usize>().ok().filter(|k| (1..=self.classes).contains(k)),
        };
        class.ok_or_else(|| Error::Dataset(format!("unknown class label `{label}`")))
    }
}

/// Parses `key = value` lines; `#` starts a comment. Duplicate keys are
/// rejected.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config(format!("line {}: expected `key = value`", n + 1)))?;
        let key = key.trim().to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(config(format!("line {}: duplicate key `{key}`", n + 1)));
        }
    }
    Ok(map)
}

pub(crate) fn parse_value<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value.trim().parse().map_err(|_| config(format!("invalid value `{value}` for `{key}`")))
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_list(value: &str, key: &str) -> Result<Vec<usize>> {
    split_list(value).map(|v| parse_value(v, key)).collect()
}

/// Rows as read from the file: input attributes (`None` where missing) and
/// the raw class label.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub attributes: Vec<Vec<Option<f64>>>,
    pub labels: Vec<String>,
}

/// Rows with every attribute present.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub attributes: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

impl Table {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.attributes.first().map_or(0, Vec::len)
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    read_csv(file, schema, &path.display().to_string())
}

/// Reads comma-separated rows. `source` names the input in error messages;
/// rows and columns in errors are 1-based.
pub fn read_csv<R: Read>(reader: R, schema: &DatasetSchema, source: &str) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut table = RawTable { attributes: Vec::new(), labels: Vec::new() };
    let arity = schema.arity();
    for (n, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err(source))?;
        let row = n + 1;
        let parse_error = |column: usize, message: String| Error::Parse { path: source.to_string(), row, column, message };
        if record.len() != arity {
            return Err(parse_error(record.len().min(arity) + 1, format!("expected {arity} fields, found {}", record.len())));
        }
        let mut attributes = Vec::with_capacity(schema.inputs);
        for (col, field) in record.iter().enumerate() {
            if col == schema.class_col {
                if field.is_empty() || field == schema.missing {
                    return Err(parse_error(col + 1, "missing class label".into()));
                }
                table.labels.push(field.to_string());
            } else if !schema.id_cols.contains(&col) {
                if field == schema.missing {
                    attributes.push(None);
                } else {
                    let x: f64 = field
                        .parse()
                        .map_err(|_| parse_error(col + 1, format!("`{field}` is not a number")))?;
                    attributes.push(Some(x));
                }
            }
        }
        table.attributes.push(attributes);
    }
    if table.labels.is_empty() {
        return Err(Error::Dataset(format!("{source}: no rows")));
    }
    if let Some(rows) = schema.rows {
        if rows != table.labels.len() {
            return Err(Error::Dataset(format!("{source}: expected {rows} rows, found {}", table.labels.len())));
        }
    }
    Ok(table)
}

pub fn impute_missing(table: RawTable, strategy: ImputeStrategy) -> Result<Table> {
    let width = table.attributes.first().map_or(0, Vec::len);
    let mut fill = vec![0.0; width];
    for (col, value) in fill.iter_mut().enumerate() {
        *value = match strategy {
            ImputeStrategy::Constant(c) => c,
            ImputeStrategy::ColumnMean => {
                let present: Vec<f64> = table.attributes.iter().filter_map(|r| r[col]).collect();
                if present.is_empty() {
                    return Err(Error::Dataset(format!("column {} has no values", col + 1)));
                }
                present.iter().sum::<f64>() / present.len() as f64
            }
        };
    }
    let attributes = table
        .attributes
        .into_iter()
        .map(|row| row.into_iter().zip(&fill).map(|(x, f)| x.unwrap_or(*f)).collect())
        .collect();
    Ok(Table { attributes, labels: table.labels })
}

/// Replaces each listed attribute by indicator columns, one per distinct
/// value in increasing order, placed where the attribute was.
pub fn expand_categorical(table: Table, columns: &[usize]) -> Table {
    if columns.is_empty() {
        return table;
    }
    let width = table.width();
    let levels: Vec<Option<Vec<f64>>> = (0..width)
        .map(|col| {
            columns.contains(&col).then(|| {
                let mut values: Vec<f64> = table.attributes.iter().map(|r| r[col]).collect();
                values.sort_by(f64::total_cmp);
                values.dedup();
                values
            })
        })
        .collect();
    let attributes = table
        .attributes
        .iter()
        .map(|row| {
            let mut out = Vec::new();
            for (x, level) in row.iter().zip(&levels) {
                match level {
                    Some(values) => out.extend(values.iter().map(|v| if v == x { 1.0 } else { 0.0 })),
                    None => out.push(*x),
                }
            }
            out
        })
        .collect();
    Table { attributes, labels: table.labels }
}

/// Maps each column linearly onto [0, 1] using its minimum and maximum over
/// all rows. Constant columns become 0.
pub fn rescale_inputs(mut table: Table) -> Table {
    for col in 0..table.width() {
        let (lo, hi) = table
            .attributes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[col]), hi.max(r[col])));
        for row in &mut table.attributes {
            row[col] = if hi > lo { (row[col] - lo) / (hi - lo) } else { 0.0 };
        }
    }
    table
}

/// Unit vector with 1 at 1-based position `class`.
pub fn one_of_m(class: usize, classes: usize) -> Result<Vec<f64>> {
    if !(1..=classes).contains(&class) {
        return Err(Error::Dataset(format!("class {class} outside 1..={classes}")));
    }
    let mut t = vec![0.0; classes];
    t[class - 1] = 1.0;
    Ok(t)
}

pub fn encode_targets(labels: &[String], schema: &DatasetSchema) -> Result<Vec<Vec<f64>>> {
    labels.iter().map(|l| one_of_m(schema.class_index(l)?, schema.classes)).collect()
}

/// Sizes of the consecutive train, validation and test slices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_count: usize,
    pub validation_count: usize,
    pub test_count: usize,
}

impl SplitSpec {
    pub fn total(&self) -> usize {
        self.train_count + self.validation_count + self.test_count
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: PatternSet,
    pub validation: PatternSet,
    pub test: PatternSet,
}

/// Prepared inputs in [0, 1] (when rescaled) with 1-of-m targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub classes: usize,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn load(schema_path: impl AsRef<Path>, data_path: impl AsRef<Path>) -> Result<Self> {
        let schema = DatasetSchema::from_file(schema_path)?;
        Self::prepare(load_csv(data_path, &schema)?, &schema)
    }

    pub fn prepare(raw: RawTable, schema: &DatasetSchema) -> Result<Self> {
        let mut table = expand_categorical(impute_missing(raw, schema.impute)?, &schema.onehot);
        if schema.rescale {
            table = rescale_inputs(table);
        }
        let targets = encode_targets(&table.labels, schema)?;
        Ok(Self { name: schema.name.clone(), classes: schema.classes, inputs: table.attributes, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn partition(&self, spec: SplitSpec) -> Result<Splits> {
        partition(&self.inputs, &self.targets, spec)
    }
}

/// Consecutive train, validation and test slices in file order.
pub fn partition(inputs: &[Vec<f64>], targets: &[Vec<f64>], spec: SplitSpec) -> Result<Splits> {
    if spec.train_count == 0 || spec.validation_count == 0 || spec.test_count == 0 {
        return Err(config("every split needs at least one example"));
    }
    if spec.total() > inputs.len() {
        return Err(Error::Dataset(format!("split needs {} rows, data has {}", spec.total(), inputs.len())));
    }
    let slice = |from: usize, count: usize| {
        PatternSet::new(inputs[from..from + count].to_vec(), targets[from..from + count].to_vec(), 0.0, 1.0)
    };
    let v = spec.train_count;
    let t = v + spec.validation_count;
    Ok(Splits {
        train: slice(0, spec.train_count)?,
        validation: slice(v, spec.validation_count)?,
        test: slice(t, spec.test_count)?,
    })
}

/// 0-based index of the largest output; the lowest index wins ties.
pub fn classify(output: &[f64]) -> usize {
    let mut best = 0;
    for (k, &y) in output.iter().enumerate() {
        if y > output[best] {
            best = k;
        }
    }
    best
}

/// Percentage of patterns whose winning output differs from the target's.
pub fn misclassification_rate(net: &Network, patterns: &PatternSet) -> Result<f64> {
    let mut wrong = 0usize;
    for (x, t) in patterns.iter() {
        let y = net.forward(x)?;
        if classify(&y) != classify(t) {
            wrong += 1;
        }
    }
    Ok(100.0 * wrong as f64 / patterns.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(text: &str) -> DatasetSchema {
        DatasetSchema::parse(text).unwrap()
    }

    fn small() -> DatasetSchema {
        schema("name = toy\ninputs = 2\nclasses = 2\nclass_col = 3\nid_cols = 0\nlabels = 2, 4\n")
    }

    #[test]
    fn schema_parsing() {
        let s = small();
        assert_eq!(s.arity(), 4);
        assert_eq!(s.impute, ImputeStrategy::ColumnMean);
        assert!(s.rescale);
        assert_eq!(s.class_index("4").unwrap(), 2);
        assert!(s.class_index("3").is_err());
        let c = schema("name=x\ninputs=1\nclasses=3\nclass_col=1\nimpute = constant: 0\nrescale=false");
        assert_eq!(c.impute, ImputeStrategy::Constant(0.0));
        assert_eq!(c.class_index("3").unwrap(), 3);
        assert!(c.class_index("0").is_err());
        assert!(DatasetSchema::parse("name=x\ninputs=1\nclasses=2\nclass_col=1\ncolour=red").is_err());
        assert!(DatasetSchema::parse("name=x\ninputs=1\nclasses=1\nclass_col=1").is_err());
        assert!(DatasetSchema::parse("name=x\ninputs=0\nclasses=2\nclass_col=0").is_err());
        assert!(DatasetSchema::parse("name=x\ninputs=1\nclasses=2\nclass_col=5").is_err());
    }

    #[test]
    fn reading_rows() {
        let t = read_csv("7,1,?,2\n8, 3 ,5,4\n".as_bytes(), &small(), "mem").unwrap();
        assert_eq!(t.attributes, vec![vec![Some(1.0), None], vec![Some(3.0), Some(5.0)]]);
        assert_eq!(t.labels, vec!["2", "4"]);
    }

    #[test]
    fn reading_errors_name_row_and_column() {
        match read_csv("7,1,2,2\n8,3,x,4\n".as_bytes(), &small(), "mem") {
            Err(Error::Parse { row: 2, column: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        match read_csv("7,1,2,2\n8,3,4\n".as_bytes(), &small(), "mem") {
            Err(Error::Parse { row: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_csv("".as_bytes(), &small(), "mem"), Err(Error::Dataset(_))));
        let counted = DatasetSchema { rows: Some(3), ..small() };
        assert!(read_csv("7,1,2,2\n".as_bytes(), &counted, "mem").is_err());
    }

    #[test]
    fn imputation() {
        let raw = RawTable {
            attributes: vec![vec![Some(1.0)], vec![None], vec![Some(3.0)]],
            labels: vec!["1".into(); 3],
        };
        let mean = impute_missing(raw.clone(), ImputeStrategy::ColumnMean).unwrap();
        assert_eq!(mean.attributes, vec![vec![1.0], vec![2.0], vec![3.0]]);
        let zero = impute_missing(raw, ImputeStrategy::Constant(0.0)).unwrap();
        assert_eq!(zero.attributes, vec![vec![1.0], vec![0.0], vec![3.0]]);
        let full = RawTable { attributes: vec![vec![Some(4.0)], vec![Some(5.0)]], labels: vec!["1".into(); 2] };
        assert_eq!(impute_missing(full, ImputeStrategy::ColumnMean).unwrap().attributes, vec![vec![4.0], vec![5.0]]);
        let empty = RawTable { attributes: vec![vec![None], vec![None]], labels: vec!["1".into(); 2] };
        assert!(impute_missing(empty, ImputeStrategy::ColumnMean).is_err());
    }

    fn table(cols: &[&[f64]]) -> Table {
        let rows = cols[0].len();
        Table {
            attributes: (0..rows).map(|r| cols.iter().map(|c| c[r]).collect()).collect(),
            labels: vec!["1".into(); rows],
        }
    }

    #[test]
    fn rescaling() {
        let t = rescale_inputs(table(&[&[2.0, 4.0, 6.0], &[5.0, 5.0, 5.0], &[0.0, 0.25, 1.0]]));
        assert_eq!(t.attributes, vec![vec![0.0, 0.0, 0.0], vec![0.5, 0.0, 0.25], vec![1.0, 0.0, 1.0]]);
    }

    #[test]
    fn categorical_expansion() {
        let t = expand_categorical(table(&[&[9.0, 8.0, 7.0], &[3.0, 7.0, 3.0]]), &[1]);
        assert_eq!(t.attributes, vec![vec![9.0, 1.0, 0.0], vec![8.0, 0.0, 1.0], vec![7.0, 1.0, 0.0]]);
    }

    #[test]
    fn target_encoding() {
        assert_eq!(one_of_m(1, 2).unwrap(), vec![1.0, 0.0]);
        assert_eq!(one_of_m(2, 2).unwrap(), vec![0.0, 1.0]);
        assert_eq!(one_of_m(2, 3).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(one_of_m(0, 2).is_err() && one_of_m(3, 2).is_err());
        assert!(encode_targets(&["2".into(), "5".into()], &small()).is_err());
    }

    #[test]
    fn classification_rule() {
        assert_eq!(classify(&[0.9, 0.1]), 0);
        assert_eq!(classify(&[0.5, 0.5]), 0);
        assert_eq!(classify(&[0.1, 0.2, 0.7]), 2);
    }

    #[test]
    fn partitions_are_consecutive() {
        let inputs: Vec<Vec<f64>> = (0..10).map(|k| vec![k as f64]).collect();
        let targets: Vec<Vec<f64>> = (0..10).map(|k| one_of_m(k % 2 + 1, 2).unwrap()).collect();
        let spec = SplitSpec { train_count: 5, validation_count: 2, test_count: 2 };
        let s = partition(&inputs, &targets, spec).unwrap();
        let joined: Vec<Vec<f64>> = [&s.train, &s.validation, &s.test]
            .iter()
            .flat_map(|p| p.inputs().to_vec())
            .collect();
        assert_eq!(joined, inputs[..9].to_vec());
        assert!(partition(&inputs, &targets, SplitSpec { train_count: 9, ..spec }).is_err());
        assert!(partition(&inputs, &targets, SplitSpec { test_count: 0, ..spec }).is_err());
    }

    #[test]
    fn misclassification() {
        let mut net = Network::empty(1, 2, 1, 1).unwrap();
        let o = net.output_nodes().start;
        net.connect(o, 0, 5.0).unwrap();
        // Output 0 rises with the input, output 1 stays at 0.5.
        let inputs = vec![vec![1.0], vec![-1.0], vec![1.0], vec![-1.0]];
        let right = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let p = PatternSet::new(inputs.clone(), right.clone(), 0.0, 1.0).unwrap();
        assert_eq!(misclassification_rate(&net, &p).unwrap(), 0.0);
        let mut half = right;
        half.swap(0, 1);
        let p = PatternSet::new(inputs, half, 0.0, 1.0).unwrap();
        assert_eq!(misclassification_rate(&net, &p).unwrap(), 50.0);
    }
}
