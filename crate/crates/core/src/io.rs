//! CSV storage: one `<relation>.csv` per relation with a header of
//! attribute names. A missing file means an empty relation.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{DataType, Instance, Schema, Tuple, Value};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Loads every relation of `schema` from `dir`. Columns may appear in any
/// order but must name each attribute exactly once.
pub fn load_instance(schema: Arc<Schema>, dir: &Path) -> Result<Instance> {
    if !dir.is_dir() {
        return Err(Error::Data(format!("{} is not a directory", dir.display())));
    }
    let mut d = Instance::empty(schema.clone());
    for rel in schema.relations() {
        let path = dir.join(format!("{}.csv", rel.name));
        if !path.exists() {
            continue;
        }
        let at = |line: u64, msg: String| Error::Data(format!("{}:{line}: {msg}", path.display()));
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(&path)
            .map_err(|e| at(1, e.to_string()))?;
        let header = reader.headers().map_err(|e| at(1, e.to_string()))?.clone();
        let mut order = Vec::with_capacity(rel.arity());
        for attr in &rel.attributes {
            let found: Vec<usize> = header
                .iter()
                .enumerate()
                .filter(|(_, h)| *h == attr.name)
                .map(|(i, _)| i)
                .collect();
            match found[..] {
                [i] => order.push(i),
                [] => return Err(at(1, format!("missing column `{}`", attr.name))),
                _ => return Err(at(1, format!("duplicate column `{}`", attr.name))),
            }
        }
        if header.len() != rel.arity() {
            return Err(at(1, format!("expected {} columns, found {}", rel.arity(), header.len())));
        }
        for (n, record) in reader.records().enumerate() {
            let line = n as u64 + 2;
            let record = record.map_err(|e| at(line, e.to_string()))?;
            let mut values = Vec::with_capacity(rel.arity());
            for (attr, &i) in rel.attributes.iter().zip(&order) {
                let raw = &record[i];
                values.push(match attr.datatype {
                    DataType::Int => Value::Int(
                        raw.parse()
                            .map_err(|_| at(line, format!("`{raw}` is not an integer ({})", attr.name)))?,
                    ),
                    DataType::Sym => Value::Sym(raw.to_string()),
                });
            }
            d.insert(Tuple::new(&rel.name, values))
                .map_err(|e| at(line, e.to_string()))?;
        }
    }
    Ok(d)
}

/// Writes every relation of `d` into `dir`, creating it if needed.
pub fn write_instance(d: &Instance, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for rel in d.schema().relations() {
        let path = dir.join(format!("{}.csv", rel.name));
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let write_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
        w.write_record(rel.attributes.iter().map(|a| a.name.as_str()))
            .map_err(write_err)?;
        for t in d.relation_tuples(&rel.name) {
            w.write_record(t.values.iter().map(|v| v.to_string()))
                .map_err(write_err)?;
        }
        w.flush()?;
    }
    Ok(())
}
