//! JSON documents for plants and interpolation specs, CSV helpers.
//!
//! Matrices are arrays of row arrays; a bare number is read as a 1×1 matrix.
//! A single document may carry both the plant keys and `Xi`/`Pi`.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::interp::InterpSpec;
use crate::matops::{Mat, Vector};
use crate::plant::{LftPlant, ParamBox};

const PLANT_KEYS: [&str; 9] = [
    "A_xx", "B_xu", "B_xv", "C_yx", "C_zx", "D_zu", "D_zv", "D_yu", "D_yv",
];

fn parse_matrix(name: &str, v: &Value) -> Result<Mat> {
    if let Some(x) = v.as_f64() {
        return Ok(Mat::from_element(1, 1, x));
    }
    let rows = v
        .as_array()
        .ok_or_else(|| Error::Parse(format!("{name}: expected an array of rows")))?;
    if rows.is_empty() {
        return Ok(Mat::zeros(0, 0));
    }
    let mut data = Vec::new();
    let mut ncols = None;
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::Parse(format!("{name}: row {i} is not an array")))?;
        match ncols {
            None => ncols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::DimensionMismatch {
                    block: name.to_string(),
                    expected: format!("{c} entries in every row"),
                    got: format!("{} entries in row {i}", row.len()),
                })
            }
            _ => {}
        }
        for (j, x) in row.iter().enumerate() {
            let x = x
                .as_f64()
                .ok_or_else(|| Error::Parse(format!("{name}[{i}][{j}] is not a number")))?;
            data.push(x);
        }
    }
    Ok(Mat::from_row_slice(rows.len(), ncols.unwrap_or(0), &data))
}

fn parse_vector(name: &str, v: &Value) -> Result<Vector> {
    let items = v
        .as_array()
        .ok_or_else(|| Error::Parse(format!("{name}: expected an array of numbers")))?;
    let xs = items
        .iter()
        .enumerate()
        .map(|(i, x)| {
            x.as_f64()
                .ok_or_else(|| Error::Parse(format!("{name}[{i}] is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Vector::from_vec(xs))
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::Parse(format!("missing key \"{key}\"")))
}

fn as_object(v: &Value) -> Result<&Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::Parse("top level must be a JSON object".into()))
}

pub fn matrix_to_json(m: &Mat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array(m.row(i).iter().map(|x| json!(x)).collect()))
            .collect(),
    )
}

pub fn plant_from_value(v: &Value) -> Result<LftPlant> {
    let obj = as_object(v)?;
    let mut blocks = Vec::with_capacity(PLANT_KEYS.len());
    for k in PLANT_KEYS {
        blocks.push(parse_matrix(k, field(obj, k)?)?);
    }
    let ps = field(obj, "P")?
        .as_array()
        .ok_or_else(|| Error::Parse("P: expected [P_0, P_1, ...]".into()))?;
    if ps.len() < 2 {
        return Err(Error::invalid("P", "needs P_0 and at least one P_i"));
    }
    let mut pm = ps
        .iter()
        .enumerate()
        .map(|(i, p)| parse_matrix(&format!("P[{i}]"), p))
        .collect::<Result<Vec<_>>>()?;
    let p0 = pm.remove(0);
    let tb = field(obj, "theta_box")?
        .as_object()
        .ok_or_else(|| Error::Parse("theta_box: expected {\"lower\": [...], \"upper\": [...]}".into()))?;
    let theta_box = ParamBox {
        lower: parse_vector("theta_box.lower", field(tb, "lower")?)?,
        upper: parse_vector("theta_box.upper", field(tb, "upper")?)?,
    };
    let mut it = blocks.into_iter();
    let mut next = || it.next().expect("nine blocks");
    let plant = LftPlant {
        a_xx: next(),
        b_xu: next(),
        b_xv: next(),
        c_yx: next(),
        c_zx: next(),
        d_zu: next(),
        d_zv: next(),
        d_yu: next(),
        d_yv: next(),
        p0,
        p_basis: pm,
        theta_box,
    };
    plant.validate()?;
    Ok(plant)
}

pub fn plant_to_value(p: &LftPlant) -> Value {
    let mut obj = Map::new();
    let blocks = [
        &p.a_xx, &p.b_xu, &p.b_xv, &p.c_yx, &p.c_zx, &p.d_zu, &p.d_zv, &p.d_yu, &p.d_yv,
    ];
    for (k, m) in PLANT_KEYS.iter().zip(blocks) {
        obj.insert(k.to_string(), matrix_to_json(m));
    }
    let ps: Vec<Value> = std::iter::once(&p.p0)
        .chain(&p.p_basis)
        .map(matrix_to_json)
        .collect();
    obj.insert("P".into(), Value::Array(ps));
    obj.insert(
        "theta_box".into(),
        json!({
            "lower": p.theta_box.lower.iter().collect::<Vec<_>>(),
            "upper": p.theta_box.upper.iter().collect::<Vec<_>>(),
        }),
    );
    Value::Object(obj)
}

pub fn spec_from_value(v: &Value) -> Result<InterpSpec> {
    let obj = as_object(v)?;
    let xi = parse_matrix("Xi", field(obj, "Xi")?)?;
    let pi = parse_matrix("Pi", field(obj, "Pi")?)?;
    InterpSpec::new(xi, pi)
}

pub fn spec_to_value(s: &InterpSpec) -> Value {
    json!({ "Xi": matrix_to_json(&s.xi), "Pi": matrix_to_json(&s.pi) })
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn parse_plant(text: &str) -> Result<LftPlant> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    plant_from_value(&v)
}

pub fn parse_spec(text: &str) -> Result<InterpSpec> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    spec_from_value(&v)
}

pub fn load_plant(path: &Path) -> Result<LftPlant> {
    plant_from_value(&read_json(path)?)
}

pub fn load_spec(path: &Path) -> Result<InterpSpec> {
    spec_from_value(&read_json(path)?)
}

/// Reads a document that holds both the plant and `Xi`/`Pi`.
pub fn load_config(path: &Path) -> Result<(LftPlant, InterpSpec)> {
    let v = read_json(path)?;
    Ok((plant_from_value(&v)?, spec_from_value(&v)?))
}

/// Pretty JSON with every numeric row kept on one line.
pub fn to_document(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Array(items) if items.iter().all(|x| !x.is_array() && !x.is_object()) => {
            out.push_str(&Value::Array(items.clone()).to_string().replace(',', ", "));
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                write_value(out, x, depth + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push(']');
        }
        Value::Object(map) => {
            out.push_str("{\n");
            for (i, (k, x)) in map.iter().enumerate() {
                let _ = write!(out, "{}{}: ", pad(depth + 1), Value::String(k.clone()));
                write_value(out, x, depth + 1);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

pub fn save_plant(path: &Path, p: &LftPlant) -> Result<()> {
    std::fs::write(path, to_document(&plant_to_value(p)))?;
    Ok(())
}

pub fn save_spec(path: &Path, s: &InterpSpec) -> Result<()> {
    std::fs::write(path, to_document(&spec_to_value(s)))?;
    Ok(())
}

/// Reads a matrix either inline (`"1,2;3,4"`, rows split by `;`) or from a
/// CSV file with one row per line.
pub fn parse_matrix_arg(arg: &str) -> Result<Mat> {
    let path = Path::new(arg);
    let text = if path.is_file() {
        std::fs::read_to_string(path)?
    } else {
        arg.replace(';', "\n")
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {i}: \"{}\" is not a number", t.trim())))
            })
            .collect::<Result<Vec<_>>>();
        match row {
            Ok(r) => rows.push(r),
            // tolerate one header line
            Err(_) if rows.is_empty() && i == 0 => continue,
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse("matrix is empty".into()));
    }
    let cols = rows[0].len();
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch {
            block: "matrix".into(),
            expected: format!("{cols} entries per row"),
            got: format!("{} entries in row {bad}", rows[bad].len()),
        });
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Mat::from_row_slice(flat.len() / cols, cols, &flat))
}

pub fn matrix_to_csv(m: &Mat) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:.17e}")).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_rows_name_block() {
        let doc = r#"{"A_xx": [[1, 2], [3]]}"#;
        let v: Value = serde_json::from_str(doc).unwrap();
        match parse_matrix("A_xx", &v["A_xx"]) {
            Err(Error::DimensionMismatch { block, .. }) => assert_eq!(block, "A_xx"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inline_matrix() {
        let m = parse_matrix_arg("1, 2; 3, 4").unwrap();
        assert_eq!(m, Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert!(parse_matrix_arg("1,2;3").is_err());
        let csv = matrix_to_csv(&m);
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn scalar_is_one_by_one() {
        let m = parse_matrix("D_yu", &json!(0.5)).unwrap();
        assert_eq!(m.shape(), (1, 1));
    }

    #[test]
    fn missing_key_reported() {
        let e = parse_spec(r#"{"Xi": [[0]]}"#).unwrap_err();
        assert!(e.to_string().contains("Pi"));
    }
}
