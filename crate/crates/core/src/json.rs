//! JSON helpers: complex numbers are two-element arrays `[re, im]`.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

pub fn cjson(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn cvec_json(v: &[C64]) -> Value {
    Value::Array(v.iter().map(|z| cjson(*z)).collect())
}

pub fn cmat_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| cjson(m[(i, j)])).collect()))
            .collect(),
    )
}

/// Parse a real number or an `[re, im]` pair.
pub fn parse_complex(v: &Value) -> Result<C64> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .map(|x| C64::new(x, 0.0))
            .ok_or_else(|| Error::InvalidModel(format!("not a number: {v}"))),
        Value::Array(a) if a.len() == 2 => {
            let re = a[0].as_f64();
            let im = a[1].as_f64();
            match (re, im) {
                (Some(r), Some(i)) => Ok(C64::new(r, i)),
                _ => Err(Error::InvalidModel(format!("complex pair must hold two numbers: {v}"))),
            }
        }
        _ => Err(Error::InvalidModel(format!("expected a number or [re, im], found {v}"))),
    }
}

pub fn parse_cvec(v: &Value) -> Result<Vec<C64>> {
    match v {
        Value::Array(a) => a.iter().map(parse_complex).collect(),
        _ => Err(Error::InvalidModel(format!("expected an array, found {v}"))),
    }
}

pub fn parse_cmat(v: &Value) -> Result<CMat> {
    let rows: Vec<Vec<C64>> = match v {
        Value::Array(a) => a.iter().map(parse_cvec).collect::<Result<_>>()?,
        _ => return Err(Error::InvalidModel("expected a matrix".into())),
    };
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidModel("ragged matrix".into()));
    }
    Ok(CMat::from_fn(n, m, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_round_trip() {
        let z = C64::new(1.5, -2.0);
        assert_eq!(parse_complex(&cjson(z)).unwrap(), z);
        assert_eq!(parse_complex(&json!(3)).unwrap(), C64::new(3.0, 0.0));
        assert!(parse_complex(&json!("x")).is_err());
        assert!(parse_complex(&json!([1, 2, 3])).is_err());
    }
}
