//! Canonical JSON: keys sorted, floats with 17 significant digits in
//! exponent form, two-space indentation, trailing newline.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::error::{AlignError, Result};
use crate::metrics::REPORT_SCHEMA_VERSION;

struct Canonical<'a>(PrettyFormatter<'a>);

fn non_finite() -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, "non-finite number in report")
}

impl Formatter for Canonical<'_> {
    fn write_null<W: ?Sized + Write>(&mut self, _: &mut W) -> io::Result<()> {
        // NaN and infinities become null on the way into a Value
        Err(non_finite())
    }

    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        if !v.is_finite() {
            return Err(non_finite());
        }
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn ser_err(e: impl std::fmt::Display) -> AlignError {
    AlignError::Serialization(e.to_string())
}

/// Canonical JSON text of any serializable report. Top-level objects without
/// a `schema_version` field get the current one.
pub fn to_canonical_json<T: Serialize + ?Sized>(report: &T) -> Result<String> {
    // Going through Value sorts object keys.
    let mut value = serde_json::to_value(report).map_err(ser_err)?;
    if let Value::Object(map) = &mut value {
        map.entry("schema_version")
            .or_insert_with(|| Value::from(REPORT_SCHEMA_VERSION));
    }
    canonical_value(&value)
}

pub fn canonical_value(value: &Value) -> Result<String> {
    let mut out = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut out, Canonical(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(ser_err)?;
    out.push(b'\n');
    String::from_utf8(out).map_err(ser_err)
}

pub fn write_report<T: Serialize + ?Sized>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_canonical_json(report)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn floats_and_key_order() {
        let mut m = BTreeMap::new();
        m.insert("zeta", 0.1);
        m.insert("alpha", -2.0);
        let s = to_canonical_json(&m).unwrap();
        assert_eq!(
            s,
            "{\n  \"alpha\": -2.0000000000000000e0,\n  \"schema_version\": 1,\n  \"zeta\": 1.0000000000000001e-1\n}\n"
        );
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["zeta"], 0.1);
    }

    #[test]
    fn struct_fields_are_sorted() {
        #[derive(Serialize)]
        struct R {
            b: u32,
            a: &'static str,
        }
        let s = to_canonical_json(&R { b: 3, a: "x" }).unwrap();
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        assert!(s.contains("\"b\": 3"));
    }

    #[test]
    fn empty_map_and_nan() {
        let empty: BTreeMap<String, f64> = BTreeMap::new();
        assert_eq!(
            to_canonical_json(&empty).unwrap(),
            "{\n  \"schema_version\": 1\n}\n"
        );
        let empty: Vec<f64> = Vec::new();
        assert_eq!(to_canonical_json(&empty).unwrap(), "[]\n");
        let mut m = BTreeMap::new();
        m.insert("x", f64::NAN);
        assert!(matches!(
            to_canonical_json(&m),
            Err(AlignError::Serialization(_))
        ));
    }
}
