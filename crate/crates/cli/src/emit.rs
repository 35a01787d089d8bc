//! Deterministic report emission.
//!
//! Floats are printed with 17 significant digits (`{:.16e}`) in both CSV and
//! JSON so outputs are byte-stable and round-trip exactly. CSV is RFC-4180
//! style with LF line endings. All report payloads are rendered in memory
//! first; files only appear after the whole pipeline has succeeded.

use std::io;

use serde::Serialize;

/// 17-significant-digit float rendering shared by CSV and JSON.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Quotes a CSV field when it contains a comma, quote, or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// A CSV document under construction; rows end with LF.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        let mut buf = String::new();
        buf.push_str(header);
        buf.push('\n');
        Csv { buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        let line: Vec<String> = fields.iter().map(|f| csv_field(f)).collect();
        self.buf.push_str(&line.join(","));
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}

/// serde_json formatter printing every f64 with 17 significant digits;
/// non-finite values render as null.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    value
        .serialize(&mut ser)
        .expect("report serialization cannot fail");
    out.push(b'\n');
    out
}

/// One output file: name relative to the output directory, plus content.
pub struct OutFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Writes the file set atomically enough for reports: everything goes to
/// `<name>.tmp` first, then the batch is renamed into place.
pub fn write_all(dir: &std::path::Path, files: &[OutFile]) -> io::Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut tmp_paths = Vec::with_capacity(files.len());
    for f in files {
        let tmp = dir.join(format!("{}.tmp", f.name));
        std::fs::write(&tmp, &f.bytes)?;
        tmp_paths.push(tmp);
    }
    let mut finals = Vec::with_capacity(files.len());
    for (f, tmp) in files.iter().zip(tmp_paths.iter()) {
        let target = dir.join(&f.name);
        std::fs::rename(tmp, &target)?;
        finals.push(target);
    }
    Ok(finals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_17_digits() {
        assert_eq!(fmt_f64(0.25), "2.5000000000000000e-1");
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        let x = std::f64::consts::PI;
        let printed = fmt_f64(x);
        let back: f64 = printed.parse().unwrap();
        assert_eq!(back, x, "17 digits round-trip");
    }

    #[test]
    fn csv_quotes_only_when_needed() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn json_floats_use_scientific_17() {
        #[derive(Serialize)]
        struct S {
            x: f64,
        }
        let bytes = to_json_bytes(&S { x: 0.5 });
        assert_eq!(String::from_utf8(bytes).unwrap(), "{\"x\":5.0000000000000000e-1}\n");
    }
}
