//! Plain-text array format.
//!
//! ```text
//! f64 2 3
//! 0 1 2
//! 3 4 5
//! ```
//!
//! The first non-blank line holds the element kind followed by the
//! dimensions. The remaining whitespace-separated tokens are the values in
//! row-major order; line breaks between them are not significant. Lines
//! starting with `#` are comments.

use std::fmt::Write as _;

use super::{numel_of, Ndarray};
use crate::element::{Element, Kind};
use crate::error::{Error, Result};

/// An array whose element kind is only known after parsing.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyArray {
    F32(Ndarray<f32>),
    F64(Ndarray<f64>),
}

impl AnyArray {
    pub fn parse(text: &str) -> Result<AnyArray> {
        let mut r = LineReader::new(text);
        let (line, header) = r
            .next_line()
            .ok_or_else(|| r.error("missing array header"))?;
        let kind = header_kind(header).ok_or_else(|| Error::Parse {
            line,
            msg: "header must start with f32 or f64".into(),
        })?;
        let mut r = LineReader::new(text);
        let out = match kind {
            Kind::F32 => AnyArray::F32(read_array(&mut r)?),
            Kind::F64 => AnyArray::F64(read_array(&mut r)?),
        };
        r.expect_end()?;
        Ok(out)
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            AnyArray::F32(a) => a.shape(),
            AnyArray::F64(a) => a.shape(),
        }
    }
}

fn header_kind(header: &str) -> Option<Kind> {
    header.split_whitespace().next().and_then(Kind::from_name)
}

impl<T: Element> Ndarray<T> {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        write_array(&mut out, self);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = LineReader::new(text);
        let a = read_array(&mut r)?;
        r.expect_end()?;
        Ok(a)
    }
}

pub(crate) fn write_array<T: Element>(out: &mut String, a: &Ndarray<T>) {
    out.push_str(T::KIND.name());
    for d in a.shape() {
        let _ = write!(out, " {d}");
    }
    out.push('\n');
    let row = *a.shape().last().unwrap_or(&1);
    for chunk in a.data().chunks(row.max(1)) {
        let mut first = true;
        for v in chunk {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v:?}");
        }
        out.push('\n');
    }
}

/// Line cursor that skips blank and comment lines and tracks 1-based line
/// numbers for error messages.
pub(crate) struct LineReader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last: usize,
}

impl<'a> LineReader<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        LineReader {
            lines: text.lines().enumerate().peekable(),
            last: 0,
        }
    }

    fn skip_blank(&mut self) {
        while let Some((_, l)) = self.lines.peek() {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                self.lines.next();
            } else {
                break;
            }
        }
    }

    pub(crate) fn next_line(&mut self) -> Option<(usize, &'a str)> {
        self.skip_blank();
        let (i, l) = self.lines.next()?;
        self.last = i + 1;
        Some((i + 1, l.trim()))
    }

    pub(crate) fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.last,
            msg: msg.into(),
        }
    }

    pub(crate) fn expect_end(&mut self) -> Result<()> {
        match self.next_line() {
            None => Ok(()),
            Some((line, _)) => Err(Error::Parse {
                line,
                msg: "unexpected trailing content".into(),
            }),
        }
    }
}

pub(crate) fn read_array<T: Element>(r: &mut LineReader<'_>) -> Result<Ndarray<T>> {
    let (line, header) = r
        .next_line()
        .ok_or_else(|| r.error("missing array header"))?;
    let perr = |msg: String| Error::Parse { line, msg };
    let mut fields = header.split_whitespace();
    let kind = fields.next().unwrap_or("");
    if Kind::from_name(kind) != Some(T::KIND) {
        return Err(perr(format!(
            "expected element kind {}, found `{kind}`",
            T::KIND.name()
        )));
    }
    let shape = fields
        .map(|f| f.parse::<usize>().map_err(|_| perr(format!("bad dimension `{f}`"))))
        .collect::<Result<Vec<_>>>()?;
    let n = numel_of(&shape).map_err(|e| perr(e.to_string()))?;
    let mut data = Vec::with_capacity(n.min(1 << 16));
    while data.len() < n {
        let (line, text) = r
            .next_line()
            .ok_or_else(|| r.error(format!("expected {n} values, found {}", data.len())))?;
        for tok in text.split_whitespace() {
            if data.len() == n {
                return Err(Error::Parse {
                    line,
                    msg: format!("more than {n} values"),
                });
            }
            let v = tok.parse::<T>().map_err(|_| Error::Parse {
                line,
                msg: format!("bad value `{tok}`"),
            })?;
            data.push(v);
        }
    }
    Ok(Ndarray::from_parts(shape, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout() {
        let a = Ndarray::<f64>::sequential(&[2, 3]).unwrap();
        assert_eq!(a.to_text(), "f64 2 3\n0.0 1.0 2.0\n3.0 4.0 5.0\n");
        let b = Ndarray::<f64>::from_text("# comment\nf64 2 3\n0 1\n2 3 4 5\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "",
            "f64",
            "f64 0",
            "f64 2\n1",
            "f64 2\n1 2 3",
            "f64 2\n1 x",
            "f32 1\n1",
            "i32 1\n1",
            "f64 1\n1\n2",
            "f64 99999999999 99999999999\n1",
        ] {
            assert!(Ndarray::<f64>::from_text(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn any_kind() {
        let a = AnyArray::parse("f32 2\n0.5 1.5").unwrap();
        assert_eq!(a.shape(), &[2]);
        assert!(matches!(a, AnyArray::F32(_)));
        assert!(matches!(AnyArray::parse("f64 1\nNaN").unwrap(), AnyArray::F64(_)));
        assert!(AnyArray::parse("f16 1\n1").is_err());
    }

    proptest! {
        #[test]
        fn text_roundtrip_bitwise(
            shape in proptest::collection::vec(1usize..5, 1..4),
            seed in any::<u64>(),
            scale in -300i32..300,
        ) {
            let a = Ndarray::<f64>::uniform(&shape, seed).unwrap().map(|v| (v - 0.5) * 10f64.powi(scale));
            let back = Ndarray::<f64>::from_text(&a.to_text()).unwrap();
            prop_assert!(a.bitwise_eq(&back));
            let a32 = a.to_f32();
            prop_assert!(Ndarray::<f32>::from_text(&a32.to_text()).unwrap().bitwise_eq(&a32));
        }
    }
}
