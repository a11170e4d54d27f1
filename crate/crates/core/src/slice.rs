//! Basic (`start:stop:step`) and fancy (index-list) slicing.
//!
//! Stops are inclusive and negative positions count from the end, so
//! `[6; -1]` runs to the last index and `[-1; 0]` walks a dimension
//! backwards. When the step is omitted its sign follows the direction from
//! start to stop. Every selected dimension keeps its axis, including
//! single-index selections, so the output rank equals the input rank.

use std::fmt;
use std::str::FromStr;

use crate::element::Element;
use crate::error::{Error, Result};
use crate::ndarray::Ndarray;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SliceEntry {
    All,
    Index(isize),
    Range {
        start: isize,
        stop: isize,
        step: Option<isize>,
    },
}

impl SliceEntry {
    pub fn range(start: isize, stop: isize) -> Self {
        SliceEntry::Range {
            start,
            stop,
            step: None,
        }
    }

    pub fn range_step(start: isize, stop: isize, step: isize) -> Self {
        SliceEntry::Range {
            start,
            stop,
            step: Some(step),
        }
    }

    fn indices(&self, dim: usize, size: usize) -> Result<Vec<usize>> {
        match *self {
            SliceEntry::All => Ok((0..size).collect()),
            SliceEntry::Index(i) => Ok(vec![resolve(i, dim, size)?]),
            SliceEntry::Range { start, stop, step } => {
                let a = resolve(start, dim, size)? as isize;
                let b = resolve(stop, dim, size)? as isize;
                let step = match step {
                    Some(0) => return Err(Error::ZeroStep { dim }),
                    Some(s) => s,
                    None if b < a => -1,
                    None => 1,
                };
                if (b - a) != 0 && (b - a).signum() != step.signum() {
                    return Err(Error::EmptySelection { dim });
                }
                let count = (b - a) / step + 1;
                Ok((0..count).map(|k| (a + k * step) as usize).collect())
            }
        }
    }
}

fn resolve(i: isize, dim: usize, size: usize) -> Result<usize> {
    let n = size as isize;
    let r = if i < 0 { i + n } else { i };
    if r < 0 || r >= n {
        return Err(Error::IndexOutOfBounds {
            dim,
            index: i,
            size,
        });
    }
    Ok(r as usize)
}

/// Per-dimension basic slice definition. Missing trailing entries select
/// the whole dimension.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SliceSpec(pub Vec<SliceEntry>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FancyEntry {
    Slice(SliceEntry),
    /// Explicit positions; may repeat or be unordered when reading.
    List(Vec<isize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FancySpec(pub Vec<FancyEntry>);

impl From<SliceEntry> for FancyEntry {
    fn from(e: SliceEntry) -> Self {
        FancyEntry::Slice(e)
    }
}

impl From<SliceSpec> for FancySpec {
    fn from(s: SliceSpec) -> Self {
        FancySpec(s.0.into_iter().map(FancyEntry::Slice).collect())
    }
}

impl SliceSpec {
    /// Resolved index sequence for each dimension of `shape`.
    pub fn indices(&self, shape: &[usize]) -> Result<Vec<Vec<usize>>> {
        if self.0.len() > shape.len() {
            return Err(Error::SliceRank {
                got: self.0.len(),
                rank: shape.len(),
            });
        }
        shape
            .iter()
            .enumerate()
            .map(|(d, &n)| self.0.get(d).unwrap_or(&SliceEntry::All).indices(d, n))
            .collect()
    }

    pub fn output_shape(&self, shape: &[usize]) -> Result<Vec<usize>> {
        Ok(self.indices(shape)?.iter().map(Vec::len).collect())
    }
}

impl FancySpec {
    pub fn indices(&self, shape: &[usize]) -> Result<Vec<Vec<usize>>> {
        if self.0.len() > shape.len() {
            return Err(Error::SliceRank {
                got: self.0.len(),
                rank: shape.len(),
            });
        }
        shape
            .iter()
            .enumerate()
            .map(|(d, &n)| match self.0.get(d) {
                None => SliceEntry::All.indices(d, n),
                Some(FancyEntry::Slice(e)) => e.indices(d, n),
                Some(FancyEntry::List(l)) if l.is_empty() => Err(Error::EmptySelection { dim: d }),
                Some(FancyEntry::List(l)) => l.iter().map(|&i| resolve(i, d, n)).collect(),
            })
            .collect()
    }
}

fn gather<T: Element>(x: &Ndarray<T>, idx: &[Vec<usize>]) -> Ndarray<T> {
    let shape: Vec<usize> = idx.iter().map(Vec::len).collect();
    let strides = x.strides();
    let n: usize = shape.iter().product();
    let mut out = Vec::with_capacity(n);
    let src = x.data();
    let last = idx.len() - 1;
    let inner = &idx[last];
    let contiguous = inner.windows(2).all(|w| w[1] == w[0] + 1);
    for_each_outer(idx, &strides, |base| {
        if contiguous {
            out.extend_from_slice(&src[base + inner[0]..base + inner[0] + inner.len()]);
        } else {
            out.extend(inner.iter().map(|&i| src[base + i]));
        }
    });
    Ndarray::from_parts(shape, out)
}

fn scatter<T: Element>(x: &mut Ndarray<T>, idx: &[Vec<usize>], y: &Ndarray<T>) {
    let strides = x.strides();
    let last = idx.len() - 1;
    let inner = &idx[last];
    let mut src = y.data().iter();
    let dst = x.data_mut();
    for_each_outer(idx, &strides, |base| {
        for &i in inner {
            dst[base + i] = *src.next().expect("shape checked");
        }
    });
}

/// Calls `f` with the base offset of every innermost lane, in row-major
/// order of the selection.
fn for_each_outer(idx: &[Vec<usize>], strides: &[usize], mut f: impl FnMut(usize)) {
    let outer = idx.len() - 1;
    let mut counter = vec![0usize; outer];
    loop {
        let base: usize = (0..outer).map(|d| idx[d][counter[d]] * strides[d]).sum();
        f(base);
        let mut d = outer;
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            counter[d] += 1;
            if counter[d] < idx[d].len() {
                break;
            }
            counter[d] = 0;
        }
    }
}

fn check_target<T: Element>(idx: &[Vec<usize>], y: &Ndarray<T>) -> Result<()> {
    let expected: Vec<usize> = idx.iter().map(Vec::len).collect();
    if expected != y.shape() {
        return Err(Error::ShapeMismatch {
            expected,
            got: y.shape().to_vec(),
        });
    }
    Ok(())
}

pub fn get_slice<T: Element>(spec: &SliceSpec, x: &Ndarray<T>) -> Result<Ndarray<T>> {
    Ok(gather(x, &spec.indices(x.shape())?))
}

pub fn set_slice<T: Element>(spec: &SliceSpec, x: &mut Ndarray<T>, y: &Ndarray<T>) -> Result<()> {
    let idx = spec.indices(x.shape())?;
    check_target(&idx, y)?;
    scatter(x, &idx, y);
    Ok(())
}

pub fn get_fancy<T: Element>(spec: &FancySpec, x: &Ndarray<T>) -> Result<Ndarray<T>> {
    Ok(gather(x, &spec.indices(x.shape())?))
}

/// Writes `y` into the fancy selection. Repeated positions in a dimension
/// are rejected since the write order would be ambiguous.
pub fn set_fancy<T: Element>(spec: &FancySpec, x: &mut Ndarray<T>, y: &Ndarray<T>) -> Result<()> {
    let idx = spec.indices(x.shape())?;
    for (dim, list) in idx.iter().enumerate() {
        let mut seen = vec![false; x.shape()[dim]];
        for &i in list {
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::DuplicateIndex { dim, index: i });
            }
        }
    }
    check_target(&idx, y)?;
    scatter(x, &idx, y);
    Ok(())
}

impl<T: Element> Ndarray<T> {
    pub fn get_slice(&self, spec: &SliceSpec) -> Result<Self> {
        get_slice(spec, self)
    }

    pub fn set_slice(&mut self, spec: &SliceSpec, y: &Self) -> Result<()> {
        set_slice(spec, self, y)
    }

    pub fn get_fancy(&self, spec: &FancySpec) -> Result<Self> {
        get_fancy(spec, self)
    }

    pub fn set_fancy(&mut self, spec: &FancySpec, y: &Self) -> Result<()> {
        set_fancy(spec, self, y)
    }

    /// Rows `lo..lo+len` along axis 0.
    pub fn rows(&self, lo: usize, len: usize) -> Result<Self> {
        let spec = SliceSpec(vec![SliceEntry::range(lo as isize, (lo + len) as isize - 1)]);
        self.get_slice(&spec)
    }

    /// Concatenates arrays along axis 0; all other dims must agree.
    pub fn concat_rows(parts: &[Self]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptyInput)?;
        let tail = &first.shape()[1..];
        let mut rows = 0;
        let mut data = Vec::new();
        for p in parts {
            if &p.shape()[1..] != tail {
                return Err(Error::ShapeMismatch {
                    expected: first.shape().to_vec(),
                    got: p.shape().to_vec(),
                });
            }
            rows += p.shape()[0];
            data.extend_from_slice(p.data());
        }
        let mut shape = first.shape().to_vec();
        shape[0] = rows;
        Ok(Ndarray::from_parts(shape, data))
    }
}

fn parse_int(s: &str) -> Result<isize> {
    s.trim().parse::<isize>().map_err(|_| Error::Parse {
        line: 1,
        msg: format!("bad index `{}`", s.trim()),
    })
}

fn parse_entry(s: &str) -> Result<SliceEntry> {
    let s = s.trim();
    if s == "*" || s == ":" || s.is_empty() {
        return Ok(SliceEntry::All);
    }
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [i] => Ok(SliceEntry::Index(parse_int(i)?)),
        [a, b] => Ok(SliceEntry::range(parse_int(a)?, parse_int(b)?)),
        [a, b, c] => Ok(SliceEntry::range_step(
            parse_int(a)?,
            parse_int(b)?,
            parse_int(c)?,
        )),
        _ => Err(Error::Parse {
            line: 1,
            msg: format!("bad slice entry `{s}`"),
        }),
    }
}

fn strip_brackets(s: &str) -> &str {
    let t = s.trim();
    t.strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .unwrap_or(t)
}

/// Parses the command-line form, e.g. `0:4,6:-1,-1:0` or `*,0:499`.
/// Dimensions are comma separated; `*` selects everything; `a:b[:c]` is an
/// inclusive range; a lone integer selects one index.
impl FromStr for SliceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let body = strip_brackets(s);
        if body.trim().is_empty() {
            return Ok(SliceSpec(Vec::new()));
        }
        body.split(',').map(parse_entry).collect::<Result<_>>().map(SliceSpec)
    }
}

/// Same grammar as [`SliceSpec`], plus `[i;j;k]` index lists.
impl FromStr for FancySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().is_empty() {
            return Ok(FancySpec(Vec::new()));
        }
        s.split(',')
            .map(|part| {
                let t = part.trim();
                if t.starts_with('[') {
                    let inner = t.strip_prefix('[').and_then(|t| t.strip_suffix(']')).ok_or_else(
                        || Error::Parse {
                            line: 1,
                            msg: format!("unterminated index list `{t}`"),
                        },
                    )?;
                    inner
                        .split(';')
                        .map(parse_int)
                        .collect::<Result<Vec<_>>>()
                        .map(FancyEntry::List)
                } else {
                    parse_entry(t).map(FancyEntry::Slice)
                }
            })
            .collect::<Result<_>>()
            .map(FancySpec)
    }
}

impl fmt::Display for SliceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SliceEntry::All => write!(f, "*"),
            SliceEntry::Index(i) => write!(f, "{i}"),
            SliceEntry::Range {
                start,
                stop,
                step: None,
            } => write!(f, "{start}:{stop}"),
            SliceEntry::Range {
                start,
                stop,
                step: Some(s),
            } => write!(f, "{start}:{stop}:{s}"),
        }
    }
}

impl fmt::Display for SliceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}
