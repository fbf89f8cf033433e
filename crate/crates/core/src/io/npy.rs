//! NPY v1.0 container, written from scratch.
//!
//! Layout: magic `\x93NUMPY`, version `01 00`, little-endian `u16` header
//! length, an ASCII Python-literal dict with `descr`, `fortran_order` and
//! `shape`, space-padded so the payload starts on a 64-byte boundary and
//! terminated by `\n`, then the raw little-endian row-major payload.

use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;
const MAX_DIMS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum NpyData {
    F4(Vec<f32>),
    F8(Vec<f64>),
    I4(Vec<i32>),
    U1(Vec<u8>),
}

impl NpyData {
    pub fn len(&self) -> usize {
        match self {
            NpyData::F4(v) => v.len(),
            NpyData::F8(v) => v.len(),
            NpyData::I4(v) => v.len(),
            NpyData::U1(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn descr(&self) -> &'static str {
        match self {
            NpyData::F4(_) => "<f4",
            NpyData::F8(_) => "<f8",
            NpyData::I4(_) => "<i4",
            NpyData::U1(_) => "|u1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: NpyData,
}

impl NpyArray {
    pub fn new(shape: Vec<usize>, data: NpyData) -> Result<Self> {
        check_shape(&shape)?;
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Format(format!(
                "shape {shape:?} holds {n} elements, payload has {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.len() > MAX_DIMS {
        return Err(Error::Format(format!(
            "dimensionality {} outside 1..={MAX_DIMS}",
            shape.len()
        )));
    }
    Ok(())
}

fn shape_literal(shape: &[usize]) -> String {
    match shape {
        [n] => format!("({n},)"),
        _ => {
            let parts: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
            format!("({})", parts.join(", "))
        }
    }
}

pub fn encode_npy(array: &NpyArray) -> Result<Vec<u8>> {
    check_shape(&array.shape)?;
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        array.data.descr(),
        shape_literal(&array.shape)
    );
    // magic + version + u16 length + header + '\n' must be a multiple of ALIGN
    let unpadded = MAGIC.len() + 2 + 2 + header.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    header.extend(std::iter::repeat_n(' ', pad));
    header.push('\n');
    let hlen = u16::try_from(header.len())
        .map_err(|_| Error::Format("header longer than 65535 bytes".into()))?;

    let mut out = Vec::with_capacity(MAGIC.len() + 4 + header.len() + array.data.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&hlen.to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    match &array.data {
        NpyData::F4(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::F8(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::I4(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        NpyData::U1(v) => out.extend_from_slice(v),
    }
    Ok(out)
}

pub fn decode_npy(bytes: &[u8]) -> Result<NpyArray> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::Format("missing \\x93NUMPY magic".into()));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (hlen, hstart) = match (major, minor) {
        (1, 0) => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        (2, 0) | (3, 0) if bytes.len() >= 12 => (
            u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize,
            12,
        ),
        _ => return Err(Error::Format(format!("unsupported version {major}.{minor}"))),
    };
    let payload_start = hstart + hlen;
    if bytes.len() < payload_start {
        return Err(Error::Format("truncated header".into()));
    }
    let header = std::str::from_utf8(&bytes[hstart..payload_start])
        .map_err(|_| Error::Format("header is not ASCII".into()))?;
    let dict = parse_header(header)?;
    if dict.fortran_order {
        return Err(Error::Format("fortran_order=True is not supported".into()));
    }
    check_shape(&dict.shape)?;
    let n: usize = dict.shape.iter().product();
    let payload = &bytes[payload_start..];

    let width = match dict.descr.as_str() {
        "<f4" | "<i4" => 4,
        "<f8" => 8,
        "|u1" | "<u1" => 1,
        other => return Err(Error::DType(other.to_string())),
    };
    if payload.len() != n * width {
        return Err(Error::Format(format!(
            "payload of {} bytes, shape {:?} needs {}",
            payload.len(),
            dict.shape,
            n * width
        )));
    }
    let data = match width {
        8 => NpyData::F8(
            payload
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        ),
        4 if dict.descr == "<f4" => NpyData::F4(
            payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        ),
        4 => NpyData::I4(
            payload
                .chunks_exact(4)
                .map(|b| i32::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        ),
        _ => NpyData::U1(payload.to_vec()),
    };
    NpyArray::new(dict.shape, data)
}

pub fn write_tensor(array: &NpyArray, path: &Path) -> Result<()> {
    super::write_file(path, &encode_npy(array)?)
}

pub fn read_tensor(path: &Path) -> Result<NpyArray> {
    decode_npy(&super::read_file(path)?)
}

#[derive(Debug)]
struct HeaderDict {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

#[derive(Debug)]
enum Literal {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

/// Parses the Python dict literal subset NPY headers use.
fn parse_header(text: &str) -> Result<HeaderDict> {
    let mut p = Parser {
        s: text.trim_end().as_bytes(),
        i: 0,
    };
    p.expect(b'{')?;
    let (mut descr, mut fortran, mut shape) = (None, None, None);
    loop {
        p.skip_ws();
        if p.eat(b'}') {
            break;
        }
        let key = p.string()?;
        p.skip_ws();
        p.expect(b':')?;
        p.skip_ws();
        let value = p.literal()?;
        match (key.as_str(), value) {
            ("descr", Literal::Str(s)) => descr = Some(s),
            ("fortran_order", Literal::Bool(b)) => fortran = Some(b),
            ("shape", Literal::Tuple(t)) => shape = Some(t),
            (k, v) => return Err(Error::Format(format!("unexpected header entry {k}: {v:?}"))),
        }
        p.skip_ws();
        if !p.eat(b',') {
            p.skip_ws();
            p.expect(b'}')?;
            break;
        }
    }
    p.skip_ws();
    if p.i != p.s.len() {
        return Err(Error::Format("trailing bytes after header dict".into()));
    }
    match (descr, fortran, shape) {
        (Some(descr), Some(fortran_order), Some(shape)) => Ok(HeaderDict {
            descr,
            fortran_order,
            shape,
        }),
        _ => Err(Error::Format(
            "header must define descr, fortran_order and shape".into(),
        )),
    }
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.s.get(self.i) == Some(&c) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "expected `{}` at header byte {}",
                c as char, self.i
            )))
        }
    }

    fn string(&mut self) -> Result<String> {
        let quote = match self.s.get(self.i) {
            Some(&q @ (b'\'' | b'"')) => q,
            _ => return Err(Error::Format(format!("expected string at byte {}", self.i))),
        };
        self.i += 1;
        let start = self.i;
        while self.i < self.s.len() && self.s[self.i] != quote {
            self.i += 1;
        }
        if self.i == self.s.len() {
            return Err(Error::Format("unterminated string".into()));
        }
        let out = String::from_utf8_lossy(&self.s[start..self.i]).into_owned();
        self.i += 1;
        Ok(out)
    }

    fn literal(&mut self) -> Result<Literal> {
        match self.s.get(self.i) {
            Some(b'\'' | b'"') => Ok(Literal::Str(self.string()?)),
            Some(b'(') => {
                self.i += 1;
                let mut dims = Vec::new();
                loop {
                    self.skip_ws();
                    if self.eat(b')') {
                        break;
                    }
                    let start = self.i;
                    while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
                        self.i += 1;
                    }
                    let digits = std::str::from_utf8(&self.s[start..self.i]).unwrap();
                    let d = digits
                        .parse::<usize>()
                        .map_err(|_| Error::Format(format!("bad shape entry at byte {start}")))?;
                    dims.push(d);
                    self.skip_ws();
                    if !self.eat(b',') {
                        self.skip_ws();
                        self.expect(b')')?;
                        break;
                    }
                }
                Ok(Literal::Tuple(dims))
            }
            _ if self.s[self.i..].starts_with(b"True") => {
                self.i += 4;
                Ok(Literal::Bool(true))
            }
            _ if self.s[self.i..].starts_with(b"False") => {
                self.i += 5;
                Ok(Literal::Bool(false))
            }
            _ => Err(Error::Format(format!("unexpected literal at byte {}", self.i))),
        }
    }
}
