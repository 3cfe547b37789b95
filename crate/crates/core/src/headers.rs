//! Packet headers as fixed-length bit vectors over a declared field schema, and traffic types as
//! conjunctions of masked field equalities.
//!
//! Bits are numbered 1-based in schema order, most significant bit first within each field, so
//! with the schema `(dstIP:32, dstTCP:16)` the TCP port occupies positions 33..=48.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use bitvec::prelude::*;

/// Header bit storage.
pub type Bits = BitVec<u64, Msb0>;

/// Widest supported single field.
pub const MAX_FIELD_WIDTH: u32 = 128;

/// Free-bit count above which header enumeration is refused unless a cap is given.
pub const DEFAULT_ENUMERATION_LIMIT: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HeaderError {
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("value {value} does not fit field `{field}` of width {width}")]
    ValueOverflow {
        field: String,
        value: u128,
        width: u32,
    },
    #[error("header and traffic type use different schemas")]
    SchemaMismatch,
    #[error("more than one constraint on field `{0}`")]
    DuplicateConstraint(String),
    #[error("enumeration too large: {free_bits} free bits exceeds the limit of {limit}")]
    EnumerationTooLarge { free_bits: u32, limit: u32 },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Field {
    pub name: String,
    pub width: u32,
    offset: u32,
}

impl Field {
    /// Zero-based position of the first bit of this field in the header.
    pub fn offset(&self) -> u32 {
        self.offset
    }

    pub fn max_value(&self) -> u128 {
        if self.width == 128 {
            u128::MAX
        } else {
            (1u128 << self.width) - 1
        }
    }
}

/// Ordered list of named header fields.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HeaderSchema {
    fields: Vec<Field>,
    total_width: u32,
}

impl HeaderSchema {
    pub fn new<'a, I>(fields: I) -> Result<Arc<Self>, HeaderError>
    where
        I: IntoIterator<Item = (&'a str, u32)>,
    {
        let mut out: Vec<Field> = Vec::new();
        let mut offset = 0u32;
        for (name, width) in fields {
            if name.is_empty() {
                return Err(HeaderError::InvalidSchema("empty field name".into()));
            }
            if out.iter().any(|f| f.name == name) {
                return Err(HeaderError::InvalidSchema(alloc::format!(
                    "duplicate field `{name}`"
                )));
            }
            if width == 0 || width > MAX_FIELD_WIDTH {
                return Err(HeaderError::InvalidSchema(alloc::format!(
                    "field `{name}` has width {width}, expected 1..={MAX_FIELD_WIDTH}"
                )));
            }
            out.push(Field {
                name: name.into(),
                width,
                offset,
            });
            offset += width;
        }
        if out.is_empty() {
            return Err(HeaderError::InvalidSchema("no fields".into()));
        }
        Ok(Arc::new(Self {
            fields: out,
            total_width: offset,
        }))
    }

    /// `dstIP:32, srcIP:32, dstTCP:16, srcTCP:16`.
    pub fn default_schema() -> Arc<Self> {
        Self::new([("dstIP", 32), ("srcIP", 32), ("dstTCP", 16), ("srcTCP", 16)])
            .expect("static schema")
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn total_width(&self) -> u32 {
        self.total_width
    }

    pub fn field(&self, name: &str) -> Result<&Field, HeaderError> {
        self.fields
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| HeaderError::UnknownField(name.into()))
    }
}

fn same_schema(a: &Arc<HeaderSchema>, b: &Arc<HeaderSchema>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

fn write_field(bits: &mut BitSlice<u64, Msb0>, field: &Field, value: u128) {
    for i in 0..field.width {
        let bit = (value >> (field.width - 1 - i)) & 1 == 1;
        bits.set((field.offset + i) as usize, bit);
    }
}

fn read_field(bits: &BitSlice<u64, Msb0>, field: &Field) -> u128 {
    let mut v = 0u128;
    for i in 0..field.width {
        v = (v << 1) | bits[(field.offset + i) as usize] as u128;
    }
    v
}

/// A concrete packet header.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HeaderValue {
    bits: Bits,
    schema: Arc<HeaderSchema>,
}

impl HeaderValue {
    pub fn zeroed(schema: &Arc<HeaderSchema>) -> Self {
        Self {
            bits: bitvec![u64, Msb0; 0; schema.total_width as usize],
            schema: schema.clone(),
        }
    }

    /// Lays out the given field values in schema order. Unassigned fields are zero.
    pub fn from_fields<'a, I>(
        schema: &Arc<HeaderSchema>,
        assignments: I,
    ) -> Result<Self, HeaderError>
    where
        I: IntoIterator<Item = (&'a str, u128)>,
    {
        let mut h = Self::zeroed(schema);
        for (name, value) in assignments {
            h.set_field(name, value)?;
        }
        Ok(h)
    }

    pub fn from_bits(schema: &Arc<HeaderSchema>, bits: Bits) -> Result<Self, HeaderError> {
        if bits.len() != schema.total_width as usize {
            return Err(HeaderError::SchemaMismatch);
        }
        Ok(Self {
            bits,
            schema: schema.clone(),
        })
    }

    pub fn set_field(&mut self, name: &str, value: u128) -> Result<(), HeaderError> {
        let field = self.schema.field(name)?.clone();
        if value > field.max_value() {
            return Err(HeaderError::ValueOverflow {
                field: name.into(),
                value,
                width: field.width,
            });
        }
        write_field(&mut self.bits, &field, value);
        Ok(())
    }

    pub fn field(&self, name: &str) -> Result<u128, HeaderError> {
        let field = self.schema.field(name)?;
        Ok(read_field(&self.bits, field))
    }

    /// `(name, value)` for every field, in schema order.
    pub fn fields(&self) -> impl Iterator<Item = (&str, u128)> + '_ {
        self.schema
            .fields
            .iter()
            .map(move |f| (f.name.as_str(), read_field(&self.bits, f)))
    }

    pub fn schema(&self) -> &Arc<HeaderSchema> {
        &self.schema
    }

    pub fn bits(&self) -> &BitSlice<u64, Msb0> {
        &self.bits
    }

    /// Bit at 1-based position `pos`.
    pub fn bit(&self, pos: usize) -> bool {
        self.bits[pos - 1]
    }

    /// Header bits as a lowercase hex string, left-aligned and zero-padded to whole nibbles.
    pub fn to_hex(&self) -> String {
        let mut out = String::new();
        for chunk in self.bits.chunks(4) {
            let mut nib = 0u8;
            for (i, b) in chunk.iter().enumerate() {
                if *b {
                    nib |= 8 >> i;
                }
            }
            out.push(char::from_digit(nib as u32, 16).unwrap());
        }
        out
    }
}

impl fmt::Debug for HeaderValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (n, v) in self.fields() {
            m.entry(&n, &v);
        }
        m.finish()
    }
}

impl fmt::Display for HeaderValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, field) in self.schema.fields.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}=", field.name)?;
            write_value(f, field, read_field(&self.bits, field))?;
        }
        Ok(())
    }
}

fn is_address_field(field: &Field) -> bool {
    field.width == 32 && field.name.to_ascii_lowercase().contains("ip")
}

fn write_value(f: &mut fmt::Formatter<'_>, field: &Field, v: u128) -> fmt::Result {
    if is_address_field(field) {
        write!(
            f,
            "{}.{}.{}.{}",
            (v >> 24) & 0xff,
            (v >> 16) & 0xff,
            (v >> 8) & 0xff,
            v & 0xff
        )
    } else {
        write!(f, "{v}")
    }
}

/// `field & mask == value & mask`, over the bits of one field.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldConstraint {
    pub field: String,
    pub value: u128,
    pub mask: u128,
}

/// Traffic type indicator: a conjunction of masked field equalities.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrafficType {
    constraints: Vec<FieldConstraint>,
    /// Pinned bit positions.
    mask: Bits,
    /// Required values at pinned positions (zero elsewhere).
    value: Bits,
    schema: Arc<HeaderSchema>,
}

impl TrafficType {
    /// The type containing every header.
    pub fn any(schema: &Arc<HeaderSchema>) -> Self {
        let w = schema.total_width as usize;
        Self {
            constraints: Vec::new(),
            mask: bitvec![u64, Msb0; 0; w],
            value: bitvec![u64, Msb0; 0; w],
            schema: schema.clone(),
        }
    }

    /// Adds `field == value`.
    pub fn exact(self, field: &str, value: u128) -> Result<Self, HeaderError> {
        let width = self.schema.field(field)?.width;
        let mask = if width == 128 {
            u128::MAX
        } else {
            (1u128 << width) - 1
        };
        self.masked(field, value, mask)
    }

    /// Adds `field` equal to `value` on the top `prefix_len` bits of the field.
    pub fn prefix(self, field: &str, value: u128, prefix_len: u32) -> Result<Self, HeaderError> {
        let f = self.schema.field(field)?.clone();
        if prefix_len > f.width {
            return Err(HeaderError::ValueOverflow {
                field: field.into(),
                value: prefix_len as u128,
                width: f.width,
            });
        }
        let mask = if prefix_len == 0 {
            0
        } else {
            f.max_value() & !(f.max_value() >> prefix_len)
        };
        self.masked(field, value, mask)
    }

    /// Adds `field & mask == value & mask`.
    pub fn masked(mut self, field: &str, value: u128, mask: u128) -> Result<Self, HeaderError> {
        let f = self.schema.field(field)?.clone();
        if self.constraints.iter().any(|c| c.field == field) {
            return Err(HeaderError::DuplicateConstraint(field.into()));
        }
        for v in [value, mask] {
            if v > f.max_value() {
                return Err(HeaderError::ValueOverflow {
                    field: field.into(),
                    value: v,
                    width: f.width,
                });
            }
        }
        write_field(&mut self.mask, &f, mask);
        write_field(&mut self.value, &f, value & mask);
        self.constraints.push(FieldConstraint {
            field: field.into(),
            value: value & mask,
            mask,
        });
        Ok(self)
    }

    pub fn schema(&self) -> &Arc<HeaderSchema> {
        &self.schema
    }

    pub fn constraints(&self) -> &[FieldConstraint] {
        &self.constraints
    }

    pub fn is_any(&self) -> bool {
        self.mask.not_any()
    }

    /// The characteristic function of this type.
    pub fn indicator_eval(&self, h: &HeaderValue) -> Result<bool, HeaderError> {
        if !same_schema(&self.schema, &h.schema) {
            return Err(HeaderError::SchemaMismatch);
        }
        Ok(self.matches_unchecked(h))
    }

    /// Same as [`indicator_eval`](Self::indicator_eval) for a header known to share the schema.
    pub fn matches_unchecked(&self, h: &HeaderValue) -> bool {
        let words = self
            .mask
            .as_raw_slice()
            .iter()
            .zip(self.value.as_raw_slice())
            .zip(h.bits.as_raw_slice());
        for ((m, v), x) in words {
            if (x ^ v) & m != 0 {
                return false;
            }
        }
        true
    }

    /// `k - k'`, where `k'` is the number of pinned bit positions.
    pub fn free_bit_count(&self) -> u32 {
        self.schema.total_width - self.mask.count_ones() as u32
    }

    /// The smallest header of this type: pinned bits at their values, free bits zero.
    pub fn representative(&self) -> HeaderValue {
        HeaderValue {
            bits: self.value.clone(),
            schema: self.schema.clone(),
        }
    }

    /// Headers of this type in lexicographic bit order.
    ///
    /// Refuses when the free-bit count exceeds `limit` and no `cap` is given.
    pub fn enumerate(
        &self,
        limit: u32,
        cap: Option<u64>,
    ) -> Result<HeaderEnumeration, HeaderError> {
        let free_bits = self.free_bit_count();
        if cap.is_none() && free_bits > limit {
            return Err(HeaderError::EnumerationTooLarge { free_bits, limit });
        }
        let free: Vec<usize> = self.mask.iter_zeros().collect();
        let total = if free.len() >= 128 {
            None
        } else {
            Some(1u128 << free.len())
        };
        Ok(HeaderEnumeration {
            base: self.value.clone(),
            schema: self.schema.clone(),
            free,
            next: 0,
            total,
            remaining: cap,
        })
    }
}

impl fmt::Debug for TrafficType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TrafficType({self})")
    }
}

/// Renders in the filter syntax accepted by [`parse_filter`].
impl fmt::Display for TrafficType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.constraints.is_empty() {
            return f.write_str("any");
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if i > 0 {
                f.write_str(" and ")?;
            }
            let field = self.schema.field(&c.field).map_err(|_| fmt::Error)?;
            write!(f, "{}=", c.field)?;
            write_value(f, field, c.value)?;
            if c.mask != field.max_value() {
                match prefix_len(c.mask, field.width) {
                    Some(p) => write!(f, "/{p}")?,
                    None => write!(f, "&{:#x}", c.mask)?,
                }
            }
        }
        Ok(())
    }
}

fn prefix_len(mask: u128, width: u32) -> Option<u32> {
    let ones = mask.count_ones();
    let max = if width == 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    };
    let expect = if ones == 0 { 0 } else { max & !(max >> ones) };
    (expect == mask).then_some(ones)
}

/// Lazy stream of the headers of a traffic type.
#[derive(Debug, Clone)]
pub struct HeaderEnumeration {
    base: Bits,
    schema: Arc<HeaderSchema>,
    free: Vec<usize>,
    next: u128,
    total: Option<u128>,
    remaining: Option<u64>,
}

impl Iterator for HeaderEnumeration {
    type Item = HeaderValue;

    fn next(&mut self) -> Option<HeaderValue> {
        if self.remaining == Some(0) {
            return None;
        }
        if let Some(total) = self.total {
            if self.next >= total {
                return None;
            }
        }
        let mut bits = self.base.clone();
        let n = self.free.len();
        // The first free position is the most significant counter bit.
        for (i, pos) in self.free.iter().enumerate() {
            let shift = n - 1 - i;
            let bit = shift < 128 && (self.next >> shift) & 1 == 1;
            bits.set(*pos, bit);
        }
        self.next += 1;
        if let Some(r) = self.remaining.as_mut() {
            *r -= 1;
        }
        Some(HeaderValue {
            bits,
            schema: self.schema.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FilterError {
    #[error("filter syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error(transparent)]
    Header(#[from] HeaderError),
}

fn syntax(column: usize, message: impl ToString) -> FilterError {
    FilterError::Syntax {
        column,
        message: message.to_string(),
    }
}

/// Parses `field=value[/prefix | &mask] and field=value ...`.
///
/// Values are decimal, `0x` hex, `0b` binary, or dotted quads for 32-bit fields. An empty
/// filter, `any`, or `*` denotes the unconstrained type.
pub fn parse_filter(schema: &Arc<HeaderSchema>, text: &str) -> Result<TrafficType, FilterError> {
    let mut t = TrafficType::any(schema);
    let trimmed = text.trim();
    if trimmed.is_empty() || trimmed == "any" || trimmed == "*" {
        return Ok(t);
    }

    // Split on the `and` keyword, tracking byte columns for error reporting.
    let mut terms: Vec<(usize, &str)> = Vec::new();
    let mut start = 0usize;
    let words: Vec<(usize, &str)> = word_spans(text);
    let mut expect_term = true;
    for (col, w) in &words {
        if *w == "and" || *w == "&&" {
            if expect_term {
                return Err(syntax(
                    col + 1,
                    "expected a `field=value` term before `and`",
                ));
            }
            terms.push((start, text[start..*col].trim()));
            start = col + w.len();
            expect_term = true;
        } else {
            expect_term = false;
        }
    }
    if expect_term {
        return Err(syntax(text.len() + 1, "expected a `field=value` term"));
    }
    terms.push((start, text[start..].trim()));

    for (offset, term) in terms {
        let col = offset
            + text[offset..]
                .find(|c: char| !c.is_whitespace())
                .unwrap_or(0)
            + 1;
        let (name, rest) = term
            .split_once('=')
            .ok_or_else(|| syntax(col, alloc::format!("expected `=` in `{term}`")))?;
        let name = name.trim();
        let rest = rest.trim();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(syntax(
                col,
                alloc::format!("invalid field name in `{term}`"),
            ));
        }
        let field = schema.field(name)?.clone();
        let (value_text, shape) = if let Some((v, p)) = rest.split_once('/') {
            let p: u32 = p
                .trim()
                .parse()
                .map_err(|_| syntax(col, alloc::format!("invalid prefix length in `{term}`")))?;
            (v.trim(), Shape::Prefix(p))
        } else if let Some((v, m)) = rest.split_once('&') {
            let m = parse_value(m.trim(), &field)
                .ok_or_else(|| syntax(col, alloc::format!("invalid mask in `{term}`")))?;
            (v.trim(), Shape::Mask(m))
        } else {
            (rest, Shape::Exact)
        };
        let value = parse_value(value_text, &field)
            .ok_or_else(|| syntax(col, alloc::format!("invalid value `{value_text}`")))?;
        if value > field.max_value() {
            return Err(HeaderError::ValueOverflow {
                field: name.into(),
                value,
                width: field.width,
            }
            .into());
        }
        t = match shape {
            Shape::Prefix(p) => t.prefix(name, value, p)?,
            Shape::Mask(m) => t.masked(name, value, m)?,
            Shape::Exact => t.exact(name, value)?,
        };
    }
    Ok(t)
}

enum Shape {
    Exact,
    Prefix(u32),
    Mask(u128),
}

fn word_spans(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s, &text[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, &text[s..]));
    }
    out
}

fn parse_value(text: &str, field: &Field) -> Option<u128> {
    if let Some(hex) = text.strip_prefix("0x") {
        return u128::from_str_radix(hex, 16).ok();
    }
    if let Some(bin) = text.strip_prefix("0b") {
        return u128::from_str_radix(bin, 2).ok();
    }
    if text.contains('.') {
        if field.width != 32 {
            return None;
        }
        let mut v = 0u128;
        let mut n = 0;
        for part in text.split('.') {
            let octet: u8 = part.parse().ok()?;
            v = (v << 8) | octet as u128;
            n += 1;
        }
        return (n == 4).then_some(v);
    }
    text.parse().ok()
}
