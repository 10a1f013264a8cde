//! Irreducible representations of O(3) and ordered direct sums of them.
//!
//! Text form: `irreps := term ('+' term)*`, `term := [uint 'x'] uint ('e'|'o')`.
//! Whitespace is allowed around every token. Order and duplicates are kept as
//! written since they define the data layout.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Behaviour under inversion `x -> -x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    /// `(-1)^l`, the parity of degree-`l` polynomials.
    pub fn of_degree(l: u32) -> Parity {
        if l.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn letter(self) -> char {
        match self {
            Parity::Even => 'e',
            Parity::Odd => 'o',
        }
    }
}

impl std::ops::Mul for Parity {
    type Output = Parity;

    fn mul(self, rhs: Parity) -> Parity {
        if self == rhs {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// A single O(3) irrep: rotation order `l` and parity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Irrep {
    pub l: u32,
    pub p: Parity,
}

impl Irrep {
    pub const fn new(l: u32, p: Parity) -> Self {
        Irrep { l, p }
    }

    pub fn dim(self) -> usize {
        2 * self.l as usize + 1
    }

    /// Irrep carried by the degree-`l` spherical harmonics.
    pub fn spherical_harmonic(l: u32) -> Self {
        Irrep::new(l, Parity::of_degree(l))
    }

    /// Every irrep contained in `self ⊗ other`, ascending in `l`.
    pub fn selection_rule(self, other: Irrep) -> Vec<Irrep> {
        let p = self.p * other.p;
        let lo = self.l.abs_diff(other.l);
        (lo..=self.l + other.l).map(|l| Irrep::new(l, p)).collect()
    }

    /// Whether `out` appears in `self ⊗ other`.
    pub fn couples_to(self, other: Irrep, out: Irrep) -> bool {
        self.l.abs_diff(other.l) <= out.l && out.l <= self.l + other.l && self.p * other.p == out.p
    }
}

// even before odd at equal l
impl Ord for Irrep {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let key = |ir: &Irrep| (ir.l, ir.p == Parity::Odd);
        key(self).cmp(&key(other))
    }
}

impl PartialOrd for Irrep {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Irrep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.l, self.p.letter())
    }
}

impl FromStr for Irrep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let irreps: Irreps = s.parse()?;
        match irreps.0.as_slice() {
            [MulIrrep { mul: 1, ir }] => Ok(*ir),
            _ => Err(Error::parse(0, format!("expected a single irrep, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MulIrrep {
    pub mul: usize,
    pub ir: Irrep,
}

impl MulIrrep {
    pub fn new(mul: usize, ir: Irrep) -> Self {
        MulIrrep { mul, ir }
    }

    pub fn dim(&self) -> usize {
        self.mul * self.ir.dim()
    }
}

impl fmt::Display for MulIrrep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.mul, self.ir)
    }
}

/// Ordered direct sum of irreps with multiplicities.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Irreps(pub Vec<MulIrrep>);

impl Irreps {
    pub fn new(entries: Vec<MulIrrep>) -> Self {
        Irreps(entries)
    }

    pub fn empty() -> Self {
        Irreps(Vec::new())
    }

    pub fn single(mul: usize, ir: Irrep) -> Self {
        Irreps(vec![MulIrrep::new(mul, ir)])
    }

    /// `1x0e + 1x1o + ... ` up to `lmax`, parity `(-1)^l`.
    pub fn spherical_harmonics(lmax: u32) -> Self {
        Irreps(
            (0..=lmax)
                .map(|l| MulIrrep::new(1, Irrep::spherical_harmonic(l)))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.0.iter().map(MulIrrep::dim).sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total number of irrep copies, `Σ mul`.
    pub fn num_irreps(&self) -> usize {
        self.0.iter().map(|m| m.mul).sum()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MulIrrep> {
        self.0.iter()
    }

    /// Start offset of every entry in the flat data layout.
    pub fn offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.0.len());
        let mut acc = 0;
        for m in &self.0 {
            offsets.push(acc);
            acc += m.dim();
        }
        offsets
    }

    pub fn lmax(&self) -> Option<u32> {
        self.0.iter().map(|m| m.ir.l).max()
    }

    /// Sorted by irrep with equal neighbours merged. Only used where layout
    /// does not matter (comparisons, summaries).
    pub fn simplified(&self) -> Irreps {
        let mut entries: Vec<MulIrrep> = self.0.iter().copied().filter(|m| m.mul > 0).collect();
        entries.sort_by_key(|m| m.ir);
        let mut out: Vec<MulIrrep> = Vec::new();
        for m in entries {
            match out.last_mut() {
                Some(last) if last.ir == m.ir => last.mul += m.mul,
                _ => out.push(m),
            }
        }
        Irreps(out)
    }
}

impl<'a> IntoIterator for &'a Irreps {
    type Item = &'a MulIrrep;
    type IntoIter = std::slice::Iter<'a, MulIrrep>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for Irreps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

struct Lexer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn uint(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.unexpected("expected an integer"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::parse(start, "integer out of range"))
    }

    fn unexpected(&self, what: &str) -> Error {
        match self.peek() {
            Some(c) => Error::parse(self.pos, format!("{what}, found `{}`", c as char)),
            None => Error::parse(self.pos, format!("{what}, found end of input")),
        }
    }

    fn term(&mut self) -> Result<MulIrrep> {
        let first = self.uint()?;
        self.skip_ws();
        let (mul, l) = if self.peek() == Some(b'x') {
            self.pos += 1;
            (first, self.uint()?)
        } else {
            (1, first)
        };
        self.skip_ws();
        let p = match self.peek() {
            Some(b'e') => Parity::Even,
            Some(b'o') => Parity::Odd,
            _ => return Err(self.unexpected("expected parity `e` or `o`")),
        };
        self.pos += 1;
        let l = u32::try_from(l).map_err(|_| Error::parse(self.pos, "l out of range"))?;
        Ok(MulIrrep::new(mul, Irrep::new(l, p)))
    }
}

impl FromStr for Irreps {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lex = Lexer {
            bytes: s.as_bytes(),
            pos: 0,
        };
        lex.skip_ws();
        if lex.peek().is_none() {
            return Err(Error::parse(0, "empty irreps string"));
        }
        let mut entries = vec![lex.term()?];
        loop {
            lex.skip_ws();
            match lex.peek() {
                None => break,
                Some(b'+') => {
                    lex.pos += 1;
                    entries.push(lex.term()?);
                }
                Some(_) => return Err(lex.unexpected("expected `+`")),
            }
        }
        Ok(Irreps(entries))
    }
}

impl Serialize for Irreps {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Irreps {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ir(s: &str) -> Irrep {
        s.parse().unwrap()
    }

    #[test]
    fn parses_mixed_example() {
        let x: Irreps = "1x0e + 1x2e".parse().unwrap();
        assert_eq!(
            x.0,
            vec![
                MulIrrep::new(1, Irrep::new(0, Parity::Even)),
                MulIrrep::new(1, Irrep::new(2, Parity::Even))
            ]
        );
        assert_eq!(x.dim(), 6);
    }

    #[test]
    fn implicit_multiplicity() {
        let x: Irreps = "1o".parse().unwrap();
        assert_eq!(x.0, vec![MulIrrep::new(1, Irrep::new(1, Parity::Odd))]);
    }

    #[test]
    fn dims() {
        assert_eq!("64x0e + 24x1e".parse::<Irreps>().unwrap().dim(), 136);
        assert_eq!("0e".parse::<Irreps>().unwrap().dim(), 1);
        assert_eq!("1o+1o".parse::<Irreps>().unwrap().dim(), 6);
        assert_eq!("0x3o + 2x1e".parse::<Irreps>().unwrap().dim(), 6);
    }

    #[test]
    fn keeps_order_and_duplicates() {
        let x: Irreps = " 2e + 1o +1o ".parse().unwrap();
        assert_eq!(x.to_string(), "1x2e+1x1o+1x1o");
        assert_eq!(x.simplified().to_string(), "2x1o+1x2e");
    }

    #[test]
    fn whitespace_between_tokens() {
        let x: Irreps = "3 x 2 o".parse().unwrap();
        assert_eq!(x.to_string(), "3x2o");
    }

    #[test]
    fn parse_errors_report_position() {
        assert!(matches!("".parse::<Irreps>(), Err(Error::Parse { pos: 0, .. })));
        assert!(matches!("   ".parse::<Irreps>(), Err(Error::Parse { pos: 0, .. })));
        assert!(matches!("1x2a".parse::<Irreps>(), Err(Error::Parse { pos: 3, .. })));
        assert!(matches!("1e + ".parse::<Irreps>(), Err(Error::Parse { pos: 5, .. })));
        assert!(matches!("1e 2o".parse::<Irreps>(), Err(Error::Parse { pos: 3, .. })));
        assert!(matches!("xe".parse::<Irreps>(), Err(Error::Parse { pos: 0, .. })));
    }

    #[test]
    fn selection_rule_examples() {
        let names = |v: Vec<Irrep>| v.iter().map(|i| i.to_string()).collect::<Vec<_>>();
        assert_eq!(names(ir("1o").selection_rule(ir("1o"))), ["0e", "1e", "2e"]);
        assert_eq!(names(ir("0e").selection_rule(ir("1o"))), ["1o"]);
        assert_eq!(names(ir("2e").selection_rule(ir("1o"))), ["1o", "2o", "3o"]);
    }

    #[test]
    fn sh_irreps() {
        assert_eq!(Irreps::spherical_harmonics(0).to_string(), "1x0e");
        assert_eq!(Irreps::spherical_harmonics(3).to_string(), "1x0e+1x1o+1x2e+1x3o");
        for lmax in 0..10 {
            let n = (lmax + 1) as usize;
            assert_eq!(Irreps::spherical_harmonics(lmax).dim(), n * n);
        }
    }

    #[test]
    fn ordering_even_before_odd() {
        let mut v = vec![ir("1o"), ir("0o"), ir("1e"), ir("0e")];
        v.sort();
        assert_eq!(v, [ir("0e"), ir("0o"), ir("1e"), ir("1o")]);
    }

    fn arb_irrep() -> impl Strategy<Value = Irrep> {
        (0u32..12, any::<bool>()).prop_map(|(l, odd)| {
            Irrep::new(l, if odd { Parity::Odd } else { Parity::Even })
        })
    }

    fn arb_irreps() -> impl Strategy<Value = Irreps> {
        prop::collection::vec((0usize..20, arb_irrep()), 1..6)
            .prop_map(|v| Irreps(v.into_iter().map(|(m, ir)| MulIrrep::new(m, ir)).collect()))
    }

    proptest! {
        #[test]
        fn format_parse_round_trip(x in arb_irreps()) {
            let back: Irreps = x.to_string().parse().unwrap();
            prop_assert_eq!(back, x);
        }

        #[test]
        fn reformatting_is_idempotent(x in arb_irreps(), implicit in any::<bool>()) {
            // spell the terms loosely: spaces and dropped `1x`
            let loose = x.iter().map(|m| {
                if implicit && m.mul == 1 { format!(" {} {} ", m.ir.l, m.ir.p.letter()) }
                else { format!("{} x {}{}", m.mul, m.ir.l, m.ir.p.letter()) }
            }).collect::<Vec<_>>().join(" + ");
            let parsed: Irreps = loose.parse().unwrap();
            let again: Irreps = parsed.to_string().parse().unwrap();
            prop_assert_eq!(&again, &parsed);
            prop_assert_eq!(parsed, x);
        }

        #[test]
        fn selection_rule_symmetric_and_counted(a in arb_irrep(), b in arb_irrep()) {
            let ab = a.selection_rule(b);
            prop_assert_eq!(&ab, &b.selection_rule(a));
            prop_assert_eq!(ab.len() as u32, 2 * a.l.min(b.l) + 1);
            prop_assert!(ab.windows(2).all(|w| w[0].l < w[1].l));
            for c in &ab {
                prop_assert!(a.couples_to(b, *c));
            }
        }
    }
}
